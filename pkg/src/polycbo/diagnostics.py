"""Quantitative checks: concentration functional, mass bounds, softmax
localization bounds, gap regression, rate fitting, and 1D Wasserstein.

The localization checks evaluate explicit inequalities of the form
``||v_alpha(rho) - v*|| <= radius term + decay term`` where every quantity
on the right is computed from the same discrete measure used for v_alpha.
Whenever the stated growth precondition holds at every sample point, the
inequality is a theorem, so a failed check indicates an implementation bug
rather than statistical noise.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .consensus import Ensemble, consensus_all
from .objectives import (
    Ball,
    Box,
    MinimizerSet,
    ObjectiveSpec,
    Singleton,
    as_point,
    dist_to_set_batch,
    evaluate_batch,
    nearest_minimizer_batch,
)

__all__ = [
    "v_functional",
    "phi_test",
    "minimizer_anchors",
    "ball_mass_at_anchors",
    "ball_mass_lower",
    "LaplaceCheckInput",
    "LaplaceReport",
    "laplace_bound_check",
    "TwoRegionReport",
    "two_region_laplace_check",
    "GapRegression",
    "consensus_gap_stats",
    "RateFit",
    "fit_exponential_rate",
    "wasserstein1_1d",
    "V0Estimate",
    "estimate_v0",
    "exponent_gap_slack",
    "GapCheckReport",
    "check_exponent_gap",
]


def _positions_of(ens) -> np.ndarray:
    if isinstance(ens, Ensemble):
        return ens.positions
    pos = np.asarray(ens, dtype=float)
    return pos[:, None] if pos.ndim == 1 else pos


def v_functional(ens, mset: MinimizerSet) -> float:
    """Mean squared distance of the particles to the minimizer set."""
    pos = _positions_of(ens)
    return float(np.mean(dist_to_set_batch(mset, pos) ** 2))


def _phi_radial(s: np.ndarray, tau: int) -> np.ndarray:
    """Bump profile on normalized radii s = ||v||/r, clamped to s <= 1."""
    out = 1.0 + (tau - 1.0) * s**tau - tau * s ** (tau - 1)
    return np.where(s <= 1.0, out, 0.0)


def _check_tau(tau) -> int:
    if tau != int(tau) or int(tau) < 3:
        raise ValueError("tau must be an integer >= 3")
    return int(tau)


def phi_test(v, r: float, tau: int):
    """C^1 bump: 1 + (tau-1)||v/r||^tau - tau||v/r||^(tau-1) inside the ball
    of radius r, zero outside; values lie in [0, 1]."""
    tau = _check_tau(tau)
    if not (r > 0):
        raise ValueError("r must be positive")
    v = np.asarray(v, dtype=float)
    batch = v.ndim == 2
    pts = v if batch else np.atleast_1d(v)[None, :]
    s = np.sqrt(np.sum(pts * pts, axis=1)) / r
    out = _phi_radial(s, tau)
    return out if batch else float(out[0])


def _component_boundary(comp, density: int, rng) -> np.ndarray:
    """Deterministic boundary sample of one component."""
    if isinstance(comp, Singleton):
        return comp.point[None, :]
    d = comp.dim
    if isinstance(comp, Ball):
        if d == 1:
            offsets = np.array([[-1.0], [1.0]])
        elif d == 2:
            ang = 2.0 * np.pi * np.arange(density) / max(density, 1)
            offsets = np.stack([np.cos(ang), np.sin(ang)], axis=1)
        else:
            raw = rng.standard_normal((density, d))
            offsets = raw / np.linalg.norm(raw, axis=1, keepdims=True)
        return comp.center + comp.radius * offsets
    if isinstance(comp, Box):
        if d == 1:
            return np.array([[comp.lower[0]], [comp.upper[0]]])
        corners = np.stack(
            [
                np.where(bits, comp.upper, comp.lower)
                for bits in np.ndindex(*([2] * d))
            ]
        )
        face_pts = comp.lower + (comp.upper - comp.lower) * rng.random((density, d))
        axis = rng.integers(0, d, size=density)
        side = rng.integers(0, 2, size=density)
        for i in range(density):
            face_pts[i, axis[i]] = (comp.upper if side[i] else comp.lower)[axis[i]]
        return np.vstack([corners, face_pts])
    raise TypeError(f"unknown component {type(comp)}")


def minimizer_anchors(mset: MinimizerSet, density: int) -> np.ndarray:
    """Anchor lattice over the set: component centers plus boundary samples.

    The boundary sample is deterministic for given inputs (fixed-seed
    directions in dimensions without a closed-form lattice).
    """
    rng = np.random.default_rng(0xB0)
    parts = [mset.anchors()]
    for comp in mset.components:
        parts.append(_component_boundary(comp, density, rng))
    return np.vstack(parts)


def ball_mass_at_anchors(positions, anchors: np.ndarray, r: float, tau: int) -> float:
    """min over anchors w of the mean bump mass (1/N) sum_i phi((V_i - w)/r)."""
    pos = _positions_of(positions)
    tau = _check_tau(tau)
    best = np.inf
    for w in anchors:
        delta = pos - w
        s = np.sqrt(np.sum(delta * delta, axis=1)) / r
        best = min(best, float(np.mean(_phi_radial(s, tau))))
    return best


def ball_mass_lower(ens, mset: MinimizerSet, r: float, tau: int, anchor_density: int = 16) -> float:
    """Discretized surrogate for the infimum over the minimizer set of the
    bump mass near each of its points; conservative as anchors refine."""
    return ball_mass_at_anchors(ens, minimizer_anchors(mset, anchor_density), r, tau)


# ---------------------------------------------------------------------------
# softmax localization bounds


def _gibbs_point(points: np.ndarray, weights: np.ndarray, g_vals: np.ndarray, alpha: float) -> np.ndarray:
    """Stabilized weighted softmin average of points under exponent g."""
    a = np.where(weights > 0.0, g_vals, np.inf)
    m = a.min()
    if not np.isfinite(m):
        raise ValueError("all weights vanish")
    z = np.exp(-alpha * (a - m))
    z = np.where(np.isfinite(z), z, 0.0) * weights
    den = z.sum()
    return (z[:, None] * points).sum(axis=0) / den


@dataclass
class LaplaceCheckInput:
    points: np.ndarray
    weights: np.ndarray
    g: object
    v_star: np.ndarray
    alpha: float
    r: float
    q: float
    eta: float
    nu: float
    beta: float
    g_inf: float | None = None
    r0: float | None = None

    def __post_init__(self):
        self.points = np.asarray(self.points, dtype=float)
        if self.points.ndim == 1:
            self.points = self.points[:, None]
        self.weights = np.asarray(self.weights, dtype=float)
        self.v_star = as_point(self.v_star)
        if np.any(self.weights < 0) or abs(self.weights.sum() - 1.0) > 1e-12:
            raise ValueError("weights must be nonnegative and sum to 1 within 1e-12")
        if not (self.r > 0):
            raise ValueError("r must be positive")
        if not (self.q > self.beta):
            raise ValueError("requires q > beta")
        if (self.g_inf is None) != (self.r0 is None):
            raise ValueError("two-scale mode needs both g_inf and r0")


@dataclass
class LaplaceReport:
    lhs: float
    rhs: float
    slack: float
    passed: bool | None
    vacuous: bool
    reason: str = ""


def _growth_tol(x: np.ndarray) -> np.ndarray:
    return 1e-12 * (1.0 + np.abs(x))


def laplace_bound_check(inp: LaplaceCheckInput) -> LaplaceReport:
    """Evaluate the localization bound

        ||v_alpha(rho) - v*|| <= (q + g_r)^nu / eta
                                 + e^(-alpha(q-beta)) / rho(B_r(v*)) * E||v - v*||

    with every right-hand quantity empirical over the given samples.  The
    growth precondition g(v) - g(v*) >= (eta ||v - v*||)^(1/nu) - beta is
    verified at the samples first; when it fails the check is vacuous.
    """
    pts, wts = inp.points, inp.weights
    dists = np.linalg.norm(pts - inp.v_star, axis=1)
    g_vals = np.asarray(inp.g(pts), dtype=float)
    g_star = float(np.asarray(inp.g(inp.v_star[None, :]), dtype=float)[0])
    rel = g_vals - g_star

    growth_floor = (inp.eta * dists) ** (1.0 / inp.nu) - inp.beta
    if inp.r0 is not None:
        if inp.r > inp.r0:
            return LaplaceReport(np.nan, np.nan, np.nan, None, True, "requires r <= r0")
        near = dists <= inp.r0
        grown = rel[near] + _growth_tol(growth_floor[near]) >= growth_floor[near]
        outside_ok = rel[~near] > inp.g_inf - _growth_tol(np.full(np.sum(~near), inp.g_inf))
        if not (grown.all() and outside_ok.all()):
            return LaplaceReport(np.nan, np.nan, np.nan, None, True, "growth precondition fails on samples")
    else:
        grown = rel + _growth_tol(growth_floor) >= growth_floor
        if not grown.all():
            return LaplaceReport(np.nan, np.nan, np.nan, None, True, "growth precondition fails on samples")

    in_ball = (dists <= inp.r) & (wts > 0.0)
    mass = float(wts[in_ball].sum())
    if mass <= 0.0:
        raise ValueError("bound degenerate: rho(B_r(v*)) = 0")
    g_r = float(np.max(rel[in_ball]))  # empirical sup over the charged ball
    if inp.r0 is not None and inp.q - inp.beta + g_r > inp.g_inf + 1e-12:
        return LaplaceReport(np.nan, np.nan, np.nan, None, True, "requires q - beta + g_r <= g_inf")
    if inp.q + g_r <= 0:
        return LaplaceReport(np.nan, np.nan, np.nan, None, True, "requires q + g_r > 0")

    v_alpha = _gibbs_point(pts, wts, inp.alpha * g_vals, 1.0)
    lhs = float(np.linalg.norm(v_alpha - inp.v_star))
    rhs = (inp.q + g_r) ** inp.nu / inp.eta + np.exp(
        -inp.alpha * (inp.q - inp.beta)
    ) / mass * float(np.sum(wts * dists))
    return LaplaceReport(lhs, rhs, rhs - lhs, lhs <= rhs + 1e-12, False)


@dataclass
class TwoRegionReport:
    lhs_1: float
    lhs_2: float
    rhs: float
    passed: bool | None
    vacuous: bool
    reason: str = ""


def two_region_laplace_check(
    samples,
    g,
    v1_star,
    v2_star,
    zones,
    alpha: float,
    r: float,
    q: float,
    eta: float,
    nu: float,
    beta: float,
    tau: int = 3,
    weights=None,
) -> TwoRegionReport:
    """Two-anchor variant: the plane splits into zones 1 and 2 with one
    reference point each, and both distances ||v_alpha - v_i*|| are bounded
    by a single right-hand side built from the worse of the two anchors.

    zones is either an array of labels in {1, 2} per sample or a callable
    mapping the sample array to such labels.
    """
    pts = np.asarray(samples, dtype=float)
    if pts.ndim == 1:
        pts = pts[:, None]
    n = len(pts)
    wts = np.full(n, 1.0 / n) if weights is None else np.asarray(weights, dtype=float)
    if np.any(wts < 0) or abs(wts.sum() - 1.0) > 1e-12:
        raise ValueError("weights must be nonnegative and sum to 1 within 1e-12")
    if not (q > beta):
        raise ValueError("requires q > beta")
    tau = _check_tau(tau)
    v1 = as_point(v1_star)
    v2 = as_point(v2_star)
    labels = np.asarray(zones(pts) if callable(zones) else zones)
    if not np.all(np.isin(labels, (1, 2))):
        raise ValueError("zone labels must be 1 or 2")

    g_vals = np.asarray(g(pts), dtype=float)
    anchors = (v1, v2)
    g_anchor = [float(np.asarray(g(a[None, :]), dtype=float)[0]) for a in anchors]

    # growth within each zone, measured from that zone's own anchor
    for i, (a, ga) in enumerate(zip(anchors, g_anchor), start=1):
        member = labels == i
        if not member.any():
            continue
        d = np.linalg.norm(pts[member] - a, axis=1)
        floor = (eta * d) ** (1.0 / nu) - beta
        if not np.all(g_vals[member] - ga + _growth_tol(floor) >= floor):
            return TwoRegionReport(np.nan, np.nan, np.nan, None, True, f"growth precondition fails in zone {i}")

    g_r = -np.inf
    for a, ga in zip(anchors, g_anchor):
        d = np.linalg.norm(pts - a, axis=1)
        in_ball = d <= r
        if in_ball.any():
            g_r = max(g_r, float(np.max(g_vals[in_ball] - ga)))
    if not np.isfinite(g_r):
        raise ValueError("bound degenerate: no sample within r of either anchor")

    # an anchor whose zone carries no sample mass contributes nothing to the
    # decay term, so only anchors of occupied zones enter the infimum
    den = np.inf
    for i, a in enumerate(anchors, start=1):
        if float(wts[labels == i].sum()) <= 0.0:
            continue
        delta = pts - a
        s = np.sqrt(np.sum(delta * delta, axis=1)) / r
        den = min(den, float(np.sum(wts * _phi_radial(s, tau))))
    if not np.isfinite(den) or den <= 0.0:
        raise ValueError("bound degenerate: bump mass vanishes at an anchor")

    sep = float(np.linalg.norm(v1 - v2))
    decay = np.exp(-alpha * (q - beta))
    travel = max(
        float(np.sum(wts * np.linalg.norm(pts - v1, axis=1))),
        float(np.sum(wts * np.linalg.norm(pts - v2, axis=1))),
    )
    if q + g_r <= 0:
        return TwoRegionReport(np.nan, np.nan, np.nan, None, True, "requires q + g_r > 0")
    rhs = sep + 2.0 * (q + g_r) ** nu / eta + decay / den * travel + sep * decay / den

    v_alpha = _gibbs_point(pts, wts, alpha * g_vals, 1.0)
    lhs_1 = float(np.linalg.norm(v_alpha - v1))
    lhs_2 = float(np.linalg.norm(v_alpha - v2))
    passed = lhs_1 <= rhs + 1e-12 and lhs_2 <= rhs + 1e-12
    return TwoRegionReport(lhs_1, lhs_2, rhs, passed, False)


# ---------------------------------------------------------------------------
# regression and rate fitting


@dataclass
class GapRegression:
    slope: float
    intercept: float
    r2: float
    max_residual: float
    degenerate: bool = False


def consensus_gap_stats(ens: Ensemble, kernel, alpha: float, mset: MinimizerSet) -> GapRegression:
    """Least-squares fit of y = ||c_i - V*(V_i)||^2 against x = dist(V_i)^2
    over the ensemble, where c_i is each particle's consensus point."""
    if ens.n < 3:
        raise ValueError("insufficient points for regression")
    c = consensus_all(ens, kernel, alpha)
    proj, _ = nearest_minimizer_batch(mset, ens.positions)
    x = np.sum((ens.positions - proj) ** 2, axis=1)
    y = np.sum((c - proj) ** 2, axis=1)

    xm, ym = x.mean(), y.mean()
    sxx = float(np.sum((x - xm) ** 2))
    if sxx <= 1e-20 * ens.n * (1.0 + xm * xm):
        return GapRegression(0.0, 0.0, 0.0, float(np.max(np.abs(y))), degenerate=True)
    slope = float(np.sum((x - xm) * (y - ym)) / sxx)
    intercept = float(ym - slope * xm)
    resid = y - slope * x - intercept
    ss_res = float(np.sum(resid**2))
    ss_tot = float(np.sum((y - ym) ** 2))
    r2 = 1.0 if ss_tot == 0.0 and ss_res <= 1e-24 else (1.0 - ss_res / ss_tot if ss_tot > 0 else 0.0)
    return GapRegression(slope, intercept, r2, float(np.max(resid)))


@dataclass
class RateFit:
    rate: float
    r2: float


def fit_exponential_rate(times, values, window=None) -> RateFit:
    """Fit values ~ C exp(-rate * t) by least squares on log values.

    window, when given, is a (t_lo, t_hi) interval selecting the fitted
    points; values must be strictly positive there.
    """
    t = np.asarray(times, dtype=float)
    v = np.asarray(values, dtype=float)
    if t.shape != v.shape:
        raise ValueError("times and values must have matching shapes")
    if window is not None:
        lo, hi = window
        mask = (t >= lo) & (t <= hi)
        t, v = t[mask], v[mask]
    if t.size < 2:
        raise ValueError("need at least two points in the window")
    if np.any(v <= 0):
        raise ValueError("non-positive value in window")
    y = np.log(v)
    tm, ym = t.mean(), y.mean()
    stt = float(np.sum((t - tm) ** 2))
    if stt == 0.0:
        raise ValueError("times are all identical")
    slope = float(np.sum((t - tm) * (y - ym)) / stt)
    resid = y - (ym + slope * (t - tm))
    ss_res = float(np.sum(resid**2))
    ss_tot = float(np.sum((y - ym) ** 2))
    r2 = 1.0 if ss_tot == 0.0 and ss_res <= 1e-20 else (1.0 - ss_res / ss_tot if ss_tot > 0 else 0.0)
    return RateFit(-slope, r2)


def wasserstein1_1d(samples_sorted, cdf, grid) -> float:
    """Trapezoid integral of |F_emp - F_ref| over the grid.

    samples_sorted must be ascending; cdf is a callable on the grid or a
    precomputed array of reference CDF values.
    """
    s = np.asarray(samples_sorted, dtype=float)
    if np.any(np.diff(s) < 0):
        raise ValueError("samples must be sorted ascending")
    x = np.asarray(grid, dtype=float)
    f_emp = np.searchsorted(s, x, side="right") / len(s)
    f_ref = np.asarray(cdf(x) if callable(cdf) else cdf, dtype=float)
    return float(np.trapezoid(np.abs(f_emp - f_ref), x))


@dataclass
class V0Estimate:
    value: float
    t_star: float | None = None


def estimate_v0(ens: Ensemble, kernel, alpha: float, c_exp: float | None = None, eps: float | None = None) -> V0Estimate:
    """Mean squared distance of particles to their own consensus points, a
    proxy for the initial concentration functional; with (c_exp, eps) given
    also the implied horizon (2/c_exp) log(max(V0, 2 eps) / (2 eps))."""
    c = consensus_all(ens, kernel, alpha)
    value = float(np.mean(np.sum((ens.positions - c) ** 2, axis=1)))
    t_star = None
    if c_exp is not None and eps is not None:
        if not (c_exp > 0 and eps > 0):
            raise ValueError("c_exp and eps must be positive")
        t_star = 2.0 / c_exp * np.log(max(value, 2.0 * eps) / (2.0 * eps))
    return V0Estimate(value, t_star)


# ---------------------------------------------------------------------------
# exponent gap check


def exponent_gap_slack(kappa_scale: float, ell: float, p: float) -> float:
    """Slack radius 2 (2 kappa_scale / ell^2)^(1/(p-1)) of the exponent gap
    bound; undefined at p = 1."""
    if p == 1.0:
        raise ValueError(
            "growth exponent p = 1 is not supported: the slack exponent 1/(p-1) is undefined"
        )
    if not (1.0 < p <= 2.0):
        raise ValueError("p must lie in (1, 2]")
    return 2.0 * (2.0 * kappa_scale / ell**2) ** (1.0 / (p - 1.0))


@dataclass
class GapCheckReport:
    n_pairs: int
    n_violations: int
    max_violation: float
    slack: float
    worst_pair: tuple


def check_exponent_gap(
    obj: ObjectiveSpec, kernel, n_pairs: int = 10_000, radius: float = 5.0, seed: int = 0
) -> GapCheckReport:
    """Random search for violations of the adaptive-kernel gap bound

        A(w, v) - A(V*(v), v) >= ||w - V*(v)||^2 - slack

    with slack = exponent_gap_slack(kappa_scale, ell, p).  The exponent
    difference cancels any constant shift of f, so it is computed directly
    from f(w) - f(V*(v))."""
    if obj.minimizers is None:
        raise ValueError("gap check requires minimizer set")
    from .consensus import AdaptiveProduct, _strip_shift

    base = _strip_shift(kernel)
    if not isinstance(base, AdaptiveProduct):
        raise TypeError("gap check applies to the adaptive product kernel")
    slack = exponent_gap_slack(base.kappa_scale, obj.ell, obj.p)

    rng = np.random.default_rng(seed)
    lo, hi = obj.minimizers.bounding_box()
    span_lo, span_hi = lo - radius, hi + radius
    W = span_lo + (span_hi - span_lo) * rng.random((n_pairs, obj.dim))
    V = span_lo + (span_hi - span_lo) * rng.random((n_pairs, obj.dim))

    f_w = evaluate_batch(obj, W)
    f_v = evaluate_batch(obj, V)
    v_star, _ = nearest_minimizer_batch(obj.minimizers, V)
    f_star = evaluate_batch(obj, v_star)

    gap = (f_w - f_star) / base.kappa_scale * (f_v + base.theta) + np.sum(
        (V - W) ** 2, axis=1
    ) - np.sum((V - v_star) ** 2, axis=1)
    bound = np.sum((W - v_star) ** 2, axis=1) - slack
    viol = bound - gap
    n_bad = int(np.sum(viol > 1e-10))
    worst = int(np.argmax(viol))
    return GapCheckReport(
        n_pairs, n_bad, float(max(viol[worst], 0.0)), slack, (W[worst], V[worst])
    )
