"""1D finite-volume solver for the nonlocal drift-diffusion law of the
particle density.

The density evolves by

    d rho / dt = d/dx ( lam (x - v_alpha(rho, x)) rho )
               + d2/dx2 ( (sigma^2/2) (|x - v_alpha(rho, x)| + kappa)^2 rho )

on a truncated interval with reflecting (zero-flux) walls.  Advection is
upwinded at cell interfaces, diffusion uses centered second differences of
the product D*rho, and the nonlocal coefficient v_alpha is recomputed every
step from the current density, which makes a step O(M^2).  Negative cells
produced by the explicit update are clipped and the clip magnitude is
accumulated so downstream checks can reject a run that leaned on it.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field as dc_field, replace

import numpy as np
from scipy.special import ndtr

from .consensus import StandardGibbs, _strip_shift, _weight_rows
from .dynamics import Explicit, GaussianIID, UniformBox
from .objectives import ObjectiveSpec, dist_to_set_batch, evaluate_batch
from .parallel import map_row_blocks, worker_count

__all__ = [
    "Grid1D",
    "DensityField",
    "FPParams",
    "init_density",
    "v_alpha_grid",
    "cfl_dt",
    "fp_step",
    "FPTrajectory",
    "run_fp",
]


@dataclass(frozen=True)
class Grid1D:
    x_min: float
    x_max: float
    cells: int

    def __post_init__(self):
        if not self.x_min < self.x_max:
            raise ValueError("x_min must be below x_max")
        if self.cells < 16:
            raise ValueError("need at least 16 cells")

    @property
    def dx(self) -> float:
        return (self.x_max - self.x_min) / self.cells

    @property
    def centers(self) -> np.ndarray:
        return self.x_min + (np.arange(self.cells) + 0.5) * self.dx

    @property
    def edges(self) -> np.ndarray:
        return self.x_min + np.arange(self.cells + 1) * self.dx


@dataclass
class DensityField:
    grid: Grid1D
    rho: np.ndarray
    time: float = 0.0
    clipped: float = 0.0

    def __post_init__(self):
        self.rho = np.asarray(self.rho, dtype=float)
        if self.rho.shape != (self.grid.cells,):
            raise ValueError("rho must hold one cell average per grid cell")
        if np.any(self.rho < 0):
            raise ValueError("cell averages must be nonnegative")
        if abs(self.mass() - 1.0) > 1e-9:
            raise ValueError("density mass must equal 1 within 1e-9")

    def mass(self) -> float:
        return float(self.rho.sum() * self.grid.dx)

    def mean(self) -> float:
        return float(np.sum(self.grid.centers * self.rho) * self.grid.dx)

    def boundary_mass(self) -> float:
        return float((self.rho[0] + self.rho[-1]) * self.grid.dx)


@dataclass(frozen=True)
class FPParams:
    lam: float
    sigma: float
    kappa: float

    def __post_init__(self):
        if self.lam < 0 or self.sigma < 0 or self.kappa < 0:
            raise ValueError("lam, sigma, kappa must be nonnegative")


def init_density(grid: Grid1D, spec) -> DensityField:
    """Cell-averaged density for a 1D Gaussian or uniform initial law,
    renormalized exactly to unit mass after discretization."""
    edges = grid.edges
    if isinstance(spec, GaussianIID):
        if spec.dim != 1:
            raise ValueError("mean-field solver is one-dimensional")
        mu = float(spec.mean[0])
        std = float(np.sqrt(spec.variance))
        if mu - 6 * std < grid.x_min or mu + 6 * std > grid.x_max:
            warnings.warn(
                "grid does not cover six standard deviations of the initial density",
                stacklevel=2,
            )
        cdf = ndtr((edges - mu) / std)
        rho = np.diff(cdf) / grid.dx
    elif isinstance(spec, UniformBox):
        if spec.dim != 1:
            raise ValueError("mean-field solver is one-dimensional")
        lo, hi = float(spec.lower[0]), float(spec.upper[0])
        if lo < grid.x_min or hi > grid.x_max:
            warnings.warn("grid does not cover the uniform support", stacklevel=2)
        overlap = np.clip(np.minimum(edges[1:], hi) - np.maximum(edges[:-1], lo), 0.0, None)
        rho = overlap / grid.dx / (hi - lo)
    elif isinstance(spec, Explicit):
        raise ValueError("explicit particle lists have no density counterpart")
    else:
        raise TypeError(f"unknown init spec {type(spec)}")
    total = rho.sum() * grid.dx
    if total <= 0.0:
        raise ValueError("initial density has no mass on the grid")
    return DensityField(grid, rho / total)


def v_alpha_grid(field: DensityField, kernel, alpha: float, obj: ObjectiveSpec, workers=None) -> np.ndarray:
    """Consensus coordinate v_alpha(rho, x_j) at every cell center by
    midpoint quadrature against the cell averages."""
    x = field.grid.centers
    pos = x[:, None]
    f_vals = evaluate_batch(obj, pos)
    occupied = field.rho > 0.0
    if not occupied.any():
        raise ValueError("all weights vanish; cannot form a consensus point")
    f_min = float(np.min(f_vals[occupied]))

    if isinstance(_strip_shift(kernel), StandardGibbs):
        num, den = _weight_rows(pos, f_vals, kernel, alpha, pos[:1], f_vals[:1], f_min, weights=field.rho)
        return np.full(field.grid.cells, float(num[0, 0] / den[0]))

    out = np.empty(field.grid.cells)

    def fill(start: int, stop: int) -> None:
        num, den = _weight_rows(
            pos, f_vals, kernel, alpha, pos[start:stop], f_vals[start:stop], f_min, weights=field.rho
        )
        out[start:stop] = num[:, 0] / den

    map_row_blocks(fill, field.grid.cells, worker_count(workers))
    return out


def _coefficients(field: DensityField, params: FPParams, v_alpha: np.ndarray):
    x = field.grid.centers
    drift = params.lam * (x - v_alpha)
    diff = 0.5 * params.sigma**2 * (np.abs(x - v_alpha) + params.kappa) ** 2
    return drift, diff


def _stable_dt(dx: float, drift: np.ndarray, diff: np.ndarray) -> float:
    adv_max = float(np.max(np.abs(drift)))
    diff_max = float(np.max(diff))
    adv_dt = dx / adv_max if adv_max > 0 else np.inf
    diff_dt = dx * dx / (2.0 * diff_max) if diff_max > 0 else np.inf
    return 0.4 * min(adv_dt, diff_dt)


def cfl_dt(field: DensityField, kernel, alpha: float, params: FPParams, obj: ObjectiveSpec | None = None, v_alpha=None) -> float:
    """Explicit-stability step bound 0.4 min(dx/max|drift|, dx^2/(2 max D));
    infinite when both coefficients vanish."""
    if v_alpha is None:
        if obj is None:
            raise ValueError("either obj or a precomputed v_alpha is required")
        v_alpha = v_alpha_grid(field, kernel, alpha, obj)
    drift, diff = _coefficients(field, params, np.asarray(v_alpha, dtype=float))
    return _stable_dt(field.grid.dx, drift, diff)


def _fp_update(rho: np.ndarray, drift: np.ndarray, diff: np.ndarray, dx: float, dt: float) -> np.ndarray:
    """One conservative explicit update with frozen cell-centered
    coefficients; returns the raw (pre-clip) new cell averages.

    Advection in flux form with transport velocity -drift: interface
    velocities average the two neighbors, upwinding picks the donor cell,
    and a zero velocity yields zero flux, which keeps even data even.
    Diffusion applies centered second differences to Q = diff*rho with
    reflected ghost values, so both walls carry zero total flux.
    """
    a_half = -0.5 * (drift[:-1] + drift[1:])
    flux = np.maximum(a_half, 0.0) * rho[:-1] + np.minimum(a_half, 0.0) * rho[1:]
    transport = np.zeros_like(rho)
    transport[:-1] -= flux
    transport[1:] += flux
    transport /= dx

    q = diff * rho
    lap = np.empty_like(rho)
    lap[1:-1] = q[2:] - 2.0 * q[1:-1] + q[:-2]
    lap[0] = q[1] - q[0]
    lap[-1] = q[-2] - q[-1]
    lap /= dx * dx

    return rho + dt * (transport + lap)


def fp_step(
    field: DensityField,
    kernel,
    alpha: float,
    params: FPParams,
    dt: float,
    obj: ObjectiveSpec | None = None,
    v_alpha=None,
    workers=None,
) -> DensityField:
    """Advance the density by one explicit step of size dt.

    v_alpha may be supplied to freeze the nonlocal coefficient (a constant
    array equal to the cell centers turns the step into pure diffusion with
    D = (sigma kappa)^2 / 2); otherwise it is recomputed from the field.
    """
    if not (dt > 0):
        raise ValueError("dt must be positive")
    if v_alpha is None:
        if obj is None:
            raise ValueError("either obj or a precomputed v_alpha is required")
        v_alpha = v_alpha_grid(field, kernel, alpha, obj, workers=workers)
    v_alpha = np.asarray(v_alpha, dtype=float)
    drift, diff = _coefficients(field, params, v_alpha)
    limit = _stable_dt(field.grid.dx, drift, diff)
    if dt > limit * (1.0 + 1e-9):
        raise ValueError(f"dt={dt:g} exceeds the stability limit {limit:g}")

    rho = _fp_update(field.rho, drift, diff, field.grid.dx, dt)
    negative = rho < 0.0
    clip_mag = float(-rho[negative].sum() * field.grid.dx) if negative.any() else 0.0
    if negative.any():
        rho = np.maximum(rho, 0.0)
    total = rho.sum() * field.grid.dx
    if total <= 0.0:
        raise ValueError("density collapsed to zero mass")
    return DensityField(field.grid, rho / total, field.time + dt, field.clipped + clip_mag)


@dataclass
class FPTrajectory:
    times: np.ndarray
    v_t: np.ndarray
    clipped: np.ndarray
    field: DensityField
    n_steps: int
    boundary_flag: bool = False
    unreliable: bool = False
    records: list = dc_field(default_factory=list)


def run_fp(
    grid: Grid1D,
    init,
    kernel,
    alpha: float,
    params: FPParams,
    t_end: float,
    recorder=None,
    obj: ObjectiveSpec | None = None,
    workers=None,
    max_steps: int = 1_000_000,
) -> FPTrajectory:
    """Advance to t_end with the step size recomputed from the stability
    bound each iteration.  Records the quadrature concentration functional
    integral dist(x, minimizer set)^2 rho dx and the cumulative clipped
    mass; flags the run when mass reaches the walls (> 1e-6 in the two
    boundary cells) or when total clipping exceeds 1e-3.
    """
    if obj is None:
        raise ValueError("objective required to evaluate the consensus coefficient")
    field = init if isinstance(init, DensityField) else init_density(grid, init)
    if field.grid != grid:
        raise ValueError("initial field lives on a different grid")

    dist_sq = None
    if obj.minimizers is not None:
        dist_sq = dist_to_set_batch(obj.minimizers, grid.centers[:, None]) ** 2

    def functional(f: DensityField) -> float:
        if dist_sq is None:
            return float("nan")
        return float(np.sum(dist_sq * f.rho) * grid.dx)

    times = [field.time]
    v_t = [functional(field)]
    clipped = [field.clipped]
    boundary_flag = field.boundary_mass() > 1e-6
    if recorder is not None:
        recorder(0, field)

    n = 0
    while field.time < t_end - 1e-13:
        if n >= max_steps:
            raise ValueError("step budget exhausted before reaching t_end")
        va = v_alpha_grid(field, kernel, alpha, obj, workers=workers)
        limit = cfl_dt(field, kernel, alpha, params, v_alpha=va)
        dt = min(limit, t_end - field.time)
        if not np.isfinite(dt):
            dt = t_end - field.time
        field = fp_step(field, kernel, alpha, params, dt, v_alpha=va, workers=workers)
        n += 1
        times.append(field.time)
        v_t.append(functional(field))
        clipped.append(field.clipped)
        boundary_flag = boundary_flag or field.boundary_mass() > 1e-6
        if recorder is not None:
            recorder(n, field)

    return FPTrajectory(
        times=np.asarray(times),
        v_t=np.asarray(v_t),
        clipped=np.asarray(clipped),
        field=field,
        n_steps=n,
        boundary_flag=boundary_flag,
        unreliable=field.clipped > 1e-3,
    )
