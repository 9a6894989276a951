"""Objective catalog, minimizer-set geometry, and regularity checkers.

Objectives are scalar fields on R^d with a declared infimum f_min and growth
constants (ell, p, L).  The set of global minimizers is modeled as an ordered
union of convex compact components (singletons, balls, axis-aligned boxes),
each with an exact closed-form Euclidean projection.
"""

from __future__ import annotations

import threading
from dataclasses import dataclass, field

import numpy as np

__all__ = [
    "Singleton",
    "Ball",
    "Box",
    "MinimizerSet",
    "ObjectiveSpec",
    "EvalCounter",
    "NonFiniteValueError",
    "LowerCheckReport",
    "UpperCheckReport",
    "evaluate",
    "evaluate_batch",
    "project",
    "nearest_minimizer",
    "nearest_minimizer_batch",
    "dist_to_set",
    "dist_to_set_batch",
    "check_assumption_lower",
    "check_assumption_upper",
    "make_builtin",
    "BUILTIN_NAMES",
]


def as_point(v) -> np.ndarray:
    """Coerce scalars / sequences to a float64 1D point."""
    return np.atleast_1d(np.asarray(v, dtype=float))


def _as_batch(V, dim: int) -> np.ndarray:
    V = np.asarray(V, dtype=float)
    if V.ndim == 1:
        V = V[:, None] if dim == 1 else V[None, :]
    if V.shape[1] != dim:
        raise ValueError(f"points have dim {V.shape[1]}, expected {dim}")
    return V


# ---------------------------------------------------------------------------
# convex components


@dataclass(frozen=True)
class Singleton:
    point: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "point", as_point(self.point))
        if not np.all(np.isfinite(self.point)):
            raise ValueError("singleton point must be finite")

    @property
    def dim(self) -> int:
        return self.point.size

    def anchor(self) -> np.ndarray:
        return self.point

    def project_batch(self, V: np.ndarray) -> np.ndarray:
        return np.broadcast_to(self.point, V.shape).copy()

    def bounds(self):
        return self.point, self.point


@dataclass(frozen=True)
class Ball:
    center: np.ndarray
    radius: float

    def __post_init__(self):
        object.__setattr__(self, "center", as_point(self.center))
        object.__setattr__(self, "radius", float(self.radius))
        if not (self.radius > 0):
            raise ValueError("ball radius must be strictly positive")
        if not np.all(np.isfinite(self.center)):
            raise ValueError("ball center must be finite")

    @property
    def dim(self) -> int:
        return self.center.size

    def anchor(self) -> np.ndarray:
        return self.center

    def project_batch(self, V: np.ndarray) -> np.ndarray:
        delta = V - self.center
        norm = np.sqrt(np.sum(delta * delta, axis=1))
        # interior points project to themselves; norm 0 is interior.  The
        # boundary band of 1e-13 relative absorbs the rounding of a previous
        # projection, making re-projection an exact fixed point.
        scale = np.ones_like(norm)
        outside = norm > self.radius * (1.0 + 1e-13)
        scale[outside] = self.radius / norm[outside]
        return self.center + delta * scale[:, None]

    def bounds(self):
        return self.center - self.radius, self.center + self.radius


@dataclass(frozen=True)
class Box:
    lower: np.ndarray
    upper: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "lower", as_point(self.lower))
        object.__setattr__(self, "upper", as_point(self.upper))
        if self.lower.size != self.upper.size:
            raise ValueError("box bounds must have matching dims")
        if not np.all(self.lower <= self.upper):
            raise ValueError("box requires lower <= upper componentwise")
        if not (np.all(np.isfinite(self.lower)) and np.all(np.isfinite(self.upper))):
            raise ValueError("box bounds must be finite")

    @property
    def dim(self) -> int:
        return self.lower.size

    def anchor(self) -> np.ndarray:
        return 0.5 * (self.lower + self.upper)

    def project_batch(self, V: np.ndarray) -> np.ndarray:
        return np.clip(V, self.lower, self.upper)

    def bounds(self):
        return self.lower, self.upper


ConvexComponent = Singleton | Ball | Box


def project(c: ConvexComponent, v) -> np.ndarray:
    """Exact Euclidean projection of a single point onto the component."""
    v = as_point(v)
    return c.project_batch(v[None, :])[0]


def _farthest_between(a: ConvexComponent, b: ConvexComponent) -> float:
    """sup_{x in a, y in b} ||x - y||, closed form per component pair."""
    if isinstance(a, Ball):
        return _farthest_between(Singleton(a.center), b) + a.radius
    if isinstance(b, Ball):
        return _farthest_between(a, Singleton(b.center)) + b.radius
    if isinstance(a, Singleton) and isinstance(b, Singleton):
        return float(np.linalg.norm(a.point - b.point))
    if isinstance(a, Singleton) and isinstance(b, Box):
        per_axis = np.maximum(np.abs(a.point - b.lower), np.abs(a.point - b.upper))
        return float(np.sqrt(np.sum(per_axis**2)))
    if isinstance(a, Box) and isinstance(b, Singleton):
        return _farthest_between(b, a)
    if isinstance(a, Box) and isinstance(b, Box):
        per_axis = np.maximum(a.upper - b.lower, b.upper - a.lower)
        return float(np.sqrt(np.sum(per_axis**2)))
    raise TypeError(f"unsupported component pair {type(a)}, {type(b)}")


@dataclass(frozen=True)
class MinimizerSet:
    """Ordered union of convex compact components.

    The diameter is the exact sup of pairwise point distances over the union,
    computed in closed form (including each component against itself).
    """

    components: tuple
    diameter: float = field(init=False)

    def __post_init__(self):
        comps = tuple(self.components)
        if len(comps) < 1:
            raise ValueError("minimizer set needs at least one component")
        dims = {c.dim for c in comps}
        if len(dims) != 1:
            raise ValueError("all components must share one dimension")
        diam = 0.0
        for i, a in enumerate(comps):
            for b in comps[i:]:
                diam = max(diam, _farthest_between(a, b))
        object.__setattr__(self, "components", comps)
        object.__setattr__(self, "diameter", diam)

    @property
    def dim(self) -> int:
        return self.components[0].dim

    def anchors(self) -> np.ndarray:
        return np.stack([c.anchor() for c in self.components])

    def bounding_box(self):
        los, his = zip(*(c.bounds() for c in self.components))
        return np.min(np.stack(los), axis=0), np.max(np.stack(his), axis=0)


def nearest_minimizer_batch(mset: MinimizerSet, V) -> tuple[np.ndarray, np.ndarray]:
    """Projections onto the set and the index of the owning component.

    Ties between components at exactly equal distance go to the lowest index,
    so the map is deterministic.
    """
    V = _as_batch(V, mset.dim)
    best_pts = mset.components[0].project_batch(V)
    delta = V - best_pts
    best_d2 = np.sum(delta * delta, axis=1)
    best_idx = np.zeros(len(V), dtype=np.int64)
    for j, comp in enumerate(mset.components[1:], start=1):
        pts = comp.project_batch(V)
        delta = V - pts
        d2 = np.sum(delta * delta, axis=1)
        better = d2 < best_d2
        best_d2 = np.where(better, d2, best_d2)
        best_idx[better] = j
        best_pts[better] = pts[better]
    return best_pts, best_idx


def nearest_minimizer(mset: MinimizerSet, v) -> tuple[np.ndarray, int]:
    pts, idx = nearest_minimizer_batch(mset, as_point(v)[None, :])
    return pts[0], int(idx[0])


def dist_to_set_batch(mset: MinimizerSet, V) -> np.ndarray:
    V = _as_batch(V, mset.dim)
    pts, _ = nearest_minimizer_batch(mset, V)
    delta = V - pts
    return np.sqrt(np.sum(delta * delta, axis=1))


def dist_to_set(mset: MinimizerSet, v) -> float:
    return float(dist_to_set_batch(mset, as_point(v)[None, :])[0])


# ---------------------------------------------------------------------------
# objectives


class EvalCounter:
    """Thread-safe tally of objective evaluations."""

    __slots__ = ("_lock", "count")

    def __init__(self):
        self._lock = threading.Lock()
        self.count = 0

    def add(self, k: int):
        with self._lock:
            self.count += k

    def reset(self):
        with self._lock:
            self.count = 0


@dataclass
class ObjectiveSpec:
    """Evaluatable scalar field with declared regularity constants.

    fn maps an (m, dim) batch to (m,) values.  f_min is the exact infimum;
    ell and p describe the growth f - f_min >= ell * dist(., minimizers)^p,
    L the quadratic upper bound and local Lipschitz constant.
    """

    name: str
    dim: int
    fn: object
    f_min: float
    ell: float
    p: float
    L: float
    minimizers: MinimizerSet | None = None
    counter: EvalCounter = field(default_factory=EvalCounter)

    def __post_init__(self):
        if not (self.ell > 0):
            raise ValueError("ell must be positive")
        if not (1.0 <= self.p <= 2.0):
            raise ValueError("growth exponent p must lie in [1, 2]")
        if not (self.L > 0):
            raise ValueError("L must be positive")
        if self.minimizers is not None:
            if self.minimizers.dim != self.dim:
                raise ValueError("minimizer set dimension mismatch")
            anchors = self.minimizers.anchors()
            vals = np.asarray(self.fn(anchors), dtype=float)
            if np.max(np.abs(vals - self.f_min)) > 1e-12:
                raise ValueError(
                    "component anchors must attain f_min to 1e-12; got "
                    f"{vals} vs {self.f_min}"
                )


class NonFiniteValueError(ValueError):
    """The objective produced inf or nan, typically because a particle
    escaped to a magnitude where the function overflows."""

    def __init__(self, message: str, index: int = 0):
        super().__init__(message)
        self.index = index


def evaluate_batch(obj: ObjectiveSpec, V) -> np.ndarray:
    """Evaluate a batch of points, counting one evaluation per point."""
    V = _as_batch(V, obj.dim)
    vals = np.asarray(obj.fn(V), dtype=float)
    obj.counter.add(len(V))
    if not np.all(np.isfinite(vals)):
        bad = int(np.flatnonzero(~np.isfinite(vals))[0])
        raise NonFiniteValueError(
            f"objective returned non-finite value at v={V[bad]}", index=bad
        )
    floor = obj.f_min - 1e-9 * (1.0 + abs(obj.f_min))
    if np.any(vals < floor):
        bad = int(np.argmin(vals))
        raise ValueError(
            f"objective value {vals[bad]} at v={V[bad]} is below the declared "
            f"minimum {obj.f_min}"
        )
    return vals


def evaluate(obj: ObjectiveSpec, v) -> float:
    return float(evaluate_batch(obj, as_point(v)[None, :])[0])


# ---------------------------------------------------------------------------
# assumption checkers (sample-based falsifiers)


@dataclass
class LowerCheckReport:
    n_samples: int
    n_violations: int
    max_violation: float
    worst_point: np.ndarray


@dataclass
class UpperCheckReport:
    n_pairs: int
    growth_violations: int
    lipschitz_violations: int
    max_violation: float
    worst_point: np.ndarray

    @property
    def n_violations(self) -> int:
        return self.growth_violations + self.lipschitz_violations


def _sample_around_set(obj: ObjectiveSpec, n: int, radius: float, rng) -> np.ndarray:
    """Uniform bounding-box point plus a uniform offset in a radius ball."""
    d = obj.dim
    if obj.minimizers is not None:
        lo, hi = obj.minimizers.bounding_box()
    else:
        lo = hi = np.zeros(d)
    base = lo + (hi - lo) * rng.random((n, d))
    direction = rng.standard_normal((n, d))
    norms = np.linalg.norm(direction, axis=1, keepdims=True)
    norms[norms == 0] = 1.0
    radii = radius * rng.random(n) ** (1.0 / d)
    return base + direction / norms * radii[:, None]


def _violation_tol(scale: np.ndarray) -> np.ndarray:
    return 1e-10 + 1e-12 * np.abs(scale)


def check_assumption_lower(
    obj: ObjectiveSpec, n_samples: int = 10_000, radius: float = 10.0, seed: int = 0
) -> LowerCheckReport:
    """Search for points violating f(w) - f_min >= ell * dist(w, V*)^p."""
    if obj.minimizers is None:
        raise ValueError("assumption check requires minimizer set")
    rng = np.random.default_rng(seed)
    W = _sample_around_set(obj, n_samples, radius, rng)
    lhs = evaluate_batch(obj, W) - obj.f_min
    rhs = obj.ell * dist_to_set_batch(obj.minimizers, W) ** obj.p
    viol = rhs - lhs
    n_bad = int(np.sum(viol > _violation_tol(rhs)))
    worst = int(np.argmax(viol))
    return LowerCheckReport(n_samples, n_bad, float(max(viol[worst], 0.0)), W[worst])


def check_assumption_upper(
    obj: ObjectiveSpec, n_pairs: int = 10_000, radius: float = 10.0, seed: int = 0
) -> UpperCheckReport:
    """Search for violations of the quadratic growth cap and the local
    Lipschitz bound |f(v)-f(w)| <= L(||v|| + ||w|| + 1)||v - w||."""
    rng = np.random.default_rng(seed)
    W = _sample_around_set(obj, n_pairs, radius, rng)
    V = _sample_around_set(obj, n_pairs, radius, rng)
    fw = evaluate_batch(obj, W)
    fv = evaluate_batch(obj, V)
    nw = np.linalg.norm(W, axis=1)
    nv = np.linalg.norm(V, axis=1)

    cap = obj.L * (1.0 + nw**2)
    growth_viol = (fw - obj.f_min) - cap
    n_growth = int(np.sum(growth_viol > _violation_tol(cap)))

    lip_cap = obj.L * (nw + nv + 1.0) * np.linalg.norm(V - W, axis=1)
    lip_viol = np.abs(fv - fw) - lip_cap
    n_lip = int(np.sum(lip_viol > _violation_tol(lip_cap)))

    worst_growth = int(np.argmax(growth_viol))
    worst_lip = int(np.argmax(lip_viol))
    if growth_viol[worst_growth] >= lip_viol[worst_lip]:
        worst_val, worst_pt = growth_viol[worst_growth], W[worst_growth]
    else:
        worst_val, worst_pt = lip_viol[worst_lip], W[worst_lip]
    return UpperCheckReport(n_pairs, n_growth, n_lip, float(max(worst_val, 0.0)), worst_pt)


# ---------------------------------------------------------------------------
# builtin catalog


def _make_quadratic(params: dict) -> ObjectiveSpec:
    dim = int(params.get("dim", 1))
    center = as_point(params.get("center", np.zeros(dim)))
    if center.size != dim:
        raise ValueError("quadratic center dimension mismatch")

    def fn(V):
        delta = V - center
        return np.sum(delta * delta, axis=1)

    c_norm = float(np.linalg.norm(center))
    return ObjectiveSpec(
        name="quadratic",
        dim=dim,
        fn=fn,
        f_min=0.0,
        ell=1.0,
        p=2.0,
        L=1.0 + c_norm**2,
        minimizers=MinimizerSet((Singleton(center),)),
    )


def _double_well_fn(V):
    x = V[:, 0]
    return np.where(x >= 0.0, (x - 1.0) ** 2, (x + 1.0) ** 2)


def _make_symmetric_double_well(params: dict) -> ObjectiveSpec:
    if params:
        raise ValueError("symmetric_double_well takes no parameters")
    return ObjectiveSpec(
        name="symmetric_double_well",
        dim=1,
        fn=_double_well_fn,
        f_min=0.0,
        ell=1.0,
        p=2.0,
        L=2.0,
        minimizers=MinimizerSet((Singleton([-1.0]), Singleton([1.0]))),
    )


def _plateau_fn(V):
    x = V[:, 0]
    left = x * x
    right = (x - 10.0) ** 2 - 1.0
    middle = np.minimum(1.0, right)
    return np.where(x <= 1.0, left, np.where(x >= 10.0, right, middle))


def _make_paper_plateau(params: dict) -> ObjectiveSpec:
    if params:
        raise ValueError("paper_plateau takes no parameters")
    # tightest quadratic growth constant from the unique minimizer at 10:
    # min over w of (f(w) + 1)/(w - 10)^2 is attained at w = -1/10 with value 1/101
    return ObjectiveSpec(
        name="paper_plateau",
        dim=1,
        fn=_plateau_fn,
        f_min=-1.0,
        ell=1.0 / 101.0,
        p=2.0,
        L=2.0,
        minimizers=MinimizerSet((Singleton([10.0]),)),
    )


def component_from_dict(spec) -> ConvexComponent:
    """Build a convex component from a JSON-style dict."""
    if isinstance(spec, (Singleton, Ball, Box)):
        return spec
    kind = spec.get("kind")
    if kind == "singleton":
        return Singleton(spec["point"])
    if kind == "ball":
        return Ball(spec["center"], spec["radius"])
    if kind == "box":
        return Box(spec["lower"], spec["upper"])
    raise ValueError(f"unknown component kind {kind!r}; expected singleton/ball/box")


def _make_multi_well(params: dict) -> ObjectiveSpec:
    raw = params.get("minimizers")
    if raw is None:
        raise ValueError("multi_well requires a 'minimizers' component list")
    if isinstance(raw, MinimizerSet):
        mset = raw
    else:
        mset = MinimizerSet(tuple(component_from_dict(c) for c in raw))
    ell = float(params.get("ell", 1.0))
    p = float(params.get("p", 2.0))

    def fn(V):
        return ell * dist_to_set_batch(mset, V) ** p

    r0 = min(float(np.linalg.norm(c.anchor())) for c in mset.components)
    return ObjectiveSpec(
        name="multi_well",
        dim=mset.dim,
        fn=fn,
        f_min=0.0,
        ell=ell,
        p=p,
        L=2.0 * ell * (1.0 + r0) ** 2,
        minimizers=mset,
    )


_BUILTINS = {
    "quadratic": _make_quadratic,
    "symmetric_double_well": _make_symmetric_double_well,
    "paper_plateau": _make_paper_plateau,
    "multi_well": _make_multi_well,
}

BUILTIN_NAMES = tuple(sorted(_BUILTINS))


def make_builtin(name: str, params: dict | None = None) -> ObjectiveSpec:
    """Instantiate a catalog objective by name with a JSON-style params dict."""
    if name not in _BUILTINS:
        raise ValueError(
            f"unknown objective {name!r}; available: {', '.join(BUILTIN_NAMES)}"
        )
    return _BUILTINS[name](dict(params or {}))
