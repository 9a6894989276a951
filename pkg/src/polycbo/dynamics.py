"""Euler-Maruyama particle stepper with reproducible counter-based noise.

One step of the per-particle scheme moves every particle toward its own
consensus point and adds isotropic Gaussian noise scaled by the distance to
that point plus a floor kappa:

    V' = V - dt*lam*(V - c) + sqrt(dt)*sigma*(||V - c|| + kappa)*B

The classic baseline uses the single shared Gibbs consensus point and no
noise floor.  Brownian increments are addressed by (seed, step) through a
counter-based generator and drawn in one block at the step barrier, so the
realized noise cannot depend on scheduling or worker count.
"""

from __future__ import annotations

import time
import warnings
from dataclasses import dataclass, field

import numpy as np

from .consensus import Ensemble, StandardGibbs, WeightKernel, consensus_all
from .objectives import (
    NonFiniteValueError,
    ObjectiveSpec,
    as_point,
    dist_to_set_batch,
    evaluate_batch,
)

__all__ = [
    "GaussianIID",
    "UniformBox",
    "Explicit",
    "InitSpec",
    "DynamicsConfig",
    "RunRecord",
    "DivergenceError",
    "NoiseStreams",
    "init_ensemble",
    "step",
    "step_classic",
    "run",
    "SERIES_DTYPE",
]

_INIT_TAG = 0
_NOISE_TAG = 1


class NoiseStreams:
    """Counter-based Gaussian streams keyed by the run seed.

    Each step owns a disjoint counter range, so any draw is reproducible
    from (seed, step) alone regardless of execution order.
    """

    def __init__(self, seed: int):
        self.seed = int(seed) & 0xFFFFFFFFFFFFFFFF

    def _generator(self, step: int, tag: int) -> np.random.Generator:
        bitgen = np.random.Philox(counter=[0, 0, step, tag], key=self.seed)
        return np.random.Generator(bitgen)

    def init_rng(self) -> np.random.Generator:
        return self._generator(0, _INIT_TAG)

    def step_normals(self, step: int, n: int, dim: int) -> np.ndarray:
        return self._generator(step, _NOISE_TAG).standard_normal((n, dim))


@dataclass(frozen=True)
class GaussianIID:
    mean: np.ndarray
    variance: float

    def __post_init__(self):
        object.__setattr__(self, "mean", as_point(self.mean))
        object.__setattr__(self, "variance", float(self.variance))
        if not (self.variance > 0):
            raise ValueError("variance must be strictly positive")

    @property
    def dim(self) -> int:
        return self.mean.size


@dataclass(frozen=True)
class UniformBox:
    lower: np.ndarray
    upper: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "lower", as_point(self.lower))
        object.__setattr__(self, "upper", as_point(self.upper))
        if self.lower.size != self.upper.size or not np.all(self.lower <= self.upper):
            raise ValueError("uniform box requires lower <= upper componentwise")

    @property
    def dim(self) -> int:
        return self.lower.size


@dataclass(frozen=True)
class Explicit:
    points: np.ndarray

    def __post_init__(self):
        pts = np.asarray(self.points, dtype=float)
        if pts.ndim == 1:
            pts = pts[:, None]
        object.__setattr__(self, "points", pts)

    @property
    def dim(self) -> int:
        return self.points.shape[1]


InitSpec = GaussianIID | UniformBox | Explicit


@dataclass
class DynamicsConfig:
    lam: float
    sigma: float
    alpha: float
    kappa: float
    dt: float
    steps: int
    n_particles: int
    kernel: WeightKernel
    init: InitSpec
    seed: int

    def __post_init__(self):
        if not (self.lam > 0):
            raise ValueError("lam must be positive")
        for name in ("sigma", "alpha", "kappa"):
            if getattr(self, name) < 0:
                raise ValueError(f"{name} must be nonnegative")
        if not (self.dt > 0):
            raise ValueError("dt must be positive")
        if self.steps < 0 or self.n_particles < 1:
            raise ValueError("steps must be >= 0 and n_particles >= 1")
        if self.dt * self.lam > 1.0:
            warnings.warn("explicit scheme may overshoot consensus", stacklevel=2)

    def decay_regime(self, dim: int) -> bool:
        try:
            return self.lam > 3.0 * self.sigma**2 * dim
        except OverflowError:
            return False


SERIES_DTYPE = np.dtype(
    [
        ("step", "i8"),
        ("time", "f8"),
        ("v_t", "f8"),
        ("mean_f", "f8"),
        ("spread", "f8"),
        ("evals", "i8"),
    ]
)


@dataclass
class RunRecord:
    series: np.ndarray
    snapshots: list
    config: DynamicsConfig
    wall_time: float
    decay_regime: bool
    classic: bool = False


class DivergenceError(RuntimeError):
    def __init__(self, step: int, index: int, record: RunRecord | None = None):
        super().__init__(f"particle diverged at step {step}, index {index}")
        self.step = step
        self.index = index
        self.record = record


def init_ensemble(init: InitSpec, n: int, dim: int, rng, obj: ObjectiveSpec) -> Ensemble:
    """Draw the initial ensemble and fill the objective cache."""
    if init.dim != dim:
        raise ValueError(f"init spec has dim {init.dim}, expected {dim}")
    if isinstance(init, GaussianIID):
        pos = init.mean + np.sqrt(init.variance) * rng.standard_normal((n, dim))
    elif isinstance(init, UniformBox):
        pos = init.lower + (init.upper - init.lower) * rng.random((n, dim))
    elif isinstance(init, Explicit):
        if init.points.shape != (n, dim):
            raise ValueError(
                f"explicit list shape {init.points.shape} does not match ({n}, {dim})"
            )
        pos = init.points.copy()
    else:
        raise TypeError(f"unknown init spec {type(init)}")
    return Ensemble(pos, evaluate_batch(obj, pos), 0)


def _apply_update(positions, consensus, lam, sigma, kappa, dt, noise):
    """One explicit update given the consensus vector; pure and vectorized."""
    delta = positions - consensus
    dist = np.sqrt(np.sum(delta * delta, axis=1))
    out = positions - (dt * lam) * delta
    if sigma != 0.0:
        out = out + (np.sqrt(dt) * sigma) * (dist + kappa)[:, None] * noise
    return out


def _advance(ens, consensus, config, obj, streams, k, kappa):
    noise = streams.step_normals(k, ens.n, ens.dim)
    new_pos = _apply_update(
        ens.positions, consensus, config.lam, config.sigma, kappa, config.dt, noise
    )
    finite = np.isfinite(new_pos).all(axis=1)
    if not finite.all():
        raise DivergenceError(k, int(np.flatnonzero(~finite)[0]))
    try:
        f_new = evaluate_batch(obj, new_pos)
    except NonFiniteValueError as err:
        # a particle can sit at a finite position whose objective value
        # already overflows; that is divergence, not a contract violation
        raise DivergenceError(k, err.index) from err
    return Ensemble(new_pos, f_new, k + 1)


def step(ens: Ensemble, config: DynamicsConfig, obj: ObjectiveSpec, k: int) -> Ensemble:
    """One step of the per-particle scheme with the configured kernel."""
    c = consensus_all(ens, config.kernel, config.alpha)
    return _advance(ens, c, config, obj, NoiseStreams(config.seed), k, config.kappa)


def step_classic(ens: Ensemble, config: DynamicsConfig, obj: ObjectiveSpec, k: int) -> Ensemble:
    """One step of the classic dynamic: shared consensus point, no noise floor."""
    c = consensus_all(ens, StandardGibbs(), config.alpha)
    return _advance(ens, c, config, obj, NoiseStreams(config.seed), k, 0.0)


def run(
    config: DynamicsConfig,
    obj: ObjectiveSpec,
    recorder=None,
    *,
    classic: bool = False,
    snapshot_steps=(),
    workers: int | None = None,
) -> RunRecord:
    """Execute K steps, recording the diagnostics series at every step.

    recorder, when given, is called as recorder(step, ensemble, consensus)
    at each barrier.  On divergence the partial record is attached to the
    raised error.
    """
    t0 = time.perf_counter()
    streams = NoiseStreams(config.seed)
    ens = init_ensemble(config.init, config.n_particles, obj.dim, streams.init_rng(), obj)
    evals0 = obj.counter.count

    kernel = StandardGibbs() if classic else config.kernel
    kappa = 0.0 if classic else config.kappa
    mset = obj.minimizers
    want_snapshot = set(int(s) for s in snapshot_steps)

    series = np.zeros(config.steps + 1, dtype=SERIES_DTYPE)
    snapshots = []

    def record(row: int, ens: Ensemble, c: np.ndarray):
        delta = ens.positions - c
        spread = float(np.mean(np.sqrt(np.sum(delta * delta, axis=1))))
        if mset is not None:
            v_t = float(np.mean(dist_to_set_batch(mset, ens.positions) ** 2))
        else:
            v_t = np.nan
        series[row] = (
            ens.step_index,
            ens.step_index * config.dt,
            v_t,
            float(np.mean(ens.f_values)),
            spread,
            obj.counter.count - evals0,
        )
        if ens.step_index in want_snapshot:
            snapshots.append((ens.step_index, ens.positions.copy()))
        if recorder is not None:
            recorder(ens.step_index, ens, c)

    def finish(rows: int) -> RunRecord:
        return RunRecord(
            series=series[:rows],
            snapshots=snapshots,
            config=config,
            wall_time=time.perf_counter() - t0,
            decay_regime=config.decay_regime(obj.dim),
            classic=classic,
        )

    for k in range(config.steps):
        c = consensus_all(ens, kernel, config.alpha, workers)
        record(k, ens, c)
        try:
            ens = _advance(ens, c, config, obj, streams, k, kappa)
        except DivergenceError as err:
            err.record = finish(k + 1)
            raise
    c = consensus_all(ens, kernel, config.alpha, workers)
    record(config.steps, ens, c)
    return finish(config.steps + 1)
