"""Weight kernels and numerically stable per-particle consensus points.

A consensus point is the Gibbs-weighted average of ensemble positions with
weights exp(-alpha * A(w, v)).  The exponent A depends on the kernel:

  StandardGibbs      A = f(w)                        shared point for all v
  Polarized          A = f(w) + ||v - w||^2 / theta
  AdaptiveProduct    A = (f(w) - f_min)(f(v) + theta) / kappa_scale
                         + ||v - w||^2

Every row of exponents is shifted by its minimum before exponentiation, so
the largest weight is exactly 1 and the computation cannot overflow.  Terms
of A that depend on v alone cancel in the weighted average; the row builder
drops them outright, which makes that cancellation exact in floating point
as well as in exact arithmetic.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np

from .objectives import ObjectiveSpec, as_point, evaluate_batch
from .parallel import map_row_blocks, worker_count

__all__ = [
    "StandardGibbs",
    "Polarized",
    "AdaptiveProduct",
    "VShifted",
    "WeightKernel",
    "Ensemble",
    "make_ensemble",
    "exponent",
    "consensus_point",
    "consensus_all",
    "validate_kernel",
]


@dataclass(frozen=True)
class StandardGibbs:
    """Plain objective-value weights; one shared consensus point."""


@dataclass(frozen=True)
class Polarized:
    theta: float

    def __post_init__(self):
        if not (self.theta > 0):
            raise ValueError("Polarized theta must be strictly positive")


@dataclass(frozen=True)
class AdaptiveProduct:
    kappa_scale: float
    theta: float

    def __post_init__(self):
        if not (self.kappa_scale > 0):
            raise ValueError("AdaptiveProduct kappa_scale must be strictly positive")


@dataclass(frozen=True)
class VShifted:
    """A base kernel plus an arbitrary function of v alone.

    The shift cancels in the weight ratio, so consensus points are bitwise
    those of the base kernel; only the raw exponent values differ.
    """

    base: object
    shift: object


WeightKernel = StandardGibbs | Polarized | AdaptiveProduct | VShifted


def _strip_shift(kernel):
    while isinstance(kernel, VShifted):
        kernel = kernel.base
    return kernel


def validate_kernel(kernel, obj: ObjectiveSpec) -> None:
    """Warn when the adaptive kernel's theta is below the concentration
    threshold ell * diam^p - f_min implied by the declared minimizer set."""
    base = _strip_shift(kernel)
    if isinstance(base, AdaptiveProduct) and obj.minimizers is not None:
        bound = obj.ell * obj.minimizers.diameter**obj.p - obj.f_min
        if base.theta < bound:
            warnings.warn(
                f"adaptive theta={base.theta} is below ell*diam^p - f_min = "
                f"{bound}; the concentration guarantee does not apply",
                stacklevel=2,
            )


def exponent(kernel, f_w: float, f_v: float, w, v, f_min: float = 0.0) -> float:
    """Scalar weight exponent A(w, v) for one pair of points."""
    if isinstance(kernel, VShifted):
        return exponent(kernel.base, f_w, f_v, w, v, f_min) + float(
            kernel.shift(as_point(v))
        )
    if isinstance(kernel, StandardGibbs):
        return float(f_w)
    sq = float(np.sum((as_point(v) - as_point(w)) ** 2))
    if isinstance(kernel, Polarized):
        return float(f_w) + sq / kernel.theta
    if isinstance(kernel, AdaptiveProduct):
        return (f_w - f_min) / kernel.kappa_scale * (f_v + kernel.theta) + sq
    raise TypeError(f"unknown kernel {type(kernel)}")


@dataclass
class Ensemble:
    positions: np.ndarray
    f_values: np.ndarray
    step_index: int = 0

    def __post_init__(self):
        self.positions = np.ascontiguousarray(self.positions, dtype=float)
        if self.positions.ndim == 1:
            self.positions = self.positions[:, None]
        self.f_values = np.ascontiguousarray(self.f_values, dtype=float)
        if self.f_values.shape != (len(self.positions),):
            raise ValueError("f cache length must match particle count")
        if not np.all(np.isfinite(self.positions)):
            raise ValueError("ensemble positions must be finite")

    @property
    def n(self) -> int:
        return self.positions.shape[0]

    @property
    def dim(self) -> int:
        return self.positions.shape[1]


def make_ensemble(positions, obj: ObjectiveSpec, step_index: int = 0) -> Ensemble:
    positions = np.asarray(positions, dtype=float)
    if positions.ndim == 1:
        positions = positions[:, None]
    return Ensemble(positions, evaluate_batch(obj, positions), step_index)


def _sqdist_block(vb: np.ndarray, positions: np.ndarray) -> np.ndarray:
    """Squared distances block (B, N) accumulated per axis; no BLAS, so the
    result is independent of library threading."""
    out = np.zeros((vb.shape[0], positions.shape[0]))
    for k in range(positions.shape[1]):
        diff = vb[:, k][:, None] - positions[:, k][None, :]
        out += diff * diff
    return out


def _weight_rows(
    positions: np.ndarray,
    f_values: np.ndarray,
    kernel,
    alpha: float,
    vb: np.ndarray,
    fvb: np.ndarray,
    f_min: float,
    weights: np.ndarray | None = None,
):
    """Stabilized weighted sums for a block of evaluation points.

    Returns (num (B, d), den (B,)) with den > 0 guaranteed: after the row-min
    shift the minimizing entry has weight exactly exp(0) = 1 (times its
    measure weight when weights are given).
    """
    base = _strip_shift(kernel)
    n, d = positions.shape
    if isinstance(base, StandardGibbs):
        E = np.ones((vb.shape[0], 1)) * f_values[None, :]
    elif isinstance(base, Polarized):
        E = _sqdist_block(vb, positions)
        E *= 1.0 / base.theta
        E += f_values[None, :]
    elif isinstance(base, AdaptiveProduct):
        E = _sqdist_block(vb, positions)
        u = (f_values - f_min) / base.kappa_scale
        E += u[None, :] * (fvb + base.theta)[:, None]
    else:
        raise TypeError(f"unknown kernel {type(base)}")

    if weights is not None:
        # cells carrying no mass must not influence the shift or the sums
        E = np.where(weights[None, :] > 0.0, E, np.inf)
    m = E.min(axis=1)
    if not np.all(np.isfinite(m)):
        raise ValueError("all weights vanish; cannot form a consensus point")
    E -= m[:, None]
    if alpha == 0.0:
        W = np.isfinite(E).astype(float)
    else:
        E *= -alpha
        W = np.exp(E, out=E)
    if weights is not None:
        W *= weights[None, :]
    den = W.sum(axis=1)
    num = np.empty((vb.shape[0], d))
    for k in range(d):
        num[:, k] = (W * positions[:, k][None, :]).sum(axis=1)
    return num, den


def consensus_point(ens: Ensemble, kernel, alpha: float, v, f_v: float) -> np.ndarray:
    """Consensus point for a single evaluation position v with value f(v)."""
    if ens.n < 1:
        raise ValueError("empty ensemble")
    vb = as_point(v)[None, :]
    fvb = np.array([float(f_v)])
    f_min = float(np.min(ens.f_values))
    num, den = _weight_rows(ens.positions, ens.f_values, kernel, alpha, vb, fvb, f_min)
    return num[0] / den[0]


def consensus_all(ens: Ensemble, kernel, alpha: float, workers: int | None = None) -> np.ndarray:
    """Per-particle consensus points, (N, d).

    StandardGibbs computes one shared point and broadcasts it; the polarized
    and adaptive kernels evaluate N rows in fixed blocks.  Results are
    bitwise identical for any worker count.
    """
    base = _strip_shift(kernel)
    pos, fv = ens.positions, ens.f_values
    f_min = float(np.min(fv))
    if isinstance(base, StandardGibbs):
        num, den = _weight_rows(pos, fv, base, alpha, pos[:1], fv[:1], f_min)
        return np.tile(num[0] / den[0], (ens.n, 1))

    out = np.empty_like(pos)

    def fill(start: int, stop: int):
        num, den = _weight_rows(
            pos, fv, base, alpha, pos[start:stop], fv[start:stop], f_min
        )
        out[start:stop] = num / den[:, None]

    map_row_blocks(fill, ens.n, worker_count(workers))
    return out
