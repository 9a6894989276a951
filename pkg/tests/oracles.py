"""Independent reference computations for the test suite.

Everything here is written the slow, obvious way: scalar loops, raw
unstabilized exponentials, and library quadrature. Agreement between these
routines and the package is evidence of correctness precisely because no
code is shared beyond parameter containers.
"""

import math

import numpy as np
from scipy.integrate import quad

from polycbo import AdaptiveProduct, Polarized, StandardGibbs

# Frozen expected values; the routine that produced each one is named beside
# it so the numbers can be regenerated.
CONSENSUS_THREE_TERM = 0.29181370267982076  # three_term_consensus()
V_FUNCTIONAL_THREE = 0.75  # (1 + 0.25 + 1) / 3 by hand
PHI_HALF = 0.5  # phi_scalar(0.5, 3): 1 + 2/8 - 3/4
EULER_PAIR = (0.5, 1.5)  # hand Euler step, consensus at the midpoint 1
CFL_DRIFT_ONLY = 0.04  # 0.4 * 0.1 / 1
CFL_DIFFUSION_ONLY = 0.004  # 0.4 * 0.1**2 / (2 * 0.5)
UNIFORM_BUMP_MASS = 0.25  # bump_mass_uniform_quad(); also (1/4) * 1 by hand
GAP_SLACK_P2 = 0.04  # 2 * (2 * 0.01 / 1**2)**(1/(2-1))
ADAPTIVE_EXPONENT_EXAMPLE = 1.0  # (1/0.05) * (1 - (-1)) * ((-1) + 1) + 1**2


def three_term_consensus() -> float:
    """Direct three-term softmin average for positions {0,1,2}, f(v)=v^2,
    alpha=1, plain objective-value weights."""
    w0, w1, w2 = math.exp(-0.0), math.exp(-1.0), math.exp(-4.0)
    return (0.0 * w0 + 1.0 * w1 + 2.0 * w2) / (w0 + w1 + w2)


def naive_consensus(positions, f_values, kernel, alpha):
    """Unstabilized double-loop consensus points, one per particle.

    Weights are raw exp(-alpha * A) with no shift, so this only works for
    moderate alpha * A; the adaptive variant subtracts the ensemble minimum
    of f from the f(w) factor, mirroring the documented convention.
    """
    positions = np.asarray(positions, dtype=float)
    if positions.ndim == 1:
        positions = positions[:, None]
    f_values = [float(f) for f in f_values]
    n, d = positions.shape
    f_min = min(f_values)
    out = np.zeros((n, d))
    for i in range(n):
        num = [0.0] * d
        den = 0.0
        for j in range(n):
            sq = sum((positions[i, k] - positions[j, k]) ** 2 for k in range(d))
            if isinstance(kernel, StandardGibbs):
                a = f_values[j]
            elif isinstance(kernel, Polarized):
                a = f_values[j] + sq / kernel.theta
            elif isinstance(kernel, AdaptiveProduct):
                a = (f_values[j] - f_min) / kernel.kappa_scale * (
                    f_values[i] + kernel.theta
                ) + sq
            else:
                raise TypeError(f"unsupported kernel {type(kernel)}")
            wt = math.exp(-alpha * a)
            den += wt
            for k in range(d):
                num[k] += wt * positions[j, k]
        out[i] = [c / den for c in num]
    return out


def phi_scalar(s: float, tau: int) -> float:
    """Bump profile at normalized radius s, scalar closed form."""
    if s > 1.0:
        return 0.0
    return 1.0 + (tau - 1.0) * s**tau - tau * s ** (tau - 1)


def bump_mass_uniform_quad() -> float:
    """Integral of the tau=3, r=1 bump against the uniform density on
    [-2, 2], by adaptive quadrature."""
    val, _ = quad(lambda x: phi_scalar(abs(x), 3) * 0.25, -1.0, 1.0)
    return val


def ols_fit(x, y):
    """Least-squares line via the library polynomial fit."""
    slope, intercept = np.polyfit(np.asarray(x, float), np.asarray(y, float), 1)
    return float(slope), float(intercept)


def gauss_cdf(x, mean: float = 0.0, std: float = 1.0):
    """Gaussian CDF through the error function, no scipy.special reuse."""
    z = (np.asarray(x, dtype=float) - mean) / (std * math.sqrt(2.0))
    return np.array([0.5 * (1.0 + math.erf(v)) for v in z])
