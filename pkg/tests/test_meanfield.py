import math

import numpy as np
import pytest

import oracles
from polycbo import (
    AdaptiveProduct,
    DensityField,
    Explicit,
    FPParams,
    GaussianIID,
    Grid1D,
    Polarized,
    StandardGibbs,
    UniformBox,
    cfl_dt,
    fp_step,
    init_density,
    make_builtin,
    run_fp,
    v_alpha_grid,
)


def naive_weighted_rows(centers, f, rho, kernel, alpha):
    """Scalar-loop weighted softmin rows, raw exponentials, no shift."""
    n = len(centers)
    f_min = min(f[j] for j in range(n) if rho[j] > 0)
    out = np.empty(n)
    for i in range(n):
        num = den = 0.0
        for j in range(n):
            if rho[j] == 0.0:
                continue
            sq = (centers[i] - centers[j]) ** 2
            if isinstance(kernel, Polarized):
                a = f[j] + sq / kernel.theta
            elif isinstance(kernel, AdaptiveProduct):
                a = (f[j] - f_min) / kernel.kappa_scale * (f[i] + kernel.theta) + sq
            else:
                a = f[j]
            w = rho[j] * math.exp(-alpha * a)
            num += w * centers[j]
            den += w
        out[i] = num / den
    return out


# ---------------------------------------------------------------------------
# grid and density containers


def test_grid_geometry():
    g = Grid1D(0.0, 1.0, 20)
    assert g.dx == 0.05
    assert abs(g.centers[0] - 0.025) <= 1e-15 and abs(g.centers[-1] - 0.975) <= 1e-15
    assert g.edges[0] == 0.0 and abs(g.edges[-1] - 1.0) <= 1e-15
    assert len(g.edges) == 21


def test_grid_validation():
    with pytest.raises(ValueError):
        Grid1D(1.0, 1.0, 20)
    with pytest.raises(ValueError, match="16"):
        Grid1D(0.0, 1.0, 8)


def test_density_field_validation():
    g = Grid1D(0.0, 1.0, 20)
    with pytest.raises(ValueError, match="cell average"):
        DensityField(g, np.ones(10))
    with pytest.raises(ValueError, match="nonnegative"):
        DensityField(g, np.concatenate([[-1.0], np.ones(19)]))
    with pytest.raises(ValueError, match="mass"):
        DensityField(g, np.full(20, 2.0))


def test_density_field_moments():
    g = Grid1D(0.0, 1.0, 20)
    f = DensityField(g, np.ones(20))
    assert abs(f.mass() - 1.0) <= 1e-14
    assert abs(f.mean() - 0.5) <= 1e-14
    assert abs(f.boundary_mass() - 0.1) <= 1e-14


# ---------------------------------------------------------------------------
# initial densities


def test_init_density_gaussian():
    g = Grid1D(-15.0, 25.0, 400)
    f = init_density(g, GaussianIID([5.0], 10.0))
    assert abs(f.mass() - 1.0) <= 1e-12
    assert abs(f.mean() - 5.0) <= g.dx


def test_init_density_gaussian_warns_when_grid_narrow():
    with pytest.warns(UserWarning, match="six standard deviations"):
        init_density(Grid1D(-5.0, 5.0, 64), GaussianIID([0.0], 10.0))


def test_init_density_uniform_aligned():
    g = Grid1D(-2.0, 2.0, 40)
    f = init_density(g, UniformBox([-1.0], [1.0]))
    inside = np.abs(g.centers) < 1.0
    assert np.allclose(f.rho[inside], 0.5, atol=1e-14)
    assert np.all(f.rho[~inside] == 0.0)
    assert abs(f.mass() - 1.0) <= 1e-12


def test_init_density_uniform_warns_outside():
    with pytest.warns(UserWarning, match="uniform support"):
        init_density(Grid1D(-2.0, 2.0, 40), UniformBox([-3.0], [1.0]))


def test_init_density_rejects_bad_specs():
    g = Grid1D(-2.0, 2.0, 40)
    with pytest.raises(ValueError, match="no density counterpart"):
        init_density(g, Explicit([[0.0]]))
    with pytest.raises(ValueError, match="one-dimensional"):
        init_density(g, GaussianIID([0.0, 0.0], 1.0))


# ---------------------------------------------------------------------------
# consensus coordinate on the grid


def test_v_alpha_single_occupied_cell():
    g = Grid1D(-2.0, 2.0, 40)
    rho = np.zeros(40)
    rho[7] = 1.0 / g.dx
    f = DensityField(g, rho)
    obj = make_builtin("quadratic", {"dim": 1})
    for kernel in (StandardGibbs(), Polarized(1.0), AdaptiveProduct(0.05, 1.0)):
        va = v_alpha_grid(f, kernel, 5.0, obj)
        assert np.all(va == g.centers[7])


def test_v_alpha_zero_alpha_is_mean():
    g = Grid1D(-2.0, 2.0, 40)
    f = init_density(g, UniformBox([-1.0], [1.0]))
    obj = make_builtin("quadratic", {"dim": 1})
    va = v_alpha_grid(f, StandardGibbs(), 0.0, obj)
    assert np.max(np.abs(va)) <= 1e-13


def test_v_alpha_symmetric_standard_gibbs():
    g = Grid1D(-3.0, 3.0, 60)
    f = init_density(g, GaussianIID([0.0], 0.25))
    obj = make_builtin("quadratic", {"dim": 1})
    va = v_alpha_grid(f, StandardGibbs(), 8.0, obj)
    assert np.max(np.abs(va)) <= 1e-13
    assert np.all(va == va[0])  # shared point broadcast to every cell


def test_v_alpha_uniform_grid_matches_naive_consensus():
    # constant cell weights cancel, so the weighted rows equal the plain
    # ensemble consensus over the cell centers
    g = Grid1D(-2.0, 2.0, 32)
    f = DensityField(g, np.full(32, 1.0 / 4.0))
    obj = make_builtin("quadratic", {"dim": 1})
    fv = g.centers**2
    for kernel in (Polarized(1.5), AdaptiveProduct(0.05, 1.0)):
        got = v_alpha_grid(f, kernel, 3.0, obj)
        want = oracles.naive_consensus(g.centers, fv, kernel, 3.0)[:, 0]
        assert np.max(np.abs(got - want) / (1.0 + np.abs(want))) <= 1e-12


def test_v_alpha_weighted_matches_scalar_loop():
    g = Grid1D(-3.0, 3.0, 24)
    f = init_density(g, GaussianIID([0.5], 0.09))
    obj = make_builtin("symmetric_double_well")
    fv = (np.abs(g.centers) - 1.0) ** 2
    for kernel in (StandardGibbs(), Polarized(2.0), AdaptiveProduct(0.05, 4.0)):
        got = v_alpha_grid(f, kernel, 4.0, obj)
        want = naive_weighted_rows(g.centers, fv, f.rho, kernel, 4.0)
        assert np.max(np.abs(got - want) / (1.0 + np.abs(want))) <= 1e-12


# ---------------------------------------------------------------------------
# stability bound


def test_cfl_drift_only():
    g = Grid1D(-2.0, 2.0, 40)
    f = DensityField(g, np.full(40, 0.25))
    dt = cfl_dt(f, StandardGibbs(), 1.0, FPParams(1.0, 0.0, 0.0), v_alpha=g.centers - 1.0)
    assert abs(dt - oracles.CFL_DRIFT_ONLY) <= 1e-15


def test_cfl_diffusion_only():
    g = Grid1D(-2.0, 2.0, 40)
    f = DensityField(g, np.full(40, 0.25))
    dt = cfl_dt(f, StandardGibbs(), 1.0, FPParams(0.0, 1.0, 1.0), v_alpha=g.centers)
    assert abs(dt - oracles.CFL_DIFFUSION_ONLY) <= 1e-15


def test_cfl_requires_objective_or_coefficient():
    g = Grid1D(-2.0, 2.0, 40)
    f = DensityField(g, np.full(40, 0.25))
    with pytest.raises(ValueError, match="either obj"):
        cfl_dt(f, StandardGibbs(), 1.0, FPParams(1.0, 0.1, 0.0))


# ---------------------------------------------------------------------------
# single steps


def test_fp_step_frozen_when_coefficients_vanish():
    g = Grid1D(-3.0, 3.0, 48)
    f = init_density(g, GaussianIID([0.0], 0.2))
    out = fp_step(f, StandardGibbs(), 1.0, FPParams(0.0, 0.0, 0.0), 0.1, v_alpha=g.centers)
    assert np.max(np.abs(out.rho - f.rho)) <= 1e-15
    assert out.time == 0.1 and out.clipped == 0.0


def test_fp_step_mass_and_clipping():
    g = Grid1D(-6.0, 6.0, 96)
    obj = make_builtin("quadratic", {"dim": 1})
    f = init_density(g, GaussianIID([0.0], 1.0))
    params = FPParams(1.0, 0.5, 0.1)
    for _ in range(10):
        dt = cfl_dt(f, StandardGibbs(), 5.0, params, obj=obj)
        f = fp_step(f, StandardGibbs(), 5.0, params, dt, obj=obj)
    assert abs(f.mass() - 1.0) <= 1e-12
    assert f.clipped == 0.0


def test_fp_step_pure_diffusion_variance_identity():
    # freezing v_alpha at the cell centers turns the law into the heat
    # equation with D = (sigma kappa)^2 / 2; the conservative update grows
    # the discrete variance by exactly 2 D dt per step
    g = Grid1D(-20.0, 20.0, 200)
    f = init_density(g, GaussianIID([0.0], 1.0))
    params = FPParams(0.0, np.sqrt(2.0), 1.0)  # D = 1
    dt = 0.4 * g.dx**2 / 2.0
    var0 = float(np.sum(g.centers**2 * f.rho) * g.dx - f.mean() ** 2)
    out = fp_step(f, StandardGibbs(), 1.0, params, dt, v_alpha=g.centers)
    var1 = float(np.sum(g.centers**2 * out.rho) * g.dx - out.mean() ** 2)
    assert abs(out.mean() - f.mean()) <= 1e-12
    assert abs((var1 - var0) - 2.0 * dt) <= 1e-12


def test_fp_step_rejects_unstable_dt():
    g = Grid1D(-2.0, 2.0, 40)
    f = DensityField(g, np.full(40, 0.25))
    with pytest.raises(ValueError, match="stability limit"):
        fp_step(f, StandardGibbs(), 1.0, FPParams(1.0, 0.0, 0.0), 1.0, v_alpha=g.centers - 1.0)
    with pytest.raises(ValueError, match="dt must be positive"):
        fp_step(f, StandardGibbs(), 1.0, FPParams(1.0, 0.0, 0.0), 0.0, v_alpha=g.centers)


def test_fp_step_heat_kernel_limit():
    # t = 1 of pure diffusion from N(0,1) must land within quadrature error
    # of N(0, 3); distance measured as the L1 gap of the edge CDFs
    g = Grid1D(-20.0, 20.0, 400)
    f = init_density(g, GaussianIID([0.0], 1.0))
    params = FPParams(0.0, np.sqrt(2.0), 1.0)
    dt = 0.4 * g.dx**2 / 2.0
    steps = int(np.ceil(1.0 / dt))
    dt = 1.0 / steps
    for _ in range(steps):
        f = fp_step(f, StandardGibbs(), 1.0, params, dt, v_alpha=g.centers)
    f_num = np.concatenate([[0.0], np.cumsum(f.rho) * g.dx])
    f_ref = oracles.gauss_cdf(g.edges, 0.0, np.sqrt(3.0))
    w1 = float(np.trapezoid(np.abs(f_num - f_ref), g.edges))
    assert w1 <= 2.0 * g.dx
    assert w1 <= 1e-3


def test_fp_step_preserves_even_symmetry():
    g = Grid1D(-6.0, 6.0, 64)
    obj = make_builtin("quadratic", {"dim": 1})
    f = init_density(g, GaussianIID([0.0], 1.0))
    params = FPParams(1.0, 0.3, 0.1)
    for _ in range(20):
        dt = cfl_dt(f, StandardGibbs(), 10.0, params, obj=obj)
        f = fp_step(f, StandardGibbs(), 10.0, params, dt, obj=obj)
        assert np.max(np.abs(f.rho - f.rho[::-1])) <= 1e-10


# ---------------------------------------------------------------------------
# trajectories


def test_run_fp_zero_horizon():
    g = Grid1D(-6.0, 6.0, 64)
    obj = make_builtin("symmetric_double_well")
    seen = []
    out = run_fp(
        g, GaussianIID([0.0], 1.0), StandardGibbs(), 10.0, FPParams(1.0, 0.1, 0.1),
        0.0, recorder=lambda n, fld: seen.append(n), obj=obj,
    )
    assert out.n_steps == 0 and len(out.times) == 1
    assert out.v_t[0] > 0.0
    assert seen == [0]


def test_run_fp_requires_objective():
    g = Grid1D(-6.0, 6.0, 64)
    with pytest.raises(ValueError, match="objective required"):
        run_fp(g, GaussianIID([0.0], 1.0), StandardGibbs(), 10.0, FPParams(1.0, 0.1, 0.1), 1.0)


def test_run_fp_rejects_foreign_grid():
    g = Grid1D(-6.0, 6.0, 64)
    other = init_density(Grid1D(-6.0, 6.0, 128), GaussianIID([0.0], 1.0))
    obj = make_builtin("symmetric_double_well")
    with pytest.raises(ValueError, match="different grid"):
        run_fp(g, other, StandardGibbs(), 10.0, FPParams(1.0, 0.1, 0.1), 1.0, obj=obj)


def test_run_fp_step_budget():
    g = Grid1D(-6.0, 6.0, 64)
    obj = make_builtin("symmetric_double_well")
    with pytest.raises(ValueError, match="step budget"):
        run_fp(
            g, GaussianIID([0.0], 1.0), StandardGibbs(), 10.0,
            FPParams(1.0, 0.1, 0.1), 2.0, obj=obj, max_steps=3,
        )


def test_run_fp_shared_point_stagnates_between_wells():
    # the symmetric law under a shared consensus point piles mass at the
    # saddle, so the concentration functional stays order one
    g = Grid1D(-6.0, 6.0, 64)
    obj = make_builtin("symmetric_double_well")
    out = run_fp(
        g, GaussianIID([0.0], 1.0), StandardGibbs(), 10.0,
        FPParams(1.0, 0.1, 0.1), 2.0, obj=obj,
    )
    assert out.v_t[-1] >= 0.5
    assert not out.unreliable


def test_run_fp_per_cell_weights_concentrate():
    g = Grid1D(-6.0, 6.0, 64)
    obj = make_builtin("symmetric_double_well")
    out = run_fp(
        g, GaussianIID([0.0], 1.0), AdaptiveProduct(0.05, 4.0), 10.0,
        FPParams(1.0, 0.1, 0.1), 2.0, obj=obj,
    )
    assert out.v_t[-1] <= out.v_t[0] / 2.0
    assert len(out.times) == out.n_steps + 1
    assert np.all(np.diff(out.times) > 0.0)
    assert not out.boundary_flag


def test_run_fp_flags_mass_at_walls():
    g = Grid1D(-6.0, 6.0, 64)
    obj = make_builtin("symmetric_double_well")
    out = run_fp(
        g, UniformBox([-6.0], [6.0]), StandardGibbs(), 10.0,
        FPParams(1.0, 0.1, 0.1), 0.0, obj=obj,
    )
    assert out.boundary_flag
