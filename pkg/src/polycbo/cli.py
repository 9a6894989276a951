"""Batch experiment driver.

Usage: polycbo <mode> --config <path> [--seed S] [--out DIR], with modes
run, compare, fpcheck, laplace, bench.  Outputs are CSV tables plus SVG
figures in the configured directory; meta.json echoes the fully resolved
configuration for provenance and reload.  Exit codes: 0 ok, 2 config
error, 3 numerical divergence, 4 check failure.
"""

from __future__ import annotations

import argparse
import json
import sys
import time
from dataclasses import replace
from pathlib import Path

import numpy as np

from .config import (
    MODES,
    ConfigError,
    ExperimentConfig,
    build_objective,
    load_config,
)
from .consensus import AdaptiveProduct, Polarized
from .diagnostics import LaplaceCheckInput, laplace_bound_check, wasserstein1_1d
from .dynamics import DivergenceError, RunRecord, run
from .meanfield import FPParams, Grid1D, init_density, run_fp
from . import figures

__all__ = ["main", "entry"]

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_DIVERGED = 3
EXIT_CHECK = 4


# ---------------------------------------------------------------------------
# byte-stable serialization


def _fmt(value) -> str:
    """Shortest-roundtrip decimal text, locale independent."""
    if isinstance(value, (bool, np.bool_)):
        return "1" if value else "0"
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    return repr(float(value))


def write_csv(path, header, rows) -> None:
    with open(path, "w", newline="\n", encoding="ascii") as fh:
        fh.write(",".join(header) + "\n")
        for row in rows:
            fh.write(",".join(_fmt(v) for v in row) + "\n")


def write_meta(path, cfg: ExperimentConfig, extra: dict) -> None:
    doc = dict(cfg.resolved)
    doc["_meta"] = extra
    with open(path, "w", newline="\n", encoding="utf-8") as fh:
        json.dump(doc, fh, indent=2, sort_keys=True)
        fh.write("\n")


def _series_rows(series):
    for rec in series:
        yield (
            int(rec["step"]),
            float(rec["time"]),
            float(rec["v_t"]),
            float(rec["mean_f"]),
            float(rec["spread"]),
            int(rec["evals"]),
        )


SERIES_HEADER = ["step", "time", "V_t", "mean_f", "consensus_spread", "evals"]


def _write_run_artifacts(run_dir: Path, cfg: ExperimentConfig, rec: RunRecord, seed: int) -> None:
    write_csv(run_dir / "series.csv", SERIES_HEADER, _series_rows(rec.series))

    dim = rec.config.init.dim
    header = ["step", "particle"] + [f"coord{j}" for j in range(dim)]

    def snapshot_rows():
        for step, positions in rec.snapshots:
            for i, row in enumerate(positions):
                yield (step, i, *row)

    write_csv(run_dir / "snapshots.csv", header, snapshot_rows())
    write_meta(
        run_dir / "meta.json",
        cfg,
        {
            "seed": seed,
            "wall_time": rec.wall_time,
            "decay_regime": rec.decay_regime,
            "classic": rec.classic,
        },
    )
    for step, positions in rec.snapshots:
        band = cfg.band if dim == 1 else None
        figures.save_histogram(
            run_dir / f"hist_{step}.svg", positions, step, step * rec.config.dt, band=band
        )


def cmd_run(cfg: ExperimentConfig) -> int:
    out_root = Path(cfg.outputs)
    out_root.mkdir(parents=True, exist_ok=True)
    for i in range(cfg.repeats):
        seed_i = cfg.seed + i * cfg.seed_stride
        rcfg = replace(cfg.dynamics, seed=seed_i)
        obj = build_objective(cfg)
        run_dir = out_root / f"run_{i:03d}"
        run_dir.mkdir(exist_ok=True)
        try:
            rec = run(rcfg, obj, snapshot_steps=cfg.snapshot_steps)
        except DivergenceError as err:
            if err.record is not None:
                _write_run_artifacts(run_dir, cfg, err.record, seed_i)
            print(f"error: {err}", file=sys.stderr)
            return EXIT_DIVERGED
        _write_run_artifacts(run_dir, cfg, rec, seed_i)
        final = rec.series[-1]
        print(f"{run_dir}: seed={seed_i} V_T={final['v_t']:.6g} mean_f={final['mean_f']:.6g}")
    return EXIT_OK


def _band_recorder(band, sink):
    lo, hi = band

    def recorder(step, ens, c):
        inside = np.all((ens.positions >= lo) & (ens.positions <= hi), axis=1)
        sink.append(float(np.mean(inside)))

    return recorder


def cmd_compare(cfg: ExperimentConfig) -> int:
    out_root = Path(cfg.outputs)
    out_root.mkdir(parents=True, exist_ok=True)

    adaptive_kernel = cfg.dynamics.kernel
    if not isinstance(adaptive_kernel, AdaptiveProduct):
        adaptive_kernel = AdaptiveProduct(kappa_scale=0.05, theta=1.0)
    variants = [
        ("classic", cfg.dynamics, True),
        ("polarized", replace(cfg.dynamics, kernel=Polarized(theta=cfg.polarized_theta)), False),
        ("adaptive", replace(cfg.dynamics, kernel=adaptive_kernel), False),
    ]

    v_t, band_frac, wall = {}, {}, {}
    times = None
    for label, rcfg, classic in variants:
        obj = build_objective(cfg)
        sink: list[float] = []
        rec = run(rcfg, obj, _band_recorder(cfg.band, sink), classic=classic)
        v_t[label] = rec.series["v_t"].copy()
        band_frac[label] = np.asarray(sink)
        wall[label] = rec.wall_time
        times = rec.series["time"].copy()
        print(f"{label}: V_T={rec.series['v_t'][-1]:.6g} band={sink[-1]:.3f}")

    labels = [label for label, _, _ in variants]
    header = (
        ["step", "time"]
        + [f"V_t_{label}" for label in labels]
        + [f"band_{label}" for label in labels]
    )
    rows = (
        (k, times[k], *(v_t[l][k] for l in labels), *(band_frac[l][k] for l in labels))
        for k in range(len(times))
    )
    write_csv(out_root / "compare.csv", header, rows)
    figures.save_compare(out_root / "compare.svg", times, v_t, band_frac, cfg.band)
    write_meta(out_root / "meta.json", cfg, {"wall_time": wall, "seed": cfg.seed})
    return EXIT_OK


def cmd_fpcheck(cfg: ExperimentConfig) -> int:
    out_root = Path(cfg.outputs)
    out_root.mkdir(parents=True, exist_ok=True)
    obj = build_objective(cfg)
    if obj.dim != 1:
        raise ConfigError("fpcheck requires a one-dimensional objective")

    grid = Grid1D(cfg.fp.x_min, cfg.fp.x_max, cfg.fp.cells)
    params = FPParams(lam=cfg.dynamics.lam, sigma=cfg.dynamics.sigma, kappa=cfg.dynamics.kappa)
    field = init_density(grid, cfg.dynamics.init)

    positions: list[np.ndarray] = []
    rec = run(cfg.dynamics, obj, lambda step, ens, c: positions.append(ens.positions.copy()))

    kernel, alpha, dt = cfg.dynamics.kernel, cfg.dynamics.alpha, cfg.dynamics.dt
    edges = grid.edges
    dist_sq = (grid.centers - _nearest_1d(obj, grid.centers)) ** 2
    rows = []
    density_rows = []
    w1_series = []
    clipped_total = 0.0
    unreliable = False
    for k in range(cfg.dynamics.steps + 1):
        if k > 0:
            traj = run_fp(grid, field, kernel, alpha, params, t_end=k * dt, obj=obj)
            field = traj.field
            unreliable = unreliable or traj.unreliable
            clipped_total = field.clipped
        cdf = np.concatenate(([0.0], np.cumsum(field.rho) * grid.dx))
        w1 = wasserstein1_1d(np.sort(positions[k][:, 0]), cdf, edges)
        w1_series.append(w1)
        v_t_fp = float(np.sum(dist_sq * field.rho) * grid.dx)
        rows.append((k, k * dt, w1, float(rec.series["v_t"][k]), v_t_fp, clipped_total))
        for x, r in zip(grid.centers, field.rho):
            density_rows.append((k * dt, x, r))

    write_csv(
        out_root / "fpcheck.csv",
        ["step", "time", "w1", "V_t_particles", "V_t_fp", "clipped"],
        rows,
    )
    write_csv(out_root / "densities.csv", ["time", "x", "rho"], density_rows)
    figures.save_fpcheck(
        out_root / "fpcheck.svg",
        grid.centers,
        field.rho,
        positions[-1][:, 0],
        [r[1] for r in rows],
        w1_series,
    )
    write_meta(
        out_root / "meta.json",
        cfg,
        {
            "seed": cfg.seed,
            "w1_final": w1_series[-1],
            "clipped_total": clipped_total,
            "unreliable": unreliable,
            "wall_time": rec.wall_time,
        },
    )
    print(f"fpcheck: W1_final={w1_series[-1]:.6g} clipped={clipped_total:.3g}")
    return EXIT_CHECK if unreliable else EXIT_OK


def _nearest_1d(obj, centers: np.ndarray) -> np.ndarray:
    if obj.minimizers is None:
        return centers
    from .objectives import nearest_minimizer_batch

    proj, _ = nearest_minimizer_batch(obj.minimizers, centers[:, None])
    return proj[:, 0]


def _laplace_instance(rng):
    """One random admissible configuration: quadratic exponent with known
    spectrum, so the growth precondition holds with margin by construction."""
    d = int(rng.integers(1, 4))
    basis, _ = np.linalg.qr(rng.standard_normal((d, d)))
    scales = rng.uniform(0.7, 1.6, d)
    mat = basis @ np.diag(scales) @ basis.T
    v_star = rng.uniform(-2.0, 2.0, d)

    def g(points):
        delta = points - v_star
        return np.sum((delta @ mat.T) ** 2, axis=1)

    n = 400
    r = float(rng.uniform(0.4, 1.0))
    pts = v_star + 0.5 * r * rng.standard_normal((n, d))
    return LaplaceCheckInput(
        points=pts,
        weights=np.full(n, 1.0 / n),
        g=g,
        v_star=v_star,
        alpha=float(rng.uniform(5.0, 40.0)),
        r=r,
        q=float(rng.uniform(0.05, 0.4)),
        eta=0.8 * float(scales.min()),
        nu=0.5,
        beta=0.0,
    )


def cmd_laplace(cfg: ExperimentConfig) -> int:
    out_root = Path(cfg.outputs)
    out_root.mkdir(parents=True, exist_ok=True)
    rng = np.random.default_rng(cfg.laplace.seed)
    rows = []
    lhs_all, rhs_all = [], []
    failures = 0
    for i in range(cfg.laplace.instances):
        inp = _laplace_instance(rng)
        rep = laplace_bound_check(inp)
        ok = bool(rep.passed) if not rep.vacuous else False
        if not rep.vacuous and not rep.passed:
            failures += 1
        if not rep.vacuous:
            lhs_all.append(rep.lhs)
            rhs_all.append(rep.rhs)
        rows.append(
            (
                i,
                len(inp.v_star),
                inp.alpha,
                inp.r,
                inp.q,
                rep.lhs,
                rep.rhs,
                rep.slack,
                int(ok),
                int(rep.vacuous),
            )
        )
    write_csv(
        out_root / "laplace.csv",
        ["instance", "dim", "alpha", "r", "q", "lhs", "rhs", "slack", "passed", "vacuous"],
        rows,
    )
    figures.save_laplace(out_root / "laplace.svg", lhs_all, rhs_all)
    write_meta(
        out_root / "meta.json",
        cfg,
        {"instances": cfg.laplace.instances, "failures": failures},
    )
    n = cfg.laplace.instances
    print(f"laplace: {n - failures}/{n} pass")
    return EXIT_CHECK if failures else EXIT_OK


def cmd_bench(cfg: ExperimentConfig) -> int:
    out_root = Path(cfg.outputs)
    out_root.mkdir(parents=True, exist_ok=True)
    rows = []
    summary = []
    for n in cfg.bench.n_list:
        finals = []
        for s in range(cfg.bench.seeds):
            seed_i = cfg.seed + s * cfg.seed_stride
            rcfg = replace(cfg.dynamics, n_particles=n, seed=seed_i)
            obj = build_objective(cfg)
            t0 = time.perf_counter()
            rec = run(rcfg, obj)
            final_v = float(rec.series["v_t"][-1])
            finals.append(final_v)
            rows.append((n, seed_i, final_v, time.perf_counter() - t0))
        arr = np.asarray(finals)
        summary.append((n, arr.mean(), arr.std(), arr.min(), arr.max()))
        print(f"N={n}: final_V mean={arr.mean():.6g} spread={arr.max() - arr.min():.3g}")
    write_csv(out_root / "bench.csv", ["n", "seed", "final_V", "wall_time"], rows)
    write_csv(
        out_root / "bench_summary.csv",
        ["n", "mean_final_V", "std_final_V", "min_final_V", "max_final_V"],
        summary,
    )
    figures.save_bench(
        out_root / "bench.svg",
        [s[0] for s in summary],
        [max(s[1], 1e-16) for s in summary],
        [s[2] for s in summary],
    )
    write_meta(out_root / "meta.json", cfg, {"n_list": cfg.bench.n_list})
    return EXIT_OK


_COMMANDS = {
    "run": cmd_run,
    "compare": cmd_compare,
    "fpcheck": cmd_fpcheck,
    "laplace": cmd_laplace,
    "bench": cmd_bench,
}

_MODE_HELP = {
    "run": "seeded particle runs with CSV series and histogram snapshots",
    "compare": "classic vs polarized vs adaptive kernels, shared noise",
    "fpcheck": "particles against the 1D density solver",
    "laplace": "random localization-bound instances",
    "bench": "final concentration across ensemble sizes",
}


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(
        prog="polycbo",
        description="Consensus-based optimization experiments for objectives with several global minimizers.",
    )
    sub = parser.add_subparsers(dest="mode", required=True)
    for mode in MODES:
        p = sub.add_parser(mode, help=_MODE_HELP[mode])
        p.add_argument("--config", required=True, help="JSON experiment configuration")
        p.add_argument("--seed", type=int, default=None, help="override the base seed")
        p.add_argument("--out", default=None, help="override the output directory")
    args = parser.parse_args(argv)

    try:
        cfg = load_config(args.config)
        if cfg.mode is not None and cfg.mode != args.mode:
            raise ConfigError(
                f"config declares mode {cfg.mode!r} but {args.mode!r} was invoked"
            )
        if args.seed is not None:
            cfg.dynamics.seed = args.seed
            cfg.resolved["seed"] = args.seed
        if args.out is not None:
            cfg.outputs = args.out
            cfg.resolved["outputs"] = args.out
        return _COMMANDS[args.mode](cfg)
    except (ConfigError, OSError) as err:
        print(f"error: {err}", file=sys.stderr)
        return EXIT_CONFIG
    except DivergenceError as err:
        print(f"error: {err}", file=sys.stderr)
        return EXIT_DIVERGED


def entry() -> None:
    sys.exit(main())


if __name__ == "__main__":
    sys.exit(main())
