"""Strict JSON experiment configuration.

Every key is checked against the schema; unknown keys are rejected with a
closest-match suggestion so typos in parameter names fail loudly instead of
silently running defaults.  The fully resolved document (defaults filled in)
is echoed into meta.json next to the outputs, and that file loads back into
an equivalent configuration: a reserved top-level "_meta" key carries
run-time annotations and is ignored on load.
"""

from __future__ import annotations

import difflib
import json
from dataclasses import dataclass, field
from pathlib import Path

from .consensus import AdaptiveProduct, Polarized, StandardGibbs, WeightKernel
from .dynamics import DynamicsConfig, Explicit, GaussianIID, UniformBox
from .objectives import ObjectiveSpec, make_builtin

__all__ = [
    "ConfigError",
    "ExperimentConfig",
    "FPSection",
    "LaplaceSection",
    "BenchSection",
    "load_config",
    "build_objective",
    "build_kernel",
    "build_init",
]

MODES = ("run", "compare", "fpcheck", "laplace", "bench")


class ConfigError(ValueError):
    """Raised for parse errors and schema violations."""


def _reject_unknown(doc: dict, allowed, where: str) -> None:
    for key in doc:
        if key not in allowed:
            hint = difflib.get_close_matches(key, sorted(allowed), n=1)
            extra = f"; did you mean {hint[0]!r}?" if hint else ""
            raise ConfigError(f"unknown key {key!r} in {where}{extra}")


def _section(doc: dict, key: str) -> dict:
    value = doc.get(key, {})
    if not isinstance(value, dict):
        raise ConfigError(f"{key} must be an object")
    return value


def _num(value, where: str) -> float:
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise ConfigError(f"{where} must be a number, got {value!r}")
    return float(value)


def _int(value, where: str) -> int:
    if isinstance(value, bool) or not isinstance(value, int):
        raise ConfigError(f"{where} must be an integer, got {value!r}")
    return value


def _vector(value, where: str) -> list[float]:
    if isinstance(value, (int, float)) and not isinstance(value, bool):
        return [float(value)]
    if isinstance(value, list) and value:
        return [_num(v, where) for v in value]
    raise ConfigError(f"{where} must be a number or a non-empty list of numbers")


_KERNEL_KEYS = {"variant", "theta", "kappa_scale"}
_KERNEL_VARIANTS = ("standard", "polarized", "adaptive")


def build_kernel(doc: dict) -> WeightKernel:
    _reject_unknown(doc, _KERNEL_KEYS, "dynamics.kernel")
    variant = doc.get("variant", "adaptive")
    if variant not in _KERNEL_VARIANTS:
        hint = difflib.get_close_matches(str(variant), _KERNEL_VARIANTS, n=1)
        extra = f"; did you mean {hint[0]!r}?" if hint else ""
        raise ConfigError(f"unknown kernel variant {variant!r}{extra}")
    theta = _num(doc.get("theta", 1.0), "dynamics.kernel.theta")
    if variant == "standard":
        return StandardGibbs()
    if variant == "polarized":
        return Polarized(theta=theta)
    kappa_scale = _num(doc.get("kappa_scale", 0.05), "dynamics.kernel.kappa_scale")
    return AdaptiveProduct(kappa_scale=kappa_scale, theta=theta)


_INIT_KEYS = {"kind", "mean", "variance", "lower", "upper", "points"}


def build_init(doc: dict, dim: int):
    _reject_unknown(doc, _INIT_KEYS, "dynamics.init")
    kind = doc.get("kind", "gaussian")

    def expand(value, where):
        vec = _vector(value, where)
        if len(vec) == 1 and dim > 1:
            vec = vec * dim
        if len(vec) != dim:
            raise ConfigError(f"{where} must have {dim} coordinates, got {len(vec)}")
        return vec

    if kind == "gaussian":
        mean = expand(doc.get("mean", 0.0), "dynamics.init.mean")
        variance = _num(doc.get("variance", 1.0), "dynamics.init.variance")
        return GaussianIID(mean=mean, variance=variance)
    if kind == "uniform":
        lower = expand(doc.get("lower", -1.0), "dynamics.init.lower")
        upper = expand(doc.get("upper", 1.0), "dynamics.init.upper")
        return UniformBox(lower=lower, upper=upper)
    if kind == "explicit":
        points = doc.get("points")
        if not isinstance(points, list) or not points:
            raise ConfigError("dynamics.init.points must be a non-empty list")
        return Explicit(points=points)
    hint = difflib.get_close_matches(str(kind), ("gaussian", "uniform", "explicit"), n=1)
    extra = f"; did you mean {hint[0]!r}?" if hint else ""
    raise ConfigError(f"unknown init kind {kind!r}{extra}")


@dataclass
class FPSection:
    x_min: float = -6.0
    x_max: float = 6.0
    cells: int = 800


@dataclass
class LaplaceSection:
    instances: int = 100
    seed: int = 0


@dataclass
class BenchSection:
    n_list: list = field(default_factory=lambda: [50, 100, 200, 400])
    seeds: int = 3


@dataclass
class ExperimentConfig:
    mode: str | None
    objective_name: str
    objective_params: dict
    minimizer_set: list | None
    dynamics: DynamicsConfig
    outputs: str
    snapshot_steps: list
    repeats: int
    seed_stride: int
    band: tuple
    polarized_theta: float
    fp: FPSection
    laplace: LaplaceSection
    bench: BenchSection
    resolved: dict

    @property
    def seed(self) -> int:
        return self.dynamics.seed


def _make_objective(name: str, params: dict, minimizer_set) -> ObjectiveSpec:
    merged = dict(params)
    if minimizer_set is not None:
        merged.setdefault("minimizers", minimizer_set)
    try:
        return make_builtin(name, merged)
    except (ValueError, TypeError, KeyError) as err:
        raise ConfigError(str(err)) from err


def build_objective(cfg: ExperimentConfig) -> ObjectiveSpec:
    """Fresh objective instance (own evaluation counter) for one run."""
    return _make_objective(cfg.objective_name, cfg.objective_params, cfg.minimizer_set)


_TOP_KEYS = {
    "mode",
    "objective",
    "minimizer_set",
    "dynamics",
    "outputs",
    "snapshot_steps",
    "repeats",
    "seed",
    "seed_stride",
    "band",
    "compare",
    "fp",
    "laplace",
    "bench",
    "_meta",
}

_OBJECTIVE_KEYS = {"name", "params"}
_DYNAMICS_KEYS = {
    "lambda",
    "sigma",
    "alpha",
    "kappa",
    "dt",
    "steps",
    "n_particles",
    "kernel",
    "init",
}
_COMPARE_KEYS = {"polarized_theta"}
_FP_KEYS = {"x_min", "x_max", "cells"}
_LAPLACE_KEYS = {"instances", "seed"}
_BENCH_KEYS = {"n_list", "seeds"}


def load_config(path) -> ExperimentConfig:
    """Parse and validate a JSON config file, filling in all defaults."""
    text = Path(path).read_text(encoding="utf-8")
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as err:
        raise ConfigError(
            f"config parse error at line {err.lineno}, column {err.colno}: {err.msg}"
        ) from err
    if not isinstance(doc, dict):
        raise ConfigError("config must be a JSON object")
    return resolve_config(doc)


def resolve_config(doc: dict) -> ExperimentConfig:
    _reject_unknown(doc, _TOP_KEYS, "config")

    mode = doc.get("mode")
    if mode is not None and mode not in MODES:
        hint = difflib.get_close_matches(str(mode), MODES, n=1)
        extra = f"; did you mean {hint[0]!r}?" if hint else ""
        raise ConfigError(f"unknown mode {mode!r}{extra}")

    obj_doc = _section(doc, "objective")
    _reject_unknown(obj_doc, _OBJECTIVE_KEYS, "objective")
    name = obj_doc.get("name")
    if not isinstance(name, str):
        raise ConfigError("objective.name is required")
    params = obj_doc.get("params", {})
    if not isinstance(params, dict):
        raise ConfigError("objective.params must be an object")

    minimizer_set = doc.get("minimizer_set")
    if minimizer_set is not None and not isinstance(minimizer_set, list):
        raise ConfigError("minimizer_set must be a list of components")

    dyn = _section(doc, "dynamics")
    _reject_unknown(dyn, _DYNAMICS_KEYS, "dynamics")
    kernel_doc = dict(_section(dyn, "kernel"))
    kernel = build_kernel(kernel_doc)
    steps = _int(dyn.get("steps", 100), "dynamics.steps")

    lam = _num(dyn.get("lambda", 1.0), "dynamics.lambda")
    sigma = _num(dyn.get("sigma", 0.1), "dynamics.sigma")
    alpha = _num(dyn.get("alpha", 10.0), "dynamics.alpha")
    kappa = _num(dyn.get("kappa", 0.0), "dynamics.kappa")
    dt = _num(dyn.get("dt", 0.1), "dynamics.dt")
    n_particles = _int(dyn.get("n_particles", 100), "dynamics.n_particles")
    seed = _int(doc.get("seed", 0), "seed")

    obj = _make_objective(name, params, minimizer_set)

    init_doc = dict(_section(dyn, "init"))
    init = build_init(init_doc, obj.dim)
    try:
        dynamics = DynamicsConfig(
            lam=lam,
            sigma=sigma,
            alpha=alpha,
            kappa=kappa,
            dt=dt,
            steps=steps,
            n_particles=n_particles,
            kernel=kernel,
            init=init,
            seed=seed,
        )
    except ValueError as err:
        raise ConfigError(str(err)) from err

    outputs = doc.get("outputs", "out")
    if not isinstance(outputs, str):
        raise ConfigError("outputs must be a directory path string")

    snapshot_steps = doc.get("snapshot_steps", [steps])
    if not isinstance(snapshot_steps, list):
        raise ConfigError("snapshot_steps must be a list of integers")
    snapshot_steps = [_int(s, "snapshot_steps") for s in snapshot_steps]
    for s in snapshot_steps:
        if not (0 <= s <= steps):
            raise ConfigError(f"snapshot step {s} outside [0, {steps}]")

    repeats = _int(doc.get("repeats", 1), "repeats")
    if repeats < 1:
        raise ConfigError("repeats must be >= 1")
    seed_stride = _int(doc.get("seed_stride", 1), "seed_stride")

    band = doc.get("band", [-1.5, 1.5])
    band = [_num(b, "band") for b in band] if isinstance(band, list) else None
    if band is None or len(band) != 2 or not band[0] < band[1]:
        raise ConfigError("band must be [lo, hi] with lo < hi")

    comp = _section(doc, "compare")
    _reject_unknown(comp, _COMPARE_KEYS, "compare")
    polarized_theta = _num(comp.get("polarized_theta", 1.0), "compare.polarized_theta")

    fp_doc = _section(doc, "fp")
    _reject_unknown(fp_doc, _FP_KEYS, "fp")
    fp = FPSection(
        x_min=_num(fp_doc.get("x_min", -6.0), "fp.x_min"),
        x_max=_num(fp_doc.get("x_max", 6.0), "fp.x_max"),
        cells=_int(fp_doc.get("cells", 800), "fp.cells"),
    )

    lap_doc = _section(doc, "laplace")
    _reject_unknown(lap_doc, _LAPLACE_KEYS, "laplace")
    laplace = LaplaceSection(
        instances=_int(lap_doc.get("instances", 100), "laplace.instances"),
        seed=_int(lap_doc.get("seed", 0), "laplace.seed"),
    )

    bench_doc = _section(doc, "bench")
    _reject_unknown(bench_doc, _BENCH_KEYS, "bench")
    n_list = bench_doc.get("n_list", [50, 100, 200, 400])
    if not isinstance(n_list, list) or not n_list:
        raise ConfigError("bench.n_list must be a non-empty list of integers")
    bench = BenchSection(
        n_list=[_int(n, "bench.n_list") for n in n_list],
        seeds=_int(bench_doc.get("seeds", 3), "bench.seeds"),
    )

    kernel_resolved = {"variant": kernel_doc.get("variant", "adaptive")}
    if isinstance(kernel, (Polarized, AdaptiveProduct)):
        kernel_resolved["theta"] = kernel.theta
    if isinstance(kernel, AdaptiveProduct):
        kernel_resolved["kappa_scale"] = kernel.kappa_scale

    if isinstance(init, GaussianIID):
        init_resolved = {
            "kind": "gaussian",
            "mean": list(init.mean),
            "variance": init.variance,
        }
    elif isinstance(init, UniformBox):
        init_resolved = {
            "kind": "uniform",
            "lower": list(init.lower),
            "upper": list(init.upper),
        }
    else:
        init_resolved = {"kind": "explicit", "points": init.points.tolist()}

    resolved = {
        "mode": mode,
        "objective": {"name": name, "params": params},
        "minimizer_set": minimizer_set,
        "dynamics": {
            "lambda": lam,
            "sigma": sigma,
            "alpha": alpha,
            "kappa": kappa,
            "dt": dt,
            "steps": steps,
            "n_particles": n_particles,
            "kernel": kernel_resolved,
            "init": init_resolved,
        },
        "outputs": outputs,
        "snapshot_steps": snapshot_steps,
        "repeats": repeats,
        "seed": seed,
        "seed_stride": seed_stride,
        "band": band,
        "compare": {"polarized_theta": polarized_theta},
        "fp": {"x_min": fp.x_min, "x_max": fp.x_max, "cells": fp.cells},
        "laplace": {"instances": laplace.instances, "seed": laplace.seed},
        "bench": {"n_list": bench.n_list, "seeds": bench.seeds},
    }

    return ExperimentConfig(
        mode=mode,
        objective_name=name,
        objective_params=params,
        minimizer_set=minimizer_set,
        dynamics=dynamics,
        outputs=outputs,
        snapshot_steps=snapshot_steps,
        repeats=repeats,
        seed_stride=seed_stride,
        band=tuple(band),
        polarized_theta=polarized_theta,
        fp=fp,
        laplace=laplace,
        bench=bench,
        resolved=resolved,
    )
