"""TOML run configuration: schema validation and resolution to runner objects.

The schema is strict: unknown keys anywhere are rejected with the full key
path, so configs are self-documenting provenance records.
"""

from __future__ import annotations

import sys
from dataclasses import dataclass
from typing import Any, Optional

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib

from .dynamics import IntegratorConfig
from .ensemble import EnsembleSpec, MethodSpec, DEFAULT_BATCH
from .estimators import ObservableSpec
from .models.lvcm import AU_TO_FS
from .phasespace import SingleGamma, SymmetricPairGamma, gamma_star

__all__ = ["ConfigError", "RunConfig", "load_config", "parse_config"]


class ConfigError(ValueError):
    pass


# block -> key -> (type(s), required)
_MODEL_KEYS = {
    "spin_boson": {
        "epsilon": float,
        "tunneling": float,
        "kondo_alpha": float,
        "omega_c": float,
        "beta": float,
        "n_modes": int,
    },
    "tully": {"variant": str, "P0": float, "R0": float, "alpha": float, "mass": float},
    "cavity": {
        "n_levels": int,
        "n_modes": int,
        "length": float,
        "atom_position": float,
    },
    "lvcm": {"preset": str},
}

_SCHEMA = {
    "model": {"kind": str},  # plus kind-specific keys above
    "method": {
        "name": str,
        "gamma": (float, str),
        "delta": float,
        "init_state": int,
        "frustrated_reversal": bool,
    },
    "integrator": {
        "dt": float,
        "max_time": float,
        "record_stride": int,
        "representation": str,
        "time_unit": str,
        "exit_radius": float,
    },
    "ensemble": {"n_trajectories": int, "seed": int, "workers": int, "batch_size": int},
    "observables": {
        "populations": bool,
        "total_population": bool,
        "population_difference": list,
        "scattering_channels": bool,
        "basis": str,
        "divide_R": float,
    },
    "output": {"directory": str, "normalize": bool},
}


@dataclass
class RunConfig:
    model_spec: dict
    method: MethodSpec
    integrator: IntegratorConfig
    ensemble: EnsembleSpec
    observables: list
    output_dir: str
    normalize: bool
    time_scale: float  # multiply a.u. times by this on output
    time_unit: str
    raw: dict


def _err(path: str, msg: str) -> ConfigError:
    return ConfigError(f"config error at [{path}]: {msg}")


_PY_TYPES = {float: (int, float), int: int, str: str, bool: bool, list: list}


def _check_keys(block: dict, allowed: dict, path: str) -> None:
    for key, val in block.items():
        if key not in allowed:
            raise _err(path, f"unknown key '{key}' (allowed: {sorted(allowed)})")
        expected = allowed[key]
        types = expected if isinstance(expected, tuple) else (expected,)
        ok = False
        for t in types:
            if isinstance(val, bool) and t is not bool:
                continue  # bool is an int subclass; require explicit match
            if isinstance(val, _PY_TYPES[t]):
                ok = True
        if not ok:
            names = "/".join(t.__name__ for t in types)
            raise _err(path, f"key '{key}' must have type {names}")


def parse_config(data: dict) -> RunConfig:
    for section in data:
        if section not in _SCHEMA:
            raise _err(section, f"unknown section (allowed: {sorted(_SCHEMA)})")
    model = dict(data.get("model") or {})
    if "kind" not in model:
        raise _err("model", "missing required key 'kind'")
    kind = model["kind"]
    if kind not in _MODEL_KEYS:
        raise _err("model", f"unknown model kind '{kind}' (allowed: {sorted(_MODEL_KEYS)})")
    _check_keys(
        {k: v for k, v in model.items() if k != "kind"}, _MODEL_KEYS[kind], f"model.{kind}"
    )
    model_spec = dict(model)

    method_block = dict(data.get("method") or {})
    _check_keys(method_block, _SCHEMA["method"], "method")
    name = method_block.get("name", "cmm")
    if name not in ("cmm", "wmm", "ehrenfest", "fssh"):
        raise _err("method", f"unknown method '{name}'")
    scheme = None
    if name == "cmm":
        gamma = method_block.get("gamma", "star")
        if isinstance(gamma, str):
            if gamma != "star":
                raise _err("method", "gamma must be a number or 'star'")
            scheme = None  # resolved per-model F
        else:
            scheme = SingleGamma(float(gamma))
    elif name == "wmm":
        if "delta" not in method_block:
            raise _err("method", "wmm requires 'delta'")
        scheme = "pair"  # resolved once F is known
    method = MethodSpec(
        name=name,
        scheme=scheme if isinstance(scheme, SingleGamma) else None,
        init_state=method_block.get("init_state"),
        frustrated_reversal=method_block.get("frustrated_reversal", True),
    )

    integ = dict(data.get("integrator") or {})
    _check_keys(integ, _SCHEMA["integrator"], "integrator")
    time_unit = integ.pop("time_unit", "au")
    if time_unit not in ("au", "fs"):
        raise _err("integrator", "time_unit must be 'au' or 'fs'")
    unit_to_au = 1.0 / AU_TO_FS if time_unit == "fs" else 1.0
    if "dt" not in integ or "max_time" not in integ:
        raise _err("integrator", "dt and max_time are required")
    cfg = IntegratorConfig(
        dt=float(integ["dt"]) * unit_to_au,
        max_time=float(integ["max_time"]) * unit_to_au,
        record_stride=int(integ.get("record_stride", 1)),
        representation=integ.get("representation", "diabatic"),
        exit_radius=integ.get("exit_radius"),
    )

    ens_block = dict(data.get("ensemble") or {})
    _check_keys(ens_block, _SCHEMA["ensemble"], "ensemble")
    if "n_trajectories" not in ens_block:
        raise _err("ensemble", "n_trajectories is required")
    n_traj = int(ens_block["n_trajectories"])
    if n_traj < 1:
        raise _err("ensemble", "n_trajectories must be positive")
    ens = EnsembleSpec(
        n_trajectories=n_traj,
        seed=int(ens_block.get("seed", 0)),
        workers=int(ens_block.get("workers", 1)),
        batch_size=int(ens_block.get("batch_size", DEFAULT_BATCH)),
    )

    obs_block = dict(data.get("observables") or {})
    _check_keys(obs_block, _SCHEMA["observables"], "observables")
    observables = []
    if obs_block.get("populations", False):
        observables.append(ObservableSpec("populations"))
    if obs_block.get("total_population", False):
        observables.append(ObservableSpec("total_population"))
    if "population_difference" in obs_block:
        pair = obs_block["population_difference"]
        if len(pair) != 2:
            raise _err("observables", "population_difference needs [n1, n0]")
        observables.append(ObservableSpec("population_difference", (int(pair[0]), int(pair[1]))))
    if obs_block.get("scattering_channels", False):
        observables.append(
            ObservableSpec(
                "scattering_channels",
                basis=obs_block.get("basis", "diabatic"),
                divide_R=float(obs_block.get("divide_R", 0.0)),
            )
        )
    if not observables:
        observables = [ObservableSpec("populations")]

    out_block = dict(data.get("output") or {})
    _check_keys(out_block, _SCHEMA["output"], "output")

    return RunConfig(
        model_spec=model_spec,
        method=method,
        integrator=cfg,
        ensemble=ens,
        observables=observables,
        output_dir=out_block.get("directory", "out"),
        normalize=out_block.get("normalize", False),
        time_scale=AU_TO_FS if time_unit == "fs" else 1.0,
        time_unit=time_unit,
        raw=data,
    )


def resolve_scheme_for_model(run: RunConfig, F: int) -> None:
    """Fill in F-dependent gamma schemes once the model dimension is known."""
    if run.method.name == "wmm" and run.method.scheme is None:
        delta = run.raw.get("method", {}).get("delta")
        run.method.scheme = SymmetricPairGamma(float(delta), F)
    elif run.method.name == "cmm" and run.method.scheme is None:
        run.method.scheme = SingleGamma(gamma_star(F))


def load_config(path: str) -> RunConfig:
    try:
        with open(path, "rb") as fh:
            data = tomllib.load(fh)
    except tomllib.TOMLDecodeError as exc:
        raise ConfigError(f"{path}: {exc}") from exc
    return parse_config(data)
