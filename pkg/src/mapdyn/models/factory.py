"""Build models from plain dictionaries (config files, worker processes)."""

from __future__ import annotations

import numpy as np

from .base import DiabaticModel
from .cavity import CavityParams, build_cavity
from .lvcm import LVCMParams, build_lvcm, pyrazine_params
from .spin_boson import SpinBosonParams, build_spin_boson
from .tully import TullyParams, build_tully

__all__ = ["from_spec"]


def from_spec(spec: dict) -> DiabaticModel:
    spec = dict(spec)
    kind = spec.pop("kind")
    if kind == "spin_boson":
        return build_spin_boson(SpinBosonParams(**spec))
    if kind == "tully":
        return build_tully(TullyParams(**spec))
    if kind == "cavity":
        return build_cavity(CavityParams(**spec))
    if kind == "lvcm":
        preset = spec.pop("preset", "pyrazine")
        if preset == "pyrazine":
            params = pyrazine_params()
        else:
            params = LVCMParams(
                omega=np.asarray(spec.pop("omega")),
                E=np.asarray(spec.pop("E")),
                kappa=np.asarray(spec.pop("kappa")),
                lam=np.asarray(spec.pop("lam")),
                init_state=spec.pop("init_state", 1),
            )
        if spec:
            raise ValueError(f"unused lvcm keys: {sorted(spec)}")
        return build_lvcm(params)
    raise ValueError(f"unknown model kind {kind!r}")
