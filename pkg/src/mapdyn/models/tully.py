"""Tully's three one-dimensional two-state scattering models (atomic units).

SAC: single avoided crossing; DAC: dual avoided crossing; ECR: extended
coupling region.  The nuclear mass defaults to 2000 a.u. (standard for these
benchmarks; exposed as an override).  The initial condition is a Gaussian
wavepacket of width parameter alpha centred at (R0, P0), whose Wigner
transform has var_R = 1/(2 alpha), var_P = alpha/2.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .base import DiabaticModel, InitialNuclearSpec

__all__ = ["TullyParams", "build_tully", "TULLY_DEFAULTS"]

TULLY_DEFAULTS = {
    "sac": {"A": 0.01, "B": 1.6, "C": 0.005, "D": 1.0, "R0": -3.8},
    "dac": {"A": 0.10, "B": 0.28, "E0": 0.05, "C": 0.015, "D": 0.06, "R0": -10.0},
    "ecr": {"E0": -0.0006, "B": 0.9, "C": 0.1, "R0": -13.0},
}


@dataclass
class TullyParams:
    variant: str = "sac"
    P0: float = 20.0
    R0: float | None = None
    alpha: float = 1.0
    mass: float = 2000.0
    overrides: dict = field(default_factory=dict)


def _sac_functions(A, B, C, D):
    def potential(R):
        R = np.asarray(R, dtype=float)
        r = R[..., 0]
        v11 = np.where(r >= 0, A * (1.0 - np.exp(-B * r)), -A * (1.0 - np.exp(B * r)))
        v12 = C * np.exp(-D * r * r)
        V = np.zeros(R.shape[:-1] + (2, 2))
        V[..., 0, 0] = v11
        V[..., 1, 1] = -v11
        V[..., 0, 1] = v12
        V[..., 1, 0] = v12
        return V

    def gradient(R):
        R = np.asarray(R, dtype=float)
        r = R[..., 0]
        dv11 = A * B * np.exp(-B * np.abs(r))
        dv12 = -2.0 * D * r * C * np.exp(-D * r * r)
        dV = np.zeros(R.shape[:-1] + (1, 2, 2))
        dV[..., 0, 0, 0] = dv11
        dV[..., 0, 1, 1] = -dv11
        dV[..., 0, 0, 1] = dv12
        dV[..., 0, 1, 0] = dv12
        return dV

    return potential, gradient


def _dac_functions(A, B, E0, C, D):
    def potential(R):
        R = np.asarray(R, dtype=float)
        r = R[..., 0]
        v22 = -A * np.exp(-B * r * r) + E0
        v12 = C * np.exp(-D * r * r)
        V = np.zeros(R.shape[:-1] + (2, 2))
        V[..., 1, 1] = v22
        V[..., 0, 1] = v12
        V[..., 1, 0] = v12
        return V

    def gradient(R):
        R = np.asarray(R, dtype=float)
        r = R[..., 0]
        dv22 = 2.0 * A * B * r * np.exp(-B * r * r)
        dv12 = -2.0 * C * D * r * np.exp(-D * r * r)
        dV = np.zeros(R.shape[:-1] + (1, 2, 2))
        dV[..., 0, 1, 1] = dv22
        dV[..., 0, 0, 1] = dv12
        dV[..., 0, 1, 0] = dv12
        return dV

    return potential, gradient


def _ecr_functions(E0, B, C):
    # V12 is continuous at R=0 (both branches give C), so the Heaviside
    # convention there is immaterial.
    def potential(R):
        R = np.asarray(R, dtype=float)
        r = R[..., 0]
        v12 = np.where(r < 0, C * np.exp(B * r), C * (2.0 - np.exp(-B * r)))
        V = np.zeros(R.shape[:-1] + (2, 2))
        V[..., 0, 0] = E0
        V[..., 1, 1] = -E0
        V[..., 0, 1] = v12
        V[..., 1, 0] = v12
        return V

    def gradient(R):
        R = np.asarray(R, dtype=float)
        r = R[..., 0]
        dv12 = C * B * np.exp(-B * np.abs(r))
        dV = np.zeros(R.shape[:-1] + (1, 2, 2))
        dV[..., 0, 0, 1] = dv12
        dV[..., 0, 1, 0] = dv12
        return dV

    return potential, gradient


def build_tully(params: TullyParams) -> DiabaticModel:
    variant = params.variant.lower()
    if variant not in TULLY_DEFAULTS:
        raise ValueError(f"unknown Tully variant {params.variant!r}; choose SAC, DAC, or ECR")
    consts = dict(TULLY_DEFAULTS[variant])
    consts.update(params.overrides)
    R0 = params.R0 if params.R0 is not None else consts["R0"]

    if variant == "sac":
        potential, gradient = _sac_functions(consts["A"], consts["B"], consts["C"], consts["D"])
    elif variant == "dac":
        potential, gradient = _dac_functions(
            consts["A"], consts["B"], consts["E0"], consts["C"], consts["D"]
        )
    else:
        potential, gradient = _ecr_functions(consts["E0"], consts["B"], consts["C"])

    alpha = params.alpha
    init = InitialNuclearSpec(
        mean_R=[R0], mean_P=[params.P0], var_R=[1.0 / (2.0 * alpha)], var_P=[alpha / 2.0]
    )
    return DiabaticModel(
        name=f"tully_{variant}",
        F=2,
        N=1,
        masses=[params.mass],
        potential=potential,
        potential_gradient=gradient,
        nuclear_init=init,
        init_state=0,
        params={
            "variant": variant,
            **consts,
            "R0": R0,
            "P0": params.P0,
            "alpha": alpha,
            "mass": params.mass,
        },
    )
