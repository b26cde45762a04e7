"""Linear vibronic coupling models in mass/frequency-weighted normal modes.

The harmonic part is sum_k omega_k (P_k^2 + R_k^2)/2, so the inverse mass of
mode k equals omega_k.  Diagonal blocks carry the vertical energies E_n and
linear shifts kappa; off-diagonal blocks carry linear couplings lambda.
Inputs for the bundled pyrazine parameter set are given in eV and converted
to atomic units at build time.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .base import DiabaticModel, InitialNuclearSpec

__all__ = ["LVCMParams", "build_lvcm", "pyrazine_params", "EV_TO_AU", "AU_TO_FS"]

EV_TO_AU = 0.0367493
AU_TO_FS = 0.02418884


@dataclass
class LVCMParams:
    """All energies in atomic units; see pyrazine_params for the eV preset."""

    omega: np.ndarray  # (N,) mode frequencies
    E: np.ndarray  # (F,) vertical energies
    kappa: np.ndarray  # (F, N) diagonal linear couplings
    lam: np.ndarray  # (F, F, N) off-diagonal linear couplings, symmetric in states
    init_state: int = 1


def pyrazine_params() -> LVCMParams:
    """Two-level, three-mode S1/S2 vibronic model of pyrazine (converted from eV)."""
    omega = np.array([0.126, 0.074, 0.118]) * EV_TO_AU
    E = np.array([3.94, 4.84]) * EV_TO_AU
    kappa = np.array([[0.037, -0.105, 0.0], [-0.254, 0.149, 0.0]]) * EV_TO_AU
    lam = np.zeros((2, 2, 3))
    lam[0, 1, 2] = lam[1, 0, 2] = 0.262 * EV_TO_AU
    return LVCMParams(omega=omega, E=E, kappa=kappa, lam=lam, init_state=1)


def build_lvcm(params: LVCMParams) -> DiabaticModel:
    omega = np.asarray(params.omega, dtype=float)
    E = np.asarray(params.E, dtype=float)
    kappa = np.asarray(params.kappa, dtype=float)
    lam = np.asarray(params.lam, dtype=float)
    N = omega.shape[0]
    F = E.shape[0]
    if kappa.shape != (F, N) or lam.shape != (F, F, N):
        raise ValueError("inconsistent coupling dimensions")
    if not np.allclose(lam, np.swapaxes(lam, 0, 1)):
        raise ValueError("lambda couplings must be symmetric in the state indices")
    off_lam = lam.copy()
    off_lam[np.arange(F), np.arange(F), :] = 0.0

    def potential(R: np.ndarray) -> np.ndarray:
        R = np.asarray(R, dtype=float)
        batch = R.shape[:-1]
        V = np.einsum("nmk,...k->...nm", off_lam, R)
        harm = 0.5 * np.einsum("...k,k->...", R * R, omega)
        diag = E + np.einsum("nk,...k->...n", kappa, R)
        idx = np.arange(F)
        V[..., idx, idx] += diag + harm[..., None]
        return V.reshape(batch + (F, F))

    lam_t = np.ascontiguousarray(np.transpose(off_lam, (2, 0, 1)))  # (N, F, F)
    diag_const = kappa.T.copy()  # (N, F)

    def potential_gradient(R: np.ndarray) -> np.ndarray:
        R = np.asarray(R, dtype=float)
        batch = R.shape[:-1]
        dV = np.empty(batch + (N, F, F))
        dV[...] = lam_t
        idx = np.arange(F)
        dV[..., idx, idx] = diag_const + (omega * R)[..., :, None]
        return dV

    init = InitialNuclearSpec(
        mean_R=np.zeros(N),
        mean_P=np.zeros(N),
        var_R=np.full(N, 0.5),
        var_P=np.full(N, 0.5),
    )
    return DiabaticModel(
        name="lvcm",
        F=F,
        N=N,
        masses=1.0 / omega,
        potential=potential,
        potential_gradient=potential_gradient,
        nuclear_init=init,
        init_state=params.init_state,
        params={"omega": tuple(omega), "E": tuple(E)},
    )
