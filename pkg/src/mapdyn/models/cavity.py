"""Multi-level atom coupled to the standing-wave modes of a 1-D lossless cavity.

Hartree atomic units.  The photonic harmonic energy is kept on the diagonal
of V(R), so the potential gradient carries the harmonic restoring force.
Mode frequencies are omega_j = j*pi*c/L with c = 137.035999 a.u.; the
atom-mode coupling is lambda_j(r0) = sqrt(2/(eps0*L)) * sin(j*pi*r0/L) with
eps0 = 1/(4*pi) in atomic units.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .base import DiabaticModel, InitialNuclearSpec

__all__ = ["CavityParams", "build_cavity"]

SPEED_OF_LIGHT_AU = 137.035999
VACUUM_PERMITTIVITY_AU = 1.0 / (4.0 * np.pi)

# three-level atom defaults; the two-level reduction keeps the lowest two
THREE_LEVEL_ENERGIES = (-0.6738, -0.2798, -0.1547)
DIPOLE_12 = -1.034
DIPOLE_23 = -2.536


@dataclass
class CavityParams:
    n_levels: int = 3
    n_modes: int = 400
    length: float = 236200.0
    atom_position: float | None = None  # default: cavity centre
    level_energies: tuple | None = None
    dipoles: dict | None = None  # {(n, m): mu_nm}, 0-based, n < m


def build_cavity(params: CavityParams) -> DiabaticModel:
    if params.n_modes < 1:
        raise ValueError("n_modes must be >= 1")
    if params.length <= 0:
        raise ValueError("cavity length must be positive")
    r0 = params.atom_position if params.atom_position is not None else params.length / 2.0
    if not 0.0 < r0 < params.length:
        raise ValueError("atom position must lie inside the cavity")

    F = params.n_levels
    if params.level_energies is not None:
        eps = np.asarray(params.level_energies, dtype=float)
        if eps.shape != (F,):
            raise ValueError("level_energies length must match n_levels")
    else:
        if F not in (2, 3):
            raise ValueError("default level energies exist only for 2 or 3 levels")
        eps = np.asarray(THREE_LEVEL_ENERGIES[:F])

    mu = np.zeros((F, F))
    if params.dipoles is not None:
        for (n, m), val in params.dipoles.items():
            mu[n, m] = mu[m, n] = val
    else:
        mu[0, 1] = mu[1, 0] = DIPOLE_12
        if F >= 3:
            mu[1, 2] = mu[2, 1] = DIPOLE_23

    N = params.n_modes
    j = np.arange(1, N + 1, dtype=float)
    omega = j * np.pi * SPEED_OF_LIGHT_AU / params.length
    lam = np.sqrt(2.0 / (VACUUM_PERMITTIVITY_AU * params.length)) * np.sin(
        j * np.pi * r0 / params.length
    )
    coupling = omega * lam  # linear coefficient of R_j in the interaction
    omega_sq = omega * omega
    off_mask = ~np.eye(F, dtype=bool)

    def potential(R: np.ndarray) -> np.ndarray:
        R = np.asarray(R, dtype=float)
        batch = R.shape[:-1]
        field_amp = np.einsum("...j,j->...", R, coupling)
        harm = 0.5 * np.einsum("...j,j->...", R * R, omega_sq)
        V = np.zeros(batch + (F, F))
        V += field_amp[..., None, None] * (mu * off_mask)
        idx = np.arange(F)
        V[..., idx, idx] += eps + harm[..., None]
        return V

    def potential_gradient(R: np.ndarray) -> np.ndarray:
        R = np.asarray(R, dtype=float)
        batch = R.shape[:-1]
        dV = np.zeros(batch + (N, F, F))
        dV += coupling[..., :, None, None] * (mu * off_mask)
        idx = np.arange(F)
        dV[..., idx, idx] += (omega_sq * R)[..., :, None]
        return dV

    init = InitialNuclearSpec(
        mean_R=np.zeros(N),
        mean_P=np.zeros(N),
        var_R=1.0 / (2.0 * omega),
        var_P=omega / 2.0,
    )
    return DiabaticModel(
        name=f"cavity_{F}level",
        F=F,
        N=N,
        masses=np.ones(N),
        potential=potential,
        potential_gradient=potential_gradient,
        nuclear_init=init,
        init_state=F - 1,
        params={
            "n_levels": F,
            "n_modes": N,
            "length": params.length,
            "atom_position": r0,
            "level_energies": tuple(eps),
            "omegas": tuple(float(w) for w in omega),
            "omega_1": float(omega[0]),
        },
    )
