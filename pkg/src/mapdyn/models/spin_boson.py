"""Two-site system bilinearly coupled to a discretized Ohmic harmonic bath.

Reduced units (hbar = 1, unit bath masses).  Basis ordering: index 1 is the
initially occupied site with bias +epsilon, index 0 the other site, so the
population difference P1 - P0 starts at +1.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .base import DiabaticModel, InitialNuclearSpec

__all__ = ["SpinBosonParams", "build_spin_boson", "discretize_ohmic_bath"]


@dataclass
class SpinBosonParams:
    epsilon: float = 1.0
    tunneling: float = 1.0
    kondo_alpha: float = 0.1
    omega_c: float = 1.0
    beta: float = 5.0
    n_modes: int = 300


def discretize_ohmic_bath(
    kondo_alpha: float, omega_c: float, n_modes: int
) -> tuple[np.ndarray, np.ndarray]:
    """Frequencies and couplings for the Ohmic density J(w) = (pi/2) alpha w exp(-w/wc).

    omega_j = -wc * ln(1 - j/(1+Nb)),  c_j = omega_j * sqrt(alpha*wc/(1+Nb)).
    """
    if n_modes < 1:
        raise ValueError("n_modes must be >= 1")
    if omega_c <= 0:
        raise ValueError("omega_c must be positive")
    if kondo_alpha < 0:
        raise ValueError("kondo_alpha must be non-negative")
    j = np.arange(1, n_modes + 1, dtype=float)
    omega = -omega_c * np.log(1.0 - j / (1.0 + n_modes))
    c = omega * np.sqrt(kondo_alpha * omega_c / (1.0 + n_modes))
    return omega, c


def thermal_wigner_variances(omega: np.ndarray, beta: float) -> tuple[np.ndarray, np.ndarray]:
    """Per-mode (var_R, var_P) of the thermal Wigner distribution of a unit-mass oscillator."""
    coth = 1.0 / np.tanh(beta * omega / 2.0)
    return coth / (2.0 * omega), (omega / 2.0) * coth


def build_spin_boson(params: SpinBosonParams) -> DiabaticModel:
    omega, c = discretize_ohmic_bath(params.kondo_alpha, params.omega_c, params.n_modes)
    eps = params.epsilon
    tun = params.tunneling
    omega_sq = omega * omega
    N = params.n_modes

    def potential(R: np.ndarray) -> np.ndarray:
        R = np.asarray(R, dtype=float)
        batch = R.shape[:-1]
        V = np.zeros(batch + (2, 2))
        bias = np.einsum("...j,j->...", R, c)
        harm = 0.5 * np.einsum("...j,j->...", R * R, omega_sq)
        V[..., 0, 0] = -eps + bias + harm
        V[..., 1, 1] = eps - bias + harm
        V[..., 0, 1] = tun
        V[..., 1, 0] = tun
        return V

    def potential_gradient(R: np.ndarray) -> np.ndarray:
        R = np.asarray(R, dtype=float)
        batch = R.shape[:-1]
        dV = np.zeros(batch + (N, 2, 2))
        harm = omega_sq * R
        dV[..., :, 0, 0] = c + harm
        dV[..., :, 1, 1] = -c + harm
        return dV

    var_R, var_P = thermal_wigner_variances(omega, params.beta)
    init = InitialNuclearSpec(
        mean_R=np.zeros(N), mean_P=np.zeros(N), var_R=var_R, var_P=var_P
    )
    return DiabaticModel(
        name="spin_boson",
        F=2,
        N=N,
        masses=np.ones(N),
        potential=potential,
        potential_gradient=potential_gradient,
        nuclear_init=init,
        init_state=1,
        params={
            "epsilon": eps,
            "tunneling": tun,
            "kondo_alpha": params.kondo_alpha,
            "omega_c": params.omega_c,
            "beta": params.beta,
            "n_modes": N,
            "omegas": tuple(float(w) for w in omega),
            "omega_1": float(omega[0]),
            "omega_max": float(omega[-1]),
        },
    )
