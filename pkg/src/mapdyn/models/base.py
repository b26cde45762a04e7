"""Diabatic model interface, adiabatic data, and initial-condition sampling.

A model is defined by a real symmetric potential matrix V(R), its gradient,
a diagonal mass matrix, and per-DOF Gaussian parameters for the initial
nuclear Wigner distribution.  Potential/gradient callables accept either a
single configuration R of shape (N,) or a batch of shape (B, N) and return
(..., F, F) / (..., N, F, F) arrays.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np

__all__ = [
    "InitialNuclearSpec",
    "DiabaticModel",
    "AdiabaticData",
    "DegenerateEnergiesError",
    "adiabatize",
    "adiabatize_batch",
    "sample_nuclear_initial",
    "gradient_matches_fd",
]


class DegenerateEnergiesError(RuntimeError):
    """Adiabatic energies coincide at the evaluation point (conical intersection)."""


@dataclass
class InitialNuclearSpec:
    """Independent Gaussian (Wigner) parameters per nuclear DOF."""

    mean_R: np.ndarray
    mean_P: np.ndarray
    var_R: np.ndarray
    var_P: np.ndarray

    def __post_init__(self):
        self.mean_R = np.atleast_1d(np.asarray(self.mean_R, dtype=float))
        self.mean_P = np.atleast_1d(np.asarray(self.mean_P, dtype=float))
        self.var_R = np.atleast_1d(np.asarray(self.var_R, dtype=float))
        self.var_P = np.atleast_1d(np.asarray(self.var_P, dtype=float))
        if np.any(self.var_R <= 0) or np.any(self.var_P <= 0):
            raise ValueError("Wigner variances must be positive")


@dataclass
class DiabaticModel:
    """Composite-system Hamiltonian in the diabatic representation.

    Immutable after construction; shared read-only across trajectory workers.
    """

    name: str
    F: int
    N: int
    masses: np.ndarray
    potential: Callable[[np.ndarray], np.ndarray]
    potential_gradient: Callable[[np.ndarray], np.ndarray]
    nuclear_init: InitialNuclearSpec
    init_state: int = 0
    params: dict = field(default_factory=dict)

    def __post_init__(self):
        self.masses = np.atleast_1d(np.asarray(self.masses, dtype=float))
        if self.masses.shape != (self.N,):
            raise ValueError(f"masses must have shape ({self.N},)")
        if not 0 <= self.init_state < self.F:
            raise ValueError("init_state out of range")

    @property
    def inv_masses(self) -> np.ndarray:
        return 1.0 / self.masses


@dataclass
class AdiabaticData:
    """Adiabatic energies E, eigenvector matrix U (columns), and couplings d.

    d has shape (N, F, F), is antisymmetric in the state indices, and has
    zero diagonal.
    """

    E: np.ndarray
    U: np.ndarray
    d: np.ndarray


def _fix_gauge(U: np.ndarray, previous_U: Optional[np.ndarray]) -> np.ndarray:
    if previous_U is None:
        # first-nonzero-positive convention
        for k in range(U.shape[1]):
            col = U[:, k]
            idx = np.argmax(np.abs(col) > 1e-12)
            if col[idx] < 0:
                U[:, k] = -col
        return U
    signs = np.sign(np.einsum("ik,ik->k", previous_U, U))
    signs[signs == 0] = 1.0
    return U * signs[None, :]


def adiabatize(
    V: np.ndarray, gradV: np.ndarray, previous_U: Optional[np.ndarray] = None
) -> AdiabaticData:
    """Diagonalize V and build nonadiabatic coupling vectors.

    Couplings follow from the Hellmann-Feynman relation
    d_kl = (U^T gradV U)_kl / (E_l - E_k); antisymmetry is enforced exactly.
    Raises DegenerateEnergiesError when adjacent energies are closer than 1e-12.
    """
    E, U = np.linalg.eigh(V)
    if np.min(np.diff(E)) < 1e-12:
        raise DegenerateEnergiesError(f"adiabatic energies degenerate: {E}")
    U = _fix_gauge(U, previous_U)
    # W[a,k,m] = (U^T gradV_a U)_{km}; a runs over nuclear DOFs
    W = np.einsum("nk,anm,mj->akj", U, gradV, U)
    F = V.shape[0]
    dE = E[None, :] - E[:, None]  # dE[k,l] = E_l - E_k
    with np.errstate(divide="ignore", invalid="ignore"):
        d = np.where(np.eye(F, dtype=bool), 0.0, W / dE[None, :, :])
    d = 0.5 * (d - np.swapaxes(d, -1, -2))
    return AdiabaticData(E=E, U=U, d=d)


def _adiabatize_batch_2x2(
    V: np.ndarray, gradV: np.ndarray, previous_U: Optional[np.ndarray]
) -> AdiabaticData:
    """Closed-form two-state diagonalization (no per-item LAPACK calls)."""
    a = V[:, 0, 0]
    b = V[:, 1, 1]
    c = V[:, 0, 1]
    mean = 0.5 * (a + b)
    rad = np.hypot(0.5 * (a - b), c)
    if np.min(2.0 * rad) < 1e-12:
        raise DegenerateEnergiesError("adiabatic energies degenerate within batch")
    E = np.stack([mean - rad, mean + rad], axis=-1)
    phi = 0.5 * np.arctan2(2.0 * c, a - b)
    cphi, sphi = np.cos(phi), np.sin(phi)
    U = np.empty_like(V)
    U[:, 0, 0] = -sphi
    U[:, 1, 0] = cphi
    U[:, 0, 1] = cphi
    U[:, 1, 1] = sphi
    if previous_U is None:
        ref = np.argmax(np.abs(U) > 1e-12, axis=-2)
        picked = np.take_along_axis(U, ref[:, None, :], axis=-2)[:, 0, :]
        signs = np.where(picked < 0, -1.0, 1.0)
    else:
        signs = np.sign(np.einsum("bik,bik->bk", previous_U, U))
        signs[signs == 0] = 1.0
    U *= signs[:, None, :]
    u0 = U[:, :, 0]
    u1 = U[:, :, 1]
    w01 = np.einsum("bn,blnm,bm->bl", u0, gradV, u1)
    d01 = w01 / (2.0 * rad)[:, None]
    d = np.zeros(gradV.shape)
    d[:, :, 0, 1] = d01
    d[:, :, 1, 0] = -d01
    return AdiabaticData(E=E, U=U, d=d)


def adiabatize_batch(
    V: np.ndarray, gradV: np.ndarray, previous_U: Optional[np.ndarray] = None
) -> AdiabaticData:
    """Batched adiabatize: V (B,F,F), gradV (B,N,F,F), previous_U (B,F,F) or None."""
    if V.shape[-1] == 2 and not np.iscomplexobj(V):
        return _adiabatize_batch_2x2(V, gradV, previous_U)
    E, U = np.linalg.eigh(V)
    if np.min(np.diff(E, axis=-1)) < 1e-12:
        raise DegenerateEnergiesError("adiabatic energies degenerate within batch")
    if previous_U is None:
        F = V.shape[-1]
        ref = np.argmax(np.abs(U) > 1e-12, axis=-2)
        picked = np.take_along_axis(U, ref[:, None, :], axis=-2)[:, 0, :]
        signs = np.where(picked < 0, -1.0, 1.0)
    else:
        signs = np.sign(np.einsum("bik,bik->bk", previous_U, U))
        signs[signs == 0] = 1.0
    U = U * signs[:, None, :]
    W = np.einsum("bnk,banm,bml->bakl", U, gradV, U)
    F = V.shape[-1]
    dE = E[:, None, :] - E[:, :, None]  # dE[b,k,l] = E_l - E_k
    with np.errstate(divide="ignore", invalid="ignore"):
        d = np.where(np.eye(F, dtype=bool), 0.0, W / dE[:, None, :, :])
    d = 0.5 * (d - np.swapaxes(d, -1, -2))
    return AdiabaticData(E=E, U=U, d=d)


def sample_nuclear_initial(
    model: DiabaticModel, rng: np.random.Generator, n: int = 1
) -> tuple[np.ndarray, np.ndarray]:
    """Draw (R, P) of shape (n, N) from the model's initial Wigner Gaussians."""
    spec = model.nuclear_init
    R = spec.mean_R + np.sqrt(spec.var_R) * rng.standard_normal((n, model.N))
    P = spec.mean_P + np.sqrt(spec.var_P) * rng.standard_normal((n, model.N))
    return R, P


def gradient_matches_fd(
    model: DiabaticModel,
    R: np.ndarray,
    step: float = 1e-4,
    rtol: float = 1e-5,
    atol: float = 1e-12,
) -> bool:
    """Spot-check the analytic gradient against central finite differences.

    atol absorbs the finite-difference rounding floor where the true gradient
    underflows (e.g. far in the asymptotic region of scattering models).
    """
    grad = model.potential_gradient(R)
    fd = np.empty_like(grad)
    for j in range(model.N):
        dR = np.zeros(model.N)
        dR[j] = step
        fd[j] = (model.potential(R + dR) - model.potential(R - dR)) / (2 * step)
    scale = np.max(np.abs(grad)) + np.max(np.abs(fd))
    return bool(np.max(np.abs(grad - fd)) <= rtol * scale + atol)
