"""Mapping kernels and sampling on (weighted) constraint coordinate-momentum phase space.

An F-state system is mapped onto the sphere

    sum_n [(x_n)^2 + (p_n)^2] / 2 = 1 + F*gamma,

with gamma in the open interval (-1/F, inf).  The "weighted" variant draws
gamma from a signed two-point quasi-probability distribution instead of
using a single value.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Union

import numpy as np

__all__ = [
    "GammaDomainError",
    "SingleGamma",
    "SymmetricPairGamma",
    "GammaScheme",
    "MappingState",
    "gamma_star",
    "chi",
    "pair_weights",
    "sphere_area",
    "sample_constraint_sphere",
    "sample_constraint_sphere_batch",
    "kernel",
    "inverse_kernel",
    "draw_gamma",
]


class GammaDomainError(ValueError):
    """Raised when a gamma value falls outside the admissible region."""


def _check_F(F: int) -> None:
    if not isinstance(F, (int, np.integer)) or F < 1:
        raise GammaDomainError(f"state count F must be a positive integer, got {F!r}")


def _check_gamma(gamma: float, F: int) -> None:
    # open interval: the boundary -1/F collapses the sphere to a point
    if not gamma > -1.0 / F:
        raise GammaDomainError(f"gamma={gamma} not in (-1/{F}, inf)")


def gamma_star(F: int) -> float:
    """The gamma making the mapping kernel its own inverse: (sqrt(1+F)-1)/F."""
    _check_F(F)
    return (math.sqrt(1.0 + F) - 1.0) / F


def chi(gamma: float, F: int) -> float:
    """Quadratic weight function F*gamma^2 + 2*gamma."""
    return F * gamma * gamma + 2.0 * gamma


def pair_weights(delta: float, F: int) -> tuple[float, float]:
    """Signed weights (w_plus, w_minus) of the symmetric two-point gamma distribution.

    The pair gamma = +delta (weight w_plus) and gamma = -delta (weight w_minus)
    is fixed by requiring the weights to sum to 1 and the chi-average to be 1.
    w_minus is negative; both diverge as delta -> 0.
    """
    _check_F(F)
    if not (0.0 < delta < 1.0 / F):
        raise GammaDomainError(f"delta={delta} not in (0, 1/{F})")
    chi_p = chi(delta, F)
    chi_m = chi(-delta, F)
    w_plus = (1.0 - chi_m) / (chi_p - chi_m)
    # forcing the sum keeps normalization exact in floating point
    w_minus = 1.0 - w_plus
    return w_plus, w_minus


def sphere_area(gamma: float, F: int) -> float:
    """Surface area of the constraint sphere, (2 pi)^F / Gamma(F) * (1+F*gamma)^(F-1)."""
    _check_F(F)
    _check_gamma(gamma, F)
    return (2.0 * math.pi) ** F / math.gamma(F) * (1.0 + F * gamma) ** (F - 1)


@dataclass(frozen=True)
class SingleGamma:
    """Fixed-gamma scheme (one constraint sphere)."""

    gamma: float

    def validate(self, F: int) -> None:
        _check_gamma(self.gamma, F)

    @property
    def n_branches(self) -> int:
        return 1

    def label(self) -> str:
        return f"single({self.gamma:.12g})"


@dataclass(frozen=True)
class SymmetricPairGamma:
    """Two-point scheme gamma = +/-delta with signed weights.

    Weights are derived from (delta, F) at construction; F is required because
    the weights depend on the state count.
    """

    delta: float
    F: int
    w_plus: float = field(init=False)
    w_minus: float = field(init=False)

    def __post_init__(self):
        wp, wm = pair_weights(self.delta, self.F)
        object.__setattr__(self, "w_plus", wp)
        object.__setattr__(self, "w_minus", wm)

    def validate(self, F: int) -> None:
        if F != self.F:
            raise GammaDomainError(f"scheme built for F={self.F}, used with F={F}")

    @property
    def n_branches(self) -> int:
        return 2

    def label(self) -> str:
        return f"pair(delta={self.delta:.12g})"


GammaScheme = Union[SingleGamma, SymmetricPairGamma]


def draw_gamma(scheme: GammaScheme, branch_index: int) -> tuple[float, float]:
    """Gamma value and statistical weight of one branch of a scheme.

    Branch selection is deterministic: the ensemble runner allocates equal
    trajectory counts per branch and folds the signed weight into the
    estimator.
    """
    if isinstance(scheme, SingleGamma):
        if branch_index != 0:
            raise ValueError(f"single-gamma scheme has one branch, got index {branch_index}")
        return scheme.gamma, 1.0
    if isinstance(scheme, SymmetricPairGamma):
        if branch_index == 0:
            return scheme.delta, scheme.w_plus
        if branch_index == 1:
            return -scheme.delta, scheme.w_minus
        raise ValueError(f"branch index must be 0 or 1, got {branch_index}")
    raise TypeError(f"unknown gamma scheme {scheme!r}")


@dataclass
class MappingState:
    """Electronic mapping coordinates/momenta with their gamma and signed weight."""

    x: np.ndarray
    p: np.ndarray
    gamma: float
    weight: float = 1.0

    @property
    def F(self) -> int:
        return self.x.shape[-1]

    @property
    def g(self) -> np.ndarray:
        return self.x + 1j * self.p

    def radius_sq(self) -> float:
        return float(np.sum(self.x**2 + self.p**2) / 2.0)


def sample_constraint_sphere_batch(
    F: int, gamma: float, rng: np.random.Generator, n: int
) -> tuple[np.ndarray, np.ndarray]:
    """Draw n points uniformly on the constraint sphere; returns (x, p) of shape (n, F).

    2F independent standard normals per point, rescaled exactly to squared
    norm 2(1+F*gamma); uniformity follows from rotational invariance.
    """
    _check_F(F)
    _check_gamma(gamma, F)
    z = rng.standard_normal((n, 2 * F))
    norm = np.sqrt(np.sum(z * z, axis=1, keepdims=True))
    z *= math.sqrt(2.0 * (1.0 + F * gamma)) / norm
    return z[:, :F].copy(), z[:, F:].copy()


def sample_constraint_sphere(F: int, gamma: float, rng: np.random.Generator) -> MappingState:
    """Draw a single uniform point on the constraint sphere."""
    x, p = sample_constraint_sphere_batch(F, gamma, rng, 1)
    return MappingState(x=x[0], p=p[0], gamma=gamma)


def kernel(state: MappingState) -> np.ndarray:
    """Mapping kernel K_nm = (x_n + i p_n)(x_m - i p_m)/2 - gamma delta_nm."""
    g = state.g
    return 0.5 * np.outer(g, g.conj()) - state.gamma * np.eye(state.F)


def inverse_kernel(state: MappingState) -> np.ndarray:
    """Inverse mapping kernel; singular at 1 + F*gamma = 0."""
    F = state.F
    denom = 1.0 + F * state.gamma
    if denom == 0.0:
        raise GammaDomainError("inverse kernel singular at 1 + F*gamma = 0")
    g = state.g
    return (1.0 + F) / (2.0 * denom * denom) * np.outer(g, g.conj()) - (
        (1.0 - state.gamma) / denom
    ) * np.eye(F)


def kernel_diag_batch(x: np.ndarray, p: np.ndarray, gamma) -> np.ndarray:
    """Diagonal kernel entries (x_n^2 + p_n^2)/2 - gamma for batched (n, F) arrays."""
    gam = np.asarray(gamma)
    return 0.5 * (x * x + p * p) - gam[..., None] if gam.ndim else 0.5 * (x * x + p * p) - gam


def sphere_moment2(F: int, gamma: float) -> float:
    """Closed-form second moment <X_i X_i> on the constraint sphere."""
    return (1.0 + F * gamma) / F


def sphere_moment4(F: int, gamma: float, i: int, j: int, k: int, l: int) -> float:
    """Closed-form fourth moment <X_i X_j X_k X_l> on the constraint sphere."""
    pref = (1.0 + F * gamma) ** 2 / (F * (F + 1.0))
    d = lambda a, b: 1.0 if a == b else 0.0
    return pref * (d(i, j) * d(k, l) + d(i, k) * d(j, l) + d(i, l) * d(j, k))
