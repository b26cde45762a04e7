"""Trajectory-ensemble nonadiabatic dynamics on (weighted) constraint phase space."""

__version__ = "0.1.0"

from .phasespace import (  # noqa: F401
    GammaDomainError,
    SingleGamma,
    SymmetricPairGamma,
    gamma_star,
    pair_weights,
    sample_constraint_sphere,
    kernel,
    inverse_kernel,
)
