"""Benchmark composite-system Hamiltonians and adiabatic-representation helpers."""

from .base import (  # noqa: F401
    AdiabaticData,
    DegenerateEnergiesError,
    DiabaticModel,
    InitialNuclearSpec,
    adiabatize,
    adiabatize_batch,
    gradient_matches_fd,
    sample_nuclear_initial,
)
from .cavity import CavityParams, build_cavity  # noqa: F401
from .lvcm import AU_TO_FS, EV_TO_AU, LVCMParams, build_lvcm, pyrazine_params  # noqa: F401
from .spin_boson import SpinBosonParams, build_spin_boson, discretize_ohmic_bath  # noqa: F401
from .tully import TULLY_DEFAULTS, TullyParams, build_tully  # noqa: F401
