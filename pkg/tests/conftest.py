import numpy as np
import pytest

from mapdyn.models.base import DiabaticModel, InitialNuclearSpec


def make_frozen_model(delta: float = 0.3, diag: tuple = (0.0, 0.0)) -> DiabaticModel:
    """Two-level model with constant V and zero gradient (frozen nuclei)."""

    def pot(R):
        R = np.asarray(R, dtype=float)
        V = np.zeros(R.shape[:-1] + (2, 2))
        V[..., 0, 0] = diag[0]
        V[..., 1, 1] = diag[1]
        V[..., 0, 1] = delta
        V[..., 1, 0] = delta
        return V

    def grad(R):
        R = np.asarray(R, dtype=float)
        return np.zeros(R.shape[:-1] + (1, 2, 2))

    return DiabaticModel(
        name="frozen",
        F=2,
        N=1,
        masses=[1.0],
        potential=pot,
        potential_gradient=grad,
        nuclear_init=InitialNuclearSpec([0.0], [0.0], [1.0], [1.0]),
        init_state=0,
    )


@pytest.fixture
def frozen_model():
    return make_frozen_model()


@pytest.fixture
def rng():
    return np.random.default_rng(2024)
