import numpy as np
import pytest

from ghzverify.qstate import DensityMatrix, PureState


def random_pure(n: int, rng: np.random.Generator) -> PureState:
    v = rng.normal(size=2**n) + 1j * rng.normal(size=2**n)
    return PureState(n, v / np.linalg.norm(v))


def random_density(n: int, rng: np.random.Generator) -> DensityMatrix:
    d = 2**n
    g = rng.normal(size=(d, d)) + 1j * rng.normal(size=(d, d))
    mat = g @ g.conj().T
    return DensityMatrix(n, mat / np.trace(mat).real)


def random_valid_theta_angles(n: int, rng: np.random.Generator) -> list[float]:
    free = rng.uniform(0.0, np.pi, n - 1)
    return list(free) + [float((-free.sum()) % np.pi)]


@pytest.fixture
def rng():
    return np.random.default_rng(20260808)
