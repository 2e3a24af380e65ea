import numpy as np
import pytest

from vpbspec.collision import (RelaxationSpectrum, assemble_bgk, assemble_hard_sphere,
                               assemble_spectral_relaxation)
from vpbspec.velocity import build_basis


@pytest.fixture(scope="session")
def basis8():
    return build_basis(8)


@pytest.fixture(scope="session")
def basis6():
    return build_basis(6)


@pytest.fixture(scope="session")
def bgk(basis8):
    return assemble_bgk(1.0, basis8)


@pytest.fixture(scope="session")
def spectral(basis8):
    return assemble_spectral_relaxation(RelaxationSpectrum.from_function(8), basis8)


@pytest.fixture(scope="session")
def hard_sphere(basis6):
    return assemble_hard_sphere(basis6)


@pytest.fixture(scope="session")
def bgk6(basis6):
    return assemble_bgk(1.0, basis6)


@pytest.fixture
def rng():
    return np.random.default_rng(20240607)
