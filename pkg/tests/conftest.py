import sys
from pathlib import Path

import numpy as np
import pytest

sys.path.insert(0, str(Path(__file__).parent))

from polyheat.clamped_spectrum import EigenCache  # noqa: E402
from polyheat.cylinder import CylinderDatum, CylinderSolver  # noqa: E402


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


@pytest.fixture(scope="session")
def cylinder_cache():
    """Eigenpairs on the default cross-section mesh, shared by all cylinder tests."""
    return EigenCache(200, 12)


@pytest.fixture(scope="session")
def bump_solver(cylinder_cache):
    return CylinderSolver(CylinderDatum.gaussian_bump(), 12, cylinder_cache)


@pytest.fixture(scope="session")
def mixed_solver(cylinder_cache):
    return CylinderSolver(CylinderDatum.sign_changing(), 12, cylinder_cache)
