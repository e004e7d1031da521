import sys
from pathlib import Path

import pytest

sys.path.insert(0, str(Path(__file__).parent))

from fragkill.levy import make_model
from fragkill.measure import binary_measure, make_dislocation_measure

from helpers import CPBAR_BINARY


@pytest.fixture(scope="session")
def nu_binary():
    return binary_measure()


@pytest.fixture(scope="session")
def nu_half_quarter():
    """Dissipative reference: one atom (1/2, 1/4), dust rate 1/4."""
    return make_dislocation_measure([(1.0, (0.5, 0.25))])


@pytest.fixture(scope="session")
def model_2c(nu_binary):
    """Binary measure with barrier drift at twice the critical speed."""
    return make_model(2.0 * CPBAR_BINARY, nu_binary)
