import numpy as np
import pytest

from incompat import channels
from incompat.preservability import xyz_probes, xz_probes


@pytest.fixture(scope="session")
def identity_qubit():
    return channels.identity_channel(2)


@pytest.fixture(scope="session")
def xyz():
    return xyz_probes(2)


@pytest.fixture(scope="session")
def xz():
    return xz_probes()


@pytest.fixture
def rng():
    return np.random.default_rng(1234)
