import pytest

from deadline_bcast import ErasureProbs

REFERENCE_EPS = ErasureProbs(0.1, 0.2, 0.2, 0.5)


@pytest.fixture
def eps():
    return REFERENCE_EPS
