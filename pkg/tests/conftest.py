import numpy as np
import pytest

from pathlib import Path

REPO = Path(__file__).resolve().parent.parent
FIXTURES = REPO / "fixtures"


@pytest.fixture(scope="session")
def fixtures_dir():
    if not FIXTURES.is_dir():
        pytest.skip("fixtures/ missing; run scripts/make_fixtures.py")
    return FIXTURES


@pytest.fixture(scope="session")
def activations_dir(fixtures_dir):
    return fixtures_dir / "activations"


@pytest.fixture(scope="session")
def audio_dir(fixtures_dir):
    return fixtures_dir / "audio"


@pytest.fixture
def rng():
    return np.random.default_rng(0)
