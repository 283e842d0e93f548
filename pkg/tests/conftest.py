import sys
from pathlib import Path

import numpy as np
import pytest

sys.path.insert(0, str(Path(__file__).parent))

from stub_server import StubBackend


@pytest.fixture(scope="session")
def stub_backend():
    backend = StubBackend()
    yield backend
    backend.close()


@pytest.fixture
def rng():
    return np.random.default_rng(1234)
