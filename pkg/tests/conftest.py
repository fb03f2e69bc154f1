import sys
from pathlib import Path

import numpy as np
import pytest

sys.path.insert(0, str(Path(__file__).parent))

from lindcycle.models import build_counterexample, build_driven_qubit, build_repaired_counterexample, shipped_models
from lindcycle.propagation import monodromy


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


@pytest.fixture(scope="session")
def driven():
    return build_driven_qubit()


@pytest.fixture(scope="session")
def counterexample():
    return build_counterexample()


@pytest.fixture(scope="session")
def repaired():
    return build_repaired_counterexample()


@pytest.fixture(scope="session")
def models():
    return shipped_models()


@pytest.fixture(scope="session")
def periodic_models(models):
    return [m for m in models if m.protocol.periodic]


@pytest.fixture(scope="session")
def monodromies(periodic_models):
    return {m.name: monodromy(m.protocol).matrix for m in periodic_models}
