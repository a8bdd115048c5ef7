import pytest
from hypothesis import HealthCheck, settings

from netval import build_network

settings.register_profile(
    "ci",
    deadline=None,
    max_examples=25,
    derandomize=True,
    suppress_health_check=[HealthCheck.too_slow],
)
settings.load_profile("ci")


@pytest.fixture
def cycle_full():
    return build_network([[0.0, 1.0, 1.0], [1.0, 0.0, 2.0]], 1.0, 1.0)


@pytest.fixture
def cycle_half():
    return build_network([[0.0, 1.0, 1.0], [1.0, 0.0, 2.0]], 0.5, 0.5)


@pytest.fixture
def two_bank():
    return build_network([[0.0, 7.0, 3.0], [3.0, 0.0, 3.0]], 1.0, 1.0)
