import pytest

from ringadvisory.sim import RingConfig


@pytest.fixture
def toy_ring() -> RingConfig:
    """Small, fast ring used throughout the unit tests."""
    return RingConfig(circumference=126.0, n_vehicles=8, warmup_steps=300, horizon=600)
