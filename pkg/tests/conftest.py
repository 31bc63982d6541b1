import numpy as np
import pytest
from hypothesis import HealthCheck, settings

# jit compilation makes first calls slow; never let hypothesis time out on it
settings.register_profile(
    "evrot",
    deadline=None,
    suppress_health_check=[HealthCheck.too_slow],
)
settings.load_profile("evrot")


@pytest.fixture
def rng():
    return np.random.default_rng(20240817)


def random_rotation(rng, max_angle=np.pi - 1e-3):
    from evrot.geometry import so3_exp

    axis = rng.normal(size=3)
    axis /= np.linalg.norm(axis)
    return so3_exp(axis * rng.uniform(0.0, max_angle))
