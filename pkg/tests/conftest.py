import numpy as np
import pytest
from hypothesis import HealthCheck, settings

from momentvar.model_core import HestonParams

settings.register_profile(
    "default", deadline=None, max_examples=60,
    suppress_health_check=[HealthCheck.too_slow, HealthCheck.function_scoped_fixture],
)
settings.load_profile("default")

FIG1 = HestonParams(kappa=3.0, theta=0.04, gamma=2.0, rho=-0.5, v0=0.05)
MODEL_I = HestonParams(kappa=5.0, theta=0.05, gamma=0.8, rho=-0.5)
MODEL_II = HestonParams(kappa=15.0, theta=0.02, gamma=0.7, rho=0.3)
HIGH_VOL = HestonParams(kappa=18.05, theta=0.0233, gamma=1.2305, rho=-0.6191)
SP_SIMPLE = HestonParams(kappa=10.047, theta=0.0196, gamma=0.8483, rho=-0.6189)
DELTA = 1.0 / 252.0


def within_se(estimate, se, target, k=3.0):
    return abs(estimate - target) <= k * se


@pytest.fixture
def rng():
    return np.random.default_rng(12345)
