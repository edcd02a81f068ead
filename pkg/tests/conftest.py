import os

import pytest
from hypothesis import HealthCheck, settings

from mmcomp.channel import ArrayConfig, FadingModel
from mmcomp.geometry import NoiseConfig, PathlossConfig, Scenario, TierConfig

settings.register_profile("default", deadline=None, max_examples=60,
                          suppress_health_check=[HealthCheck.too_slow])
settings.register_profile("ci", deadline=None, max_examples=25,
                          suppress_health_check=[HealthCheck.too_slow])
settings.load_profile(os.environ.get("HYPOTHESIS_PROFILE", "default"))


def one_tier(radius=200.0, power=1.0, blockage=0.025, nt=16, n=1, fading=None, nf=5.0,
             alpha1=2.0, alpha2=4.0):
    if blockage == 0:
        pl = PathlossConfig.uniform(alpha2)
    else:
        pl = PathlossConfig.los_nlos(alpha1, alpha2)
    return Scenario((TierConfig.from_radius(radius, power, blockage),), pl, ArrayConfig(nt),
                    NoiseConfig(1e9, nf), fading or FadingModel.rayleigh(), n)


@pytest.fixture
def los_nlos_scenario():
    return one_tier()


@pytest.fixture
def uniform_scenario():
    return one_tier(radius=150.0, blockage=0.0, nt=16, alpha2=3.0, nf=10.0)
