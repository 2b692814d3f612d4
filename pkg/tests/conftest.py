import os
import warnings

import pytest
from hypothesis import HealthCheck, settings

from hhwexp.model import FellerWarning, base_params

settings.register_profile(
    "default", deadline=None, max_examples=50,
    suppress_health_check=[HealthCheck.too_slow])
settings.register_profile("thorough", deadline=None, max_examples=500)
settings.load_profile(os.environ.get("HYPOTHESIS_PROFILE", "default"))


@pytest.fixture
def base():
    return base_params()


@pytest.fixture(autouse=True)
def _quiet_feller():
    # high vol-of-vol cases break the Feller condition on purpose
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", FellerWarning)
        yield
