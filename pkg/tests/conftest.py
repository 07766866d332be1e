import pytest

from nvsinglet.config import load_config
from nvsinglet.runner import calibrate


@pytest.fixture(scope="session")
def cfg():
    return load_config(None)


@pytest.fixture(scope="session")
def calibrated(cfg):
    new, _ = calibrate(cfg)
    return new
