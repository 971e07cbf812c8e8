import numpy as np
import pytest

from impa.gain import tune_pump
from impa.squid import calibrated_device, resonant_frequency

TUNE_BAND_HALF = 1.5e9


@pytest.fixture(scope="session")
def device():
    return calibrated_device(9.4e9)


@pytest.fixture(scope="session")
def f0(device):
    return resonant_frequency(device, 0.0)


@pytest.fixture(scope="session")
def band(f0):
    return (f0 - TUNE_BAND_HALF, f0 + TUNE_BAND_HALF)


@pytest.fixture(scope="session")
def grid(band):
    return np.linspace(band[0], band[1], 1201)


@pytest.fixture(scope="session")
def tuned(device, band):
    return tune_pump(device, 0.0, 16.5, band, points=1201)
