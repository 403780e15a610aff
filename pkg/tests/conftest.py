import numpy as np
import pytest

from hybridsim.arrays import ArrayGeometry, SteeringAngles
from hybridsim.channel import BsArray, Ray


def make_ray(phi_tx, phi_rx=0.0, gain_db=0.0, phase_deg=0.0, delay=0):
    gain = 10.0 ** (gain_db / 20.0) * np.exp(1j * np.deg2rad(phase_deg))
    return Ray(aod=SteeringAngles(90.0, phi_tx), aoa=SteeringAngles(90.0, phi_rx),
               gain=gain, delay=delay)


@pytest.fixture
def bs():
    return BsArray(subarray=ArrayGeometry(8, 2), n_subarrays=2, separation_wl=10.0)


@pytest.fixture
def ue():
    return ArrayGeometry(2, 2)
