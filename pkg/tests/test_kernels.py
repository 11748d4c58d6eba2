import os
import subprocess
import sys

import numpy as np
import pytest

from larvest import kernels
from larvest.data import CaseObservation, TemperatureProfile
from larvest.dynamics import reconstruct_growth
from larvest.inference import criterion_profile

cython = pytest.mark.skipif(kernels.BACKEND != "cython", reason="compiled extension not built")


def varied_profile():
    t = np.linspace(-700.0, 0.0, 351)
    return TemperatureProfile(t, 14.0 + 7.0 * np.sin(2 * np.pi * t / 24.0) + 0.01 * t)


@cython
@pytest.mark.parametrize("rate", ["shape", "smoothed"])
def test_trajectory_parity(field, rate):
    prof = varied_profile()
    a = reconstruct_growth(field, prof, -700.0, 0.0, dt=0.5, rate=rate, backend="cython")
    b = reconstruct_growth(field, prof, -700.0, 0.0, dt=0.5, rate=rate, backend="python")
    assert np.array_equal(a.lengths, b.lengths, equal_nan=True)
    assert np.array_equal(a.phase, b.phase)


@cython
def test_terminals_parity(field):
    prof = varied_profile()
    obs = CaseObservation((8.0, 9.0, 10.0), t_a_h=-650.0)
    a = criterion_profile(field, prof, obs, step=7.0, backend="cython")
    b = criterion_profile(field, prof, obs, step=7.0, backend="python")
    assert np.array_equal(a.terminal_length, b.terminal_length)
    assert np.array_equal(a.terminal_phase, b.terminal_phase)
    assert set(a.terminal_phase.tolist()) == {0, 1, 2}


def test_terminals_agree_with_trajectories(field):
    prof = varied_profile()
    obs = CaseObservation((8.0,), t_a_h=-300.0)
    crit = criterion_profile(field, prof, obs, step=50.0)
    for t, L in zip(crit.candidates[:-1], crit.terminal_length[:-1]):
        traj = reconstruct_growth(field, prof, float(t), 0.0)
        assert L == traj.final_length


def test_unknown_backend():
    with pytest.raises(ValueError):
        kernels.get_backend("fortran")


def test_pure_python_switch():
    env = dict(os.environ, LARVEST_PURE_PYTHON="1")
    out = subprocess.run([sys.executable, "-c", "import larvest; print(larvest.BACKEND)"],
                         env=env, capture_output=True, text=True, check=True).stdout
    assert out.strip() == "python"
