import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from leapfrog.robustness import (
    RobustnessSetup,
    detuning_sweep,
    error_sweep,
    fit_lorentzian,
    is_monotone_nonincreasing,
    lorentzian,
    steady_doublons,
)

# a 6-site ring keeps these checks fast; the acceptance suite runs the 8-site loadout
SMALL = RobustnessSetup(loadout="u.uuu.", t_f=4.0, dt=0.05)


@settings(max_examples=20, deadline=None)
@given(st.floats(0.2, 3.0), st.floats(0.5, 20.0))
def test_fit_recovers_parameters(a, w):
    x = np.linspace(-3 * w, 3 * w, 25)
    fit = fit_lorentzian(x, lorentzian(x, a, w))
    assert fit.ok
    assert fit.a == pytest.approx(a, rel=1e-6) and fit.w == pytest.approx(w, rel=1e-6)


def test_fit_reports_failure():
    fit = fit_lorentzian([0.0], [1.0])
    assert not fit.ok and fit.a is None


def test_monotone_helper():
    assert is_monotone_nonincreasing([3, 2, 2, 1])
    assert not is_monotone_nonincreasing([1, 2])


def test_error_falls_with_U():
    eps = error_sweep([20.0, 80.0], SMALL)
    assert eps[1] < eps[0] < 0.1
    # leading corrections scale as (J/U)^2
    assert eps[0] / eps[1] == pytest.approx(16, rel=0.3)


def test_flux_error_grows_with_phase():
    eps = error_sweep([0.0, 0.1, 0.3], SMALL, parameter="delta_phi", U=100.0)
    assert eps[0] < eps[1] < eps[2]


def test_detuning_suppresses_doublons():
    sweep = detuning_sweep([0.0, 2.0, 8.0], U=50.0, setup=SMALL)
    assert sweep.ratios[0] == 1.0
    assert sweep.ratios[0] > sweep.ratios[1] > sweep.ratios[2]


def test_detuning_symmetric():
    a = steady_doublons(SMALL, 50.0, 3.0)
    b = steady_doublons(SMALL, 50.0, -3.0)
    assert a == pytest.approx(b, rel=0.05)
