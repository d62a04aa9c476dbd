import numpy as np
import pytest
from hypothesis import given, strategies as st

from leapfrog.fock import ParameterError, enumerate_basis, parse_loadout
from leapfrog.observables import (
    TimeSeries,
    UndefinedMetricError,
    density,
    doublon_error,
    doublon_number,
    fmt,
    initial_population,
    overlap,
    transmitted,
    write_profiles_csv,
    write_series_csv,
)
from leapfrog.propagator import Wavefunction


@pytest.fixture
def superposition():
    B = enumerate_basis(3, 2)
    psi = np.zeros(len(B), dtype=complex)
    psi[B.position(parse_loadout("D.."))] = np.sqrt(0.25)
    psi[B.position(parse_loadout(".uu"))] = 1j * np.sqrt(0.75)
    return B, Wavefunction(psi, 1.5, B)


def test_density(superposition):
    B, psi = superposition
    d = density(psi, B)
    assert np.allclose(d.up, [0.25, 0.75, 0.75])
    assert np.allclose(d.down, [0.25, 0, 0])
    assert d.total.sum() == pytest.approx(2.0)
    assert d.t == 1.5


def test_doublon_number_is_per_site(superposition):
    B, psi = superposition
    assert doublon_number(psi, B) == pytest.approx(0.25 / 3)


def test_transmitted_and_initial(superposition):
    B, psi = superposition
    assert transmitted(psi, B, 0) == pytest.approx(1.5)
    assert initial_population(psi, B, [0]) == pytest.approx(0.5)
    with pytest.raises(ParameterError):
        transmitted(psi, B, 3)


def test_overlap(superposition):
    B, psi = superposition
    target = Wavefunction.product(B, parse_loadout(".uu"))
    amp, prob = overlap(psi, target)
    assert amp == pytest.approx(1j * np.sqrt(0.75))
    assert prob == pytest.approx(0.75)


def test_dimension_check():
    B = enumerate_basis(2, 1)
    with pytest.raises(ParameterError):
        density(np.ones(3), B)


class TestDoublonError:
    def test_identical_series_vanish(self):
        t = np.linspace(0, 10, 101)
        s = TimeSeries(t, 0.2 + 0.1 * np.sin(t))
        assert doublon_error(s, s, 10) == 0

    def test_constant_relative_offset(self):
        # n = 1.05 n_id everywhere gives eps = 0.05 exactly
        t = np.linspace(0, 10, 101)
        ideal = TimeSeries(t, 0.2 + 0.1 * np.sin(t))
        assert doublon_error(TimeSeries(t, 1.05 * ideal.values), ideal, 10) == pytest.approx(0.05)

    def test_floor_drops_initial_zero(self):
        t = np.linspace(0, 10, 101)
        ideal_vals = np.where(t == 0, 0.0, 0.2)
        ideal = TimeSeries(t, ideal_vals)
        series = TimeSeries(t, np.where(t == 0, 0.0, 0.22))
        assert doublon_error(series, ideal, 10) == pytest.approx(0.1)

    def test_undefined_when_ideal_vanishes(self):
        t = np.linspace(0, 1, 11)
        with pytest.raises(UndefinedMetricError):
            doublon_error(TimeSeries(t, np.ones(11)), TimeSeries(t, np.zeros(11)), 1)

    @given(st.floats(0.01, 100), st.integers(0, 1000))
    def test_joint_rescaling_invariance(self, c, seed):
        rng = np.random.default_rng(seed)
        t = np.linspace(0, 5, 51)
        a, b = rng.uniform(0.1, 1, 51), rng.uniform(0.1, 1, 51)
        e1 = doublon_error(TimeSeries(t, a), TimeSeries(t, b), 5)
        e2 = doublon_error(TimeSeries(t, c * a), TimeSeries(t, c * b), 5)
        assert e2 == pytest.approx(e1, rel=1e-10)

    def test_grid_mismatch(self):
        with pytest.raises(ParameterError):
            doublon_error(TimeSeries([0, 1], [1, 1]), TimeSeries([0, 2], [1, 1]), 1)


class TestCsv:
    def test_fmt(self):
        assert fmt(0.1 + 0.2) == "0.3"
        assert fmt(1 / 3) == "0.333333333333"
        assert fmt(0) == "0"
        assert fmt(2.0) == "2"

    def test_series_csv_deterministic(self, tmp_path):
        s = TimeSeries([0, 0.5], [1 / 3, 2 / 3])
        write_series_csv(tmp_path / "a.csv", s, "meta")
        write_series_csv(tmp_path / "b.csv", s, "meta")
        text = (tmp_path / "a.csv").read_text()
        assert text == (tmp_path / "b.csv").read_text()
        assert text == "# meta\nt,value\n0,0.333333333333\n0.5,0.666666666667\n"

    def test_profiles_header(self, tmp_path, superposition):
        B, psi = superposition
        write_profiles_csv(tmp_path / "p.csv", [density(psi, B)])
        lines = (tmp_path / "p.csv").read_text().splitlines()
        assert lines[0] == "t,site,n_up,n_down,n_total"
        assert lines[1] == "1.5,0,0.25,0.25,0.5"

    def test_series_validation(self):
        with pytest.raises(ParameterError):
            TimeSeries([0, 0], [1, 2])
        assert TimeSeries([0, 1, 2], [1, 2, 3]).window_mean(1, 2) == 2.5
