import math
import warnings

import numpy as np
import pytest
from hypothesis import given, strategies as st
from scipy import integrate

from leapfrog.analytic import (
    CONSTANTS,
    BandEdgeWarning,
    ansatz_params,
    delta_chain_transmission,
    predicted_localized_population,
    transmission_at_k,
    transmission_total,
    triplet_bound_state,
    virtual_bound_vector,
)
from leapfrog.boundstates import find_bound_states, tuplet_operator
from leapfrog.fock import ParameterError, parse_loadout
from leapfrog.hamiltonians import anderson_matrix
from leapfrog.observables import density


def test_constants():
    b = CONSTANTS.b
    # b solves b^4 - 2 b^2 - 1 = 0, which makes the chain recursion close
    assert b**4 - 2 * b**2 - 1 == pytest.approx(0, abs=1e-14)
    assert CONSTANTS.energy == pytest.approx(2.19736822693562, abs=1e-12)
    assert CONSTANTS.overlap3 == pytest.approx(0.353553390593, abs=1e-12)


@pytest.mark.parametrize("sign", [1, -1])
def test_virtual_ansatz_is_eigenvector(sign):
    M = 41
    vec = virtual_bound_vector(M, sign)
    H = anderson_matrix(M).toarray()
    r = H @ vec - sign * CONSTANTS.energy * vec
    # only the truncated tail fails the recursion
    assert np.linalg.norm(r) / np.linalg.norm(vec) < 10 * CONSTANTS.b ** (-M)


@pytest.mark.parametrize("L_d", [4, 8, 12, 16])
def test_lattice_residual_decays(L_d):
    for sign in (1, -1):
        psi, H = triplet_bound_state(L_d, sign)
        r = H @ psi.amplitudes - sign * CONSTANTS.energy * psi.amplitudes
        assert np.linalg.norm(r) < 10 * CONSTANTS.b ** (-2 * L_d)


def test_overlap_and_population_at_Ld16():
    for sign in (1, -1):
        psi, H = triplet_bound_state(16, sign)
        seed = parse_loadout("." * 16 + "uuu" + "." * 16)
        assert abs(psi.amplitudes[H.basis.position(seed)]) ** 2 == pytest.approx(CONSTANTS.overlap3, abs=5e-4)
        n3 = density(psi, H.basis).total[16:19].sum()
        assert n3 == pytest.approx(CONSTANTS.n_init_bound, abs=1e-6)


def test_ansatz_agrees_with_numerics():
    psi, H = triplet_bound_state(10, 1)
    H2, _ = tuplet_operator(23, 3)
    bound = find_bound_states(H2)
    k = int(np.argmax(bound.energies))
    num = bound.vectors[:, k]
    assert abs(np.vdot(num, psi.amplitudes)) == pytest.approx(1, abs=1e-8)


def test_ansatz_validation():
    with pytest.raises(ParameterError):
        ansatz_params(0)
    with pytest.raises(ParameterError):
        triplet_bound_state(1, 1)


def test_predicted_three_atom_population():
    # two channels of weight 1/(2 sqrt 2), each keeping 2 + 1/sqrt2 atoms
    assert predicted_localized_population() == pytest.approx(1.5 + 1 / math.sqrt(2), abs=1e-12)


class TestTransmission:
    def test_closed_form(self):
        for U in (0.5, 1.0, 2.0, 5.0):
            assert transmission_total(U) == pytest.approx(1 - U / math.sqrt(U**2 + 4), abs=1e-9)

    def test_two_j(self):
        assert transmission_total(2.0) == pytest.approx(1 - 1 / math.sqrt(2), abs=1e-10)

    @given(st.floats(0.01, math.pi - 0.01), st.floats(-10, 10))
    def test_bounded_and_symmetric(self, k, U):
        t = transmission_at_k(k, U)
        assert 0 <= t <= 1 + 1e-12
        assert t == pytest.approx(transmission_at_k(math.pi - k, U), rel=1e-9)

    def test_free_chain_transmits(self):
        assert transmission_total(0.0) == pytest.approx(1.0)

    def test_band_edge(self):
        with warnings.catch_warnings(record=True) as w:
            warnings.simplefilter("always")
            assert transmission_at_k(0.0, 2.0) == 0.0
        assert any(issubclass(x.category, BandEdgeWarning) for x in w)

    def test_quad_independent_of_branch(self):
        full, _ = integrate.quad(lambda k: transmission_at_k(k, 2.0), 1e-9, math.pi - 1e-9)
        assert full / math.pi == pytest.approx(transmission_total(2.0), abs=1e-7)


def test_delta_chain_long_time():
    series = delta_chain_transmission(-4, 40.0, 0.1)
    # half the packet moves right and transmits the k-averaged t(k); doubling
    # for the two atoms of the tuplet cancels the half
    assert series.values[-1] == pytest.approx(transmission_total(2.0), abs=0.02)
    assert abs(series.values[0]) < 1e-20
    with pytest.raises(ParameterError):
        delta_chain_transmission(1, 1.0)
