import numpy as np
import pytest
from hypothesis import given, strategies as st

from leapfrog.fock import PERIODIC, ParameterError, enumerate_all, format_loadout
from leapfrog.hamiltonians import EFFECTIVE, ModelParams, build_effective, build_gauged, build_reachable
from leapfrog.observables import density
from leapfrog.propagator import EvolutionPlan, Wavefunction, evolve
from leapfrog.scars import TRANSFER_MATRIX, enumerate_frozen_states, scar_count, write_counts_csv


def test_transfer_matrix_spectrum():
    ev = np.linalg.eigvals(np.array(TRANSFER_MATRIX, dtype=float))
    assert np.allclose(sorted(ev.real), [-1, 1, 2])


@pytest.mark.parametrize("L,total", [(2, 6), (3, 12), (6, 96)])
def test_examples(L, total):
    assert scar_count(L)[0] == total


@given(st.integers(2, 200))
def test_closed_form(L):
    total, vec = scar_count(L)
    assert total == 6 * 2 ** (L - 2) == vec.total


def test_L2_list():
    states = sorted(format_loadout(s) for s in enumerate_frozen_states(2))
    assert states == sorted(["u.", ".u", "..", "uD", "Du", "DD"])
    # two adjacent up singlons are the leap-frog seed, never frozen
    assert "uu" not in states


@pytest.mark.parametrize("L", range(2, 9))
def test_brute_force_matches_transfer_matrix(L):
    assert len(enumerate_frozen_states(L)) == scar_count(L)[0]


def test_frozen_states_are_annihilated_exactly():
    H = build_effective(ModelParams(L=5), enumerate_all(5))
    for s in enumerate_frozen_states(5, H):
        v = np.zeros(H.dim)
        v[H.basis.position(s)] = 1
        assert not np.any(H.matrix @ v)


def test_frozen_states_do_not_move():
    rng = np.random.default_rng(7)
    frozen = enumerate_frozen_states(8)
    for idx in rng.choice(len(frozen), 10, replace=False):
        s = frozen[idx]
        H = build_reachable(EFFECTIVE, ModelParams(L=8), [s])
        assert H.dim == 1
        psi0 = Wavefunction.product(H.basis, s)
        d0 = density(psi0, H.basis).total
        for w in evolve(H, psi0, EvolutionPlan(0, 20, 5)):
            assert np.max(np.abs(density(w, H.basis).total - d0)) < 1e-10


def test_input_checks():
    with pytest.raises(ParameterError):
        scar_count(1)
    with pytest.raises(ParameterError):
        enumerate_frozen_states(13)
    with pytest.raises(ParameterError):
        enumerate_frozen_states(3, build_gauged(ModelParams(L=3), enumerate_all(3)))
    with pytest.raises(ParameterError):
        enumerate_frozen_states(3, build_effective(ModelParams(L=3, boundary=PERIODIC), enumerate_all(3, PERIODIC)))


def test_csv(tmp_path):
    write_counts_csv(tmp_path / "c.csv", [2, 3])
    assert (tmp_path / "c.csv").read_text() == "L,count_up,count_empty,count_doublon,total\n2,2,2,2,6\n3,4,4,4,12\n"


@pytest.mark.parametrize("L", range(2, 8))
def test_components_count_last_site(L):
    from collections import Counter

    last = Counter(format_loadout(s)[-1] for s in enumerate_frozen_states(L))
    vec = scar_count(L)[1]
    assert (last["u"], last["."], last["D"]) == (vec.n_up, vec.n_empty, vec.n_doublon)
