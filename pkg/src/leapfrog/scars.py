"""Frozen product states of the effective model (perfect scars).

Only the sector without down singlons is counted.  A down singlon cannot move
and blocks every resonant process across its site, so it simply cuts the chain
into independent pieces.
"""
from __future__ import annotations

import csv
import itertools
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .fock import OPEN, Basis, FockState, ParameterError, SiteOccupation, enumerate_all
from .hamiltonians import EFFECTIVE, ModelParams, SparseOperator, build_effective

TRANSFER_MATRIX = np.array([[0, 1, 1], [1, 1, 0], [1, 0, 1]], dtype=object)
MAX_BRUTE_FORCE_L = 12
FROZEN_SITES = (SiteOccupation.EMPTY, SiteOccupation.UP, SiteOccupation.DOUBLON)


@dataclass(frozen=True)
class ScarCountVector:
    """Frozen states of length L ending in up, empty and doublon."""

    L: int
    n_up: int
    n_empty: int
    n_doublon: int

    def __post_init__(self):
        if min(self.n_up, self.n_empty, self.n_doublon) < 0:
            raise ParameterError("counts must be nonnegative")

    @property
    def total(self) -> int:
        return self.n_up + self.n_empty + self.n_doublon


def scar_count(L: int) -> tuple[int, ScarCountVector]:
    if L < 2:
        raise ParameterError(f"scar_count needs L >= 2, got {L}")
    vec = np.array([2, 2, 2], dtype=object)
    for _ in range(L - 2):
        vec = TRANSFER_MATRIX @ vec
    counts = ScarCountVector(L, *(int(x) for x in vec))
    return counts.total, counts


def frozen_candidates(L: int):
    """All product states over {empty, up, doublon}^L."""
    for occ in itertools.product(FROZEN_SITES, repeat=L):
        yield FockState.from_occupations(occ)


def enumerate_frozen_states(L: int, H: SparseOperator | None = None) -> list[FockState]:
    """Candidates annihilated by the effective Hamiltonian, in key order.

    ``H`` must be the open-boundary effective model over the full mixed-N
    basis of L sites; it is built when omitted.
    """
    if not 1 <= L <= MAX_BRUTE_FORCE_L:
        raise ParameterError(f"brute force limited to 1 <= L <= {MAX_BRUTE_FORCE_L}, got {L}")
    if H is None:
        H = build_effective(ModelParams(L=L, boundary=OPEN), enumerate_all(L, OPEN))
    basis: Basis = H.basis
    if basis is None or basis.L != L or len(basis) != 4**L:
        raise ParameterError("H must act on the full basis of L sites")
    if H.meta.get("model", EFFECTIVE) != EFFECTIVE or H.meta.get("boundary", OPEN) != OPEN:
        raise ParameterError("H must be the open-boundary effective model")
    m = H.matrix.tocsc(copy=True)
    m.eliminate_zeros()
    # H|s> = 0 iff column s of H is empty
    col_nnz = np.diff(m.indptr)
    frozen = [s for s in frozen_candidates(L) if col_nnz[basis.position(s)] == 0]
    return sorted(frozen, key=lambda s: s.key)


def write_counts_csv(path: str | Path, Ls) -> list[ScarCountVector]:
    rows = [scar_count(L)[1] for L in Ls]
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["L", "count_up", "count_empty", "count_doublon", "total"])
        for r in rows:
            w.writerow([r.L, r.n_up, r.n_empty, r.n_doublon, r.total])
    return rows
