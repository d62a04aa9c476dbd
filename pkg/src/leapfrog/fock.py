"""Fock states of two-species fermions on an open or periodic chain.

A state is stored as two L-bit masks (``up``, ``down``) and packed into a
single integer key ``up | (down << L)``.  Python integers are unbounded, so
the same key works past L = 32 without a separate wide-key type.

Fermionic modes are ordered site-major with the up mode before the down mode
on each site, i.e. mode ``2*j + s`` with ``s = 0`` for up and ``s = 1`` for
down.
"""
from __future__ import annotations

import enum
from collections import deque
from dataclasses import dataclass, field
from itertools import combinations
from pathlib import Path
from typing import Callable, Iterable, Iterator, Sequence

import numpy as np

UP = 0
DOWN = 1

FERMION = "fermion"
BOSON = "boson"
SIGN_MODES = (FERMION, BOSON)

OPEN = "open"
PERIODIC = "periodic"
BOUNDARIES = (OPEN, PERIODIC)


class ParameterError(ValueError):
    pass


class LoadoutParseError(ValueError):
    def __init__(self, text: str, position: int):
        self.text = text
        self.position = position
        super().__init__(
            f"illegal character {text[position]!r} at position {position} in loadout {text!r}"
        )


class SiteOccupation(enum.Enum):
    EMPTY = "."
    UP = "u"
    DOWN = "d"
    DOUBLON = "D"

    @property
    def n_up(self) -> int:
        return int(self in (SiteOccupation.UP, SiteOccupation.DOUBLON))

    @property
    def n_down(self) -> int:
        return int(self in (SiteOccupation.DOWN, SiteOccupation.DOUBLON))


_OCC_FROM_BITS = {
    (0, 0): SiteOccupation.EMPTY,
    (1, 0): SiteOccupation.UP,
    (0, 1): SiteOccupation.DOWN,
    (1, 1): SiteOccupation.DOUBLON,
}


@dataclass(frozen=True)
class FockState:
    L: int
    up: int = 0
    down: int = 0

    def __post_init__(self):
        if self.L < 1:
            raise ParameterError(f"L must be >= 1, got {self.L}")
        full = (1 << self.L) - 1
        if self.up & ~full or self.down & ~full or self.up < 0 or self.down < 0:
            raise ParameterError("occupation masks exceed the lattice")

    @classmethod
    def from_key(cls, key: int, L: int) -> "FockState":
        full = (1 << L) - 1
        return cls(L, key & full, key >> L)

    @classmethod
    def from_occupations(cls, occupations: Sequence[SiteOccupation]) -> "FockState":
        up = down = 0
        for j, occ in enumerate(occupations):
            up |= occ.n_up << j
            down |= occ.n_down << j
        return cls(len(occupations), up, down)

    @property
    def key(self) -> int:
        return self.up | (self.down << self.L)

    @property
    def occupations(self) -> tuple[SiteOccupation, ...]:
        return tuple(
            _OCC_FROM_BITS[(self.up >> j) & 1, (self.down >> j) & 1] for j in range(self.L)
        )

    @property
    def n_up(self) -> int:
        return self.up.bit_count()

    @property
    def n_down(self) -> int:
        return self.down.bit_count()

    @property
    def n(self) -> int:
        return self.n_up + self.n_down

    @property
    def doublons(self) -> int:
        return (self.up & self.down).bit_count()

    def __str__(self) -> str:
        return format_loadout(self)


def parse_loadout(text: str) -> FockState:
    """Parse a loadout string over ``. u d D`` into a FockState.

    >>> parse_loadout("..uuu..").n_up
    3
    """
    if not text:
        raise ParameterError("empty loadout")
    occupations = []
    lookup = {o.value: o for o in SiteOccupation}
    for pos, ch in enumerate(text):
        if ch not in lookup:
            raise LoadoutParseError(text, pos)
        occupations.append(lookup[ch])
    return FockState.from_occupations(occupations)


def format_loadout(state: FockState) -> str:
    return "".join(o.value for o in state.occupations)


# --- sign convention ------------------------------------------------------

def mode_index(site: int, spin: int) -> int:
    return 2 * site + spin


def _occupied_below(up: int, down: int, site: int, spin: int) -> int:
    below = (1 << site) - 1
    count = (up & below).bit_count() + (down & below).bit_count()
    if spin == DOWN:
        count += (up >> site) & 1
    return count


def apply_hop(
    up: int, down: int, dst: tuple[int, int], src: tuple[int, int], sign_mode: str = FERMION
) -> tuple[int, int, int] | None:
    """Apply a†_dst a_src to the state given by (up, down).

    Returns ``(up', down', sign)`` or None when the term annihilates the state.
    In fermion mode the sign is the parity of occupied modes strictly between
    the two modes; in boson mode it is always +1.
    """
    (j_src, s_src), (j_dst, s_dst) = src, dst
    masks = [up, down]
    if not (masks[s_src] >> j_src) & 1:
        return None
    sign = 1
    if sign_mode == FERMION:
        sign = -1 if _occupied_below(masks[0], masks[1], j_src, s_src) & 1 else 1
    masks[s_src] &= ~(1 << j_src)
    if (masks[s_dst] >> j_dst) & 1:
        return None
    if sign_mode == FERMION and _occupied_below(masks[0], masks[1], j_dst, s_dst) & 1:
        sign = -sign
    masks[s_dst] |= 1 << j_dst
    return masks[0], masks[1], sign


def apply_creation(
    up: int, down: int, site: int, spin: int, sign_mode: str = FERMION
) -> tuple[int, int, int] | None:
    masks = [up, down]
    if (masks[spin] >> site) & 1:
        return None
    sign = 1
    if sign_mode == FERMION and _occupied_below(up, down, site, spin) & 1:
        sign = -1
    masks[spin] |= 1 << site
    return masks[0], masks[1], sign


def bonds(L: int, boundary: str) -> list[tuple[int, int]]:
    """Nearest-neighbour bonds (i, i+1); periodic chains add (L-1, 0)."""
    if boundary not in BOUNDARIES:
        raise ParameterError(f"unknown boundary {boundary!r}")
    out = [(i, i + 1) for i in range(L - 1)]
    if boundary == PERIODIC and L > 2:
        out.append((L - 1, 0))
    return out


# --- bases ----------------------------------------------------------------

@dataclass(frozen=True, eq=False)
class Basis:
    """Ordered, indexed set of Fock states sharing a lattice length."""

    L: int
    keys: tuple[int, ...]
    boundary: str = OPEN
    index: dict[int, int] = field(init=False, repr=False)

    def __post_init__(self):
        index = {k: i for i, k in enumerate(self.keys)}
        if len(index) != len(self.keys):
            raise ParameterError("duplicate states in basis")
        object.__setattr__(self, "index", index)

    def __len__(self) -> int:
        return len(self.keys)

    def __iter__(self) -> Iterator[FockState]:
        return (FockState.from_key(k, self.L) for k in self.keys)

    def __getitem__(self, i: int) -> FockState:
        return FockState.from_key(self.keys[i], self.L)

    def __contains__(self, state) -> bool:
        key = state.key if isinstance(state, FockState) else state
        return key in self.index

    def position(self, state: FockState | int) -> int:
        key = state.key if isinstance(state, FockState) else state
        try:
            return self.index[key]
        except KeyError:
            raise ParameterError(f"state {key} not in basis") from None

    @property
    def atom_numbers(self) -> set[int]:
        return {FockState.from_key(k, self.L).n for k in self.keys}

    @property
    def occupations(self) -> tuple[np.ndarray, np.ndarray]:
        """(dim, L) arrays of up and down occupation numbers, cached."""
        cached = self.__dict__.get("_occ")
        if cached is None:
            full = (1 << self.L) - 1
            ups = np.zeros((len(self), self.L), dtype=np.int8)
            downs = np.zeros((len(self), self.L), dtype=np.int8)
            for i, k in enumerate(self.keys):
                u, d = k & full, k >> self.L
                for j in range(self.L):
                    ups[i, j] = (u >> j) & 1
                    downs[i, j] = (d >> j) & 1
            cached = (ups, downs)
            object.__setattr__(self, "_occ", cached)
        return cached

    def export(self, path: str | Path) -> None:
        n = sorted(self.atom_numbers)
        header = f"# L={self.L} N={','.join(map(str, n))} boundary={self.boundary}\n"
        Path(path).write_text(header + "".join(f"{k}\n" for k in self.keys))

    @classmethod
    def load(cls, path: str | Path) -> "Basis":
        lines = Path(path).read_text().splitlines()
        fields = dict(item.split("=") for item in lines[0].lstrip("# ").split())
        keys = tuple(int(line) for line in lines[1:] if line.strip())
        return cls(int(fields["L"]), keys, fields["boundary"])


def sorted_basis(L: int, keys: Iterable[int], boundary: str = OPEN) -> Basis:
    return Basis(L, tuple(sorted(set(keys))), boundary)


def enumerate_basis(L: int, N: int, boundary: str = OPEN) -> Basis:
    """All states with N atoms on L sites, key-ascending."""
    if L < 1:
        raise ParameterError(f"L must be >= 1, got {L}")
    if not 0 <= N <= 2 * L:
        raise ParameterError(f"need 0 <= N <= 2L, got N={N}, L={L}")
    keys = [sum(1 << m for m in modes) for modes in combinations(range(2 * L), N)]
    return sorted_basis(L, keys, boundary)


def enumerate_all(L: int, boundary: str = OPEN) -> Basis:
    """Every state of all atom numbers (4**L states)."""
    return Basis(L, tuple(range(1 << (2 * L))), boundary)


# --- graph analysis -------------------------------------------------------

def explore(
    neighbours: Callable[[int], Iterable[int]], seeds: Iterable[int]
) -> set[int]:
    """Breadth-first closure of ``seeds`` under ``neighbours``."""
    seen = set(seeds)
    queue = deque(seen)
    while queue:
        key = queue.popleft()
        for nxt in neighbours(key):
            if nxt not in seen:
                seen.add(nxt)
                queue.append(nxt)
    return seen


def reachable_subspace(H, support: Iterable[FockState | int]) -> Basis:
    """Connected component of ``support`` in the adjacency graph of ``H``.

    ``H`` is a SparseOperator over a Fock basis.
    """
    basis = H.basis
    csr = H.matrix.tocsr()
    seeds = [basis.position(s) for s in support]

    def neighbours(i):
        lo, hi = csr.indptr[i], csr.indptr[i + 1]
        return (int(c) for c, v in zip(csr.indices[lo:hi], csr.data[lo:hi]) if v != 0)

    rows = explore(neighbours, seeds)
    return sorted_basis(basis.L, (basis.keys[i] for i in rows), basis.boundary)


def connectivity(state: FockState | int, H) -> int:
    """Number of other basis states with a nonzero matrix element to ``state``."""
    i = H.basis.position(state)
    row = H.matrix.tocsr()[i]
    return int(sum(1 for c, v in zip(row.indices, row.data) if v != 0 and c != i))
