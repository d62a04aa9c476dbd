"""Sparse operators for the driven Fermi-Hubbard chain and its constrained limit.

Every lattice model is defined by a *row function*: given a packed state key it
returns the list of ``(key', amplitude)`` pairs of ``H|key>``.  The same row
functions assemble operators over an enumerated basis and drive breadth-first
exploration of reachable subspaces without enumerating a whole sector.

Energies are in units of the tunneling J unless stated otherwise.
"""
from __future__ import annotations

import cmath
from collections import defaultdict
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Callable

import numpy as np
import scipy.sparse as sp

from .fock import (
    BOSON,
    DOWN,
    FERMION,
    OPEN,
    PERIODIC,
    SIGN_MODES,
    UP,
    Basis,
    FockState,
    ParameterError,
    apply_hop,
    bonds,
    explore,
    sorted_basis,
)

LAB_FRAME = "lab_frame"
GAUGED = "gauged"
EFFECTIVE = "effective"
FLUX_ERROR = "flux_error"
MODELS = (LAB_FRAME, GAUGED, EFFECTIVE, FLUX_ERROR)

DENSE_THRESHOLD = 4096


@dataclass(frozen=True)
class ModelParams:
    L: int
    boundary: str = OPEN
    J: float = 1.0
    U: float = 0.0
    Omega: float = 0.0
    delta_phi: float = 0.0
    sign_mode: str = FERMION
    # -1 flips the sign of hops across the periodic wrap bond
    twist: int = 1

    def __post_init__(self):
        if self.L < 1:
            raise ParameterError(f"L must be >= 1, got {self.L}")
        if self.J <= 0:
            raise ParameterError(f"J must be positive, got {self.J}")
        if self.boundary not in (OPEN, PERIODIC):
            raise ParameterError(f"unknown boundary {self.boundary!r}")
        if self.sign_mode not in SIGN_MODES:
            raise ParameterError(f"unknown sign mode {self.sign_mode!r}")
        if self.twist not in (1, -1):
            raise ParameterError("twist must be +1 or -1")

    @property
    def delta_omega(self) -> float:
        return self.U - self.Omega

    @classmethod
    def resonant(cls, L: int, U: float = 0.0, delta_omega: float = 0.0, **kw) -> "ModelParams":
        return cls(L=L, U=U, Omega=U - delta_omega, **kw)

    def with_(self, **changes) -> "ModelParams":
        return replace(self, **changes)


@dataclass(eq=False)
class SparseOperator:
    """Sparse matrix plus the basis it acts on (None for virtual chains)."""

    matrix: sp.csr_matrix
    basis: Basis | None = None
    hermitian: bool = True
    meta: dict = field(default_factory=dict)

    @property
    def dim(self) -> int:
        return self.matrix.shape[0]

    @property
    def nnz(self) -> int:
        return self.matrix.count_nonzero()

    def triplets(self) -> list[tuple[int, int, complex]]:
        coo = self.matrix.tocoo()
        order = np.lexsort((coo.col, coo.row))
        return [
            (int(coo.row[k]), int(coo.col[k]), complex(coo.data[k]))
            for k in order
            if coo.data[k] != 0
        ]

    def is_hermitian(self) -> bool:
        """Exact check: every (r, c, v) has a partner (c, r, conj v)."""
        m = self.matrix.tocsr()
        diff = m - m.conj().T
        diff.eliminate_zeros()
        return diff.nnz == 0

    def toarray(self) -> np.ndarray:
        return self.matrix.toarray()

    def norm_estimate(self) -> float:
        """Upper bound on the spectral norm (max absolute row sum)."""
        return float(abs(self.matrix).sum(axis=1).max()) if self.dim else 0.0

    def __matmul__(self, vec):
        return self.matrix @ vec

    def export(self, path: str | Path) -> None:
        trip = self.triplets()
        lines = [f"{self.dim} {len(trip)} {int(self.hermitian)}"]
        lines += [f"{r} {c} {v.real!r} {v.imag!r}" for r, c, v in trip]
        Path(path).write_text("\n".join(lines) + "\n")

    @classmethod
    def load(cls, path: str | Path, basis: Basis | None = None) -> "SparseOperator":
        lines = Path(path).read_text().split("\n")
        dim, nnz, herm = map(int, lines[0].split())
        rows, cols, vals = [], [], []
        for line in lines[1 : 1 + nnz]:
            r, c, re, im = line.split()
            rows.append(int(r))
            cols.append(int(c))
            vals.append(complex(float(re), float(im)))
        data = np.array(vals, dtype=complex)
        if not np.any(data.imag):
            data = data.real
        m = sp.csr_matrix((data, (rows, cols)), shape=(dim, dim))
        return cls(m, basis, bool(herm))


# --- row functions ----------------------------------------------------------

RowFn = Callable[[int], list]


def _onsite_energy(up: int, down: int, U: float, field_coeff: float) -> float:
    return U * (up & down).bit_count() + field_coeff * (up.bit_count() - down.bit_count())


def _wrap_phase(params: ModelParams, a: int, b: int) -> int:
    if params.boundary == PERIODIC and {a, b} == {0, params.L - 1} and params.L > 2:
        return params.twist
    return 1


def gauged_row(params: ModelParams) -> RowFn:
    """Spin-flip hopping -J, on-site U, field (Omega/2)(n_up - n_down)."""
    L, J = params.L, params.J
    full = (1 << L) - 1
    pairs = bonds(L, params.boundary)
    half = params.Omega / 2

    def row(key):
        up, down = key & full, key >> L
        out = []
        diag = _onsite_energy(up, down, params.U, half)
        if diag:
            out.append((key, diag))
        for a, b in pairs:
            phase = _wrap_phase(params, a, b)
            for src, dst in ((a, b), (b, a)):
                for s in (UP, DOWN):
                    hop = apply_hop(up, down, (dst, 1 - s), (src, s), params.sign_mode)
                    if hop:
                        u2, d2, sign = hop
                        out.append((u2 | (d2 << L), -J * sign * phase))
        return out

    return row


def lab_frame_row(params: ModelParams) -> RowFn:
    """Spin-conserving hopping plus the staggered Rabi drive.

    The up slot of the key holds species e, the down slot holds species g.
    """
    L, J = params.L, params.J
    full = (1 << L) - 1
    pairs = bonds(L, params.boundary)
    half = params.Omega / 2

    def row(key):
        e, g = key & full, key >> L
        out = []
        diag = params.U * (e & g).bit_count()
        if diag:
            out.append((key, diag))
        for a, b in pairs:
            phase = _wrap_phase(params, a, b)
            for src, dst in ((a, b), (b, a)):
                for s in (UP, DOWN):
                    hop = apply_hop(e, g, (dst, s), (src, s), params.sign_mode)
                    if hop:
                        u2, d2, sign = hop
                        out.append((u2 | (d2 << L), -J * sign * phase))
        if half:
            for j in range(L):
                stagger = -half if j & 1 else half
                for src, dst in ((DOWN, UP), (UP, DOWN)):
                    hop = apply_hop(e, g, (j, dst), (j, src), params.sign_mode)
                    if hop:
                        u2, d2, sign = hop
                        out.append((u2 | (d2 << L), stagger * sign))
        return out

    return row


def effective_row(params: ModelParams) -> RowFn:
    """Density-dependent tunneling of the resonant U = Omega -> infinity limit.

    An up atom at ``src`` hops onto a neighbouring ``dst`` that already holds an
    up atom, flipping to down; the origin must hold no down atom.  The reverse
    process splits a doublon, sending its down atom to an empty neighbour as up.
    Projectors are evaluated on the source state before the hop.
    """
    L, J = params.L, params.J
    full = (1 << L) - 1
    pairs = bonds(L, params.boundary)

    def row(key):
        up, down = key & full, key >> L
        out = []
        for a, b in pairs:
            phase = _wrap_phase(params, a, b)
            for i, j in ((a, b), (b, a)):
                # projector n_{i,up} (1 - n_{j,down})
                if not (up >> i) & 1 or (down >> j) & 1:
                    continue
                for dst, src in (((i, DOWN), (j, UP)), ((j, UP), (i, DOWN))):
                    hop = apply_hop(up, down, dst, src, params.sign_mode)
                    if hop:
                        u2, d2, sign = hop
                        out.append((u2 | (d2 << L), -J * sign * phase))
        return out

    return row


def flux_error_row(params: ModelParams) -> RowFn:
    """Gauged model with a flux error delta_phi.

    Each bond (j, j+1) carries a spin-conserving hop with amplitude
    -(J/2)(1 - e^{-i dphi}) and a spin-flipping hop with -(J/2)(1 + e^{-i dphi})
    on a†_j a_{j+1}, conjugated for the reverse direction.  At dphi = 0 this
    reproduces gauged_row term by term.
    """
    L, J = params.L, params.J
    full = (1 << L) - 1
    pairs = bonds(L, params.boundary)
    half = params.Omega / 2
    rot = cmath.exp(-1j * params.delta_phi)
    conserve = -0.5 * J * (1 - rot)
    flip = -0.5 * J * (1 + rot)

    def row(key):
        up, down = key & full, key >> L
        out = []
        diag = _onsite_energy(up, down, params.U, half)
        if diag:
            out.append((key, diag))
        for a, b in pairs:
            phase = _wrap_phase(params, a, b)
            # (dst, src, coefficient): a†_a a_b carries the bare amplitude
            for dst, src, conj in ((a, b, False), (b, a, True)):
                for s_src in (UP, DOWN):
                    for s_dst, amp in ((s_src, conserve), (1 - s_src, flip)):
                        if amp == 0:
                            continue
                        hop = apply_hop(up, down, (dst, s_dst), (src, s_src), params.sign_mode)
                        if hop:
                            u2, d2, sign = hop
                            val = amp.conjugate() if conj else amp
                            out.append((u2 | (d2 << L), val * sign * phase))
        return out

    return row


ROW_FUNCTIONS = {
    LAB_FRAME: lab_frame_row,
    GAUGED: gauged_row,
    EFFECTIVE: effective_row,
    FLUX_ERROR: flux_error_row,
}


def row_function(model: str, params: ModelParams) -> RowFn:
    try:
        return ROW_FUNCTIONS[model](params)
    except KeyError:
        raise ParameterError(f"unknown model {model!r}; expected one of {MODELS}") from None


# --- assembly ---------------------------------------------------------------

def assemble(row: RowFn, basis: Basis, meta: dict | None = None) -> SparseOperator:
    """Build H over ``basis``; raises if H leaves the basis."""
    rows, cols, vals = [], [], []
    index = basis.index
    for col, key in enumerate(basis.keys):
        acc = defaultdict(complex)
        for target, amp in row(key):
            acc[target] += amp
        for target, amp in acc.items():
            if amp == 0:
                continue
            try:
                r = index[target]
            except KeyError:
                raise ParameterError(
                    f"operator maps basis state {key} outside the basis (to {target})"
                ) from None
            rows.append(r)
            cols.append(col)
            vals.append(amp)
    data = np.array(vals, dtype=complex)
    if not np.any(data.imag):
        data = data.real.astype(float)
    n = len(basis)
    m = sp.csr_matrix((data, (np.array(rows, dtype=np.int64), np.array(cols, dtype=np.int64))), shape=(n, n))
    m.sum_duplicates()
    op = SparseOperator(m, basis, True, dict(meta or {}))
    op.hermitian = op.is_hermitian()
    if not op.hermitian:
        raise AssertionError("assembled operator is not Hermitian")
    return op


def _meta(model: str, params: ModelParams) -> dict:
    meta = {
        "model": model,
        "L": params.L,
        "boundary": params.boundary,
        "J": params.J,
        "U": params.U,
        "Omega": params.Omega,
        "delta_phi": params.delta_phi,
        "sign_mode": params.sign_mode,
    }
    if params.boundary == PERIODIC:
        meta["boundary_sign"] = "site-major" if params.twist == 1 else "antiperiodic"
    if model == EFFECTIVE:
        meta["validity"] = "tJ <~ U/J"
    return meta


def _check_basis(params: ModelParams, basis: Basis):
    if basis.L != params.L:
        raise ParameterError(f"basis has L={basis.L}, params have L={params.L}")


def build_model(model: str, params: ModelParams, basis: Basis) -> SparseOperator:
    _check_basis(params, basis)
    return assemble(row_function(model, params), basis, _meta(model, params))


def build_lab_frame(params: ModelParams, basis: Basis) -> SparseOperator:
    return build_model(LAB_FRAME, params, basis)


def build_gauged(params: ModelParams, basis: Basis) -> SparseOperator:
    return build_model(GAUGED, params, basis)


def build_effective(params: ModelParams, basis: Basis) -> SparseOperator:
    return build_model(EFFECTIVE, params, basis)


def build_flux_error(params: ModelParams, basis: Basis) -> SparseOperator:
    return build_model(FLUX_ERROR, params, basis)


def explore_model(model: str, params: ModelParams, seeds) -> Basis:
    """Reachable subspace of ``seeds`` under ``model``, found without a full sector."""
    row = row_function(model, params)
    keys = [s.key if isinstance(s, FockState) else s for s in seeds]
    found = explore(lambda k: (t for t, a in row(k) if a != 0 and t != k), keys)
    return sorted_basis(params.L, found, params.boundary)


def build_reachable(model: str, params: ModelParams, seeds) -> SparseOperator:
    return build_model(model, params, explore_model(model, params, seeds))


def charge_operator(basis: Basis) -> sp.csr_matrix:
    """Diagonal C = D + (N_up - N_down)/2, conserved by the effective model."""
    vals = []
    for s in basis:
        vals.append(s.doublons + (s.n_up - s.n_down) / 2)
    return sp.diags(np.array(vals, dtype=float)).tocsr()


# --- virtual chains -----------------------------------------------------------

IMPURITY_LEFT = "L"
IMPURITY_RIGHT = "R"


@dataclass(frozen=True)
class VirtualChain:
    """Labels of a (2M+1)-site chain plus two impurities.

    Index ``m + M`` holds virtual site m; the impurities follow at 2M+1 (left)
    and 2M+2 (right).  When ``L`` and ``center`` are set, each label maps to
    the corresponding three-atom Fock state.
    """

    M: int
    L: int | None = None
    center: int | None = None

    @property
    def dim(self) -> int:
        return 2 * self.M + 3

    def position(self, label) -> int:
        if label == IMPURITY_LEFT:
            return 2 * self.M + 1
        if label == IMPURITY_RIGHT:
            return 2 * self.M + 2
        if not -self.M <= label <= self.M:
            raise ParameterError(f"virtual site {label} outside [-{self.M}, {self.M}]")
        return label + self.M

    def labels(self) -> list:
        return list(range(-self.M, self.M + 1)) + [IMPURITY_LEFT, IMPURITY_RIGHT]

    def fock_state(self, label) -> FockState:
        if self.L is None or self.center is None:
            raise ParameterError("virtual chain has no lattice embedding")
        c, L = self.center, self.L
        ups, doubles = [], []
        if label == 0:
            ups = [c - 1, c, c + 1]
        elif label == IMPURITY_LEFT:
            ups, doubles = [c - 1], [c]
        elif label == IMPURITY_RIGHT:
            ups, doubles = [c + 1], [c]
        else:
            m = label
            j = (abs(m) + 1) // 2
            doublon = abs(m) % 2 == 1
            if m > 0:
                ups = [c - 1]
                if doublon:
                    doubles = [c + j]
                else:
                    ups += [c + j, c + j + 1]
            else:
                ups = [c + 1]
                if doublon:
                    doubles = [c - j]
                else:
                    ups += [c - j - 1, c - j]
        up = sum(1 << s for s in ups + doubles)
        down = sum(1 << s for s in doubles)
        return FockState(L, up, down)

    @classmethod
    def for_lattice(cls, L: int, center: int | None = None) -> "VirtualChain":
        """Chain for a 3-tuplet at (center-1, center, center+1) on L open sites.

        The two arms must be equally long, so the triplet is centred.
        """
        if center is None:
            center = L // 2
        left_pad, right_pad = center - 1, L - center - 2
        if left_pad != right_pad or left_pad < 0:
            raise ParameterError(f"3-tuplet at {center} is not centred on L={L}")
        return cls(M=2 * left_pad + 1, L=L, center=center)


def anderson_matrix(M: int, J: float = 1.0) -> sp.csr_matrix:
    if M < 1:
        raise ParameterError(f"M must be >= 1, got {M}")
    n = 2 * M + 3
    rows, cols = [], []
    for k in range(2 * M):
        rows += [k, k + 1]
        cols += [k + 1, k]
    for imp in (2 * M + 1, 2 * M + 2):
        rows += [M, imp]
        cols += [imp, M]
    return sp.csr_matrix((np.full(len(rows), -J), (rows, cols)), shape=(n, n))


def build_anderson_chain(M: int, J: float = 1.0, L: int | None = None) -> tuple[SparseOperator, VirtualChain]:
    """Tight-binding chain of 2M+1 sites with two impurities on the centre."""
    chain = VirtualChain(M) if L is None else VirtualChain.for_lattice(L)
    if chain.M != M:
        raise ParameterError(f"L={L} implies M={chain.M}, not {M}")
    op = SparseOperator(anderson_matrix(M, J), None, True, {"model": "anderson", "M": M, "J": J})
    return op, chain


def build_delta_chain(M: int, U_delta: float, J: float = 1.0) -> SparseOperator:
    """Chain of 2M+1 sites (index m + M) with on-site energy -U_delta at m = 0."""
    if M < 1:
        raise ParameterError(f"M must be >= 1, got {M}")
    n = 2 * M + 1
    off = -J * np.ones(n - 1)
    diag = np.zeros(n)
    diag[M] = -U_delta
    m = sp.diags([off, diag, off], [-1, 0, 1], format="csr")
    return SparseOperator(m, None, True, {"model": "delta_chain", "M": M, "U_delta": U_delta, "J": J})


# --- Anderson mapping -------------------------------------------------------

@dataclass
class MappingReport:
    L: int
    dim_restricted: int
    dim_chain: int
    max_abs_diff: float
    gauge: np.ndarray | None = None
    message: str = ""

    @property
    def ok(self) -> bool:
        return self.dim_restricted == self.dim_chain and self.max_abs_diff == 0.0


def chain_gauge(mapped: np.ndarray, reference: np.ndarray, root: int) -> np.ndarray:
    """Diagonal +-1 signs g with g_i A_ij g_j matching the reference signs.

    Signs propagate along a spanning tree of the reference graph, so the
    result is unique for tree-shaped couplings like the virtual chain.
    """
    n = len(reference)
    g = np.zeros(n)
    g[root] = 1.0
    stack = [root]
    while stack:
        i = stack.pop()
        for j in np.nonzero(reference[i])[0]:
            if g[j] == 0:
                a = mapped[i, j]
                g[j] = g[i] * (np.sign(a) * np.sign(reference[i, j]) if a != 0 else 1.0)
                stack.append(j)
    g[g == 0] = 1.0
    return g


def compare_mapped(restricted: SparseOperator, chain_op: SparseOperator, chain: VirtualChain) -> MappingReport:
    """Max element difference after permuting ``restricted`` into chain order."""
    L = restricted.basis.L
    if restricted.dim != chain_op.dim:
        return MappingReport(L, restricted.dim, chain_op.dim, float("inf"), message="dimension mismatch")
    try:
        perm = [restricted.basis.position(chain.fock_state(lab)) for lab in chain.labels()]
    except ParameterError as exc:
        return MappingReport(L, restricted.dim, chain_op.dim, float("inf"), message=str(exc))
    mapped = restricted.toarray()[np.ix_(perm, perm)].real
    reference = chain_op.toarray().real
    g = chain_gauge(mapped, reference, chain.position(0))
    gauged = g[:, None] * mapped * g[None, :]
    diff = float(np.max(np.abs(gauged - reference)))
    return MappingReport(L, restricted.dim, chain_op.dim, diff, g)


def triplet_restricted(L: int, J: float = 1.0, sign_mode: str = FERMION) -> SparseOperator:
    """Effective model on the reachable subspace of a centred 3-tuplet."""
    c = L // 2
    seed = FockState(L, 0b111 << (c - 1), 0)
    params = ModelParams(L=L, J=J, sign_mode=sign_mode)
    return build_reachable(EFFECTIVE, params, [seed])


def verify_anderson_mapping(L: int, J: float = 1.0, sign_mode: str = FERMION) -> MappingReport:
    """Compare the restricted 3-tuplet effective model with the Anderson chain."""
    if L < 3 or L % 2 == 0:
        raise ParameterError(f"need odd L >= 3 for a centred 3-tuplet, got {L}")
    restricted = triplet_restricted(L, J, sign_mode)
    chain = VirtualChain.for_lattice(L)
    chain_op, _ = build_anderson_chain(chain.M, J)
    return compare_mapped(restricted, chain_op, chain)
