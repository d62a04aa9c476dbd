"""Numerical bound-state search for odd tuplets and the 5-tuplet population estimate.

The pipeline restricts the effective model to the reachable subspace of a
centred N-tuplet, picks eigenstates whose density sits in a central window,
and, for N = 5, builds "dressed" states: a three-atom bound state on one side
of the tuplet with an extra 2-tuplet (doublon or singlon pair) created
outside it.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .analytic import CONSTANTS
from .fock import DOWN, FERMION, UP, Basis, FockState, ParameterError, apply_creation
from .hamiltonians import EFFECTIVE, ModelParams, SparseOperator, build_reachable
from .observables import density
from .propagator import EvolutionPlan, Wavefunction, eigensolve, iter_evolve

LEFT, RIGHT = "left", "right"
DOUBLON_KIND, PAIR_KIND = "doublon", "pair"

# a 2-tuplet crosses at most one real site per 1/J
TUPLET_SPEED = 1.0
PLATEAU_START = 5.0


@dataclass(frozen=True)
class LocalizationCriterion:
    """Central window of ``pad`` extra sites per side around the tuplet.

    An eigenstate is bound when at least ``min_fraction`` of its density lies in
    the window, or, if ``max_ipr_dim`` is set, when its participation ratio
    1/IPR stays below that many basis states.  Exact zero modes are skipped
    unless ``keep_zero_modes``: they are degenerate with extended zero modes,
    so whether a returned eigenvector looks localised depends on the solver.
    """

    min_fraction: float = 0.8
    pad: int = 1
    max_ipr_dim: float | None = None
    keep_zero_modes: bool = False

    def __post_init__(self):
        if not 0 < self.min_fraction <= 1:
            raise ParameterError("min_fraction must be in (0, 1]")

    def window(self, L: int, first: int, n_sites: int) -> list[int]:
        lo = max(0, first - self.pad)
        hi = min(L, first + n_sites + self.pad)
        return list(range(lo, hi))


def tuplet_state(L: int, N: int, first: int | None = None) -> FockState:
    """N adjacent up singlons, centred unless ``first`` is given."""
    if first is None:
        first = (L - N) // 2
    if first < 0 or first + N > L:
        raise ParameterError(f"{N}-tuplet at {first} does not fit on L={L}")
    return FockState(L, ((1 << N) - 1) << first, 0)


def tuplet_operator(L: int, N: int, first: int | None = None, sign_mode: str = FERMION) -> tuple[SparseOperator, FockState]:
    seed = tuplet_state(L, N, first)
    return build_reachable(EFFECTIVE, ModelParams(L=L, sign_mode=sign_mode), [seed]), seed


@dataclass
class BoundStates:
    energies: np.ndarray
    vectors: np.ndarray
    window: list[int]
    fractions: np.ndarray
    basis: Basis | None

    def __len__(self):
        return len(self.energies)

    def window_population(self, k: int, sites=None) -> float:
        sites = self.window if sites is None else sites
        return float(_site_density(self.vectors[:, k], self.basis)[sites].sum())


def _site_density(vec: np.ndarray, basis: Basis | None) -> np.ndarray:
    if basis is None:
        return np.abs(vec) ** 2
    return density(vec, basis).total


def find_bound_states(
    H: SparseOperator,
    criterion: LocalizationCriterion = LocalizationCriterion(),
    first: int | None = None,
    n_sites: int | None = None,
) -> BoundStates:
    """Localised eigenpairs of ``H`` sorted by |E|.

    ``first``/``n_sites`` locate the tuplet; by default the tuplet is read from
    the atom count and assumed centred.  Operators without a Fock basis (single
    particle chains) are treated as one particle on ``dim`` sites.
    """
    evals, evecs = eigensolve(H)
    basis = H.basis
    if basis is None:
        L, N = H.dim, 1
    else:
        L = basis.L
        numbers = basis.atom_numbers
        if len(numbers) != 1:
            raise ParameterError("bound-state search needs a fixed atom number")
        N = numbers.pop()
    n_sites = N if n_sites is None else n_sites
    first = (L - n_sites) // 2 if first is None else first
    window = criterion.window(L, first, n_sites)
    keep, fractions = [], []
    zero_tol = 1e-9 * max(1.0, float(np.max(np.abs(evals)))) if len(evals) else 0.0
    for k in range(len(evals)):
        if not criterion.keep_zero_modes and abs(evals[k]) <= zero_tol:
            continue
        dens = _site_density(evecs[:, k], basis)
        frac = dens[window].sum() / N
        ok = frac >= criterion.min_fraction
        if criterion.max_ipr_dim is not None:
            ok = ok and 1.0 / np.sum(np.abs(evecs[:, k]) ** 4) <= criterion.max_ipr_dim
        if ok:
            keep.append(k)
            fractions.append(frac)
    order = sorted(range(len(keep)), key=lambda i: (abs(evals[keep[i]]), evals[keep[i]]))
    idx = [keep[i] for i in order]
    return BoundStates(evals[idx], evecs[:, idx], window, np.array(fractions)[order] if keep else np.array([]), basis)


def tuplet_overlaps(bound: BoundStates, state: FockState) -> np.ndarray:
    """|<state|phi_k>|^2 for each bound state."""
    i = bound.basis.position(state)
    return np.abs(bound.vectors[i, :]) ** 2


def five_tuplet_bound_overlap(L: int = 19, criterion: LocalizationCriterion = LocalizationCriterion()) -> dict:
    """Squared overlap of the centred 5-tuplet with each 5-body bound state."""
    H, seed = tuplet_operator(L, 5)
    bound = find_bound_states(H, criterion)
    ov = tuplet_overlaps(bound, seed)
    out = {}
    for k, e in enumerate(bound.energies):
        branch = "+" if e > 0 else "-"
        out.setdefault(branch, []).append(float(ov[k]))
    return {b: v[0] if len(v) == 1 else v for b, v in out.items()}


# --- dressed states -----------------------------------------------------------

@dataclass
class DressedState:
    side: str
    branch: int
    kind: str
    j_m: int
    amplitudes: dict[int, complex] = field(repr=False)
    L: int = 0

    @property
    def n_atoms(self) -> set[int]:
        return {FockState.from_key(k, self.L).n for k in self.amplitudes}

    def vector(self, basis: Basis) -> np.ndarray:
        vec = np.zeros(len(basis), dtype=complex)
        for key, a in self.amplitudes.items():
            i = basis.index.get(key)
            if i is not None:
                vec[i] = a
        return vec


def three_body_bound_state(L: int, center: int, branch: int, sign_mode: str = FERMION) -> tuple[Basis, np.ndarray, float]:
    """Numerical three-atom bound state with its triplet at center-1..center+1.

    Returns (basis, vector, energy).
    """
    H, _ = tuplet_operator(L, 3, center - 1, sign_mode)
    bound = find_bound_states(H, first=center - 1, n_sites=3)
    picks = [k for k, e in enumerate(bound.energies) if np.sign(e) == branch]
    if not picks:
        raise ParameterError(f"no three-body bound state of branch {branch:+d} at {center}")
    k = picks[0]
    return bound.basis, bound.vectors[:, k], float(bound.energies[k])


def _tuplet_adds(L: int, lo: int, hi: int):
    """2-tuplet creation patterns fully inside sites [lo, hi]."""
    for j in range(lo, hi + 1):
        yield DOUBLON_KIND, j, [(j, UP), (j, DOWN)]
    for j in range(lo, hi):
        yield PAIR_KIND, j, [(j, UP), (j + 1, UP)]


def dress(basis: Basis, vec: np.ndarray, ops, sign_mode: str = FERMION) -> dict[int, complex]:
    """Apply the creation operators (rightmost first) and renormalise.

    Components already holding an atom where one is created vanish.
    """
    out: dict[int, complex] = {}
    full = (1 << basis.L) - 1
    for key, a in zip(basis.keys, vec):
        if a == 0:
            continue
        up, down, sign = key & full, key >> basis.L, 1
        for site, spin in reversed(ops):
            res = apply_creation(up, down, site, spin, sign_mode)
            if res is None:
                break
            up, down, s = res
            sign *= s
        else:
            k2 = up | (down << basis.L)
            out[k2] = out.get(k2, 0) + sign * a
    nrm = math.sqrt(sum(abs(x) ** 2 for x in out.values()))
    if nrm == 0:
        return {}
    return {k: x / nrm for k, x in out.items()}


def build_dressed_states(side: str, branch: int, L: int, N_first: int | None = None, sign_mode: str = FERMION) -> tuple[list[DressedState], list]:
    """Dressed states for the 5-tuplet at sites first..first+4.

    ``side`` is where the three-body bound state sits; the extra 2-tuplet is
    created on the opposite side, outside the three bound sites.  Returns the
    dressed states and the skipped (kind, j_m) patterns that vanish entirely.
    """
    first = (L - 5) // 2 if N_first is None else N_first
    if side == LEFT:
        center = first + 1
        adds = _tuplet_adds(L, first + 3, L - 1)
    elif side == RIGHT:
        center = first + 3
        adds = _tuplet_adds(L, 0, first + 1)
    else:
        raise ParameterError(f"side must be {LEFT!r} or {RIGHT!r}")
    basis3, vec3, _ = three_body_bound_state(L, center, branch, sign_mode)
    states, skipped = [], []
    for kind, j_m, ops in adds:
        amps = dress(basis3, vec3, ops, sign_mode)
        if not amps:
            skipped.append((kind, j_m))
            continue
        states.append(DressedState(side, branch, kind, j_m, amps, L))
    return states, skipped


def dressed_matrix(states: list[DressedState], basis: Basis) -> np.ndarray:
    return np.array([s.vector(basis) for s in states]) if states else np.zeros((0, len(basis)))


def projected_weight(D: np.ndarray, psi: np.ndarray, gram: bool = False) -> float:
    """Sum of |<d|psi>|^2, or the orthogonal-projector weight when ``gram``."""
    amps = D.conj() @ psi
    if not gram:
        return float(np.sum(np.abs(amps) ** 2))
    G = D.conj() @ D.T
    return float(np.real(amps.conj() @ np.linalg.solve(G, amps)))


def rebound_time(L: int, N: int) -> float:
    """Time for the fastest 2-tuplet to hit a wall and return to the tuplet."""
    first = (L - N) // 2
    gap = min(first, L - (first + N))
    return 2 * gap / TUPLET_SPEED


@dataclass
class FiveTupletReport:
    L_search: int
    energies: list[float]
    n_init5: list[float]
    overlap5: list[float]
    dressed_plateau: dict[str, float]
    channel3_weight: float
    n_init3: float
    predicted: float
    window: tuple[float, float]
    skipped: dict = field(default_factory=dict)

    def as_dict(self) -> dict:
        return {
            "L_search": self.L_search,
            "bound_energies": self.energies,
            "n_init5": self.n_init5,
            "overlap5": self.overlap5,
            "dressed_plateau": self.dressed_plateau,
            "channel3_weight": self.channel3_weight,
            "n_init3": self.n_init3,
            "predicted_localized_population": self.predicted,
            "plateau_window": list(self.window),
        }


def assemble_population(overlap5, n_init5, channel3_weight: float, n_init3: float) -> float:
    """Bound 5-body channels + dressed 3-body channels + one-orphan remainder."""
    w5 = float(np.sum(overlap5))
    five = float(np.dot(overlap5, n_init5))
    rest = 1.0 - w5 - channel3_weight
    return five + channel3_weight * n_init3 + rest * 1.0


def dressed_plateaus(
    L: int,
    window: tuple[float, float] | None = None,
    dt: float = 0.25,
    gram: bool = False,
    sign_mode: str = FERMION,
) -> tuple[dict[str, float], dict[str, np.ndarray], np.ndarray, tuple[float, float]]:
    """Time-averaged dressed-state weight of an evolving centred 5-tuplet.

    The default window runs from PLATEAU_START to the first rebound return.
    """
    if window is None:
        window = (PLATEAU_START, rebound_time(L, 5))
    H, seed = tuplet_operator(L, 5, sign_mode=sign_mode)
    matrices, skipped = {}, {}
    for side in (LEFT, RIGHT):
        for branch in (1, -1):
            states, skip = build_dressed_states(side, branch, L, sign_mode=sign_mode)
            label = f"{side}{'+' if branch > 0 else '-'}"
            matrices[label] = dressed_matrix(states, H.basis)
            skipped[label] = skip
    plan = EvolutionPlan(0.0, window[1], dt)
    series = {k: [] for k in matrices}
    for psi in iter_evolve(H, Wavefunction.product(H.basis, seed), plan):
        for k, D in matrices.items():
            series[k].append(projected_weight(D, psi.amplitudes, gram))
    times = plan.times
    mask = (times >= window[0] - 1e-12) & (times <= window[1] + 1e-12)
    series = {k: np.array(v) for k, v in series.items()}
    plateaus = {k: float(v[mask].mean()) for k, v in series.items()}
    return plateaus, series, times, window


def five_tuplet_pipeline(
    L: int = 19,
    criterion: LocalizationCriterion = LocalizationCriterion(),
    window: tuple[float, float] | None = None,
    gram: bool = False,
    sign_mode: str = FERMION,
) -> FiveTupletReport:
    """Bound-state search, dressed-state overlaps and the population estimate."""
    H, seed = tuplet_operator(L, 5, sign_mode=sign_mode)
    bound = find_bound_states(H, criterion)
    first = (L - 5) // 2
    central5 = list(range(first, first + 5))
    n5 = [bound.window_population(k, central5) for k in range(len(bound))]
    ov5 = tuplet_overlaps(bound, seed)
    plateaus, _, _, window = dressed_plateaus(L, window, gram=gram, sign_mode=sign_mode)
    w3 = sum(plateaus.values())
    basis3, vec3, _ = three_body_bound_state(L, first + 1, 1, sign_mode)
    n3 = float(density(vec3, basis3).total[first : first + 3].sum())
    predicted = assemble_population(ov5, n5, w3, n3)
    return FiveTupletReport(
        L, [float(e) for e in bound.energies], n5, [float(x) for x in ov5], plateaus, w3, n3, predicted, window
    )


def predicted_localized_population_5(L: int = 19, **kw) -> float:
    return five_tuplet_pipeline(L, **kw).predicted


def pruned_support(H: SparseOperator, seed: FockState, t: float = 40.0, threshold: float = 1e-12) -> set[int]:
    """Basis keys whose evolved population exceeds ``threshold`` at time t."""
    psi = Wavefunction.product(H.basis, seed)
    last = None
    for last in iter_evolve(H, psi, EvolutionPlan(0.0, t, t)):
        pass
    pop = np.abs(last.amplitudes) ** 2
    return {H.basis.keys[i] for i in np.nonzero(pop > threshold)[0]}
