"""Closed-form three-atom bound states and single-impurity scattering."""
from __future__ import annotations

import math
import warnings
from dataclasses import dataclass

import numpy as np
from scipy import integrate

from .fock import FERMION, ParameterError
from .hamiltonians import (
    IMPURITY_LEFT,
    IMPURITY_RIGHT,
    VirtualChain,
    build_anderson_chain,
    build_delta_chain,
    compare_mapped,
    triplet_restricted,
)
from .propagator import EvolutionPlan, Wavefunction, evolve
from .observables import TimeSeries


@dataclass(frozen=True)
class BoundStateConstants:
    b: float = math.sqrt(1 + math.sqrt(2))

    @property
    def energy(self) -> float:
        return math.sqrt(2) * self.b

    @property
    def norm_limit(self) -> float:
        return 1 / math.sqrt(2 * math.sqrt(2))

    @property
    def overlap3(self) -> float:
        return 1 / (2 * math.sqrt(2))

    @property
    def n_init_bound(self) -> float:
        return 2 + 1 / math.sqrt(2)

    @property
    def n_init3_limit(self) -> float:
        return 1.5 + 1 / math.sqrt(2)


CONSTANTS = BoundStateConstants()


@dataclass(frozen=True)
class AnsatzParams:
    A: float
    B: float
    D: int
    S: int
    b: float

    def __post_init__(self):
        if self.D not in (1, -1) or self.S not in (1, -1):
            raise ParameterError("D and S must be +1 or -1")


def ansatz_params(sign: int, b: float = CONSTANTS.b) -> AnsatzParams:
    """Weights of the bound state with energy sign*sqrt(2)*b*J.

    Written for the virtual chain with uniform hopping -J: the centre carries
    ``sign``, both stuck states -1/(sqrt2 b), doublon sites -b^-(2j-1) and
    singlon-pair sites sign*b^-2j.
    """
    if sign not in (1, -1):
        raise ParameterError("sign must be +1 or -1")
    return AnsatzParams(A=float(sign), B=-1 / (math.sqrt(2) * b), D=-1, S=sign, b=b)


def virtual_bound_vector(M: int, sign: int, b: float = CONSTANTS.b) -> np.ndarray:
    """Unnormalised ansatz in virtual-chain order (see VirtualChain)."""
    p = ansatz_params(sign, b)
    chain = VirtualChain(M)
    vec = np.zeros(chain.dim)
    vec[chain.position(0)] = p.A
    vec[chain.position(IMPURITY_LEFT)] = p.B
    vec[chain.position(IMPURITY_RIGHT)] = p.B
    for m in range(1, M + 1):
        amp = (p.D if m % 2 else p.S) * b ** (-m)
        vec[chain.position(m)] = amp
        vec[chain.position(-m)] = amp
    return vec


def triplet_bound_state(L_d: int, sign: int, J: float = 1.0, sign_mode: str = FERMION, b: float = CONSTANTS.b):
    """Analytic bound state over the reachable basis of a centred 3-tuplet.

    The lattice has L = 2 L_d + 3 sites.  Returns (Wavefunction, restricted
    effective operator).  The norm is computed at finite L_d.
    """
    if L_d < 2:
        raise ParameterError(f"L_d must be >= 2, got {L_d}")
    L = 2 * L_d + 3
    restricted = triplet_restricted(L, J, sign_mode)
    chain = VirtualChain.for_lattice(L)
    chain_op, _ = build_anderson_chain(chain.M, J)
    report = compare_mapped(restricted, chain_op, chain)
    if not report.ok:
        raise ParameterError(f"three-atom basis does not map onto the chain: {report.message}")
    vec = virtual_bound_vector(chain.M, sign, b) * report.gauge
    amps = np.zeros(restricted.dim, dtype=complex)
    for label, v in zip(chain.labels(), vec):
        amps[restricted.basis.position(chain.fock_state(label))] = v
    amps /= np.linalg.norm(amps)
    return Wavefunction(amps, 0.0, restricted.basis), restricted


def predicted_localized_population(
    overlap_per_branch: float = CONSTANTS.overlap3,
    n_bound: float = CONSTANTS.n_init_bound,
    branches: int = 2,
) -> float:
    """Bound channels keep n_bound atoms; everything else leaves one orphan."""
    bound = branches * overlap_per_branch
    return bound * n_bound + (1 - bound) * 1.0


# --- scattering ---------------------------------------------------------------

class BandEdgeWarning(RuntimeWarning):
    pass


def transmission_at_k(k: float, U_delta: float, J: float = 1.0) -> float:
    """t(k) = 1/|1 - U_delta G0(0,0; eps)|^2 with eps = -2J cos k."""
    s = math.sin(k)
    if abs(s) < 1e-15:
        warnings.warn(f"k={k} sits on the band edge; returning the limit", BandEdgeWarning, stacklevel=2)
        return 1.0 if U_delta == 0 else 0.0
    eps = -2 * J * math.cos(k)
    g0 = -1j / math.sqrt(4 * J**2 - eps**2)
    return 1.0 / abs(1 - U_delta * g0) ** 2


def transmission_total(U_delta: float, J: float = 1.0) -> float:
    """Equal-weight average of t(k) over the Brillouin zone.

    The factor 1/2 (right-movers only) and 2 (two atoms per quasiparticle)
    cancel.
    """
    # t(k) is symmetric about pi/2, so average over (0, pi/2)
    val, _ = integrate.quad(
        lambda k: transmission_at_k(k, U_delta, J), 0.0, math.pi / 2, epsabs=1e-12, epsrel=1e-12, limit=200
    )
    return val / (math.pi / 2)


def delta_chain_transmission(
    m_init: int,
    t_max: float,
    dt: float = 0.05,
    U_delta: float = 2.0,
    J: float = 1.0,
    M: int | None = None,
) -> TimeSeries:
    """Single-particle surrogate for a 2-tuplet hitting an orphan.

    A particle starts at chain site ``m_init`` < 0 (distance from the nearest
    tuplet atom to the orphan).  One chain site is one real site, while the
    2-tuplet needs two hops per real site, so real time t maps to chain time
    t/2.  The transmitted weight is doubled for the two atoms.
    """
    if m_init >= 0:
        raise ParameterError("m_init must be negative")
    if M is None:
        M = int(abs(m_init) + 2 * t_max + 20)
    H = build_delta_chain(M, U_delta, J)
    psi = np.zeros(2 * M + 1, dtype=complex)
    psi[M + m_init] = 1.0
    plan = EvolutionPlan(0.0, t_max / 2, dt / 2)
    states = evolve(H, Wavefunction(psi), plan)
    values = [2 * float(np.sum(np.abs(s.amplitudes[M + 1 :]) ** 2)) for s in states]
    return TimeSeries(2 * plan.times, np.array(values), "delta_chain_transmitted")
