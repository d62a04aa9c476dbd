"""Time evolution exp(-iHt)|psi> and eigenpairs of Hermitian sparse operators."""
from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path
from typing import Iterator

import numpy as np
import scipy.linalg as la
import scipy.sparse.linalg as spla

from .fock import Basis, FockState, ParameterError
from .hamiltonians import DENSE_THRESHOLD, SparseOperator

AUTO, KRYLOV, DENSE = "auto", "krylov", "dense"


class ConvergenceError(RuntimeError):
    def __init__(self, message: str, residual: float):
        self.residual = residual
        super().__init__(f"{message} (residual {residual:.3e})")


@dataclass
class Wavefunction:
    amplitudes: np.ndarray
    t: float = 0.0
    basis: Basis | None = None

    @classmethod
    def product(cls, basis: Basis, state: FockState | int) -> "Wavefunction":
        psi = np.zeros(len(basis), dtype=complex)
        psi[basis.position(state)] = 1.0
        return cls(psi, 0.0, basis)

    @property
    def norm(self) -> float:
        return float(np.linalg.norm(self.amplitudes))

    def __len__(self):
        return len(self.amplitudes)

    def save(self, path: str | Path, basis_ref: str = "") -> None:
        """Little-endian complex128 amplitudes plus a JSON sidecar."""
        path = Path(path)
        self.amplitudes.astype("<c16").tofile(path)
        sidecar = {"dim": len(self), "t": self.t, "dtype": "<c16", "basis": basis_ref}
        if self.basis is not None and not basis_ref:
            sidecar["basis"] = {"L": self.basis.L, "boundary": self.basis.boundary, "dim": len(self.basis)}
        path.with_suffix(path.suffix + ".json").write_text(json.dumps(sidecar, indent=2))

    @classmethod
    def load(cls, path: str | Path, basis: Basis | None = None) -> "Wavefunction":
        path = Path(path)
        sidecar = json.loads(path.with_suffix(path.suffix + ".json").read_text())
        amps = np.fromfile(path, dtype="<c16")
        if len(amps) != sidecar["dim"]:
            raise ParameterError("checkpoint size does not match its sidecar")
        return cls(amps.astype(complex), float(sidecar["t"]), basis)


@dataclass(frozen=True)
class EvolutionPlan:
    t0: float = 0.0
    tf: float = 1.0
    dt: float = 0.05
    method: str = AUTO
    krylov_dim: int = 30
    tol: float = 1e-9

    def __post_init__(self):
        if self.tf < self.t0:
            raise ParameterError("tf must be >= t0")
        if self.dt <= 0:
            raise ParameterError("dt must be positive")
        if self.tol <= 0:
            raise ParameterError("tol must be positive")
        if self.method not in (AUTO, KRYLOV, DENSE):
            raise ParameterError(f"unknown method {self.method!r}")
        if self.krylov_dim < 2:
            raise ParameterError("krylov_dim must be >= 2")

    @property
    def times(self) -> np.ndarray:
        n = int(round((self.tf - self.t0) / self.dt))
        times = self.t0 + self.dt * np.arange(n + 1)
        if times[-1] < self.tf - 1e-12 * max(1.0, abs(self.tf)):
            times = np.append(times, self.tf)
        return times


# --- Krylov ---------------------------------------------------------------

def _lanczos(matvec, v: np.ndarray, m: int):
    """Orthonormal Krylov basis (full reorthogonalisation) and tridiagonal T.

    Returns (V, alpha, beta, beta_next); ``beta_next`` is zero on an exact
    invariant subspace.
    """
    n = len(v)
    m = min(m, n)
    V = np.zeros((m, n), dtype=complex)
    alpha = np.zeros(m)
    beta = np.zeros(max(m - 1, 0))
    V[0] = v
    scale = 1.0
    for k in range(m):
        w = matvec(V[k])
        a = np.vdot(V[k], w).real
        alpha[k] = a
        w = w - a * V[k]
        if k:
            w -= beta[k - 1] * V[k - 1]
        # twice is enough
        for _ in range(2):
            w -= V[: k + 1].T @ (V[: k + 1].conj() @ w)
        b = np.linalg.norm(w)
        if k == 0:
            scale = max(abs(a), b, 1.0)
        if k == m - 1 or b <= 1e-13 * scale:
            return V[: k + 1], alpha[: k + 1], beta[:k], (0.0 if b <= 1e-13 * scale else b)
        beta[k] = b
        V[k + 1] = w / b
    return V, alpha, beta, 0.0


def krylov_propagate(matvec, psi: np.ndarray, t: float, m: int = 30, tol: float = 1e-9) -> np.ndarray:
    """exp(-i H t) psi with adaptive substeps.

    Each substep keeps the a-posteriori Lanczos error estimate
    beta_m |<e_m| exp(-i T tau) |e_1>| below ``tol``.
    """
    psi = np.asarray(psi, dtype=complex)
    nrm = np.linalg.norm(psi)
    if nrm == 0 or t == 0:
        return psi.copy()
    v = psi / nrm
    direction = 1.0 if t > 0 else -1.0
    remaining = abs(t)
    tau = remaining
    while remaining > 0:
        V, alpha, beta, beta_next = _lanczos(matvec, v, m)
        evals, evecs = la.eigh_tridiagonal(alpha, beta) if len(alpha) > 1 else (alpha, np.ones((1, 1)))
        first = evecs[0]
        tau = min(remaining, tau * 2.0)
        while True:
            y = evecs @ (np.exp(-1j * direction * evals * tau) * first)
            err = beta_next * abs(y[-1])
            if err <= tol or tau < 1e-12:
                break
            tau *= 0.5
        v = V.T @ y
        v /= np.linalg.norm(v)
        remaining -= tau
        if remaining < 1e-14 * abs(t):
            break
    return nrm * v


# --- evolution --------------------------------------------------------------

def _require_hermitian(H: SparseOperator):
    if not H.hermitian or not H.is_hermitian():
        raise ParameterError("evolution requires a Hermitian operator")


class DenseEvolver:
    """Full diagonalisation, reused for every time on a grid."""

    def __init__(self, H: SparseOperator):
        self.evals, self.evecs = np.linalg.eigh(H.toarray())

    def __call__(self, psi0: np.ndarray, t: float) -> np.ndarray:
        coeff = self.evecs.conj().T @ psi0
        return self.evecs @ (np.exp(-1j * self.evals * t) * coeff)

    def many(self, psi0: np.ndarray, times) -> np.ndarray:
        """States at every time as rows of one (len(times), dim) array."""
        coeff = self.evecs.conj().T @ psi0
        phases = np.exp(-1j * np.outer(np.asarray(times, dtype=float), self.evals))
        return (phases * coeff) @ self.evecs.T


def choose_method(H: SparseOperator, method: str) -> str:
    if method == AUTO:
        return DENSE if H.dim <= DENSE_THRESHOLD else KRYLOV
    return method


def iter_evolve(H: SparseOperator, psi0: Wavefunction, plan: EvolutionPlan) -> Iterator[Wavefunction]:
    """Yield the evolved state at every time of ``plan.times``."""
    if len(psi0) != H.dim:
        raise ParameterError(f"state has dimension {len(psi0)}, operator {H.dim}")
    _require_hermitian(H)
    if abs(psi0.norm - 1) > 1e-9:
        raise ParameterError(f"initial state not normalised (norm {psi0.norm})")
    method = choose_method(H, plan.method)
    times = plan.times
    start = psi0.t
    amps = np.asarray(psi0.amplitudes, dtype=complex)
    if method == DENSE:
        evolver = DenseEvolver(H)
        coeff = evolver.evecs.conj().T @ amps
        for t in times:
            out = evolver.evecs @ (np.exp(-1j * evolver.evals * (t - start)) * coeff)
            yield Wavefunction(out, float(t), psi0.basis)
        return
    matvec = H.matrix.__matmul__
    current, t_prev = amps, start
    for t in times:
        if t != t_prev:
            current = krylov_propagate(matvec, current, t - t_prev, plan.krylov_dim, plan.tol)
            t_prev = t
        yield Wavefunction(current.copy(), float(t), psi0.basis)


def evolve(H: SparseOperator, psi0: Wavefunction, plan: EvolutionPlan) -> list[Wavefunction]:
    return list(iter_evolve(H, psi0, plan))


# --- eigenpairs ---------------------------------------------------------------

FULL = "full"
EXTREMAL = "extremal"


def fix_phase(vecs: np.ndarray) -> np.ndarray:
    """Make each column's largest-magnitude entry real and positive."""
    vecs = np.array(vecs, dtype=complex if np.iscomplexobj(vecs) else float)
    for k in range(vecs.shape[1]):
        col = vecs[:, k]
        mags = np.abs(col)
        # tolerate round-off ties by taking the first near-maximal entry
        i = int(np.argmax(mags >= mags.max() * (1 - 1e-9)))
        phase = col[i] / abs(col[i])
        vecs[:, k] = col / phase
        if np.iscomplexobj(vecs):
            vecs[i, k] = vecs[i, k].real
    return vecs


def eigensolve(H: SparseOperator, mode: str = FULL, k: int = 6, tol: float = 1e-8, maxiter: int | None = None):
    """Eigenpairs (values ascending, vectors as columns).

    ``full`` diagonalises densely; ``extremal`` returns the k largest-magnitude
    pairs via ARPACK.  Raises ConvergenceError if any residual exceeds ``tol``
    (relative to max(1, |lambda|)).
    """
    _require_hermitian(H)
    if mode == FULL:
        if H.dim > DENSE_THRESHOLD:
            raise ParameterError(f"full mode limited to dim <= {DENSE_THRESHOLD}, got {H.dim}")
        evals, evecs = la.eigh(H.toarray())
    elif mode == EXTREMAL:
        if k >= H.dim - 1:
            evals, evecs = la.eigh(H.toarray())
            order = np.argsort(-np.abs(evals), kind="stable")[:k]
            evals, evecs = evals[order], evecs[:, order]
        else:
            try:
                evals, evecs = spla.eigsh(H.matrix, k=k, which="LM", tol=1e-13, maxiter=maxiter)
            except spla.ArpackNoConvergence as exc:
                raise ConvergenceError("ARPACK did not converge", float("inf")) from exc
        order = np.argsort(evals, kind="stable")
        evals, evecs = evals[order], evecs[:, order]
    else:
        raise ParameterError(f"unknown eigensolve mode {mode!r}")
    evecs = fix_phase(evecs / np.linalg.norm(evecs, axis=0))
    resid = np.linalg.norm(H.matrix @ evecs - evecs * evals, axis=0)
    worst = float(np.max(resid / np.maximum(1.0, np.abs(evals)))) if len(evals) else 0.0
    if worst > tol:
        raise ConvergenceError("eigenpair residual above tolerance", worst)
    return evals, evecs
