"""Expectation values measured on evolved wavefunctions."""
from __future__ import annotations

import csv
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from .fock import Basis, ParameterError

DOUBLON_FLOOR = 1e-6


class UndefinedMetricError(ValueError):
    pass


def _amps(psi) -> np.ndarray:
    return np.asarray(getattr(psi, "amplitudes", psi))


def _check(psi, basis: Basis) -> np.ndarray:
    amps = _amps(psi)
    if len(amps) != len(basis):
        raise ParameterError(f"state has dimension {len(amps)}, basis {len(basis)}")
    return amps


@dataclass
class DensityProfile:
    up: np.ndarray
    down: np.ndarray
    t: float = 0.0

    @property
    def total(self) -> np.ndarray:
        return self.up + self.down

    @property
    def L(self) -> int:
        return len(self.up)


@dataclass
class TimeSeries:
    times: np.ndarray
    values: np.ndarray
    label: str = ""

    def __post_init__(self):
        self.times = np.asarray(self.times, dtype=float)
        self.values = np.asarray(self.values)
        if len(self.times) != len(self.values):
            raise ParameterError("times and values differ in length")
        if len(self.times) > 1 and np.any(np.diff(self.times) <= 0):
            raise ParameterError("times must be strictly increasing")

    def window_mean(self, t_lo: float, t_hi: float) -> float:
        mask = (self.times >= t_lo - 1e-12) & (self.times <= t_hi + 1e-12)
        if not mask.any():
            raise ParameterError(f"no samples in [{t_lo}, {t_hi}]")
        return float(np.mean(self.values[mask].real))


def density(psi, basis: Basis) -> DensityProfile:
    amps = _check(psi, basis)
    prob = np.abs(amps) ** 2
    ups, downs = basis.occupations
    return DensityProfile(prob @ ups, prob @ downs, float(getattr(psi, "t", 0.0)))


def doublon_number(psi, basis: Basis) -> float:
    """Average doublon number per site, sum_j <n_j,up n_j,down> / L."""
    amps = _check(psi, basis)
    ups, downs = basis.occupations
    per_state = (ups & downs).sum(axis=1)
    return float(np.abs(amps) ** 2 @ per_state) / basis.L


def transmitted(psi, basis: Basis, j0: int) -> float:
    """Total density on sites strictly right of ``j0``."""
    if not 0 <= j0 < basis.L:
        raise ParameterError(f"j0={j0} outside [0, {basis.L})")
    return float(density(psi, basis).total[j0 + 1 :].sum())


def initial_population(psi, basis: Basis, sites: Iterable[int]) -> float:
    sites = sorted(set(sites))
    if any(not 0 <= s < basis.L for s in sites):
        raise ParameterError("site outside the lattice")
    return float(density(psi, basis).total[sites].sum())


def overlap(psi, phi) -> tuple[complex, float]:
    """(<phi|psi>, |<phi|psi>|^2)."""
    a, b = _amps(psi), _amps(phi)
    if a.shape != b.shape:
        raise ParameterError(f"dimension mismatch {a.shape} vs {b.shape}")
    amp = complex(np.vdot(b, a))
    return amp, abs(amp) ** 2


def doublon_error(series: TimeSeries, ideal: TimeSeries, t_f: float, floor: float = DOUBLON_FLOOR) -> float:
    """RMS relative deviation of a doublon trajectory from the ideal one.

    eps = sqrt((1/t_f) int_0^t_f |(n - n_id)/n_id|^2 dt) by the trapezoid rule.
    Grid points where |n_id| < floor are dropped from the quadrature.
    """
    if len(series.times) != len(ideal.times) or not np.allclose(series.times, ideal.times, rtol=0, atol=1e-12):
        raise ParameterError("series must share a time grid")
    if t_f <= 0 or t_f > series.times[-1] + 1e-12:
        raise ParameterError(f"t_f={t_f} outside the series")
    mask = series.times <= t_f + 1e-12
    t = series.times[mask]
    n = np.real(series.values[mask])
    n_id = np.real(ideal.values[mask])
    keep = np.abs(n_id) >= floor
    if not keep.any():
        raise UndefinedMetricError("ideal doublon number below floor at every grid point")
    rel = np.zeros_like(n)
    rel[keep] = ((n[keep] - n_id[keep]) / n_id[keep]) ** 2
    # dropped points contribute neither value nor interval
    t_k, r_k = t[keep], rel[keep]
    if len(t_k) == 1:
        return float(np.sqrt(r_k[0]))
    integral = np.trapezoid(r_k, t_k)
    span = t_k[-1] - t_k[0] if t_k[-1] > t_k[0] else t_f
    # normalise by the covered span so excluded endpoints do not bias eps down
    return float(np.sqrt(integral / span))


# --- CSV ------------------------------------------------------------------

def fmt(x: float) -> str:
    """Shortest repr capped at 12 significant digits."""
    x = float(x)
    if x == 0:
        return "0"
    return f"{x:.12g}"


def _header(fh, comment: str | None):
    if comment:
        fh.write(f"# {comment}\n")


def write_profiles_csv(path: str | Path, profiles: Sequence[DensityProfile], comment: str | None = None) -> None:
    with open(path, "w", newline="") as fh:
        _header(fh, comment)
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["t", "site", "n_up", "n_down", "n_total"])
        for p in profiles:
            for j in range(p.L):
                w.writerow([fmt(p.t), j, fmt(p.up[j]), fmt(p.down[j]), fmt(p.total[j])])


def write_series_csv(path: str | Path, series: TimeSeries, comment: str | None = None) -> None:
    with open(path, "w", newline="") as fh:
        _header(fh, comment)
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["t", "value"])
        for t, v in zip(series.times, series.values):
            w.writerow([fmt(t), fmt(np.real(v))])
