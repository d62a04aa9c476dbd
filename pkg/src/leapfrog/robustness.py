"""Accuracy of the effective model against the full driven model.

Both sweeps use the small periodic loadout below: the full gauged model at
finite U = Omega is compared with the effective tunneling model through the
average doublon number.
"""
from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import curve_fit

from .fock import PERIODIC, Basis, FockState, ParameterError, enumerate_basis, parse_loadout
from .hamiltonians import EFFECTIVE, FLUX_ERROR, GAUGED, ModelParams, build_model, explore_model
from .observables import TimeSeries, doublon_error, doublon_number
from .propagator import DenseEvolver, EvolutionPlan, Wavefunction, iter_evolve

LOADOUT = "u.uu.uuu"
DETUNING_WINDOW = (10.0, 50.0)


def doublon_series(H, psi0: Wavefunction, plan: EvolutionPlan) -> TimeSeries:
    basis = H.basis
    values = [doublon_number(psi, basis) for psi in iter_evolve(H, psi0, plan)]
    return TimeSeries(plan.times, np.array(values), "doublon")


@dataclass
class RobustnessSetup:
    loadout: str = LOADOUT
    boundary: str = PERIODIC
    t_f: float = 10.0
    dt: float = 0.05
    krylov_dim: int = 30

    @property
    def state(self) -> FockState:
        return parse_loadout(self.loadout)

    def sector(self) -> Basis:
        s = self.state
        return enumerate_basis(s.L, s.n, self.boundary)

    def plan(self) -> EvolutionPlan:
        return EvolutionPlan(0.0, self.t_f, self.dt, krylov_dim=self.krylov_dim)


def ideal_series(setup: RobustnessSetup, basis: Basis | None = None) -> TimeSeries:
    basis = basis or setup.sector()
    H = build_model(EFFECTIVE, ModelParams(L=basis.L, boundary=setup.boundary), basis)
    return doublon_series(H, Wavefunction.product(basis, setup.state), setup.plan())


def full_series(setup: RobustnessSetup, U: float, delta_phi: float = 0.0, basis: Basis | None = None) -> TimeSeries:
    basis = basis or setup.sector()
    params = ModelParams.resonant(basis.L, U, boundary=setup.boundary, delta_phi=delta_phi)
    model = FLUX_ERROR if delta_phi else GAUGED
    H = build_model(model, params, basis)
    return doublon_series(H, Wavefunction.product(basis, setup.state), setup.plan())


def error_sweep(values, setup: RobustnessSetup = RobustnessSetup(), parameter: str = "U_over_J", U: float = 200.0) -> list[float]:
    """doublon_error at each grid value of U/J or of the flux error."""
    basis = setup.sector()
    ideal = ideal_series(setup, basis)
    out = []
    for v in values:
        if parameter == "U_over_J":
            series = full_series(setup, v, basis=basis)
        elif parameter == "delta_phi":
            series = full_series(setup, U, delta_phi=v, basis=basis)
        else:
            raise ParameterError(f"cannot sweep {parameter!r} with doublon_error")
        out.append(doublon_error(series, ideal, setup.t_f))
    return out


def is_monotone_nonincreasing(values, noise: float = 1e-6) -> bool:
    return all(b <= a + noise for a, b in zip(values, values[1:]))


def steady_doublons(
    setup: RobustnessSetup,
    U: float,
    delta_omega: float,
    window: tuple[float, float] = DETUNING_WINDOW,
    dt: float = 0.1,
) -> float:
    """Mean doublon number of the detuned gauged model over ``window``.

    The hopping graph does not depend on the detuning, so the dynamics live in
    the reachable component of the loadout, small enough for full diagonalisation.
    """
    s = setup.state
    params = ModelParams.resonant(s.L, U, delta_omega=delta_omega, boundary=setup.boundary)
    basis = explore_model(GAUGED, params, [s])
    H = build_model(GAUGED, params, basis)
    evolver = DenseEvolver(H)
    psi = Wavefunction.product(basis, s).amplitudes
    times = EvolutionPlan(window[0], window[1], dt).times
    states = evolver.many(psi, times)
    ups, downs = basis.occupations
    per_state = (ups & downs).sum(axis=1) / basis.L
    return float(np.mean(np.abs(states) ** 2 @ per_state))


def lorentzian(x, a, w):
    return a / (1.0 + (np.asarray(x) / w) ** 2)


@dataclass
class LorentzianFit:
    a: float | None
    w: float | None
    ok: bool
    message: str = ""


def fit_lorentzian(detunings, ratios) -> LorentzianFit:
    """Least-squares a/(1 + (x/w)^2); a failed fit is reported, not raised."""
    x = np.asarray(detunings, dtype=float)
    y = np.asarray(ratios, dtype=float)
    if len(x) < 2 or not np.all(np.isfinite(y)):
        return LorentzianFit(None, None, False, "not enough finite points")
    # start from the peak value and the half-maximum crossing
    a0 = float(np.max(y))
    w0 = float(abs(x[np.argmin(np.abs(y - a0 / 2))])) or 1.0
    try:
        with warnings.catch_warnings():
            warnings.simplefilter("ignore")
            popt, _ = curve_fit(lorentzian, x, y, p0=(a0, w0), maxfev=10000)
    except (RuntimeError, ValueError) as exc:
        return LorentzianFit(None, None, False, f"fit diverged: {exc}")
    if not np.all(np.isfinite(popt)):
        return LorentzianFit(None, None, False, "fit diverged")
    return LorentzianFit(float(popt[0]), abs(float(popt[1])), True)


@dataclass
class DetuningSweep:
    U: float
    detunings: list[float]
    means: list[float]
    ratios: list[float]
    fit: LorentzianFit
    extra: dict = field(default_factory=dict)


def detuning_sweep(detunings, U: float = 200.0, setup: RobustnessSetup = RobustnessSetup(), dt: float = 0.1) -> DetuningSweep:
    detunings = [float(d) for d in detunings]
    if not detunings:
        raise ParameterError("empty detuning grid")
    means = [steady_doublons(setup, U, d, dt=dt) for d in detunings]
    ref = means[detunings.index(0.0)] if 0.0 in detunings else steady_doublons(setup, U, 0.0, dt=dt)
    if ref <= 0 or not math.isfinite(ref):
        raise ParameterError("resonant reference doublon number vanishes")
    ratios = [m / ref for m in means]
    return DetuningSweep(U, detunings, means, ratios, fit_lorentzian(detunings, ratios))
