"""Declarative scenario and sweep configurations and their runners.

Configs are JSON objects carrying a ``schema`` tag.  Unknown keys are rejected
so that a typo cannot silently fall back to a default.
"""
from __future__ import annotations

import json
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field, fields
from pathlib import Path

import numpy as np

from .fock import OPEN, FockState, ParameterError, enumerate_basis, parse_loadout
from .hamiltonians import EFFECTIVE, MODELS, ModelParams, build_model, explore_model
from .observables import (
    TimeSeries,
    density,
    doublon_number,
    fmt,
    initial_population,
    overlap,
    transmitted,
    write_profiles_csv,
    write_series_csv,
)
from .propagator import EvolutionPlan, Wavefunction, choose_method, iter_evolve
from . import __version__

SCENARIO_SCHEMA = "leapfrog.scenario/1"
SWEEP_SCHEMA = "leapfrog.sweep/1"

OBSERVABLE_KINDS = ("density", "doublon", "transmitted", "initial_population", "overlaps")
SWEEP_PARAMETERS = ("U_over_J", "delta_phi", "delta_omega")
REDUCTIONS = ("doublon_error", "steady_state_doublon_ratio")
BASIS_MODES = ("reachable", "sector")


class ConfigError(ValueError):
    """Invalid configuration; ``field`` names the offending entry."""

    def __init__(self, field_name: str, message: str):
        self.field = field_name
        super().__init__(f"{field_name}: {message}")


def _reject_unknown(data: dict, allowed, where: str):
    if not isinstance(data, dict):
        raise ConfigError(where, "expected a JSON object")
    extra = sorted(set(data) - set(allowed))
    if extra:
        raise ConfigError(f"{where}.{extra[0]}" if where else extra[0], "unknown key")


@dataclass(frozen=True)
class Observable:
    kind: str
    j0: int | None = None
    sites: tuple[int, ...] | None = None
    target: str | None = None

    @property
    def label(self) -> str:
        if self.kind == "transmitted":
            return f"transmitted_j{self.j0}"
        if self.kind == "initial_population":
            return "initial_population"
        return self.kind

    def to_dict(self) -> dict:
        out = {"kind": self.kind}
        if self.j0 is not None:
            out["j0"] = self.j0
        if self.sites is not None:
            out["sites"] = list(self.sites)
        if self.target is not None:
            out["target"] = self.target
        return out

    @classmethod
    def from_dict(cls, data: dict, where: str) -> "Observable":
        _reject_unknown(data, ("kind", "j0", "sites", "target"), where)
        kind = data.get("kind")
        if kind not in OBSERVABLE_KINDS:
            raise ConfigError(f"{where}.kind", f"must be one of {OBSERVABLE_KINDS}, got {kind!r}")
        sites = data.get("sites")
        return cls(kind, data.get("j0"), tuple(sites) if sites is not None else None, data.get("target"))


@dataclass(frozen=True)
class ScenarioConfig:
    name: str
    model: str
    loadout: str
    L: int
    boundary: str = OPEN
    J: float = 1.0
    U: float = 0.0
    Omega: float = 0.0
    delta_phi: float = 0.0
    sign_mode: str = "fermion"
    twist: int = 1
    basis: str = "reachable"
    t0: float = 0.0
    tf: float = 1.0
    dt: float = 0.05
    method: str = "auto"
    krylov_dim: int = 30
    tol: float = 1e-9
    observables: tuple[Observable, ...] = ()
    schema: str = SCENARIO_SCHEMA

    def __post_init__(self):
        # JSON does not distinguish 2 from 2.0; store one canonical form
        for name in ("J", "U", "Omega", "delta_phi", "t0", "tf", "dt", "tol"):
            value = getattr(self, name)
            if isinstance(value, bool) or not isinstance(value, (int, float)):
                raise ConfigError(name, f"expected a number, got {value!r}")
            object.__setattr__(self, name, float(value))
        for name in ("L", "twist", "krylov_dim"):
            if isinstance(getattr(self, name), bool) or not isinstance(getattr(self, name), int):
                raise ConfigError(name, f"expected an integer, got {getattr(self, name)!r}")
        object.__setattr__(self, "observables", tuple(self.observables))
        self.validate()

    def validate(self):
        if self.schema != SCENARIO_SCHEMA:
            raise ConfigError("schema", f"expected {SCENARIO_SCHEMA!r}, got {self.schema!r}")
        if self.model not in MODELS:
            raise ConfigError("model", f"must be one of {MODELS}, got {self.model!r}")
        if self.basis not in BASIS_MODES:
            raise ConfigError("basis", f"must be one of {BASIS_MODES}")
        try:
            state = parse_loadout(self.loadout)
        except ValueError as exc:
            raise ConfigError("loadout", str(exc)) from None
        if state.L != self.L:
            raise ConfigError("loadout", f"length {state.L} does not match L={self.L}")
        try:
            self.params()
            self.plan()
        except ParameterError as exc:
            raise ConfigError("params", str(exc)) from None
        if not self.observables:
            raise ConfigError("observables", "at least one observable is required")
        for k, obs in enumerate(self.observables):
            where = f"observables[{k}]"
            if obs.kind == "transmitted" and (obs.j0 is None or not 0 <= obs.j0 < self.L):
                raise ConfigError(f"{where}.j0", f"must lie in [0, {self.L})")
            if obs.kind == "initial_population":
                if not obs.sites or any(not 0 <= s < self.L for s in obs.sites):
                    raise ConfigError(f"{where}.sites", f"must be a nonempty list within [0, {self.L})")
            if obs.kind == "overlaps":
                if obs.target is None or len(obs.target) != self.L:
                    raise ConfigError(f"{where}.target", "must be a loadout of length L")

    @property
    def state(self) -> FockState:
        return parse_loadout(self.loadout)

    def params(self) -> ModelParams:
        return ModelParams(
            L=self.L,
            boundary=self.boundary,
            J=self.J,
            U=self.U,
            Omega=self.Omega,
            delta_phi=self.delta_phi,
            sign_mode=self.sign_mode,
            twist=self.twist,
        )

    def plan(self) -> EvolutionPlan:
        return EvolutionPlan(self.t0, self.tf, self.dt, self.method, self.krylov_dim, self.tol)

    def to_dict(self) -> dict:
        out = {"schema": self.schema}
        for f in fields(self):
            if f.name == "schema":
                continue
            v = getattr(self, f.name)
            out[f.name] = [o.to_dict() for o in v] if f.name == "observables" else v
        return out

    @classmethod
    def from_dict(cls, data: dict) -> "ScenarioConfig":
        names = [f.name for f in fields(cls)]
        _reject_unknown(data, names, "")
        if "schema" not in data:
            raise ConfigError("schema", "missing")
        for required in ("name", "model", "loadout", "L"):
            if required not in data:
                raise ConfigError(required, "missing")
        kw = dict(data)
        obs = kw.pop("observables", [])
        if not isinstance(obs, list):
            raise ConfigError("observables", "expected a list")
        kw["observables"] = tuple(Observable.from_dict(o, f"observables[{k}]") for k, o in enumerate(obs))
        try:
            return cls(**kw)
        except TypeError as exc:
            raise ConfigError("", str(exc)) from None


@dataclass(frozen=True)
class SweepConfig:
    name: str
    parameter: str
    values: tuple[float, ...]
    base: ScenarioConfig
    reduction: str = "doublon_error"
    window: tuple[float, float] = (10.0, 50.0)
    schema: str = SWEEP_SCHEMA

    def __post_init__(self):
        try:
            object.__setattr__(self, "values", tuple(float(v) for v in self.values))
            object.__setattr__(self, "window", tuple(float(v) for v in self.window))
        except (TypeError, ValueError):
            raise ConfigError("values", "expected a list of numbers") from None
        if self.schema != SWEEP_SCHEMA:
            raise ConfigError("schema", f"expected {SWEEP_SCHEMA!r}, got {self.schema!r}")
        if self.parameter not in SWEEP_PARAMETERS:
            raise ConfigError("parameter", f"must be one of {SWEEP_PARAMETERS}")
        if self.reduction not in REDUCTIONS:
            raise ConfigError("reduction", f"must be one of {REDUCTIONS}")
        if not self.values:
            raise ConfigError("values", "grid is empty")
        if (self.parameter == "delta_omega") != (self.reduction == "steady_state_doublon_ratio"):
            raise ConfigError("reduction", "delta_omega sweeps use steady_state_doublon_ratio, the others doublon_error")
        if self.window[1] <= self.window[0]:
            raise ConfigError("window", "must be increasing")

    def to_dict(self) -> dict:
        return {
            "schema": self.schema,
            "name": self.name,
            "parameter": self.parameter,
            "values": list(self.values),
            "base": self.base.to_dict(),
            "reduction": self.reduction,
            "window": list(self.window),
        }

    @classmethod
    def from_dict(cls, data: dict) -> "SweepConfig":
        _reject_unknown(data, ("schema", "name", "parameter", "values", "base", "reduction", "window"), "")
        for required in ("schema", "name", "parameter", "values", "base"):
            if required not in data:
                raise ConfigError(required, "missing")
        try:
            base = ScenarioConfig.from_dict(data["base"])
        except ConfigError as exc:
            raise ConfigError(f"base.{exc.field}", str(exc).split(": ", 1)[-1]) from None
        if not isinstance(data["values"], list):
            raise ConfigError("values", "expected a list")
        return cls(**dict(data, base=base))


def parse_config(text: str) -> ScenarioConfig | SweepConfig:
    try:
        data = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError("", f"invalid JSON: {exc}") from None
    if not isinstance(data, dict):
        raise ConfigError("", "expected a JSON object")
    schema = data.get("schema")
    if schema == SCENARIO_SCHEMA:
        return ScenarioConfig.from_dict(data)
    if schema == SWEEP_SCHEMA:
        return SweepConfig.from_dict(data)
    raise ConfigError("schema", f"unknown schema {schema!r}")


def format_config(config: ScenarioConfig | SweepConfig) -> str:
    return json.dumps(config.to_dict(), indent=2) + "\n"


def load_config(path: str | Path) -> ScenarioConfig | SweepConfig:
    return parse_config(Path(path).read_text())


# --- running ------------------------------------------------------------------

def _metadata(config: ScenarioConfig, dim: int, method: str) -> dict:
    meta = {
        "name": config.name,
        "model": config.model,
        "params": asdict(config.params()),
        "loadout": config.loadout,
        "basis": config.basis,
        "basis_size": dim,
        "method": method,
        "version": f"v{__version__}",
    }
    if config.boundary != OPEN:
        meta["boundary_sign"] = "site-major" if config.twist == 1 else "antiperiodic"
    return meta


def scenario_operator(config: ScenarioConfig):
    params = config.params()
    if config.basis == "sector":
        basis = enumerate_basis(config.L, config.state.n, config.boundary)
    else:
        basis = explore_model(config.model, params, [config.state])
    return build_model(config.model, params, basis)


@dataclass
class ScenarioResult:
    meta: dict
    series: dict[str, TimeSeries] = field(default_factory=dict)
    profiles: list = field(default_factory=list)
    files: list[Path] = field(default_factory=list)


def simulate(config: ScenarioConfig) -> ScenarioResult:
    """Evolve the loadout and record every requested observable."""
    H = scenario_operator(config)
    basis = H.basis
    plan = config.plan()
    method = choose_method(H, plan.method)
    result = ScenarioResult(_metadata(config, H.dim, method))
    values = {obs.label: [] for obs in config.observables if obs.kind != "density"}
    targets = {}
    for obs in config.observables:
        if obs.kind == "overlaps":
            target = parse_loadout(obs.target)
            # a target outside the reachable basis has zero overlap throughout
            targets[obs.label] = Wavefunction.product(basis, target) if target in basis else None
    want_density = any(o.kind == "density" for o in config.observables)
    for psi in iter_evolve(H, Wavefunction.product(basis, config.state), plan):
        if want_density:
            result.profiles.append(density(psi, basis))
        for obs in config.observables:
            if obs.kind == "doublon":
                values[obs.label].append(doublon_number(psi, basis))
            elif obs.kind == "transmitted":
                values[obs.label].append(transmitted(psi, basis, obs.j0))
            elif obs.kind == "initial_population":
                values[obs.label].append(initial_population(psi, basis, obs.sites))
            elif obs.kind == "overlaps":
                target = targets[obs.label]
                values[obs.label].append(0.0 if target is None else overlap(psi, target)[1])
    for label, vals in values.items():
        result.series[label] = TimeSeries(plan.times, np.array(vals), label)
    return result


def _write_meta(path: Path, meta: dict) -> Path:
    path.write_text(json.dumps(meta, indent=2, sort_keys=True) + "\n")
    return path


def run_scenario(config: ScenarioConfig, out_dir: str | Path) -> ScenarioResult:
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    result = simulate(config)
    header = json.dumps(result.meta, sort_keys=True)
    if result.profiles:
        path = out / f"{config.name}_density.csv"
        write_profiles_csv(path, result.profiles, header)
        result.files.append(path)
    for label, series in result.series.items():
        path = out / f"{config.name}_{label}.csv"
        write_series_csv(path, series, header)
        result.files.append(path)
    result.files.append(_write_meta(out / f"{config.name}.json", result.meta))
    return result


@dataclass
class SweepResult:
    values: list[float]
    reduced: list[float]
    fit: dict | None
    meta: dict
    files: list[Path] = field(default_factory=list)


def _map(fn, items, threads: int):
    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            return list(pool.map(fn, items))
    return [fn(x) for x in items]


def reduce_sweep(config: SweepConfig, threads: int = 1) -> SweepResult:
    # imported here to keep the config layer light
    from . import robustness as rb

    base = config.base
    setup = rb.RobustnessSetup(base.loadout, base.boundary, base.tf, base.dt, base.krylov_dim)
    meta = {"name": config.name, "parameter": config.parameter, "reduction": config.reduction,
            "base": base.to_dict(), "version": f"v{__version__}"}
    fit = None
    if config.reduction == "doublon_error":
        basis = setup.sector()
        ideal = rb.ideal_series(setup, basis)

        def point(v):
            if config.parameter == "U_over_J":
                series = rb.full_series(setup, v, basis=basis)
            else:
                series = rb.full_series(setup, base.U, delta_phi=v, basis=basis)
            return rb.doublon_error(series, ideal, setup.t_f)

        reduced = _map(point, config.values, threads)
        meta["basis_size"] = len(basis)
    else:
        means = _map(lambda d: rb.steady_doublons(setup, base.U, d, config.window), config.values, threads)
        if 0.0 in config.values:
            ref = means[list(config.values).index(0.0)]
        else:
            ref = rb.steady_doublons(setup, base.U, 0.0, config.window)
        reduced = [m / ref for m in means]
        result = rb.fit_lorentzian(config.values, reduced)
        fit = {"model": "a/(1+(x/w)^2)", "ok": result.ok, "a": result.a, "w": result.w, "message": result.message}
        meta["window"] = list(config.window)
    return SweepResult(list(config.values), [float(r) for r in reduced], fit, meta)


def run_sweep(config: SweepConfig, out_dir: str | Path, threads: int = 1) -> SweepResult:
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    result = reduce_sweep(config, threads)
    path = out / f"{config.name}.csv"
    with open(path, "w") as fh:
        fh.write(f"# {json.dumps(result.meta, sort_keys=True)}\n")
        fh.write(f"{config.parameter},{config.reduction}\n")
        for v, r in zip(result.values, result.reduced):
            fh.write(f"{fmt(v)},{fmt(r)}\n")
    result.files.append(path)
    summary = dict(result.meta, values=result.values, reduced=result.reduced, fit=result.fit)
    result.files.append(_write_meta(out / f"{config.name}.json", summary))
    return result


# --- standard geometries --------------------------------------------------------

def centred_tuplet_loadout(L: int, N: int) -> str:
    first = (L - N) // 2
    return "." * first + "u" * N + "." * (L - first - N)


def collision_loadout(L: int, j0: int, gap: int) -> str:
    """A 2-tuplet whose right atom sits ``gap`` sites left of an orphan at j0."""
    right = j0 - gap
    if right - 1 < 0 or not 0 <= j0 < L or gap < 1:
        raise ParameterError("collision geometry does not fit the lattice")
    sites = ["."] * L
    sites[right - 1] = sites[right] = sites[j0] = "u"
    return "".join(sites)


def tuplet_scenario(name: str, L: int, N: int, tf: float, dt: float = 0.5, boundary: str = OPEN, density_out: bool = False) -> ScenarioConfig:
    first = (L - N) // 2
    obs = [Observable("initial_population", sites=tuple(range(first, first + N)))]
    if density_out:
        obs.insert(0, Observable("density"))
    return ScenarioConfig(
        name=name, model=EFFECTIVE, loadout=centred_tuplet_loadout(L, N), L=L,
        boundary=boundary, tf=tf, dt=dt, observables=tuple(obs),
    )


def collision_scenario(name: str = "collision", L: int = 41, j0: int = 20, gap: int = 4, tf: float = 25.0, dt: float = 0.1) -> ScenarioConfig:
    return ScenarioConfig(
        name=name, model=EFFECTIVE, loadout=collision_loadout(L, j0, gap), L=L, tf=tf, dt=dt,
        observables=(Observable("transmitted", j0=j0),),
    )


def orphan_distance(loadout: str, j0: int) -> int:
    """Distance from the nearest atom left of the orphan at j0."""
    left = [j for j, ch in enumerate(loadout[:j0]) if ch != "."]
    if not left:
        raise ParameterError("no atoms left of the orphan")
    return j0 - max(left)

