import json
from dataclasses import replace
from pathlib import Path

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from leapfrog.scenarios import (
    ConfigError,
    Observable,
    ScenarioConfig,
    SweepConfig,
    collision_loadout,
    format_config,
    load_config,
    orphan_distance,
    parse_config,
    run_scenario,
    run_sweep,
    simulate,
)

CONFIGS = Path(__file__).resolve().parent.parent / "configs"


def base_config(**kw):
    args = dict(name="t", model="effective", loadout="..uu..", L=6, tf=2.0, dt=0.5,
                observables=(Observable("density"), Observable("transmitted", j0=3)))
    args.update(kw)
    return ScenarioConfig(**args)


loadouts = st.text(alphabet=".udD", min_size=2, max_size=10)


@settings(max_examples=50)
@given(loadouts, st.sampled_from(["lab_frame", "gauged", "effective", "flux_error"]),
       st.sampled_from(["open", "periodic"]), st.floats(0, 50), st.floats(0.01, 1.0))
def test_round_trip(loadout, model, boundary, U, dt):
    c = ScenarioConfig(name="x", model=model, loadout=loadout, L=len(loadout), boundary=boundary,
                       U=U, Omega=U, dt=dt, observables=(Observable("doublon"), Observable("overlaps", target=loadout)))
    assert parse_config(format_config(c)) == c
    assert format_config(parse_config(format_config(c))) == format_config(c)


@pytest.mark.parametrize("path", sorted(CONFIGS.glob("*.json")), ids=lambda p: p.stem)
def test_shipped_configs_round_trip(path):
    assert format_config(load_config(path)) == path.read_text()


class TestValidation:
    def test_unknown_key(self):
        d = base_config().to_dict()
        d["colour"] = "blue"
        with pytest.raises(ConfigError) as err:
            parse_config(json.dumps(d))
        assert err.value.field == "colour"

    def test_unknown_observable_key(self):
        d = base_config().to_dict()
        d["observables"][1]["j1"] = 3
        with pytest.raises(ConfigError) as err:
            parse_config(json.dumps(d))
        assert err.value.field == "observables[1].j1"

    def test_loadout_length(self):
        with pytest.raises(ConfigError) as err:
            base_config(L=7)
        assert err.value.field == "loadout"

    def test_j0_range(self):
        with pytest.raises(ConfigError) as err:
            base_config(observables=(Observable("transmitted", j0=6),))
        assert err.value.field == "observables[0].j0"

    def test_bad_model_and_schema(self):
        with pytest.raises(ConfigError):
            base_config(model="hubbard")
        with pytest.raises(ConfigError):
            parse_config('{"schema": "other/1"}')
        with pytest.raises(ConfigError):
            parse_config("not json")

    def test_number_types(self):
        d = base_config().to_dict()
        d["U"] = "large"
        with pytest.raises(ConfigError) as err:
            parse_config(json.dumps(d))
        assert err.value.field == "U"

    def test_sweep_rules(self):
        with pytest.raises(ConfigError):
            SweepConfig("s", "U_over_J", (), base_config())
        with pytest.raises(ConfigError):
            SweepConfig("s", "delta_omega", (0.0,), base_config(), reduction="doublon_error")
        with pytest.raises(ConfigError):
            SweepConfig("s", "temperature", (1.0,), base_config())


def test_deterministic_csv(tmp_path):
    c = base_config()
    run_scenario(c, tmp_path / "a")
    run_scenario(c, tmp_path / "b")
    for f in sorted((tmp_path / "a").iterdir()):
        assert f.read_bytes() == (tmp_path / "b" / f.name).read_bytes()


def test_csv_metadata_header(tmp_path):
    result = run_scenario(base_config(), tmp_path)
    first = result.files[0].read_text().splitlines()[0]
    meta = json.loads(first[2:])
    assert meta["basis_size"] == result.meta["basis_size"] and meta["method"] == "dense"
    assert meta["version"].startswith("v")


def test_overlap_with_unreachable_target_is_zero():
    c = base_config(observables=(Observable("overlaps", target="u....u"),))
    assert not np.any(simulate(c).series["overlaps"].values)


def test_two_tuplet_spreads_ballistically():
    r = simulate(load_config(CONFIGS / "fig2a_two_tuplet.json"))
    t = np.array([p.t for p in r.profiles])
    x = np.arange(30) - 14.5
    width = np.array([np.sqrt(np.sum(p.total * x**2) / 2) for p in r.profiles])
    late = t >= 3
    slope, icpt = np.polyfit(t[late], width[late], 1)
    resid = width[late] - (slope * t[late] + icpt)
    assert slope == pytest.approx(1 / np.sqrt(2), rel=0.02)
    assert np.max(np.abs(resid)) < 0.01
    # the front edge advances one site per unit time
    for p in r.profiles:
        if float(p.t).is_integer() and p.t <= 12:
            occ = np.flatnonzero(p.total > 0.01)
            assert (occ.min(), occ.max()) == (14 - int(p.t), 15 + int(p.t))


def test_open_boundary_keeps_triplet_periodic_loses_it():
    means = {}
    for name in ("fig3d_three_tuplet_open", "fig3e_three_tuplet_periodic"):
        s = simulate(load_config(CONFIGS / f"{name}.json")).series["initial_population"]
        means[name] = s.window_mean(80, 100)
    assert means["fig3d_three_tuplet_open"] == pytest.approx(2.2, abs=0.15)
    assert means["fig3e_three_tuplet_periodic"] < means["fig3d_three_tuplet_open"] - 0.1


def test_fig4_sizes():
    sizes = {}
    for N in range(2, 7):
        c = load_config(CONFIGS / f"fig4d_N{N}.json")
        sizes[N] = c.L
        assert c.loadout.count("u") == N
    assert sizes == {2: 36, 3: 35, 4: 32, 5: 25, 6: 18}


def test_collision_geometry():
    lo = collision_loadout(41, 20, 4)
    assert lo[15:21] == "uu...u" and orphan_distance(lo, 20) == 4


def test_sweep_outputs(tmp_path):
    base = ScenarioConfig(name="ring", model="gauged", loadout="u.uuu.", L=6, boundary="periodic",
                          U=40.0, Omega=40.0, tf=2.0, dt=0.05, basis="sector", observables=(Observable("doublon"),))
    res = run_sweep(SweepConfig("s", "delta_omega", (0.0, 2.0, 4.0), base, "steady_state_doublon_ratio", (2.0, 6.0)), tmp_path)
    assert res.reduced[0] == 1.0 and res.fit is not None
    lines = (tmp_path / "s.csv").read_text().splitlines()
    assert lines[1] == "delta_omega,steady_state_doublon_ratio" and len(lines) == 5
