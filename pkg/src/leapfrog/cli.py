"""Command-line entry point.

Exit codes: 0 success, 1 configuration error, 2 numerical failure,
3 verification failures present.
"""
from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

from . import __version__
from .fock import ParameterError
from .observables import fmt, write_series_csv
from .propagator import ConvergenceError
from .scenarios import ConfigError, ScenarioConfig, SweepConfig, load_config

EXIT_OK, EXIT_CONFIG, EXIT_NUMERICAL, EXIT_VERIFY = 0, 1, 2, 3

log = logging.getLogger("leapfrog")


def _load(path, kind):
    if path is None:
        return None
    config = load_config(path)
    if not isinstance(config, kind):
        raise ConfigError("schema", f"{path} is not a {kind.__name__}")
    return config


def _dump(path: Path, data) -> Path:
    path.write_text(json.dumps(data, indent=2, sort_keys=True, default=float) + "\n")
    return path


def cmd_evolve(args) -> int:
    config = _load(args.config, ScenarioConfig)
    if config is None:
        raise ConfigError("--config", "evolve needs a scenario config")
    from .scenarios import run_scenario

    result = run_scenario(config, args.out)
    for f in result.files:
        print(f)
    return EXIT_OK


def cmd_scatter(args) -> int:
    from .analytic import delta_chain_transmission
    from .scenarios import collision_scenario, orphan_distance, run_scenario

    config = _load(args.config, ScenarioConfig) or collision_scenario(tf=args.tf)
    obs = [o for o in config.observables if o.kind == "transmitted"]
    if not obs:
        raise ConfigError("observables", "scatter needs a transmitted(j0) observable")
    j0 = obs[0].j0
    result = run_scenario(config, args.out)
    series = result.series[obs[0].label]
    m_init = -orphan_distance(config.loadout, j0)
    surrogate = delta_chain_transmission(m_init, config.tf, config.dt, U_delta=args.u_delta)
    out = Path(args.out)
    write_series_csv(out / f"{config.name}_surrogate.csv", surrogate, f"delta chain, m_init={m_init}, U_delta={fmt(args.u_delta)}")
    summary = {"transmitted_final": float(series.values[-1]), "surrogate_final": float(surrogate.values[-1]), "m_init": m_init}
    _dump(out / f"{config.name}_scatter.json", summary)
    print(json.dumps(summary))
    return EXIT_OK


def cmd_boundstates(args) -> int:
    from .boundstates import find_bound_states, five_tuplet_pipeline, tuplet_operator, tuplet_overlaps

    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    if args.N == 5:
        report = five_tuplet_pipeline(args.L).as_dict()
    else:
        H, seed = tuplet_operator(args.L, args.N)
        bound = find_bound_states(H)
        report = {
            "L": args.L, "N": args.N, "dim": H.dim,
            "energies": [float(e) for e in bound.energies],
            "window_fraction": [float(f) for f in bound.fractions],
            "tuplet_overlap": [float(x) for x in tuplet_overlaps(bound, seed)],
        }
    _dump(out / f"boundstates_L{args.L}_N{args.N}.json", report)
    print(json.dumps(report, default=float))
    return EXIT_OK


def cmd_scars(args) -> int:
    from .scars import enumerate_frozen_states, scar_count, write_counts_csv

    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    Ls = range(2, args.L_max + 1)
    rows = write_counts_csv(out / "scar_counts.csv", Ls)
    bad = []
    if args.brute_force:
        for r in rows:
            if r.L <= args.brute_force:
                n = len(enumerate_frozen_states(r.L))
                print(f"L={r.L} transfer={r.total} enumerated={n}")
                if n != scar_count(r.L)[0]:
                    bad.append(r.L)
    else:
        for r in rows:
            print(f"L={r.L} total={r.total}")
    if bad:
        log.error("brute-force counts disagree at L=%s", bad)
        return EXIT_NUMERICAL
    return EXIT_OK


def cmd_robustness(args) -> int:
    config = _load(args.config, SweepConfig)
    if config is None:
        raise ConfigError("--config", "robustness needs a sweep config")
    from .scenarios import run_sweep

    result = run_sweep(config, args.out, threads=args.threads)
    for v, r in zip(result.values, result.reduced):
        print(f"{config.parameter}={fmt(v)} {config.reduction}={fmt(r)}")
    if result.fit is not None:
        if result.fit["ok"]:
            print(f"lorentzian a={fmt(result.fit['a'])} w={fmt(result.fit['w'])}")
        else:
            print(f"lorentzian fit skipped: {result.fit['message']}")
    return EXIT_OK


def cmd_analytic(args) -> int:
    from .analytic import CONSTANTS, transmission_total, triplet_bound_state

    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    psi, H = triplet_bound_state(args.L_d, 1)
    L = 2 * args.L_d + 3
    first = (L - 3) // 2
    seed = sum(1 << j for j in range(first, first + 3))
    report = {
        "b": CONSTANTS.b,
        "bound_energy": CONSTANTS.energy,
        "overlap3_limit": CONSTANTS.overlap3,
        "overlap3_at_L_d": abs(psi.amplitudes[H.basis.position(seed)]) ** 2,
        "L_d": args.L_d,
        "n_init_bound": CONSTANTS.n_init_bound,
        "U_delta": args.u_delta,
        "transmission_total": transmission_total(args.u_delta),
    }
    _dump(out / "analytic.json", report)
    print(json.dumps(report, default=float))
    return EXIT_OK


def cmd_verify(args) -> int:
    from .verify import run_verification_suite

    numbers = [int(x) for x in args.criteria.split(",")] if args.criteria else None
    report = run_verification_suite(numbers, log=print)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    report.write(out / "verification.json")
    return EXIT_OK if report.passed else EXIT_VERIFY


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", type=Path, help="JSON scenario or sweep config")
    common.add_argument("--out", type=Path, default=Path("out"), help="output directory")
    common.add_argument("--threads", type=int, default=1, help="parallel sweep points")
    common.add_argument("--seed", type=int, default=None, help="reserved; the dynamics are deterministic")
    common.add_argument("-v", "--verbose", action="store_true")

    parser = argparse.ArgumentParser(prog="leapfrog", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=f"%(prog)s v{__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("evolve", parents=[common], help="run a scenario config")
    p.set_defaults(func=cmd_evolve)

    p = sub.add_parser("scatter", parents=[common], help="2-tuplet/orphan collision and delta-chain surrogate")
    p.add_argument("--tf", type=float, default=25.0)
    p.add_argument("--u-delta", type=float, default=2.0)
    p.set_defaults(func=cmd_scatter)

    p = sub.add_parser("boundstates", parents=[common], help="localised eigenstates of a centred tuplet")
    p.add_argument("--L", type=int, default=19)
    p.add_argument("--N", type=int, default=5)
    p.set_defaults(func=cmd_boundstates)

    p = sub.add_parser("scars", parents=[common], help="frozen product-state counts")
    p.add_argument("--L-max", type=int, default=12)
    p.add_argument("--brute-force", type=int, default=0, metavar="L", help="enumerate up to this L")
    p.set_defaults(func=cmd_scars)

    p = sub.add_parser("robustness", parents=[common], help="run a sweep config")
    p.set_defaults(func=cmd_robustness)

    p = sub.add_parser("analytic", parents=[common], help="closed-form constants and transmission")
    p.add_argument("--L-d", type=int, default=16)
    p.add_argument("--u-delta", type=float, default=2.0)
    p.set_defaults(func=cmd_analytic)

    p = sub.add_parser("verify", parents=[common], help="run the acceptance checks")
    p.add_argument("--criteria", default="", help="comma-separated criterion numbers")
    p.set_defaults(func=cmd_verify)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    if args.threads < 1:
        print("config error: --threads must be >= 1", file=sys.stderr)
        return EXIT_CONFIG
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (ParameterError, OSError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (ConvergenceError, FloatingPointError, ArithmeticError, AssertionError) as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL


if __name__ == "__main__":
    sys.exit(main())
