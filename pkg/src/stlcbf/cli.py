"""Command line pipeline: construct -> simulate -> verify, plus a standalone
robustness monitor and a packaged demo scenario.

Exit codes: 0 pass, 1 task infeasible or verification failed, 2 usage or
config error, 3 internal error.
"""

from __future__ import annotations

import argparse
import json
import sys
import time
from pathlib import Path

import numpy as np

from .config import (
    LOG_DOC_FORMAT,
    ConfigError,
    build_cliques,
    build_scenario,
    clique_formulas,
    config_hash,
    load_config,
    run_construct,
)
from .demo import demo_config
from .formula import FormulaError
from .parsing import ParseError, parse
from .robustness import robustness
from .sim import log_from_dict, log_to_dict, read_signal_csv, run, verify, write_log_csv

__all__ = ["main"]

EXIT_PASS = 0
EXIT_FAIL = 1
EXIT_USAGE = 2
EXIT_INTERNAL = 3


def _load_json(path, expected_format=None):
    with open(path) as fh:
        doc = json.load(fh)
    if expected_format is not None and doc.get("format") != expected_format:
        raise ConfigError(f"{path}: expected a {expected_format!r} document")
    return doc


def _write_json(path, doc) -> None:
    Path(path).parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w") as fh:
        json.dump(doc, fh, indent=2)
        fh.write("\n")


def _print_construct_summary(doc) -> None:
    for name, entry in sorted(doc["cliques"].items()):
        if entry["feasible"]:
            print(f"clique {name}: r_star={entry['r_star']:.6g} kappa={entry['kappa']:.6g}")
        else:
            print(f"clique {name}: INFEASIBLE (r_star={entry['r_star']:.6g})")


def cmd_construct(args) -> int:
    cfg = load_config(args.config)
    t0 = time.perf_counter()
    doc = run_construct(cfg)
    elapsed = time.perf_counter() - t0
    _write_json(args.out, doc)
    _print_construct_summary(doc)
    print(f"construction took {elapsed:.2f} s; wrote {args.out}")
    if not all(e["feasible"] for e in doc["cliques"].values()):
        return EXIT_FAIL
    return EXIT_PASS


def _simulate(cfg, doc, outdir, *, seed=None, dt=None) -> int:
    scenario, formulas, r_stars = build_scenario(cfg, doc, seed=seed, dt=dt)
    t0 = time.perf_counter()
    log = run(scenario)
    elapsed = time.perf_counter() - t0

    outdir = Path(outdir)
    outdir.mkdir(parents=True, exist_ok=True)
    csv_path = outdir / "trajectory.csv"
    write_log_csv(log, csv_path)
    log_doc = {
        "format": LOG_DOC_FORMAT,
        "version": 1,
        "config_hash": config_hash(cfg),
        "barrier_doc": doc,
        "log": log_to_dict(log),
    }
    _write_json(outdir / "log.json", log_doc)

    if not log.completed:
        for ev in log.events:
            if ev["kind"] in ("qp_infeasible", "disturbance_bound"):
                step = int(round(ev["t"] / log.dt))
                print(f"simulation aborted at step {step} (t={ev['t']:.4g}): {ev['detail']}")
        print(f"wrote {csv_path} and {outdir / 'log.json'}")
        return EXIT_FAIL

    by_name = {cl.name: cl for cl in scenario.cliques}
    for name in sorted(by_name):
        cl = by_name[name]
        vals = log.barriers[name]
        min_b = float(np.nanmin(vals))
        rho = robustness(formulas[name], log.clique_signal(cl))
        print(f"clique {name}: min_b={min_b:.6g} rho={rho:.6g} (r_star={r_stars[name]:.6g})")
    print(f"simulation took {elapsed:.2f} s; wrote {csv_path} and {outdir / 'log.json'}")
    return EXIT_PASS


def cmd_simulate(args) -> int:
    cfg = load_config(args.config)
    doc = _load_json(args.barriers)
    return _simulate(cfg, doc, args.out, seed=args.seed, dt=args.dt)


def _verify_from_docs(cfg, log_doc) -> int:
    if log_doc.get("config_hash") != config_hash(cfg):
        raise ConfigError("log was produced from a different config (hash mismatch)")
    cliques, r_stars = build_cliques(cfg, log_doc["barrier_doc"])
    log = log_from_dict(log_doc["log"])
    report = verify(log, clique_formulas(cfg), cliques, r_stars)
    print(json.dumps(report, indent=2))
    return EXIT_PASS if report["passed"] else EXIT_FAIL


def cmd_verify(args) -> int:
    log_doc = _load_json(args.log, expected_format=LOG_DOC_FORMAT)
    cfg = load_config(args.config)
    return _verify_from_docs(cfg, log_doc)


def cmd_monitor(args) -> int:
    layout, signal = read_signal_csv(args.signal)
    formula = parse(args.formula, layout)
    value = robustness(formula, signal, t=args.at)
    print(repr(value))
    return EXIT_PASS


def cmd_demo(args) -> int:
    cfg = demo_config()
    outdir = Path(args.out)
    outdir.mkdir(parents=True, exist_ok=True)
    _write_json(outdir / "config.json", cfg)
    print(f"wrote {outdir / 'config.json'}")
    t0 = time.perf_counter()
    doc = run_construct(cfg)
    _write_json(outdir / "barriers.json", doc)
    _print_construct_summary(doc)
    print(f"construction took {time.perf_counter() - t0:.2f} s; wrote {outdir / 'barriers.json'}")
    if not all(e["feasible"] for e in doc["cliques"].values()):
        return EXIT_FAIL
    status = _simulate(cfg, doc, outdir, seed=args.seed, dt=args.dt)
    if status != EXIT_PASS:
        return status
    log_doc = _load_json(outdir / "log.json", expected_format=LOG_DOC_FORMAT)
    return _verify_from_docs(cfg, log_doc)


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="stlcbf",
        description="Compile temporal tasks into control barrier functions, "
        "simulate the resulting feedback law, and verify the outcome.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("construct", help="offline parameter search; writes a barrier document")
    p.add_argument("config", help="scenario config (JSON)")
    p.add_argument("-o", "--out", default="barriers.json", help="barrier document path")
    p.set_defaults(func=cmd_construct)

    p = sub.add_parser("simulate", help="closed-loop run; writes trajectory CSV and log JSON")
    p.add_argument("config", help="scenario config (JSON)")
    p.add_argument("barriers", help="barrier document from construct")
    p.add_argument("--seed", type=int, default=None, help="noise seed override")
    p.add_argument("--dt", type=float, default=None, help="integration step override")
    p.add_argument("-o", "--out", default="out", help="output directory")
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("verify", help="independent robustness check of a logged run")
    p.add_argument("log", help="log JSON from simulate")
    p.add_argument("config", help="scenario config (JSON)")
    p.set_defaults(func=cmd_verify)

    p = sub.add_parser("monitor", help="robustness of a formula on a logged signal CSV")
    p.add_argument("formula", help="task formula text")
    p.add_argument("signal", help="signal CSV with t and x<id>_<k> columns")
    p.add_argument("--at", type=float, default=0.0, help="evaluation time (default 0)")
    p.set_defaults(func=cmd_monitor)

    p = sub.add_parser("demo", help="run the packaged four-agent scenario end to end")
    p.add_argument("-o", "--out", default="demo_out", help="output directory")
    p.add_argument("--seed", type=int, default=None, help="noise seed override")
    p.add_argument("--dt", type=float, default=None, help="integration step override")
    p.set_defaults(func=cmd_demo)

    return parser


def main(argv=None) -> int:
    parser = _build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except (ConfigError, ParseError, FormulaError) as err:
        print(f"error: {err}", file=sys.stderr)
        return EXIT_USAGE
    except (OSError, json.JSONDecodeError) as err:
        print(f"error: {err}", file=sys.stderr)
        return EXIT_USAGE
    except ValueError as err:
        print(f"error: {err}", file=sys.stderr)
        return EXIT_USAGE
    except Exception as err:  # pragma: no cover - crash path
        import traceback

        traceback.print_exc()
        print(f"internal error: {err}", file=sys.stderr)
        return EXIT_INTERNAL


if __name__ == "__main__":
    sys.exit(main())
