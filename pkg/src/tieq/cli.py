"""Command-line entry point.

``tieq solve|anneal|bridge|verify|scan --config <path> [--out <dir>]`` writes
``report.json``, ``series/*.csv`` and a ``run_meta.json`` sidecar holding
everything non-deterministic.  Exit codes: 0 success, 2 certification
failure, 1 error.
"""

from __future__ import annotations

import argparse
import csv
import datetime as _dt
import json
import platform
import sys
from importlib import resources
from pathlib import Path

import numpy as np

from . import __version__
from .anneal import Schedule, SolverConfig, Thresholds, solve_annealed
from .bridge import convergence_study
from .catalog import BUILTIN
from .discount import Exponential
from .entropy_gibbs import gibbs_diagnostics, gibbs_policy
from .errors import ConfigError, StructureMismatch, TieqError
from .fixedpoint import solve_multistart
from .io import dumps, load_config, load_model, save_model
from .verify import (bellman_consistency, deviation_test, direct_choice_dims, mean_action_value_check,
                     standard_equilibrium_scan)

COMMANDS = ("solve", "anneal", "bridge", "verify", "scan")


def _fmt(x):
    if isinstance(x, (float, np.floating)):
        return format(float(x), ".17g")
    return str(x)


def write_csv(path, header, rows):
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for row in rows:
            w.writerow([_fmt(v) for v in row])


def resolve_model(cfg, config_path):
    ref = cfg["model"]
    if ref.startswith("builtin:"):
        name = ref.split(":", 1)[1]
        if name not in BUILTIN:
            raise ConfigError(f"unknown builtin model {name!r}; choose from {sorted(BUILTIN)}", "/model")
        return BUILTIN[name]()
    path = Path(ref)
    if not path.is_absolute():
        path = Path(config_path).parent / path
    if not path.exists():
        raise ConfigError(f"model file not found: {path}", "/model")
    try:
        return load_model(path)
    except ConfigError as exc:
        raise ConfigError(f"in model file {path}: {exc.message}", exc.pointer) from None


def _solver(cfg):
    s = cfg.get("solver", {})
    return SolverConfig(damping=s.get("damping", 0.5), tol=s.get("tol", 1e-10), max_iter=s.get("max_iter", 2000),
                        anderson=s.get("anderson", False), multistart=s.get("multistart", 0),
                        seed=cfg.get("seed", 0))


def _schedule(cfg):
    s = cfg.get("schedule", {})
    try:
        return Schedule(s.get("lambda0", 1.0), s.get("factor", 0.5), s.get("lambda_min", 1e-3))
    except ValueError as exc:
        raise ConfigError(str(exc), "/schedule") from None


def _thresholds(cfg):
    t = cfg.get("thresholds", {})
    return Thresholds(t.get("deviation_gap", 1e-3), t.get("off_support_mass", 1e-2), t.get("self_consistency", 1e-4))


def _lambda(cfg):
    if "lambda" not in cfg:
        raise ConfigError("'lambda' is a required property for this command", "/lambda")
    return float(cfg["lambda"])


def _mode(cfg, model):
    mode = cfg.get("mode", model.mode)
    if mode != model.mode:
        raise ConfigError(f"mode {mode!r} does not match the {model.mode} model", "/mode")
    return mode


def run_solve(cfg, model, mode):
    lam = _lambda(cfg)
    s = _solver(cfg)
    best, reports = solve_multistart(lam, model, mode, n_random=s.multistart, seed=s.seed, workers=None,
                                     damping=s.damping, tol=s.tol, max_iter=s.max_iter, anderson=s.anderson)
    policy = gibbs_policy(best.y, lam, model)
    report = {
        "command": "solve",
        "lambda": lam,
        "fixedPoint": best.to_dict(),
        "starts": [r.to_dict() for r in reports],
        "policy": policy.densities.tolist(),
        "deviation": deviation_test(policy, best.y, lam, model).to_dict(),
        "diagnostics": gibbs_diagnostics(best.y, lam, model).to_dict(),
    }
    series = {"residual.csv": (["start", "iteration", "residual"],
                               [(r.start, k, v) for r in reports for k, v in r.trace])}
    return report, series, 0 if best.converged else 2


def _anneal_series(out):
    resid = [(n, k, v) for n, s in enumerate(out.stages) for k, v in s.report.trace]
    stages = []
    for n, s in enumerate(out.stages):
        stages.append((n, s.lam, s.report.converged, s.report.residual, s.off_support_mass))
    return {"residual.csv": (["stage", "iteration", "residual"], resid),
            "anneal.csv": (["stage", "lambda", "converged", "residual", "off_support_mass"], stages)}


def run_anneal(cfg, model, mode):
    out = solve_annealed(model, mode, _schedule(cfg), _solver(cfg), _thresholds(cfg))
    report = {"command": "anneal", "anneal": out.to_dict(), "certificate": out.certificate.to_dict()}
    return report, _anneal_series(out), 0 if out.certificate.passed else 2


def run_bridge(cfg, model, mode):
    if model.mode != "ct":
        raise ConfigError("bridge needs a continuous-time model", "/model")
    if "bridge" not in cfg:
        raise ConfigError("'bridge' is a required property for this command", "/bridge")
    lam = _lambda(cfg)
    study = convergence_study(model, lam, cfg["bridge"]["h_list"], _solver(cfg))
    rows = [(r.h, r.discrepancy, r.policy_distance) for r in study.rows]
    ok = study.ct_report.converged and all(r.converged for r in study.rows)
    report = {"command": "bridge", "bridge": study.to_dict()}
    return report, {"bridge.csv": (["h", "discrepancy", "policy_distance"], rows)}, 0 if ok else 2


def run_verify(cfg, model, mode):
    out = solve_annealed(model, mode, _schedule(cfg), _solver(cfg), _thresholds(cfg))
    tol = cfg.get("verify", {}).get("tol", 1e-6)
    checks = {"certificate": out.certificate.passed}
    report = {"command": "verify", "anneal": out.to_dict(), "certificate": out.certificate.to_dict()}
    dev = deviation_test(out.final_policy, out.cert_y, 0.0, model)
    report["deviation"] = dev.to_dict()
    if isinstance(model.discount, Exponential):
        bell = bellman_consistency(model, out, tol)
        report["bellman"] = bell.to_dict()
        checks["bellman"] = bell.match
    try:
        direct_choice_dims(model)
    except StructureMismatch:
        pass
    else:
        mc = mean_action_value_check(out.final_policy, model, tol=max(tol, 1e-4))
        report["meanAction"] = {k: (v.tolist() if isinstance(v, np.ndarray) else v) for k, v in mc.items()}
        checks["meanAction"] = mc["match"]
    report["checks"] = checks
    return report, _anneal_series(out), 0 if all(checks.values()) else 2


def run_scan(cfg, model, mode):
    sc = cfg.get("scan", {})
    found = standard_equilibrium_scan(model, mode, gap_tol=sc.get("gap_tol", 1e-9), cap=sc.get("cap", 1_000_000))
    nodes = model.grid.nodes
    report = {
        "command": "scan",
        "standard_equilibria": [list(f) for f in found],
        "standard_equilibria_actions": [[nodes[k].tolist() for k in f] for f in found],
        "candidates": model.grid.size ** model.states,
    }
    return report, {}, 0


RUNNERS = {"solve": run_solve, "anneal": run_anneal, "bridge": run_bridge, "verify": run_verify, "scan": run_scan}


def run(command, config_path, out_dir):
    """Execute one command; returns the exit status."""
    cfg = load_config(config_path)
    model = resolve_model(cfg, config_path)
    mode = _mode(cfg, model)
    report, series, status = RUNNERS[command](cfg, model, mode)
    report["model"] = {"name": model.name, "mode": model.mode, "states": model.states, "nodes": model.grid.size}
    report["exitStatus"] = status
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    (out / "report.json").write_text(dumps(report), encoding="utf-8")
    for name, (header, rows) in series.items():
        write_csv(out / "series" / name, header, rows)
    meta = {"started": _dt.datetime.now(_dt.timezone.utc).isoformat(), "version": __version__,
            "python": platform.python_version(), "command": command, "config": str(config_path)}
    (out / "run_meta.json").write_text(json.dumps(meta, indent=2) + "\n", encoding="utf-8")
    return status


def write_example(name, path):
    if name not in BUILTIN:
        raise ConfigError(f"unknown builtin model {name!r}")
    save_model(BUILTIN[name](), path)


def build_parser():
    p = argparse.ArgumentParser(prog="tieq", description="Relaxed equilibria of time-inconsistent MDPs.")
    sub = p.add_subparsers(dest="command", required=True)
    for name in COMMANDS:
        sp = sub.add_parser(name)
        sp.add_argument("--config", required=True, help="run configuration JSON")
        sp.add_argument("--out", default="tieq-out", help="output directory (default: tieq-out)")
    ex = sub.add_parser("example", help="write a bundled model file")
    ex.add_argument("name", choices=sorted(BUILTIN))
    ex.add_argument("--out", required=True, help="destination JSON path")
    return p


def main(argv=None):
    args = build_parser().parse_args(argv)
    try:
        if args.command == "example":
            write_example(args.name, args.out)
            return 0
        return run(args.command, args.config, args.out)
    except ConfigError as exc:
        print(json.dumps({"error": str(exc), "pointer": exc.pointer or "/"}), file=sys.stderr)
        return 1
    except TieqError as exc:
        print(json.dumps({"error": f"{type(exc).__name__}: {exc}"}), file=sys.stderr)
        return 1


def bundled_example_path():
    return resources.files("tieq") / "data" / "example_ct.json"


if __name__ == "__main__":
    sys.exit(main())
