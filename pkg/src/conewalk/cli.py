"""Command-line runner: execute verification experiments from a JSON config
and write deterministic artifacts.

Exit codes: 0 every experiment passed, 2 configuration error, 3 no failure
but at least one inconclusive verdict, 4 at least one failed verdict.

Apart from meta.json (which carries a timestamp), artifacts are
byte-identical for the same config and seed regardless of --workers.
"""

from __future__ import annotations

import argparse
import csv
import hashlib
import json
import math
import sys
import time
from pathlib import Path

from . import __version__
from .ensembles import EnsembleSpec, calibrate_centering, validate_assumptions
from .estimators import estimate_sigma2
from .harness import EXPERIMENTS, run_experiment

_TOP_KEYS = {"ensemble", "experiments", "seed", "workers", "output_dir", "calibration", "estimates"}
_CAL_KEYS = {"enabled", "tol", "budget"}
_EST_KEYS = {"sigma", "sigma_se"}

# experiments whose runners accept a shared sigma estimate
_SIGMA_USERS = {
    "check_averaged_llt",
    "check_window_bounds",
    "check_conditioned_window_bounds",
    "check_gnedenko_profile",
    "check_three_halves_rate",
    "check_rayleigh_terminal",
}


class ConfigError(Exception):
    pass


def _check_keys(mapping: dict, allowed: set, where: str) -> None:
    unknown = sorted(set(mapping) - allowed)
    if unknown:
        raise ConfigError(f"unknown key {unknown[0]!r} in {where}")


def load_config(path: str) -> dict:
    try:
        raw = json.loads(Path(path).read_text())
    except FileNotFoundError:
        raise ConfigError(f"config file not found: {path}")
    except json.JSONDecodeError as exc:
        raise ConfigError(f"config is not valid JSON: {exc}")
    if not isinstance(raw, dict):
        raise ConfigError("config root must be a JSON object")
    _check_keys(raw, _TOP_KEYS, "config")
    if "ensemble" not in raw:
        raise ConfigError("config needs an 'ensemble' entry")
    if "experiments" not in raw:
        raise ConfigError("config needs an 'experiments' list")
    if "calibration" in raw:
        if not isinstance(raw["calibration"], dict):
            raise ConfigError("'calibration' must be an object")
        _check_keys(raw["calibration"], _CAL_KEYS, "calibration")
    if "estimates" in raw:
        if not isinstance(raw["estimates"], dict):
            raise ConfigError("'estimates' must be an object")
        _check_keys(raw["estimates"], _EST_KEYS, "estimates")
    return raw


def _load_spec(entry) -> EnsembleSpec:
    if isinstance(entry, str):
        try:
            entry = json.loads(Path(entry).read_text())
        except FileNotFoundError:
            raise ConfigError(f"ensemble file not found: {entry}")
        except json.JSONDecodeError as exc:
            raise ConfigError(f"ensemble file is not valid JSON: {exc}")
    if not isinstance(entry, dict):
        raise ConfigError("'ensemble' must be an object or a path to one")
    try:
        return EnsembleSpec.from_dict(entry)
    except (ValueError, KeyError, TypeError) as exc:
        raise ConfigError(f"bad ensemble: {exc}")


def _normalize_experiments(entries) -> list[tuple[str, dict]]:
    if not isinstance(entries, list) or not entries:
        raise ConfigError("'experiments' must be a non-empty list")
    out = []
    for e in entries:
        if isinstance(e, str):
            name, params = e, {}
        elif isinstance(e, dict):
            _check_keys(e, {"name", "params"}, "experiment entry")
            if "name" not in e:
                raise ConfigError("experiment entry needs a 'name'")
            name = e["name"]
            params = e.get("params", {})
            if not isinstance(params, dict):
                raise ConfigError(f"params of {name!r} must be an object")
        else:
            raise ConfigError("experiment entries must be names or objects")
        if name not in EXPERIMENTS:
            raise ConfigError(
                f"unknown experiment {name!r}; known: {', '.join(EXPERIMENTS)}"
            )
        out.append((name, dict(params)))
    return out


def _config_hash(raw: dict, seed: int, workers_independent: bool = True) -> str:
    payload = {k: v for k, v in raw.items() if k not in ("workers", "output_dir")}
    payload["seed"] = seed
    return hashlib.sha256(json.dumps(payload, sort_keys=True).encode()).hexdigest()


def _write_json(path: Path, obj) -> None:
    path.write_text(json.dumps(obj, sort_keys=True, indent=2) + "\n")


def _plot_rows(verdicts) -> list[dict]:
    """Profile rows for plotting, sourced from the experiments that sweep
    a window position: estimate is the scaled mass n P-hat and residual is
    its gap to the gated main term."""
    rows = []
    for v in verdicts:
        if v.experiment == "check_gnedenko_profile":
            for r in v.details.get("rows", []):
                rows.append({
                    "n": r["horizon"],
                    "b": r["b"],
                    "estimate": r["scaled"],
                    "std_error": r["scaled_se"],
                    "main_term_paper": r["main_term_paper"],
                    "main_term_rayleigh": r["main_term_rayleigh"],
                    "residual": r["residual"],
                })
    return rows


def cmd_list(_args) -> int:
    for name, info in EXPERIMENTS.items():
        print(f"{name}")
        print(f"    {info.summary}")
        for g in info.guards:
            print(f"    guard: {g}")
        if info.defaults:
            print(f"    defaults: {json.dumps(info.defaults, sort_keys=True)}")
    return 0


def cmd_run(args) -> int:
    raw = load_config(args.config)
    spec = _load_spec(raw["ensemble"])
    experiments = _normalize_experiments(raw["experiments"])
    seed = args.seed if args.seed is not None else int(raw.get("seed", 0))
    workers = args.workers if args.workers is not None else int(raw.get("workers", 1))
    out_dir = args.output if args.output is not None else raw.get("output_dir", "conewalk-out")
    if workers < 1:
        raise ConfigError("workers must be >= 1")
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    t_start = time.time()

    estimates: dict = {}
    cal_cfg = raw.get("calibration", {})
    if cal_cfg.get("enabled", False):
        cal = calibrate_centering(
            spec,
            tol=float(cal_cfg.get("tol", 2.5e-4)),
            budget=int(cal_cfg.get("budget", 60_000_000)),
            seed=seed,
            workers=workers,
        )
        spec = cal.spec
        estimates["calibration"] = cal.to_dict()
    assumptions = validate_assumptions(spec, seed=seed)
    estimates["assumptions"] = assumptions.to_dict()

    # one shared scale estimate for every experiment that consumes it
    est_cfg = raw.get("estimates", {})
    sigma = est_cfg.get("sigma")
    sigma_se = est_cfg.get("sigma_se", 0.0)
    needs_sigma = any(name in _SIGMA_USERS and "sigma" not in params
                      for name, params in experiments)
    if sigma is None and needs_sigma:
        s2 = estimate_sigma2(spec, horizon=256, reps=65_536, seed=seed + 90_001, workers=workers)
        sigma = math.sqrt(max(s2.value, 1e-12))
        sigma_se = s2.std_error / (2.0 * sigma)
        estimates["sigma2"] = s2.to_dict()
    if sigma is not None:
        estimates["sigma"] = {"value": float(sigma), "std_error": float(sigma_se)}

    verdicts = []
    for name, params in experiments:
        if name in _SIGMA_USERS and "sigma" not in params and sigma is not None:
            params = dict(params, sigma=float(sigma), sigma_se=float(sigma_se))
        try:
            verdicts.append(run_experiment(name, spec, seed=seed, workers=workers, **params))
        except (ValueError, KeyError, TypeError) as exc:
            raise ConfigError(f"experiment {name!r}: {exc}")

    _write_json(out / "estimates.json", {"ensemble": spec.to_dict(), **estimates})
    _write_json(out / "verdicts.json", [v.to_dict() for v in verdicts])
    with open(out / "summary.csv", "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["experiment", "status", "statistic", "threshold", "passed"])
        for v in verdicts:
            w.writerow([v.experiment, v.status, repr(v.statistic), repr(v.threshold), int(v.passed)])
    with open(out / "plot_data.csv", "w", newline="") as fh:
        w = csv.writer(fh)
        cols = ["n", "b", "estimate", "std_error", "main_term_paper", "main_term_rayleigh", "residual"]
        w.writerow(cols)
        for row in _plot_rows(verdicts):
            w.writerow([repr(row[c]) if isinstance(row[c], float) else row[c] for c in cols])
    _write_json(out / "meta.json", {
        "config_hash": _config_hash(raw, seed),
        "package_version": __version__,
        "elapsed_seconds": round(time.time() - t_start, 3),
        "finished_at": time.strftime("%Y-%m-%dT%H:%M:%SZ", time.gmtime()),
        "workers": workers,
    })

    for v in verdicts:
        print(f"{v.experiment}: {v.status} (statistic {v.statistic:.6g}, threshold {v.threshold:.6g})")
    if any(v.status == "fail" for v in verdicts):
        return 4
    if any(v.status == "inconclusive" for v in verdicts):
        return 3
    return 0


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(
        prog="conewalk",
        description="simulate conditioned matrix-product walks and verify their limit laws",
    )
    sub = p.add_subparsers(dest="command", required=True)
    runp = sub.add_parser("run", help="run experiments from a JSON config")
    runp.add_argument("--config", required=True, help="path to the run config JSON")
    runp.add_argument("--seed", type=int, default=None, help="override the config seed")
    runp.add_argument("--workers", type=int, default=None, help="override the worker count")
    runp.add_argument("--output", default=None, help="override the output directory")
    runp.set_defaults(func=cmd_run)
    listp = sub.add_parser("list", help="list available experiments")
    listp.set_defaults(func=cmd_list)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
