"""Command line entry point: ``elmd analyze|verify --config FILE --out FILE``.

Config (JSON):

    {"a": 0.1, "c": 0.0, "horizon": 1.0, "epsilon": 0.2,
     "kappa": {"type": "atomic", "atoms": [{"x": -0.5, "w": 1.0}]},
     "sim": {"paths": 100000, "steps": 64, "seed": 42}}

Optional "tilt_budget": "epsilon" builds the tilt with budget eps instead of
eps/(2T); it exists only for the mis-budgeted control model.

Exit codes: 0 ok, 1 usage/config/numeric error, 2 arbitrage detected,
3 verification failure.
"""

from __future__ import annotations

import argparse
import json
import math
import sys
from importlib import resources
from pathlib import Path

import numpy as np

from . import __version__
from .characteristics import Triplet, bounds, classify, validate
from .deflator import build_deflator, deflator_along_path
from .errors import ConfigError, ElmdError
from .growth import GrowthCurve, growth, optimal_fraction
from .jump_measure import JumpMeasure
from .simulate import SimConfig, simulate_paths
from .verify import arbitrage_demo, run_suite
from .viability import check_lambda

EXIT_OK, EXIT_ERROR, EXIT_ARBITRAGE, EXIT_VERIFY = 0, 1, 2, 3

DEFAULT_SIM = {"paths": 100_000, "steps": 64, "seed": 0}


def bundled_model(name: str) -> Path:
    """Path of a model config shipped with the package (e.g. 'cp', 'merton')."""
    p = resources.files("elmd") / "models" / f"{name}.json"
    return Path(str(p))


def bundled_models():
    return sorted(p.stem for p in Path(str(resources.files("elmd") / "models")).glob("*.json"))


# config

def _number(cfg, key, *, default=None, check=None, what=""):
    if key not in cfg:
        if default is None:
            raise ConfigError(f"field '{key}': missing")
        return default
    v = cfg[key]
    if isinstance(v, bool) or not isinstance(v, (int, float)):
        raise ConfigError(f"field '{key}': expected a number, got {v!r}")
    v = float(v)
    if not math.isfinite(v):
        raise ConfigError(f"field '{key}': must be finite")
    if check is not None and not check(v):
        raise ConfigError(f"field '{key}': {what}, got {v}")
    return v


def _int(d, key, default, lo, where):
    v = d.get(key, default)
    if isinstance(v, bool) or not isinstance(v, int) or v < lo:
        raise ConfigError(f"field '{where}.{key}': expected an integer >= {lo}, got {v!r}")
    return v


def load_config(path):
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc.strerror}") from exc
    try:
        raw = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path}: line {exc.lineno} column {exc.colno}: {exc.msg}") from exc
    return parse_config(raw)


def parse_config(raw):
    if not isinstance(raw, dict):
        raise ConfigError("config must be a JSON object")
    known = {"name", "a", "c", "horizon", "epsilon", "kappa", "sim", "tilt_budget", "description"}
    extra = sorted(set(raw) - known)
    if extra:
        raise ConfigError(f"unknown field(s): {', '.join(extra)}")
    cfg = {"name": raw.get("name", "model")}
    cfg["a"] = _number(raw, "a")
    cfg["c"] = _number(raw, "c", default=0.0, check=lambda v: v >= 0, what="must be >= 0")
    cfg["horizon"] = _number(raw, "horizon", default=1.0, check=lambda v: v > 0, what="must be > 0")
    cfg["epsilon"] = _number(raw, "epsilon", default=0.2, check=lambda v: 0 < v < 1,
                             what="must lie in (0, 1)")
    if "kappa" not in raw:
        raise ConfigError("field 'kappa': missing")
    try:
        cfg["kappa"] = JumpMeasure.from_spec(raw["kappa"])
    except (ElmdError, KeyError, TypeError, ValueError) as exc:
        raise ConfigError(f"field 'kappa': {exc}") from exc
    sim = raw.get("sim", {})
    if not isinstance(sim, dict):
        raise ConfigError("field 'sim': expected an object")
    cfg["sim"] = {"paths": _int(sim, "paths", DEFAULT_SIM["paths"], 1, "sim"),
                  "steps": _int(sim, "steps", DEFAULT_SIM["steps"], 1, "sim"),
                  "seed": _int(sim, "seed", DEFAULT_SIM["seed"], 0, "sim")}
    tb = raw.get("tilt_budget", "default")
    if tb not in ("default", "epsilon"):
        raise ConfigError(f"field 'tilt_budget': expected 'default' or 'epsilon', got {tb!r}")
    cfg["tilt_budget"] = tb
    return cfg


# JSON output

def to_jsonable(v):
    if isinstance(v, dict):
        return {str(k): to_jsonable(x) for k, x in v.items()}
    if isinstance(v, (list, tuple)):
        return [to_jsonable(x) for x in v]
    if isinstance(v, (bool, np.bool_)):
        return bool(v)
    if isinstance(v, (int, np.integer)):
        return int(v)
    if isinstance(v, (float, np.floating)):
        v = float(v)
        if math.isnan(v):
            return "nan"
        if math.isinf(v):
            return "+inf" if v > 0 else "-inf"
        return v
    if hasattr(v, "value") and isinstance(getattr(v, "value"), str):
        return v.value
    return v


def dumps(report) -> str:
    return json.dumps(to_jsonable(report), indent=2, allow_nan=False) + "\n"


# pipeline

def _triplet(cfg):
    return Triplet(cfg["a"], cfg["c"], cfg["kappa"], cfg["horizon"])


def analyze(cfg, curve_path=None):
    """Returns (report, exit code, deflator spec or None)."""
    report = {"tool": {"name": "elmd", "version": __version__},
              "model": {"name": cfg["name"], "a": cfg["a"], "c": cfg["c"], "horizon": cfg["horizon"],
                        "epsilon": cfg["epsilon"], "kappa": cfg["kappa"].to_spec()},
              "seed": cfg["sim"]["seed"]}
    t = validate(_triplet(cfg))
    verdict = check_lambda(t)
    report["viability"] = verdict.to_dict()
    b = bounds(t.kappa)
    report["bounds"] = {"ell": b.ell, "r": b.r, "case": classify(b).value}
    if curve_path:
        GrowthCurve.over_interval(t, n=1000).to_csv(curve_path)
    if not verdict.viable:
        report["growth"] = None
        report["tilt"] = None
        report["deflator"] = None
        report["status"] = "arbitrage"
        return report, EXIT_ARBITRAGE, None
    opt = optimal_fraction(t)
    report["growth"] = {"p_tilde": opt.p, "g_at_p_tilde": growth(t, opt.p), "dg_ell": opt.dg_ell,
                        "dg_r": opt.dg_r, "rule": opt.rule}
    eta = cfg["epsilon"] if cfg["tilt_budget"] == "epsilon" else None
    spec = build_deflator(t, cfg["epsilon"], eta=eta)
    report["tilt"] = {"case": spec.Y.case, "eta": spec.eta, "params": spec.Y.params,
                      "checks": spec.tilt_report.to_dict(), "branches": spec.Y.branch_table()}
    report["deflator"] = spec.to_dict()
    report["status"] = "ok"
    return report, EXIT_OK, spec


def _sim_config(cfg, workers):
    s = cfg["sim"]
    return SimConfig(n_paths=s["paths"], n_steps=s["steps"], seed=s["seed"], workers=workers)


def verify(cfg, curve_path=None, workers=1):
    report, code, spec = analyze(cfg, curve_path)
    sim = _sim_config(cfg, workers)
    if code == EXIT_ARBITRAGE:
        tests = [arbitrage_demo(_triplet(cfg), sim)]
    else:
        tests = run_suite(spec, sim)
    report["verification"] = [r.to_dict() for r in tests]
    failed = [r.name for r in tests if not r.passed]
    report["verification_failed"] = failed
    if failed:
        report["status"] = "verification_failed"
        return report, EXIT_VERIFY, spec
    return report, EXIT_OK, spec


def dump_paths(spec, cfg, out_path, n, workers=1):
    """First n base-law paths as CSV files t,S,L,X~,Z next to the report."""
    sim = _sim_config(cfg, workers)
    pc = simulate_paths(spec.base, sim)
    stem = Path(out_path)
    written = []
    for i, path in enumerate(pc.first_paths(n)):
        L, X, Z = deflator_along_path(spec, path)
        tt, S = path.times(), path.S()[0]
        f = stem.with_name(f"{stem.stem}.path{i}.csv")
        with open(f, "w") as fh:
            fh.write("t,S,L,X_tilde,Z\n")
            for row in zip(tt, S, L[0], X[0], Z[0]):
                fh.write(",".join(repr(float(v)) for v in row) + "\n")
        written.append(str(f))
    return written


def build_parser():
    ap = argparse.ArgumentParser(prog="elmd", description="Growth-optimal deflators for jump-diffusion models.")
    ap.add_argument("command", choices=["analyze", "verify"])
    ap.add_argument("--config", required=True)
    ap.add_argument("--out", required=True)
    ap.add_argument("--curve")
    ap.add_argument("--paths", type=int)
    ap.add_argument("--steps", type=int)
    ap.add_argument("--seed", type=int)
    ap.add_argument("--epsilon", type=float)
    ap.add_argument("--dump-paths", type=int, default=0)
    ap.add_argument("--workers", type=int, default=1)
    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    report = {"tool": {"name": "elmd", "version": __version__}}
    try:
        cfg = load_config(args.config)
        for flag, key in (("paths", "paths"), ("steps", "steps"), ("seed", "seed")):
            v = getattr(args, flag)
            if v is not None:
                cfg["sim"][key] = v
        if args.epsilon is not None:
            if not 0 < args.epsilon < 1:
                raise ConfigError(f"--epsilon must lie in (0, 1), got {args.epsilon}")
            cfg["epsilon"] = args.epsilon
        if args.workers < 1:
            raise ConfigError("--workers must be >= 1")
        if args.command == "analyze":
            report, code, spec = analyze(cfg, args.curve)
        else:
            report, code, spec = verify(cfg, args.curve, args.workers)
        if args.dump_paths and spec is not None and spec.simulable:
            dump_paths(spec, cfg, args.out, args.dump_paths, args.workers)
    except ElmdError as exc:
        report["status"] = "error"
        report["error"] = {"type": type(exc).__name__, "message": str(exc)}
        code = EXIT_ERROR
        print(f"elmd: {type(exc).__name__}: {exc}", file=sys.stderr)
    Path(args.out).write_text(dumps(report))
    if code == EXIT_ARBITRAGE:
        print("elmd: arbitrage of the first kind detected", file=sys.stderr)
    elif code == EXIT_VERIFY:
        print("elmd: verification failed: " + ", ".join(report["verification_failed"]), file=sys.stderr)
    return code


if __name__ == "__main__":
    sys.exit(main())
