"""``ppm-lab`` command line: simulate, sweep, bounds and verify.

Settings come from built-in defaults, then an optional config file, then
flags. The config file is INI style; the ``[run]`` section and the section
named after the command are read, and unknown sections or keys are errors.

Exit codes: 0 success, 1 a check failed, 2 usage error, 3 runtime error.
"""

from __future__ import annotations

import argparse
import configparser
import sys
from dataclasses import dataclass, field, fields
from typing import Optional

from ._numeric import harmonic
from .bounds import BoundReport, exp_static_best, mdp_bound_check, static_case_check
from .market import parse_model
from .mechanisms import MECHANISM_IDS, make_mechanism
from .report import emit_report
from .simulation import ORACLES, run_trials, sweep
from .verify import CLAIMS, run_claims

COMMANDS = ("simulate", "sweep", "bounds", "verify")
BOUND_CLAIMS = ("mdp", "static-cases", "static-best")
FORMATS = ("csv", "json")

EXIT_OK, EXIT_FAIL, EXIT_USAGE, EXIT_RUNTIME = 0, 1, 2, 3

_COMMON = {"output", "format"}
KEYS = {
    "simulate": _COMMON | {"model", "mech", "n", "trials", "seed", "oracle", "workers"},
    "sweep": _COMMON | {"model", "mech", "ns", "trials", "seed", "oracle", "workers"},
    "bounds": _COMMON | {"claim", "nmax", "ns"},
    "verify": _COMMON | {"claims", "scale"},
}
ALL_KEYS = set().union(*KEYS.values())


class UsageError(Exception):
    pass


@dataclass
class RunConfig:
    command: str
    model: Optional[str] = None
    mech: Optional[str] = None
    n: Optional[int] = None
    ns: list = field(default_factory=list)
    trials: int = 10_000
    seed: int = 0
    oracle: str = "auto"
    workers: int = 1
    claim: Optional[str] = None
    nmax: int = 100_000
    claims: list = field(default_factory=list)
    scale: float = 1.0
    output: str = "-"
    format: str = "csv"


def _int(text, key):
    try:
        v = float(text)
    except ValueError:
        raise UsageError(f"{key} must be an integer, got {text!r}") from None
    if not v.is_integer():
        raise UsageError(f"{key} must be an integer, got {text!r}")
    return int(v)


def _int_list(text, key):
    parts = [p for p in str(text).replace(" ", "").split(",") if p]
    if not parts:
        raise UsageError(f"{key} needs at least one value")
    return [_int(p, key) for p in parts]


_CONVERT = {
    "n": _int,
    "trials": _int,
    "seed": _int,
    "workers": _int,
    "nmax": _int,
    "ns": _int_list,
    "claims": lambda t, k: [p.strip() for p in str(t).split(",") if p.strip()],
    "scale": lambda t, k: float(t),
}


def read_config_file(path: str, command: str) -> dict:
    cp = configparser.ConfigParser(interpolation=None)
    try:
        with open(path, encoding="utf-8") as fh:
            cp.read_file(fh)
    except OSError as exc:
        raise UsageError(f"cannot read config {path}: {exc}") from None
    except configparser.Error as exc:
        raise UsageError(f"malformed config {path}: {exc}") from None
    out = {}
    for section in cp.sections():
        if section != "run" and section not in COMMANDS:
            raise UsageError(f"unknown config section [{section}]; use [run] or one of {', '.join(COMMANDS)}")
        allowed = ALL_KEYS if section == "run" else KEYS[section]
        for key, value in cp.items(section):
            if key not in allowed:
                raise UsageError(f"unknown key {key!r} in [{section}]; allowed: {', '.join(sorted(allowed))}")
            if section in ("run", command) and key in KEYS[command]:
                out[key] = value
    return out


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="ppm-lab", description="Posted-price mechanism experiments.")
    sub = p.add_subparsers(dest="command", required=True)

    def common(sp):
        sp.add_argument("--config", help="INI file with [run] and per-command sections")
        sp.add_argument("--output", "-o", help="output path, '-' for stdout (default)")
        sp.add_argument("--format", choices=FORMATS, help="csv (default) or json")

    def sim_args(sp):
        sp.add_argument("--model", help='e.g. "independent: [exp(1), unif(0,2)]"')
        sp.add_argument("--mech", help="mechanism id: " + ", ".join(MECHANISM_IDS))
        sp.add_argument("--trials")
        sp.add_argument("--seed")
        sp.add_argument("--oracle", choices=ORACLES)
        sp.add_argument("--workers", help="worker processes (capped by PPM_LAB_THREADS)")

    s = sub.add_parser("simulate", help="run one market size")
    common(s)
    sim_args(s)
    s.add_argument("--n", help="number of buyers")

    w = sub.add_parser("sweep", help="run several market sizes")
    common(w)
    sim_args(w)
    w.add_argument("--ns", help="comma-separated buyer counts")

    b = sub.add_parser("bounds", help="check closed-form bounds")
    common(b)
    b.add_argument("--claim", choices=BOUND_CLAIMS)
    b.add_argument("--nmax", help="largest k for the mdp claim (default 100000)")
    b.add_argument("--ns", help="comma-separated n for static-cases / static-best")

    v = sub.add_parser("verify", help="run the named acceptance claims")
    common(v)
    v.add_argument("--claims", help="comma-separated subset of: " + ", ".join(CLAIMS))
    v.add_argument("--scale", help="multiply trial counts (default 1.0)")
    v.add_argument("--quick", action="store_true", help="same as --scale 0.1")
    return p


def parse_config(argv=None) -> RunConfig:
    """Merge defaults, config file and flags into a validated RunConfig."""
    args = build_parser().parse_args(argv)
    cmd = args.command
    raw = read_config_file(args.config, cmd) if args.config else {}
    for key in KEYS[cmd]:
        val = getattr(args, key, None)
        if val is not None:
            raw[key] = val
    if cmd == "verify" and args.quick:
        if "scale" in raw and float(raw["scale"]) != 0.1:
            raise UsageError("--quick contradicts --scale")
        raw["scale"] = 0.1

    cfg = RunConfig(cmd)
    names = {f.name for f in fields(RunConfig)}
    for key, val in raw.items():
        assert key in names
        conv = _CONVERT.get(key)
        try:
            setattr(cfg, key, conv(val, key) if conv else val)
        except ValueError as exc:
            raise UsageError(f"bad value for {key}: {exc}") from None
    _validate(cfg, explicit_format="format" in raw)
    return cfg


def _validate(cfg: RunConfig, explicit_format: bool):
    if cfg.format not in FORMATS:
        raise UsageError(f"format must be csv or json, got {cfg.format!r}")
    if cfg.output != "-":
        ext = cfg.output.rsplit(".", 1)[-1].lower() if "." in cfg.output else ""
        if ext in FORMATS and ext != cfg.format:
            if explicit_format:
                raise UsageError(f"--format {cfg.format} contradicts output file {cfg.output}")
            cfg.format = ext
    if cfg.command in ("simulate", "sweep"):
        if not cfg.model:
            raise UsageError("--model is required")
        if not cfg.mech:
            raise UsageError("--mech is required; valid ids: " + ", ".join(MECHANISM_IDS))
        if cfg.mech not in MECHANISM_IDS:
            raise UsageError(f"unknown mechanism {cfg.mech!r}; valid ids: " + ", ".join(MECHANISM_IDS))
        if cfg.oracle not in ORACLES:
            raise UsageError(f"oracle must be one of {', '.join(ORACLES)}")
        if cfg.trials < 1:
            raise UsageError("trials must be >= 1")
        if cfg.workers < 1:
            raise UsageError("workers must be >= 1")
        if cfg.seed < 0:
            raise UsageError("seed must be >= 0")
    if cfg.command == "simulate" and (cfg.n is None or cfg.n < 1):
        raise UsageError("--n (>= 1) is required")
    if cfg.command == "sweep" and (not cfg.ns or min(cfg.ns) < 1):
        raise UsageError("--ns needs positive buyer counts")
    if cfg.command == "bounds":
        if cfg.claim not in BOUND_CLAIMS:
            raise UsageError("--claim is required; one of " + ", ".join(BOUND_CLAIMS))
        if cfg.claim == "mdp" and cfg.nmax < 2:
            raise UsageError("--nmax must be >= 2")
        if cfg.claim == "mdp" and cfg.ns:
            raise UsageError("--ns does not apply to the mdp claim")
    if cfg.command == "verify":
        bad = [c for c in cfg.claims if c not in CLAIMS]
        if bad:
            raise UsageError(f"unknown claims {bad}; valid: {', '.join(CLAIMS)}")
        if not cfg.scale > 0:
            raise UsageError("--scale must be positive")


def _bounds(cfg: RunConfig) -> list[BoundReport]:
    if cfg.claim == "mdp":
        return [mdp_bound_check(cfg.nmax)]
    if cfg.claim == "static-cases":
        return [static_case_check(cfg.ns or (10**3, 10**6, 10**9))]
    ns = cfg.ns or [10**2, 10**3, 10**4, 10**5]
    best = [exp_static_best(n) for n in ns]
    gaps = ", ".join(f"n={b.n}: p*={b.price:.6g} gap={b.gap:.6g} c={b.fitted_c:.4g}" for b in best)
    lhs = [b.welfare for b in best]
    rhs = [harmonic(n) for n in ns]
    viol = max(l - r for l, r in zip(lhs, rhs))
    return [BoundReport("static-best", list(ns), lhs, rhs, viol <= 1e-12, viol, notes=gaps)]


def _prepare(cfg: RunConfig):
    # everything that can fail because of the configuration itself
    try:
        model = parse_model(cfg.model)
        mechs = {n: make_mechanism(cfg.mech, model, n) for n in ([cfg.n] if cfg.command == "simulate" else cfg.ns)}
    except ValueError as exc:
        raise UsageError(str(exc)) from None
    return model, mechs


def execute(cfg: RunConfig) -> tuple[list, bool]:
    if cfg.command in ("simulate", "sweep"):
        model, mechs = _prepare(cfg)
        opts = dict(oracle=cfg.oracle, workers=cfg.workers)
        if cfg.command == "simulate":
            rows = [run_trials(model, mechs[cfg.n], trials=cfg.trials, master_seed=cfg.seed, **opts)]
        else:
            rows = sweep(lambda n: model, lambda mdl, n: mechs[n], cfg.ns, trials=cfg.trials, seed=cfg.seed, **opts)
        return rows, True
    if cfg.command == "bounds":
        reps = _bounds(cfg)
        return reps, all(r.passed for r in reps)
    results = run_claims(cfg.claims or None, scale=cfg.scale)
    for r in results:
        print(r.line(), file=sys.stderr)
    return results, all(r.passed for r in results)


def main(argv=None) -> int:
    try:
        cfg = parse_config(argv)
    except SystemExit as exc:  # argparse already printed the message
        return int(exc.code or 0) and EXIT_USAGE
    except UsageError as exc:
        print(f"ppm-lab: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    try:
        results, ok = execute(cfg)
        emit_report(results, cfg.format, cfg.output)
    except UsageError as exc:
        print(f"ppm-lab: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (ArithmeticError, RuntimeError, OSError, ValueError) as exc:
        print(f"ppm-lab: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_RUNTIME
    return EXIT_OK if ok else EXIT_FAIL


if __name__ == "__main__":
    sys.exit(main())
