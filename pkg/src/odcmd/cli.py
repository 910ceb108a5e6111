"""Command-line runner: ``odcmd run`` executes a configured sweep, ``odcmd check`` validates it."""

from __future__ import annotations

import argparse
import json
import os
import re
import sys
import tempfile

from .config import PRESETS, ExperimentConfig, derived_seeds, load_preset, validate
from .geometry import ConfigurationError, ProxConvergenceError
from .harness import (
    ComparatorError,
    expand_sweep,
    record_csv,
    regret_csv,
    summary_json,
    sweep,
)
from .network import build_schedule, verify_connectivity
from .problems import FeasibilityError

OUT_ENV = "ODCMD_OUT"
DEFAULT_OUT = "odcmd-out"

EXIT_OK = 0
EXIT_RUN_FAILED = 1
EXIT_INVALID = 2


def _parser():
    common = argparse.ArgumentParser(add_help=False)
    src = common.add_mutually_exclusive_group()
    src.add_argument("--config", help="path to a JSON experiment config")
    src.add_argument("--preset", choices=PRESETS, help="built-in figure protocol")
    common.add_argument("--seed", type=int, help="master seed (overrides the config)")
    common.add_argument("--strict", action=argparse.BooleanOptionalAction, default=None,
                        help="abort on infeasible queries (default: as configured)")

    p = argparse.ArgumentParser(prog="odcmd", description=__doc__)
    sub = p.add_subparsers(dest="command", required=True)
    run = sub.add_parser("run", parents=[common], help="run the experiment and write CSV/JSON")
    run.add_argument("--out", help=f"output directory (default: ${OUT_ENV} or ./{DEFAULT_OUT})")
    run.add_argument("--threads", type=int, default=1, help="parallel sweep cells")
    sub.add_parser("check", parents=[common], help="validate the config and the network schedule")
    return p


def load_config(args):
    if args.config:
        config = ExperimentConfig.load(args.config)
    elif args.preset:
        config = load_preset(args.preset)
    else:
        raise ConfigurationError("give --config or --preset")
    overrides = {}
    if args.seed is not None:
        overrides["seed"] = args.seed
    if args.strict is not None:
        overrides["strict"] = args.strict
    return config.with_overrides(overrides) if overrides else config


def _slug(params):
    if not params:
        return "run"
    parts = []
    for k in sorted(params):
        v = params[k]
        parts.append(f"{k.split('.')[-1]}={'none' if v is None else v}")
    return re.sub(r"[^A-Za-z0-9=._-]+", "_", "_".join(parts))


def _atomic_write(path, text):
    folder = os.path.dirname(os.path.abspath(path))
    fd, tmp = tempfile.mkstemp(dir=folder, prefix=".tmp-")
    with os.fdopen(fd, "w", newline="") as fh:
        fh.write(text)
    os.chmod(tmp, 0o644)
    os.replace(tmp, path)


def curve_csv(results, params):
    rows = ["# odcmd-curve-csv v1", "T,max_regret,min_regret"]
    for r in results:
        if r.params == params:
            rows.append(f"{r.T},{r.report.max!r},{r.report.min!r}")
    return "\n".join(rows) + "\n"


def write_outputs(config, results, out):
    """Write every output file; returns the list of paths written."""
    os.makedirs(out, exist_ok=True)
    written = []

    def put(name, text):
        path = os.path.join(out, name)
        _atomic_write(path, text)
        written.append(path)

    put(config.output.csv, regret_csv(results))
    put(config.output.json, summary_json(results))
    if config.output.curves:
        seen = []
        for r in results:
            if r.params not in seen:
                seen.append(r.params)
        for params in seen:
            put(f"curve_{_slug(params)}.csv", curve_csv(results, params))
    if config.output.records:
        for r in results:
            put(f"record_{_slug(r.params)}_T{r.T}.csv", record_csv(r.record))
    return written


def check_report(config):
    """Validation messages plus one network report per distinct schedule."""
    errors = validate(config)
    lines = []
    if errors:
        return False, errors
    seen = set()
    ok = True
    for params in expand_sweep(config.sweep):
        cfg = config.with_overrides(params)
        key = (cfg.network.kind, cfg.network.m, cfg.network.edge_prob, cfg.seed, cfg.network.seed)
        if key in seen:
            continue
        seen.add(key)
        seeds = derived_seeds(cfg)
        schedule = build_schedule(cfg.network.kind, cfg.network.m, seed=seeds["network"],
                                  edge_prob=cfg.network.edge_prob)
        horizon = max(cfg.stream.T)
        rep = verify_connectivity(schedule, min(horizon, 4 * schedule.period + 2))
        status = "ok" if rep.ok else "FAILED"
        lines.append(f"network {cfg.network.kind} m={cfg.network.m}: connectivity check {status}; "
                     f"zeta={rep.zeta:.6g} B={rep.window} max stochastic deviation="
                     f"{rep.max_stochastic_deviation:.3e} {rep.message}".rstrip())
        if rep.ok:
            cc = schedule.constants()
            lines.append(f"  theta={cc.theta:.12g} kappa={cc.kappa:.12g}")
        ok = ok and rep.ok
    return ok, lines


def main(argv=None):
    args = _parser().parse_args(argv)
    try:
        config = load_config(args)
    except (ConfigurationError, OSError, json.JSONDecodeError, TypeError) as exc:
        print(f"odcmd: invalid configuration: {exc}", file=sys.stderr)
        return EXIT_INVALID

    if args.command == "check":
        try:
            ok, lines = check_report(config)
        except ConfigurationError as exc:
            ok, lines = False, [str(exc)]
        stream = sys.stdout if ok else sys.stderr
        print(f"{config.name}: {'pass' if ok else 'fail'}", file=stream)
        for line in lines:
            print(f"  {line}", file=stream)
        return EXIT_OK if ok else EXIT_INVALID

    errors = validate(config)
    if errors:
        print(f"odcmd: {len(errors)} configuration error(s):", file=sys.stderr)
        for e in errors:
            print(f"  - {e}", file=sys.stderr)
        return EXIT_INVALID
    out = args.out or os.environ.get(OUT_ENV) or DEFAULT_OUT
    try:
        results = sweep(config, threads=max(1, args.threads))
    except (FeasibilityError, ComparatorError, ProxConvergenceError, ConfigurationError) as exc:
        print(f"odcmd: run failed: {exc}", file=sys.stderr)
        return EXIT_RUN_FAILED
    try:
        paths = write_outputs(config, results, out)
    except OSError as exc:
        print(f"odcmd: cannot write outputs: {exc}", file=sys.stderr)
        return EXIT_RUN_FAILED
    for r in results:
        label = _slug(r.params)
        print(f"{label} T={r.T}: max regret {r.report.max:.6g}, min regret {r.report.min:.6g}")
    for path in paths:
        print(f"wrote {path}")
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
