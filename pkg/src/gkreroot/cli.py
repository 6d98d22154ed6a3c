"""Command-line interface: ``gkreroot run | validate-config | bench``.

Exit codes: 0 success, 1 constraint-assertion abort, 2 configuration or usage error.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys

import numpy as np

from .scenario import ConfigError, load_config
from .sim import ConstraintViolation, run, write_outputs

log = logging.getLogger("gkreroot")

EXIT_OK = 0
EXIT_VIOLATION = 1
EXIT_CONFIG = 2


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="gkreroot", description="Budget-constrained Dubins planning with a gatekeeper safety filter.")
    p.add_argument("-v", "--verbose", action="store_true", help="log progress to stderr")
    sub = p.add_subparsers(dest="command", required=True)

    r = sub.add_parser("run", help="simulate a scenario and write the trace")
    r.add_argument("--config", required=True, help="scenario TOML file")
    r.add_argument("--seed", type=int, default=None, help="RNG seed (default: the scenario's seed)")
    r.add_argument("--out", required=True, help="output directory")
    r.add_argument("--plots", action="store_true", help="also write map/budget/features SVG plots")
    r.add_argument("--trace-format", choices=("csv", "jsonl"), default="csv")
    r.add_argument("--max-iterations", type=int, default=None, help="override the scenario's iteration cap")

    v = sub.add_parser("validate-config", help="check a scenario file and exit")
    v.add_argument("--config", required=True)

    b = sub.add_parser("bench", help="time ReRoot growth and the gatekeeper per iteration")
    b.add_argument("--config", required=True)
    b.add_argument("--iters", type=int, default=100, help="number of autonomy-loop iterations to time")
    b.add_argument("--seed", type=int, default=None)
    return p


def _cmd_run(args) -> int:
    cfg = load_config(args.config)
    result = run(cfg, seed=args.seed, max_iterations=args.max_iterations)
    paths = write_outputs(result, args.out, args.trace_format)
    if args.plots:
        from .plots import emit_plots  # matplotlib is only needed here

        paths.update(emit_plots(result, args.out))
    s = result.trace.summary()
    print(f"status={s['status']} iterations={s['iterations']} max_budget={s['max_budget']:.4f} "
          f"min_features_off_orbit={s['min_features_off_orbit']} home_reentries={s['home_reentries']}")
    for name, path in sorted(paths.items()):
        print(f"  {name}: {path}")
    return EXIT_OK


def _cmd_validate(args) -> int:
    cfg = load_config(args.config)
    cfg.build_world()
    print(f"ok: {cfg.name} (B={cfg.budget.cap:g}, {len(cfg.landmarks)} landmarks)")
    return EXIT_OK


def bench_stats(timings: dict[str, list[float]]) -> dict[str, dict[str, float]]:
    """Mean and standard deviation in milliseconds per component."""
    out = {}
    for name in ("growth", "gatekeeper"):
        v = np.asarray(timings.get(name, []), float) * 1e3
        out[name] = {"n": int(v.size), "mean_ms": float(v.mean()) if v.size else float("nan"),
                     "std_ms": float(v.std()) if v.size else float("nan")}
    return out


def _cmd_bench(args) -> int:
    if args.iters <= 0:
        raise ConfigError("--iters must be positive")
    cfg = load_config(args.config)
    result = run(cfg, seed=args.seed, max_iterations=args.iters, wall_clock=0)
    stats = bench_stats(result.timings)
    print(f"{'component':<12}{'n':>6}{'mean [ms]':>12}{'std [ms]':>12}")
    for name, s in stats.items():
        print(f"{name:<12}{s['n']:>6}{s['mean_ms']:>12.3f}{s['std_ms']:>12.3f}")
    print(json.dumps({"iterations": result.trace.iterations, "forest_nodes": len(result.forest), **stats}))
    return EXIT_OK


_COMMANDS = {"run": _cmd_run, "validate-config": _cmd_validate, "bench": _cmd_bench}


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as e:  # usage errors and --help
        return int(e.code) if isinstance(e.code, int) else EXIT_CONFIG
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    try:
        return _COMMANDS[args.command](args)
    except ConfigError as e:
        print(f"config error: {e}", file=sys.stderr)
        return EXIT_CONFIG
    except ConstraintViolation as e:
        print(f"constraint violation: {e}", file=sys.stderr)
        return EXIT_VIOLATION


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
