"""Command-line front end: ``iotmon {run,sweep,optimize,compare}``.

Exit codes: 0 success, 1 config error, 2 runtime or infeasibility error.
"""

from __future__ import annotations

import argparse
import logging
import sys
from pathlib import Path

from . import config as cfgmod
from .errors import ConfigError, IotmonError
from .experiments import (DEFAULT_SEEDS, DEFAULT_TOLERANCE, OptimizeSpec, SweepSpec, compare,
                          optimize_energy_matched, run_point, sweep, write_csv)

log = logging.getLogger("iotmon")


def parse_axis_values(key: str, text: str) -> list:
    """``v1,v2,...`` or an inclusive range ``start:stop:step``."""
    text = text.strip()
    if not text:
        return []
    if ":" in text:
        parts = text.split(":")
        if len(parts) != 3:
            raise cfgmod.ConfigParseError(f"range must be start:stop:step, got {text!r}", key=key)
        start, stop, step = (float(p) for p in parts)
        if step <= 0:
            raise cfgmod.ConfigParseError("range step must be > 0", key=key)
        n = int(round((stop - start) / step)) + 1
        raw = [start + i * step for i in range(max(n, 0)) if start + i * step <= stop + 1e-9 * step]
        return [cfgmod.parse_value(key, repr(round(v, 12))) for v in raw]
    return [cfgmod.parse_value(key, v) for v in text.split(",") if v.strip()]


def parse_axes(items) -> dict:
    axes = {}
    for item in items or ():
        if "=" not in item:
            raise cfgmod.ConfigParseError(f"axis must be key=values, got {item!r}")
        key, _, values = item.partition("=")
        key = key.strip().lower()
        axes[key] = parse_axis_values(key, values)
    return axes


def _seeds(args, base: dict) -> list[int]:
    first = base.get("seed", 0)
    return list(range(first, first + args.seeds))


def _open_out(path, append=False):
    if path is None:
        return sys.stdout, False
    p = Path(path)
    exists = append and p.exists() and p.stat().st_size > 0
    return p.open("a" if append else "w", encoding="utf-8", newline=""), exists


def _emit(records, path, append=False):
    stream, has_header = _open_out(path, append)
    try:
        write_csv(records, stream, header=not has_header)
    finally:
        if stream is not sys.stdout:
            stream.close()


def _check_keys(values):
    """Abort on missing/unparseable keys; other invalid points become error rows."""
    try:
        cfgmod.to_sim_config(values)
    except cfgmod.ConfigParseError:
        raise
    except ConfigError:
        pass


def cmd_run(args, base):
    cfgmod.to_sim_config(base)  # validate before running
    rec = run_point(base)
    if rec.metrics is None:
        raise IotmonError(rec.error)
    m = rec.metrics
    print(f"normalized_mse: {m['normalized_mse']:.6g}")
    print(f"energy_mj: {m['energy_mj']:.6g}")
    for k in ("frames", "tx_attempts", "successes", "collisions"):
        print(f"{k}: {m[k]}")
    print(f"mean_deciders: {m['mean_deciders']:.6g}")
    if args.out is not None:
        _emit([rec], args.out, append=True)


def cmd_sweep(args, base):
    spec = SweepSpec(base, parse_axes(args.axis), _seeds(args, base))
    points = spec.points()
    _check_keys(points[0])
    n_points = len(points)
    print(f"sweep: {n_points} points x {len(spec.seeds)} seeds = {n_points * len(spec.seeds)} runs", file=sys.stderr)
    _emit(sweep(spec, args.parallel), args.out)


def _optimize_spec(args, base) -> OptimizeSpec:
    b_grid = parse_axis_values("b", args.b_grid)
    k_grid = parse_axis_values("k_rp", args.krp_grid)
    e_ref = None if args.e_ref_mj is None else args.e_ref_mj * 1e-3
    return OptimizeSpec(b_grid, k_grid, e_ref, args.tolerance, _seeds(args, base))


def cmd_optimize(args, base):
    cfgmod.to_sim_config({**base, "policy": "SBD"})
    spec = _optimize_spec(args, base)
    n = len(spec.b_grid) * len(spec.k_rp_grid)
    print(f"optimize: {n} grid points x {len(spec.seeds)} seeds = {n * len(spec.seeds)} runs", file=sys.stderr)
    res = optimize_energy_matched(spec, base, args.parallel)
    print(f"b*: {res.b:.6g}")
    print(f"k_rp*: {res.k_rp}")
    print(f"normalized_mse: {res.mse:.6g}")
    print(f"energy_mj: {res.energy_j * 1e3:.6g}")
    print(f"budget_mj: {res.e_ref * args.tolerance * 1e3:.6g}")
    if args.out is not None:
        _emit(res.records, args.out)


def cmd_compare(args, base):
    policies = [p.strip().upper() for p in args.policies.split(",") if p.strip()]
    for p in policies:
        cfgmod.parse_value("policy", p)
        _check_keys({**base, "policy": p})
    match = _optimize_spec(args, base) if args.match_energy else None
    records = compare(policies, base, parse_axes(args.axis), _seeds(args, base), match, args.parallel)
    _emit(records, args.out)


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="key=value config file")
    common.add_argument("--set", action="append", default=[], metavar="KEY=VALUE", help="override a config key")
    common.add_argument("--out", help="CSV output path (stdout if omitted; run appends)")
    common.add_argument("--parallel", type=int, default=1, help="worker processes")
    common.add_argument("-v", "--verbose", action="store_true")

    seeds = argparse.ArgumentParser(add_help=False)
    seeds.add_argument("--seeds", type=int, default=DEFAULT_SEEDS, help="seeds per point, counted from the config seed")

    grid = argparse.ArgumentParser(add_help=False)
    grid.add_argument("--b-grid", default="5:100:5", help="b values (list or start:stop:step)")
    grid.add_argument("--krp-grid", default="15:35:5", help="k_rp values (list or start:stop:step)")
    grid.add_argument("--e-ref-mj", type=float, help="energy budget reference [mJ]; default: oblivious energy")
    grid.add_argument("--tolerance", type=float, default=DEFAULT_TOLERANCE)

    axes = argparse.ArgumentParser(add_help=False)
    axes.add_argument("--axis", action="append", metavar="KEY=VALUES", help="sweep axis, e.g. b=5:100:5 or k_rp=15,25")

    p = argparse.ArgumentParser(prog="iotmon", description=__doc__.splitlines()[0])
    sub = p.add_subparsers(dest="command", required=True)
    sub.add_parser("run", parents=[common], help="single simulation")
    sub.add_parser("sweep", parents=[common, seeds, axes], help="cross-product parameter sweep")
    sub.add_parser("optimize", parents=[common, seeds, grid], help="energy-matched SBD (b, k_rp) search")
    c = sub.add_parser("compare", parents=[common, seeds, axes, grid], help="seed-matched policy comparison")
    c.add_argument("--policies", default="MEE,SBD")
    c.add_argument("--match-energy", action="store_true", help="energy-match SBD at every axis point")
    return p


COMMANDS = {"run": cmd_run, "sweep": cmd_sweep, "optimize": cmd_optimize, "compare": cmd_compare}


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        base = cfgmod.load(args.config, args.set)
        COMMANDS[args.command](args, base)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 1
    except IotmonError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    return 0


if __name__ == "__main__":
    sys.exit(main())
