"""Parameter sweeps, the energy-matched SBD optimizer and policy comparisons.

Everything works on flat typed config dicts (see :mod:`iotmon.config`) so a
sweep point that turns out invalid can still be reported with its
parameters. Runs are independent; results are keyed by job and sorted
before output, so row order never depends on execution order.
"""

from __future__ import annotations

import csv
import io
import itertools
import logging
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from typing import Iterable, Mapping, Sequence

from .config import to_sim_config
from .engine import run_simulation, oblivious_energy
from .errors import EmptySweep, IotmonError, NoFeasiblePoint

log = logging.getLogger(__name__)

COLUMNS = (
    "policy", "M", "rho", "q", "b", "k_rp", "f_frame", "seed",
    "normalized_mse", "energy_mj", "frames", "tx_attempts", "successes", "collisions", "mean_deciders",
)
METRICS = ("normalized_mse", "energy_mj", "frames", "tx_attempts", "successes", "collisions", "mean_deciders")
DEFAULT_SEEDS = 10
DEFAULT_TOLERANCE = 1.05


@dataclass(frozen=True)
class RunRecord:
    """One (config, seed) outcome: metrics, or the error that stopped it."""

    params: tuple
    seed: int
    metrics: dict | None
    error: str | None = None


def _param_tuple(values: Mapping) -> tuple:
    try:
        cfg = to_sim_config(values)
    except IotmonError:
        f_frame = None
        policy, m = values.get("policy"), values.get("m")
        rho, q = values.get("rho", 0.0), values.get("q", 1.0)
        b, k_rp = values.get("b", 35.0), values.get("k_rp", 25)
    else:
        f_frame = cfg.frame_length
        policy, m, rho, q, b, k_rp = cfg.policy, cfg.m, cfg.rho, cfg.q, cfg.sbd.b, cfg.frame.k_rp
    return (policy, m, float(rho), float(q), float(b), k_rp, f_frame)


def run_point(values: Mapping) -> RunRecord:
    """Run one config dict; errors become part of the record."""
    params = _param_tuple(values)
    seed = values.get("seed", 0)
    try:
        res = run_simulation(to_sim_config(values))
        metrics = {
            "normalized_mse": res.normalized_mse,
            "energy_mj": res.energy_j * 1e3,
            "frames": res.frames,
            "tx_attempts": res.tx_attempts,
            "successes": res.successes,
            "collisions": res.collisions,
            "mean_deciders": res.mean_deciders_per_frame,
        }
    except IotmonError as exc:
        return RunRecord(params, seed, None, f"{type(exc).__name__}: {exc}")
    return RunRecord(params, seed, metrics)


def run_all(jobs: Sequence[Mapping], parallel: int = 1) -> list[RunRecord]:
    """Run jobs, in a process pool when ``parallel > 1``; order of ``jobs`` is kept."""
    jobs = [dict(j) for j in jobs]
    if parallel > 1 and len(jobs) > 1:
        with ProcessPoolExecutor(max_workers=parallel) as pool:
            return list(pool.map(run_point, jobs, chunksize=max(1, len(jobs) // (4 * parallel))))
    return [run_point(j) for j in jobs]


def _mean(records: Sequence[RunRecord]) -> RunRecord:
    ok = sorted((r for r in records if r.metrics is not None), key=lambda r: r.seed)
    if not ok:
        return RunRecord(records[0].params, "mean", None, "no successful seeds")
    mean = {k: sum(r.metrics[k] for r in ok) / len(ok) for k in METRICS}
    return RunRecord(records[0].params, "mean", mean)


def _fmt(v) -> str:
    if v is None:
        return ""
    if isinstance(v, bool):
        return str(int(v))
    if isinstance(v, int):
        return str(v)
    if isinstance(v, float):
        return f"{v:.6g}"
    return str(v)


def format_row(rec: RunRecord) -> list[str]:
    policy, m, rho, q, b, k_rp, f_frame = rec.params
    row = [policy, m, rho, q, b, k_rp, f_frame, rec.seed]
    if rec.metrics is None:
        row += ["error"] + [""] * (len(METRICS) - 1)
    else:
        row += [rec.metrics[k] for k in METRICS]
    return [_fmt(v) for v in row]


def _sort_key(rec: RunRecord):
    params = tuple((p is None, 0 if p is None else p) for p in rec.params)
    return (params, (1, 0) if rec.seed == "mean" else (0, rec.seed))


def summarize(records: Iterable[RunRecord]) -> list[RunRecord]:
    """Per-seed records plus one seed-averaged record per parameter tuple, sorted."""
    groups: dict[tuple, list[RunRecord]] = {}
    for r in records:
        groups.setdefault(r.params, []).append(r)
    out = []
    for recs in groups.values():
        out.extend(recs)
        out.append(_mean(recs))
    return sorted(out, key=_sort_key)


def write_csv(records: Iterable[RunRecord], stream, header: bool = True) -> None:
    w = csv.writer(stream, lineterminator="\n")
    if header:
        w.writerow(COLUMNS)
    for rec in records:
        w.writerow(format_row(rec))


def to_csv(records: Iterable[RunRecord]) -> str:
    buf = io.StringIO()
    write_csv(records, buf)
    return buf.getvalue()


@dataclass
class SweepSpec:
    base: dict
    axes: dict = field(default_factory=dict)
    seeds: Sequence[int] = tuple(range(DEFAULT_SEEDS))

    def points(self) -> list[dict]:
        for key, values in self.axes.items():
            if len(values) == 0:
                raise EmptySweep(f"axis {key!r} has no values")
        if len(self.seeds) == 0:
            raise EmptySweep("no seeds")
        keys = list(self.axes)
        return [{**self.base, **dict(zip(keys, combo))} for combo in itertools.product(*(self.axes[k] for k in keys))]

    def jobs(self) -> list[dict]:
        return [{**p, "seed": s} for p in self.points() for s in self.seeds]


def sweep(spec: SweepSpec, parallel: int = 1) -> list[RunRecord]:
    jobs = spec.jobs()
    log.info("sweep: %d points x %d seeds = %d runs", len(spec.points()), len(spec.seeds), len(jobs))
    return summarize(run_all(jobs, parallel))


@dataclass
class OptimizeSpec:
    b_grid: Sequence[float]
    k_rp_grid: Sequence[int]
    e_ref: float | None = None      # joules; None -> oblivious energy of the base config
    tolerance: float = DEFAULT_TOLERANCE
    seeds: Sequence[int] = tuple(range(DEFAULT_SEEDS))


@dataclass
class OptimizeResult:
    b: float
    k_rp: int
    mse: float
    energy_j: float
    e_ref: float
    records: list


def reference_energy(base: Mapping) -> float:
    """Energy of the oblivious policy under ``base`` (seed-independent)."""
    return oblivious_energy(to_sim_config({**base, "policy": "MEE"}))


def choose(records: Iterable[RunRecord], budget_j: float) -> RunRecord:
    """Feasible mean record with the lowest MSE (then energy, b, k_rp)."""
    feasible = [r for r in records
                if r.seed == "mean" and r.metrics is not None and r.metrics["energy_mj"] * 1e-3 <= budget_j]
    if not feasible:
        raise NoFeasiblePoint(f"no grid point within the energy budget {budget_j * 1e3:.6g} mJ")
    return min(feasible, key=lambda r: (r.metrics["normalized_mse"], r.metrics["energy_mj"], r.params[4], r.params[5]))


def optimize_energy_matched(spec: OptimizeSpec, base: Mapping, parallel: int = 1) -> OptimizeResult:
    """Grid search for the SBD (b, k_rp) with the lowest mean MSE whose mean
    energy stays within ``tolerance * e_ref``."""
    e_ref = reference_energy(base) if spec.e_ref is None else spec.e_ref
    sw = SweepSpec({**base, "policy": "SBD"}, {"b": list(spec.b_grid), "k_rp": list(spec.k_rp_grid)}, spec.seeds)
    records = sweep(sw, parallel)
    best = choose(records, spec.tolerance * e_ref)
    return OptimizeResult(best.params[4], best.params[5], best.metrics["normalized_mse"],
                          best.metrics["energy_mj"] * 1e-3, e_ref, records)


def compare(policies: Sequence[str], base: Mapping, axes: Mapping, seeds: Sequence[int] = tuple(range(DEFAULT_SEEDS)),
            match: OptimizeSpec | None = None, parallel: int = 1) -> list[RunRecord]:
    """Seed-matched runs of each policy at every axis point.

    With ``match`` given, SBD uses the energy-matched (b, k_rp) found by
    :func:`optimize_energy_matched` at that point instead of the base values.
    """
    if not policies:
        raise EmptySweep("no policies to compare")
    points = SweepSpec(base, dict(axes), seeds).points()
    out: list[RunRecord] = []
    for point in points:
        for policy in policies:
            cfg = {**point, "policy": policy.upper()}
            if cfg["policy"] == "SBD" and match is not None:
                spec = OptimizeSpec(match.b_grid, match.k_rp_grid, match.e_ref, match.tolerance, seeds)
                try:
                    res = optimize_energy_matched(spec, cfg, parallel)
                except NoFeasiblePoint as exc:
                    log.warning("%s at %s", exc, point)
                    out.append(RunRecord(_param_tuple(cfg), "mean", None, str(exc)))
                    continue
                log.info("energy-matched SBD at %s: b=%g k_rp=%d", point, res.b, res.k_rp)
                out.extend(r for r in res.records if r.params[4] == res.b and r.params[5] == res.k_rp)
            else:
                out.extend(sweep(SweepSpec(cfg, {}, seeds), parallel))
    return sorted(out, key=_sort_key)
