import random

import pytest

from iotmon.errors import EmptySweep, NoFeasiblePoint
from iotmon.experiments import (METRICS, OptimizeSpec, RunRecord, SweepSpec, choose, compare, optimize_energy_matched,
                                reference_energy, summarize, sweep, to_csv)

BASE = {"m": 10, "policy": "SBD", "total_slots": 24_000}


def test_empty_axis_and_seeds():
    with pytest.raises(EmptySweep):
        SweepSpec(BASE, {"b": []}).points()
    with pytest.raises(EmptySweep):
        SweepSpec(BASE, {"b": [1.0]}, seeds=()).jobs()
    with pytest.raises(EmptySweep):
        compare([], BASE, {})


def test_sweep_cross_product_size():
    spec = SweepSpec(BASE, {"b": [1.0, 2.0, 3.0], "k_rp": [15, 25]}, seeds=range(4))
    assert len(spec.points()) == 6
    assert len(spec.jobs()) == 24


def test_reference_energy_defaults():
    assert reference_energy({"m": 70, "policy": "SBD"}) == pytest.approx(0.13125, abs=1e-15)


def _rec(b, k_rp, mse, e_mj, seed="mean"):
    metrics = dict.fromkeys(METRICS, 0.0) | {"normalized_mse": mse, "energy_mj": e_mj}
    return RunRecord(("SBD", 4, 0.0, 1.0, b, k_rp, 10 * (5 + k_rp)), seed, metrics)


def test_choose_feasibility_and_tie_break():
    recs = [_rec(10.0, 15, 5.0, 200.0), _rec(20.0, 15, 7.0, 100.0), _rec(30.0, 25, 7.0, 90.0),
            _rec(25.0, 15, 7.0, 90.0), _rec(5.0, 15, 1.0, 50.0, seed=0)]
    best = choose(recs, 0.13)
    assert (best.params[4], best.params[5]) == (25.0, 15)
    for _ in range(20):
        random.shuffle(recs)
        assert choose(recs, 0.13) is not None and choose(recs, 0.13).params[4] == 25.0
    with pytest.raises(NoFeasiblePoint):
        choose(recs, 0.0)


def test_optimize_budget_zero_infeasible():
    with pytest.raises(NoFeasiblePoint):
        optimize_energy_matched(OptimizeSpec([2.0], [15], e_ref=0.0, seeds=[0]), BASE)


def test_optimize_single_point():
    res = optimize_energy_matched(OptimizeSpec([20.0], [15], seeds=[0, 1]), BASE)
    assert (res.b, res.k_rp) == (20.0, 15)
    assert res.energy_j <= 1.05 * res.e_ref
    assert len(res.records) == 3


def test_optimize_order_invariant():
    a = optimize_energy_matched(OptimizeSpec([10.0, 20.0, 40.0], [15, 25], seeds=[0, 1]), BASE)
    b = optimize_energy_matched(OptimizeSpec([40.0, 10.0, 20.0], [25, 15], seeds=[0, 1]), BASE)
    assert (a.b, a.k_rp, a.mse, a.energy_j) == (b.b, b.k_rp, b.mse, b.energy_j)
    assert to_csv(a.records) == to_csv(b.records)


def test_summarize_means_and_error_rows():
    recs = sweep(SweepSpec({"m": 4, "policy": "SBD", "total_slots": 2000}, {"k_rp": [5, 10]}, seeds=[0, 1]))
    text = to_csv(recs).splitlines()
    assert len(text) == 1 + 2 * 3
    err = [line for line in text if ",error," in line]
    assert len(err) == 3   # both seeds and the mean of the invalid point
    ok = [r for r in recs if r.params[5] == 5]
    mean = ok[-1]
    assert mean.seed == "mean"
    assert mean.metrics["normalized_mse"] == pytest.approx(
        (ok[0].metrics["normalized_mse"] + ok[1].metrics["normalized_mse"]) / 2)


def test_summarize_is_order_independent():
    recs = [_rec(b, k, b * k, 1.0, seed=s) for b in (1.0, 2.0) for k in (15, 25) for s in (0, 1)]
    shuffled = recs[:]
    random.Random(3).shuffle(shuffled)
    assert summarize(recs) == summarize(shuffled)


def test_compare_matched_seeds():
    recs = compare(["MEE", "SBD"], {"m": 6, "total_slots": 12_000, "b": 3.0, "k_rp": 15}, {"rho": [0.0, 0.2]},
                   seeds=[0, 1])
    assert {r.params[0] for r in recs} == {"MEE", "SBD"}
    assert len(recs) == 2 * 2 * 3
    assert {r.seed for r in recs} == {0, 1, "mean"}
