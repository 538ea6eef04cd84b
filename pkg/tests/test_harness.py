import numpy as np
import pytest

import targetq as tq
from targetq.errors import AlignmentError, ConfigValidationError
from targetq.harness import CSV_HEADER


@pytest.fixture(scope="module")
def small_cfg(grid07):
    steps = tq.TheoryInverseStepSize.from_pair_count(52)
    return tq.ExperimentConfig(
        mdp=grid07,
        arms=(
            tq.Arm("fixed-200", tq.FixedPeriod(200), steps),
            tq.Arm("geometric-100", tq.GeometricPeriod(100, 0.7), steps),
        ),
        seeds=(0, 1, 2),
        sample_budget=3000,
        eval_horizon=7,
    )


@pytest.fixture(scope="module")
def small_results(small_cfg):
    return tq.run_experiment(small_cfg)


def test_config_validation_lists_every_violation(grid07):
    steps = tq.TheoryInverseStepSize.from_pair_count(52)
    cfg = tq.ExperimentConfig(
        mdp=grid07,
        arms=(
            tq.Arm("a", tq.FixedPeriod(10), steps),
            tq.Arm("a", tq.FixedPeriod(20), steps),
        ),
        seeds=(1, 1),
        sample_budget=0,
        eval_every=0,
    )
    with pytest.raises(ConfigValidationError) as err:
        tq.run_experiment(cfg)
    assert len(err.value.violations) == 4


def test_single_run_equals_direct_call(grid07, oracle07, small_cfg):
    traces = tq.run_experiment(
        tq.ExperimentConfig(
            mdp=grid07,
            arms=small_cfg.arms[:1],
            seeds=(5,),
            sample_budget=1000,
            eval_horizon=7,
        )
    )["fixed-200"]
    direct = tq.run_periodic_q(
        tq.new_q_table(grid07),
        tq.FixedPeriod(200),
        small_cfg.arms[0].step_sizes,
        tq.UniformStateAction(),
        grid07,
        np.random.default_rng(5),
        oracle=oracle07,
        sample_budget=1000,
        eval_horizon=7,
        label="fixed-200",
        seed=5,
    )
    assert traces[0].records == direct.records


def test_identical_arms_same_seed_identical_traces(grid07, small_cfg):
    steps = small_cfg.arms[0].step_sizes
    cfg = tq.ExperimentConfig(
        mdp=grid07,
        arms=(
            tq.Arm("one", tq.FixedPeriod(150), steps),
            tq.Arm("two", tq.FixedPeriod(150), steps),
        ),
        seeds=(3,),
        sample_budget=600,
    )
    res = tq.run_experiment(cfg)
    assert res["one"][0].records == res["two"][0].records


def test_arms_share_budget_fairness(small_results, small_cfg):
    for traces in small_results.values():
        for t in traces:
            assert t.final.cumulative_cost >= small_cfg.sample_budget
            # last cycle started strictly below the budget
            assert t.records[-2].cumulative_cost < small_cfg.sample_budget


def test_adaptive_arm_through_harness(grid07):
    steps = tq.TheoryInverseStepSize.from_pair_count(52)
    cfg = tq.ExperimentConfig(
        mdp=grid07,
        arms=(tq.Arm("adaptive", tq.AccuracyTriggered(50, 500), steps),),
        seeds=(0, 1),
        sample_budget=2000,
    )
    res = tq.run_experiment(cfg)
    for t in res["adaptive"]:
        assert all(50 <= rec.inner_steps <= 500 for rec in t.records[1:])


# ---------------------------------------------------------------------------
# Aggregation


def _trace(costs, biases, scores=None):
    t = tq.RunTrace(gamma=0.7, label="x")
    scores = scores or [None] * len(costs)
    for i, (c, b) in enumerate(zip(costs, biases)):
        t.records.append(
            tq.CycleRecord(
                cycle=i, planned_period=None, inner_steps=0, cumulative_cost=c,
                bias=b, bellman_gap=None, score=scores[i],
            )
        )
    return t


def test_aggregate_identical_traces_zero_width(small_results):
    traces = small_results["fixed-200"]
    stats = tq.aggregate([traces[0], traces[0]])
    for lo, hi in zip(stats.bias_lo, stats.bias_hi):
        assert lo == hi


def test_aggregate_median_of_three():
    traces = [_trace([0, 10], [5.0, b]) for b in (1.0, 2.0, 3.0)]
    stats = tq.aggregate(traces)
    assert stats.costs == [0, 10]
    assert stats.bias_median[1] == 2.0
    assert stats.bias_mean[1] == pytest.approx(2.0)


def test_aggregate_matches_sort_and_index_oracle():
    rng = np.random.default_rng(12)
    values = rng.uniform(0, 5, size=(9, 1))
    traces = [_trace([0], [float(v)]) for v in values[:, 0]]
    stats = tq.aggregate(traces)

    def percentile_oracle(xs, q):
        # linear interpolation between closest ranks
        xs = sorted(xs)
        pos = (len(xs) - 1) * q / 100.0
        lo = int(np.floor(pos))
        hi = int(np.ceil(pos))
        return xs[lo] + (pos - lo) * (xs[hi] - xs[lo])

    col = list(values[:, 0])
    assert stats.bias_lo[0] == pytest.approx(percentile_oracle(col, 2.5), abs=1e-12)
    assert stats.bias_median[0] == pytest.approx(percentile_oracle(col, 50), abs=1e-12)
    assert stats.bias_hi[0] == pytest.approx(percentile_oracle(col, 97.5), abs=1e-12)


def test_aggregate_cost_alignment_carries_forward():
    a = _trace([0, 10, 20], [3.0, 2.0, 1.0])
    b = _trace([0, 15], [3.0, 0.5])
    stats = tq.aggregate([a, b])
    assert stats.costs == [0, 10, 15, 20]
    # at cost 15: a carries 2.0 forward, b reports 0.5
    assert stats.bias_mean[2] == pytest.approx((2.0 + 0.5) / 2)
    # at cost 20: b carries 0.5 forward
    assert stats.bias_mean[3] == pytest.approx((1.0 + 0.5) / 2)
    assert all(x < y for x, y in zip(stats.costs, stats.costs[1:]))


def test_aggregate_band_ordering(small_results):
    stats = tq.aggregate(small_results["geometric-100"])
    for lo, med, hi in zip(stats.bias_lo, stats.bias_median, stats.bias_hi):
        assert lo <= med <= hi


def test_aggregate_errors():
    with pytest.raises(AlignmentError):
        tq.aggregate([_trace([0], [1.0])])
    with pytest.raises(AlignmentError):
        tq.aggregate([_trace([5], [1.0]), _trace([0], [1.0])])


def test_band_coverage_of_final_biases(grid07, oracle07):
    steps = tq.TheoryInverseStepSize.from_pair_count(52)
    cfg = tq.ExperimentConfig(
        mdp=grid07,
        arms=(tq.Arm("cov", tq.FixedPeriod(200), steps),),
        seeds=tuple(range(50)),
        sample_budget=2000,
    )
    traces = tq.run_experiment(cfg)["cov"]
    stats = tq.aggregate(traces)
    finals = [t.final.bias for t in traces]
    lo, hi = stats.bias_lo[-1], stats.bias_hi[-1]
    inside = sum(1 for b in finals if lo <= b <= hi)
    assert inside >= 0.9 * len(finals)


# ---------------------------------------------------------------------------
# CSV emission


def test_emit_csv_header_only_for_empty(tmp_path):
    path = tmp_path / "empty.csv"
    tq.emit_csv({}, path)
    assert path.read_text() == ",".join(CSV_HEADER) + "\n"


def test_emit_csv_roundtrip_and_row_count(tmp_path, small_results):
    stats = {label: tq.aggregate(traces) for label, traces in small_results.items()}
    path = tmp_path / "stats.csv"
    tq.emit_csv(stats, path)
    rows = tq.read_csv_rows(path)
    assert len(rows) == sum(len(s.costs) for s in stats.values())
    for row in rows:
        label = row["arm"]
        i = int(row["cycle"])
        assert int(row["cumulative_cost"]) == stats[label].costs[i]
        emitted = float(row["bias_median"])
        assert emitted == pytest.approx(stats[label].bias_median[i], rel=1e-11)


def test_emit_csv_trace_zero_width(tmp_path, small_results):
    trace = small_results["fixed-200"][0]
    path = tmp_path / "trace.csv"
    tq.emit_csv(trace, path)
    rows = tq.read_csv_rows(path)
    assert len(rows) == len(trace.records)
    assert rows[0]["bias_lo"] == rows[0]["bias_hi"] == rows[0]["bias_median"]


def test_emit_csv_deterministic_bytes(tmp_path, small_results):
    stats = {label: tq.aggregate(traces) for label, traces in small_results.items()}
    p1, p2 = tmp_path / "a.csv", tmp_path / "b.csv"
    tq.emit_csv(stats, p1)
    tq.emit_csv(stats, p2)
    assert p1.read_bytes() == p2.read_bytes()


def test_run_experiment_reproducible(small_cfg, small_results, tmp_path):
    again = tq.run_experiment(small_cfg)
    p1, p2 = tmp_path / "r1.csv", tmp_path / "r2.csv"
    tq.emit_csv({k: tq.aggregate(v) for k, v in small_results.items()}, p1)
    tq.emit_csv({k: tq.aggregate(v) for k, v in again.items()}, p2)
    assert p1.read_bytes() == p2.read_bytes()
