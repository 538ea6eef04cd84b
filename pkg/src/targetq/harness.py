"""Multi-seed experiment orchestration, cost-aligned aggregation with
percentile bands, and CSV emission.

Arms in one experiment share the environment, discount, and sample budget
so curves are comparable on the common axis: cumulative sample cost. Seeds
are paired across arms (arm i, seed s) and runs are executed in a fixed
order, so a configuration determines its outputs byte for byte.
"""
from __future__ import annotations

import csv
from dataclasses import dataclass, field
from typing import Mapping, Sequence

import numpy as np

from .errors import AlignmentError, ConfigValidationError
from .learner import (
    RunTrace,
    UniformStateAction,
    run_accuracy_triggered_q,
    run_periodic_q,
)
from .mdp import TabularMdp, new_q_table, value_iteration_oracle
from .schedules import AccuracyTriggered, TufSchedule

CSV_HEADER = (
    "arm",
    "cumulative_cost",
    "cycle",
    "bias_mean",
    "bias_median",
    "bias_lo",
    "bias_hi",
    "score_median",
    "score_lo",
    "score_hi",
)


@dataclass(frozen=True)
class Arm:
    label: str
    schedule: TufSchedule
    step_sizes: object


@dataclass
class ExperimentConfig:
    mdp: TabularMdp
    arms: tuple[Arm, ...]
    seeds: tuple[int, ...]
    sample_budget: int
    eval_start: int | None = None
    eval_horizon: int | None = None
    eval_every: int = 1
    record_bias: bool = True
    record_gap: bool = False
    oracle_tol: float = 1e-10

    def violations(self) -> list[str]:
        problems = []
        if not self.arms:
            problems.append("no arms configured")
        labels = [arm.label for arm in self.arms]
        if len(set(labels)) != len(labels):
            problems.append("arm labels must be unique")
        if not self.seeds:
            problems.append("no seeds configured")
        if len(set(self.seeds)) != len(self.seeds):
            problems.append("seeds must be distinct")
        if self.sample_budget < 1:
            problems.append("sample budget must be at least 1")
        if self.eval_horizon is not None and self.eval_horizon < 0:
            problems.append("evaluation horizon must be nonnegative")
        if self.eval_every < 1:
            problems.append("evaluation cadence must be at least 1")
        return problems


def run_one(
    cfg: ExperimentConfig,
    arm: Arm,
    seed: int,
    oracle: np.ndarray | None,
) -> RunTrace:
    """A single seeded run of one arm; all runs flow through here so arms
    stay comparable."""
    rng = np.random.default_rng(seed)
    q0 = new_q_table(cfg.mdp)
    common = dict(
        oracle=oracle,
        sample_budget=cfg.sample_budget,
        eval_start=cfg.eval_start,
        eval_horizon=cfg.eval_horizon,
        eval_every=cfg.eval_every,
        record_gap=cfg.record_gap,
        label=arm.label,
        seed=seed,
    )
    if isinstance(arm.schedule, AccuracyTriggered):
        return run_accuracy_triggered_q(
            q0,
            arm.schedule.k_min,
            arm.schedule.k_max,
            arm.step_sizes,
            UniformStateAction(),
            cfg.mdp,
            rng,
            accuracy=arm.schedule.accuracy,
            **common,
        )
    return run_periodic_q(
        q0, arm.schedule, arm.step_sizes, UniformStateAction(), cfg.mdp, rng, **common
    )


def run_experiment(cfg: ExperimentConfig) -> dict[str, list[RunTrace]]:
    """Run every (arm, seed) pair; deterministic given the configuration.

    Runs are independent (no shared mutable state), executed seed-major
    within each arm and collected in configuration order.
    """
    problems = cfg.violations()
    if problems:
        raise ConfigValidationError(problems)
    oracle = (
        value_iteration_oracle(cfg.mdp, tol=cfg.oracle_tol) if cfg.record_bias else None
    )
    results: dict[str, list[RunTrace]] = {}
    for arm in cfg.arms:
        results[arm.label] = [run_one(cfg, arm, seed, oracle) for seed in cfg.seeds]
    return results


@dataclass
class AggregateStats:
    """Per-checkpoint statistics across seeds, aligned on cumulative cost
    by carrying each seed's last observation forward."""

    costs: list[int]
    bias_mean: list[float | None]
    bias_median: list[float | None]
    bias_lo: list[float | None]
    bias_hi: list[float | None]
    score_median: list[float | None]
    score_lo: list[float | None]
    score_hi: list[float | None]


def _locf_matrix(traces: Sequence[RunTrace], grid: np.ndarray, getter) -> np.ndarray | None:
    rows = []
    for trace in traces:
        costs = np.array([rec.cumulative_cost for rec in trace.records])
        vals = [getter(rec) for rec in trace.records]
        if any(v is None for v in vals):
            return None
        idx = np.searchsorted(costs, grid, side="right") - 1
        rows.append(np.array(vals, dtype=float)[idx])
    return np.vstack(rows)


def aggregate(traces: Sequence[RunTrace]) -> AggregateStats:
    """Aggregate one arm's per-seed traces onto the union cost grid.

    Bands are the 2.5/97.5 percentiles across seeds (linear interpolation);
    at least two seeds are required for bands to mean anything.
    """
    if len(traces) < 2:
        raise AlignmentError("aggregation needs at least 2 seeds for bands")
    for trace in traces:
        if not trace.records or trace.records[0].cumulative_cost != 0:
            raise AlignmentError("every trace must start with a cost-0 record")
    grid = np.unique(
        np.concatenate([[rec.cumulative_cost for rec in t.records] for t in traces])
    )
    n = len(grid)
    stats = AggregateStats(
        costs=[int(c) for c in grid],
        bias_mean=[None] * n,
        bias_median=[None] * n,
        bias_lo=[None] * n,
        bias_hi=[None] * n,
        score_median=[None] * n,
        score_lo=[None] * n,
        score_hi=[None] * n,
    )
    bias = _locf_matrix(traces, grid, lambda rec: rec.bias)
    if bias is not None:
        lo, med, hi = np.percentile(bias, [2.5, 50.0, 97.5], axis=0)
        stats.bias_mean = list(bias.mean(axis=0))
        stats.bias_median = list(med)
        stats.bias_lo = list(lo)
        stats.bias_hi = list(hi)
    # Scores aggregate only when every record carries one (per-cycle cadence).
    score = _locf_matrix(traces, grid, lambda rec: rec.score)
    if score is not None:
        lo, med, hi = np.percentile(score, [2.5, 50.0, 97.5], axis=0)
        stats.score_median = list(med)
        stats.score_lo = list(lo)
        stats.score_hi = list(hi)
    return stats


def _fmt(x) -> str:
    if x is None:
        return ""
    return format(float(x), ".12g")


def _stats_rows(label: str, stats: AggregateStats):
    for i, cost in enumerate(stats.costs):
        yield (
            label,
            str(cost),
            str(i),
            _fmt(stats.bias_mean[i]),
            _fmt(stats.bias_median[i]),
            _fmt(stats.bias_lo[i]),
            _fmt(stats.bias_hi[i]),
            _fmt(stats.score_median[i]),
            _fmt(stats.score_lo[i]),
            _fmt(stats.score_hi[i]),
        )


def _trace_rows(label: str, trace: RunTrace):
    for rec in trace.records:
        yield (
            label,
            str(rec.cumulative_cost),
            str(rec.cycle),
            _fmt(rec.bias),
            _fmt(rec.bias),
            _fmt(rec.bias),
            _fmt(rec.bias),
            _fmt(rec.score),
            _fmt(rec.score),
            _fmt(rec.score),
        )


def emit_csv(data, path) -> None:
    """Write checkpoint rows to ``path``.

    ``data`` is a mapping of arm label to AggregateStats or RunTrace, or a
    bare RunTrace (emitted under its own label with zero-width bands).
    Floats carry 12 significant digits; absent values are empty fields.
    """
    if isinstance(data, RunTrace):
        data = {data.label: data}
    elif isinstance(data, AggregateStats):
        data = {"aggregate": data}
    elif not isinstance(data, Mapping):
        raise AlignmentError(f"cannot emit {type(data).__name__} as CSV")
    with open(path, "w", newline="") as handle:
        writer = csv.writer(handle, lineterminator="\n")
        writer.writerow(CSV_HEADER)
        for label, item in data.items():
            rows = _stats_rows(label, item) if isinstance(item, AggregateStats) else _trace_rows(label, item)
            for row in rows:
                writer.writerow(row)


def read_csv_rows(path) -> list[dict[str, str]]:
    """Parse an emitted CSV back into dict rows (round-trip helper)."""
    with open(path, newline="") as handle:
        return list(csv.DictReader(handle))
