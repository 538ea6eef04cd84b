"""Command-line interface.

Subcommands:

* ``oracle``    solve an environment's fixed point and print its action
                values at the start state
* ``design``    closed-form update-period design for a target accuracy
* ``run``       one seeded run from a run config, optionally to CSV
* ``sweep``     multi-seed, multi-arm experiment from a sweep config
* ``gridworld`` emit the bundled benchmark's environment spec
"""
from __future__ import annotations

import argparse
import sys
from pathlib import Path

import numpy as np

from . import __version__
from .config import (
    dump_schedule_file,
    load_environment,
    parse_run_config,
    parse_sweep_config,
)
from .errors import DomainError, IterationLimitError
from .gridworld import ACTION_NAMES, dump_grid_spec, gridworld_spec
from .harness import aggregate, emit_csv, run_experiment
from .learner import UniformStateAction, run_accuracy_triggered_q, run_periodic_q
from .mdp import new_q_table, value_iteration_oracle
from .schedules import (
    AccuracyTriggered,
    compute_constants,
    design_fixed_period,
    design_growing_period,
)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="targetq",
        description="Tabular Q-learning with frozen targets and designed update schedules.",
    )
    parser.add_argument("--version", action="version", version=f"targetq {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    oracle = sub.add_parser("oracle", help="solve and print the optimal action values")
    oracle.add_argument("--env", default="gridworld", help="'gridworld' or a grid-spec file")
    oracle.add_argument("--gamma", type=float, default=None, help="discount factor")
    oracle.add_argument("--tol", type=float, default=1e-10, help="fixed-point residual tolerance")

    design = sub.add_parser("design", help="design a quasi-optimal update schedule")
    design.add_argument("--env", default="gridworld", help="'gridworld' or a grid-spec file")
    design.add_argument("--gamma", type=float, default=None, help="discount factor")
    design.add_argument("--eps", type=float, required=True, help="target accuracy")
    design.add_argument("--e0", type=float, default=None,
                        help="initial error bound (default: sup |Q*| for a zero start)")
    design.add_argument("--xi", type=float, default=None,
                        help="exploration constant (default: 1/active pairs)")
    design.add_argument("--schedule", choices=("fixed", "growing"), default="growing")
    design.add_argument("--out", type=Path, default=None, help="write a schedule file")

    run = sub.add_parser("run", help="one seeded run from a config file")
    run.add_argument("--config", required=True, type=Path)
    run.add_argument("--seed", type=int, default=None, help="override the config seed")
    run.add_argument("--out", type=Path, default=None, help="CSV output path")

    sweep = sub.add_parser("sweep", help="multi-seed experiment from a config file")
    sweep.add_argument("--config", required=True, type=Path)
    sweep.add_argument("--out", type=Path, default=None, help="CSV output path")

    grid = sub.add_parser("gridworld", help="emit the bundled benchmark's grid spec")
    grid.add_argument("--gamma", type=float, default=0.7)
    grid.add_argument("--out", type=Path, default=None)
    return parser


def _cmd_oracle(args) -> int:
    mdp = load_environment(args.env, args.gamma)
    q_star = value_iteration_oracle(mdp, tol=args.tol)
    print(
        f"environment: {args.env} ({mdp.num_states} states, {mdp.num_actions} actions, "
        f"{mdp.num_active_pairs} active pairs)"
    )
    print(f"gamma: {mdp.gamma}")
    start = mdp.start_state
    for a in range(mdp.num_actions):
        name = ACTION_NAMES[a] if a < len(ACTION_NAMES) else str(a)
        print(f"Q*(start, {name}) = {q_star[start, a]:.4f}")
    v = float(np.max(q_star[start]))
    print(f"V*(start) = {v:.4f}")
    return 0


def _cmd_design(args) -> int:
    mdp = load_environment(args.env, args.gamma)
    q_star = value_iteration_oracle(mdp)
    xi = args.xi if args.xi is not None else 1.0 / mdp.num_active_pairs
    constants = compute_constants(mdp, xi, q_star)
    e0 = args.e0 if args.e0 is not None else constants.q_star_sup
    designer = design_fixed_period if args.schedule == "fixed" else design_growing_period
    out = designer(args.eps, e0, constants)
    print(f"family: {out.family}")
    print(f"target accuracy: {out.target_accuracy}")
    print(f"initial error bound: {out.initial_error}")
    print(f"constants: xi={constants.xi:.8g} sigma_sq={constants.sigma_sq:.8g} "
          f"sup|Q*|={constants.q_star_sup:.8g} c1={constants.c1:.8g} c2={constants.c2:.8g} "
          f"mu={constants.mu:.8g} k_min={constants.k_min:.8g}")
    print(f"cycles: {out.n_cycles}")
    if out.n_cycles:
        shown = ", ".join(str(k) for k in out.periods[:8])
        if out.n_cycles > 8:
            shown += f", ... , {out.periods[-1]}"
        print(f"periods: {shown}")
    print(f"predicted cost: {out.predicted_cost}")
    print(f"predicted error bound: {out.predicted_error_bound:.6g}")
    if out.degenerate:
        print("degenerate design: the initial error already meets the target")
    if not out.within_validity:
        print("note: outside the guaranteed validity regime; periods clamped to k_min")
    if args.out is not None:
        meta = {
            "family": out.family,
            "gamma": repr(mdp.gamma),
            "eps": repr(out.target_accuracy),
            "e0": repr(out.initial_error),
        }
        args.out.write_text(dump_schedule_file(out.periods, meta))
        print(f"schedule written to {args.out}")
    return 0


def _cmd_run(args) -> int:
    cfg = parse_run_config(args.config, seed_override=args.seed)
    oracle = value_iteration_oracle(cfg.mdp) if cfg.record_bias else None
    rng = np.random.default_rng(cfg.seed)
    q0 = new_q_table(cfg.mdp)
    common = dict(
        oracle=oracle,
        n_cycles=cfg.n_cycles,
        sample_budget=cfg.sample_budget,
        eval_horizon=cfg.eval_horizon,
        eval_every=cfg.eval_every,
        label=cfg.label,
        seed=cfg.seed,
    )
    if isinstance(cfg.schedule, AccuracyTriggered):
        trace = run_accuracy_triggered_q(
            q0, cfg.schedule.k_min, cfg.schedule.k_max, cfg.step_sizes,
            UniformStateAction(), cfg.mdp, rng,
            accuracy=cfg.schedule.accuracy, **common,
        )
    else:
        trace = run_periodic_q(
            q0, cfg.schedule, cfg.step_sizes, UniformStateAction(), cfg.mdp, rng, **common
        )
    final = trace.final
    print(f"run '{trace.label}' seed={trace.seed}: {final.cycle} cycles, "
          f"{final.cumulative_cost} samples")
    if final.bias is not None:
        print(f"final bias: {final.bias:.6g}")
    if final.score is not None:
        print(f"final score: {final.score:.6g}")
    if args.out is not None:
        emit_csv(trace, args.out)
        print(f"trace written to {args.out}")
    return 0


def _cmd_sweep(args) -> int:
    cfg = parse_sweep_config(args.config)
    results = run_experiment(cfg)
    stats = {label: aggregate(traces) for label, traces in results.items()}
    for label, traces in results.items():
        finals = [t.final.bias for t in traces]
        if all(b is not None for b in finals):
            med = float(np.median(np.array(finals, dtype=float)))
            print(f"arm {label}: median final bias {med:.6g} over {len(traces)} seeds")
        else:
            print(f"arm {label}: {len(traces)} seeds")
    if args.out is not None:
        emit_csv(stats, args.out)
        print(f"aggregate written to {args.out}")
    return 0


def _cmd_gridworld(args) -> int:
    text = dump_grid_spec(gridworld_spec(args.gamma))
    if args.out is not None:
        args.out.write_text(text)
        print(f"grid spec written to {args.out}")
    else:
        sys.stdout.write(text)
    return 0


_COMMANDS = {
    "oracle": _cmd_oracle,
    "design": _cmd_design,
    "run": _cmd_run,
    "sweep": _cmd_sweep,
    "gridworld": _cmd_gridworld,
}


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    try:
        return _COMMANDS[args.command](args)
    except (DomainError, OSError, ValueError, OverflowError, IterationLimitError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
