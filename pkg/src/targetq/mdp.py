"""Finite tabular MDPs: exact Bellman machinery, a value-iteration solver,
and generative state-action sampling.

Conventions used throughout the package:

* A Q-table is a plain ``(num_states, num_actions)`` float ndarray.
* The "active" state-action pairs are all pairs whose state is non-terminal.
  Norms, sampling, and learning operate on active pairs only; terminal rows
  of a Q-table are inert (value-iteration output pins them to the terminal
  state's mean reward, with zero continuation).
* Transitions are deterministic; all stochasticity lives in the rewards.
* Every reward draw consumes exactly one uniform from the generator, also
  for deterministic rewards, so sample streams do not depend on which pair
  was drawn.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable, Mapping

import numpy as np

from .errors import DimensionError, DomainError, IterationLimitError


@dataclass(frozen=True)
class RewardDistribution:
    """Closed-form reward law for one state-action pair.

    kind is either ``"two-point"`` (two values, complementary probabilities)
    or ``"deterministic"`` (a single value).
    """

    kind: str
    values: tuple[float, ...]
    probabilities: tuple[float, ...]

    def __post_init__(self):
        if self.kind not in ("two-point", "deterministic"):
            raise DomainError(f"unknown reward kind {self.kind!r}")
        n_expected = 2 if self.kind == "two-point" else 1
        if len(self.values) != n_expected or len(self.probabilities) != n_expected:
            raise DomainError(
                f"{self.kind} reward needs exactly {n_expected} value(s)"
            )
        if any(p < 0.0 for p in self.probabilities):
            raise DomainError("probabilities must be nonnegative")
        if abs(sum(self.probabilities) - 1.0) > 1e-12:
            raise DomainError("probabilities must sum to 1 within 1e-12")

    @classmethod
    def two_point(cls, first: float, second: float, p_first: float = 0.5) -> "RewardDistribution":
        return cls("two-point", (float(first), float(second)), (float(p_first), 1.0 - float(p_first)))

    @classmethod
    def deterministic(cls, value: float) -> "RewardDistribution":
        return cls("deterministic", (float(value),), (1.0,))

    def mean(self) -> float:
        return float(sum(p * v for p, v in zip(self.probabilities, self.values)))

    def variance(self) -> float:
        m = self.mean()
        return float(sum(p * (v - m) ** 2 for p, v in zip(self.probabilities, self.values)))

    def sample(self, rng: np.random.Generator) -> float:
        # One uniform per draw, unconditionally; u < p selects the first value.
        u = rng.random()
        if self.kind == "deterministic":
            return self.values[0]
        return self.values[0] if u < self.probabilities[0] else self.values[1]


@dataclass(frozen=True)
class SampledTarget:
    """One draw of the single-sample Bellman target r + gamma * max_a' Q-(s', a')."""

    reward: float
    next_state: int
    target_value: float


class TabularMdp:
    """Finite MDP with deterministic transitions and per-pair reward laws.

    Immutable after construction. Terminal states have no outgoing
    transitions; learning and norms run over the active (non-terminal)
    state-action pairs only. ``terminal_rewards`` gives the reward law a
    terminal state itself emits (used only to pin terminal rows of exact
    Bellman images); it defaults to deterministic 0.
    """

    def __init__(
        self,
        num_states: int,
        num_actions: int,
        transitions: Mapping[tuple[int, int], int],
        rewards: Mapping[tuple[int, int], RewardDistribution],
        terminal: Iterable[int],
        gamma: float,
        terminal_rewards: Mapping[int, RewardDistribution] | None = None,
        start_state: int = 0,
    ):
        if num_states < 1 or num_actions < 1:
            raise DomainError("num_states and num_actions must be positive")
        if not 0.0 <= gamma < 1.0:
            raise DomainError(f"gamma must lie in [0, 1), got {gamma}")
        self.num_states = int(num_states)
        self.num_actions = int(num_actions)
        self.gamma = float(gamma)
        self.terminal = frozenset(int(s) for s in terminal)
        for s in self.terminal:
            if not 0 <= s < num_states:
                raise DomainError(f"terminal state {s} out of range")
        if not 0 <= start_state < num_states:
            raise DomainError(f"start state {start_state} out of range")
        self.start_state = int(start_state)

        pairs: list[tuple[int, int]] = []
        for s in range(num_states):
            if s in self.terminal:
                continue
            for a in range(num_actions):
                if (s, a) not in transitions:
                    raise DomainError(f"missing transition for active pair {(s, a)}")
                if (s, a) not in rewards:
                    raise DomainError(f"missing reward for active pair {(s, a)}")
                ns = int(transitions[(s, a)])
                if not 0 <= ns < num_states:
                    raise DomainError(f"transition target {ns} out of range for {(s, a)}")
                pairs.append((s, a))

        self._rewards = {pair: rewards[pair] for pair in pairs}
        self._transitions = {pair: int(transitions[pair]) for pair in pairs}
        self._pair_index = {pair: i for i, pair in enumerate(pairs)}

        n = len(pairs)
        self.pair_state = np.fromiter((s for s, _ in pairs), dtype=np.int64, count=n)
        self.pair_action = np.fromiter((a for _, a in pairs), dtype=np.int64, count=n)
        self.pair_next_state = np.fromiter(
            (self._transitions[p] for p in pairs), dtype=np.int64, count=n
        )
        dists = [self._rewards[p] for p in pairs]
        self.pair_p_first = np.array(
            [1.0 if d.kind == "deterministic" else d.probabilities[0] for d in dists]
        )
        self.pair_value_first = np.array([d.values[0] for d in dists])
        self.pair_value_second = np.array(
            [d.values[0] if d.kind == "deterministic" else d.values[1] for d in dists]
        )
        self.pair_reward_mean = np.array([d.mean() for d in dists])
        self.pair_reward_var = np.array([d.variance() for d in dists])

        self.terminal_mask = np.zeros(num_states, dtype=bool)
        self.terminal_mask[list(self.terminal)] = True
        self.terminal_mean = np.zeros(num_states)
        for s in self.terminal:
            if terminal_rewards is not None and s in terminal_rewards:
                self.terminal_mean[s] = terminal_rewards[s].mean()

    @property
    def num_active_pairs(self) -> int:
        return len(self._pair_index)

    @property
    def active_pairs(self) -> list[tuple[int, int]]:
        return list(self._pair_index)

    def is_terminal(self, s: int) -> bool:
        self._check_state(s)
        return s in self.terminal

    def pair_id(self, s: int, a: int) -> int:
        """Index of (s, a) in the flat active-pair arrays; terminal or
        out-of-range pairs are a domain error."""
        try:
            return self._pair_index[(s, a)]
        except KeyError:
            self._check_state(s)
            if not 0 <= a < self.num_actions:
                raise DomainError(f"action {a} out of range") from None
            raise DomainError(f"state {s} is terminal; pair ({s}, {a}) inactive") from None

    def transition(self, s: int, a: int) -> int:
        return int(self.pair_next_state[self.pair_id(s, a)])

    def reward(self, s: int, a: int) -> RewardDistribution:
        self.pair_id(s, a)
        return self._rewards[(s, a)]

    def _check_state(self, s: int) -> None:
        if not 0 <= s < self.num_states:
            raise DomainError(f"state {s} out of range")


def new_q_table(mdp: TabularMdp, fill: float = 0.0) -> np.ndarray:
    """Fresh dense Q-table matching the MDP's shape."""
    return np.full((mdp.num_states, mdp.num_actions), float(fill))


def _check_table(q: np.ndarray, mdp: TabularMdp) -> None:
    if q.shape != (mdp.num_states, mdp.num_actions):
        raise DimensionError(
            f"Q-table shape {q.shape} does not match "
            f"({mdp.num_states}, {mdp.num_actions})"
        )
    if not np.all(np.isfinite(q[mdp.pair_state, mdp.pair_action])):
        raise DomainError("Q-table has non-finite entries on active pairs")


def greedy_state_values(q: np.ndarray, mdp: TabularMdp) -> np.ndarray:
    """V(s) = max_a Q(s, a) for non-terminal s, 0 for terminal s."""
    return np.where(mdp.terminal_mask, 0.0, q.max(axis=1))


def exact_bellman_apply(q: np.ndarray, mdp: TabularMdp) -> np.ndarray:
    """One exact Bellman optimality update using reward means and the
    deterministic transitions. Terminal rows are set to the terminal
    state's mean reward (zero continuation)."""
    _check_table(q, mdp)
    v = greedy_state_values(q, mdp)
    out = np.repeat(mdp.terminal_mean[:, None], mdp.num_actions, axis=1)
    out[mdp.pair_state, mdp.pair_action] = (
        mdp.pair_reward_mean + mdp.gamma * v[mdp.pair_next_state]
    )
    return out


def sup_distance(q1: np.ndarray, q2: np.ndarray, mdp: TabularMdp) -> float:
    """Supremum distance over active state-action pairs."""
    _check_table(q1, mdp)
    _check_table(q2, mdp)
    d = q1[mdp.pair_state, mdp.pair_action] - q2[mdp.pair_state, mdp.pair_action]
    return float(np.max(np.abs(d))) if d.size else 0.0


def value_iteration_oracle(
    mdp: TabularMdp, tol: float = 1e-10, max_iter: int = 10**6
) -> np.ndarray:
    """Deterministic fixed-point solve of the Bellman optimality operator.

    Returns a table whose Bellman residual (sup over active pairs) is at
    most ``tol``.
    """
    if tol <= 0.0:
        raise DomainError("tol must be positive")
    q = new_q_table(mdp)
    for _ in range(max_iter):
        nxt = exact_bellman_apply(q, mdp)
        if sup_distance(nxt, q, mdp) <= tol:
            return nxt
        q = nxt
    raise IterationLimitError(
        f"value iteration did not reach tol={tol} within {max_iter} sweeps"
    )


def sample_transition(
    mdp: TabularMdp, s: int, a: int, rng: np.random.Generator
) -> tuple[float, int]:
    """Generative draw for an active pair: reward sample and successor state."""
    p = mdp.pair_id(s, a)
    u = rng.random()
    if u < mdp.pair_p_first[p]:
        r = float(mdp.pair_value_first[p])
    else:
        r = float(mdp.pair_value_second[p])
    return r, int(mdp.pair_next_state[p])


def sample_bellman_target(
    q_frozen: np.ndarray, mdp: TabularMdp, s: int, a: int, rng: np.random.Generator
) -> SampledTarget:
    """One unbiased single-sample estimate of (T*Q)(s, a) under a frozen table."""
    _check_table(q_frozen, mdp)
    r, ns = sample_transition(mdp, s, a, rng)
    cont = 0.0 if mdp.terminal_mask[ns] else float(np.max(q_frozen[ns]))
    return SampledTarget(reward=r, next_state=ns, target_value=r + mdp.gamma * cont)


def evaluate_greedy(
    q: np.ndarray,
    mdp: TabularMdp,
    start: int,
    horizon: int,
    stochastic: bool = False,
    rng: np.random.Generator | None = None,
) -> float:
    """Deterministic greedy rollout score.

    Follows argmax_a Q(s, a) (ties to the lowest action index) for at most
    ``horizon`` steps, stopping early in a terminal state. The score is the
    undiscounted sum of reward means along the path; with
    ``stochastic=True`` rewards are sampled instead (requires ``rng``).
    """
    _check_table(q, mdp)
    if horizon < 0:
        raise DomainError("horizon must be nonnegative")
    mdp._check_state(start)
    if stochastic and rng is None:
        raise DomainError("stochastic evaluation needs an rng")
    score = 0.0
    s = int(start)
    for _ in range(horizon):
        if mdp.terminal_mask[s]:
            break
        a = int(np.argmax(q[s]))
        p = mdp.pair_id(s, a)
        if stochastic:
            r, ns = sample_transition(mdp, s, a, rng)
        else:
            r, ns = float(mdp.pair_reward_mean[p]), int(mdp.pair_next_state[p])
        score += r
        s = ns
    return score
