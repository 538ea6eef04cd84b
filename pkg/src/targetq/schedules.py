"""Target-update schedules, step-size schedules, rate constants, and the
closed-form designer for sample-optimal update periods.

Terminology: the *update period* K_n of cycle n is the number of inner SGD
steps performed against the frozen target before it is overwritten. "Fixed"
schedules keep K constant; "geometric" schedules grow it by gamma^(-2/3)
per cycle; "designed" schedules come out of the designer below, which picks
the cycle count and periods so a prescribed error bound is met at minimal
predicted sample cost.
"""
from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from .errors import (
    DegenerateDesignWarning,
    DomainError,
    ScheduleOverflowError,
    ValidityRegimeWarning,
)
from .mdp import TabularMdp

# Largest float with exact integer neighbors; schedule entries past this
# cannot be ceiled exactly.
_EXACT_INT_LIMIT = float(2**53)


# ---------------------------------------------------------------------------
# Rate constants


@dataclass(frozen=True)
class RateConstants:
    """Constants of the inner-loop mean-squared-error bound
    (c1 * dist^2 + c2) / (k + s) and the effective outer contraction mu.

    xi is the per-step lower bound on the probability of sampling any
    active pair; sigma_sq bounds all reward variances; q_star_sup is the
    sup norm of the fixed point; n_pairs the active pair count.
    """

    xi: float
    sigma_sq: float
    q_star_sup: float
    gamma: float
    n_pairs: int
    c1: float = field(default=0.0)
    c2: float = field(default=0.0)
    mu: float = field(default=0.0)

    def __post_init__(self):
        if not 0.0 < self.xi <= 1.0:
            raise DomainError(f"xi must lie in (0, 1], got {self.xi}")
        if self.sigma_sq < 0.0:
            raise DomainError("sigma_sq must be nonnegative")
        if not 0.0 <= self.gamma < 1.0:
            raise DomainError("gamma must lie in [0, 1)")
        if self.n_pairs < 1:
            raise DomainError("n_pairs must be positive")
        c1, c2, mu = _rate_formulas(
            self.xi, self.sigma_sq, self.q_star_sup, self.gamma, self.n_pairs
        )
        if self.c1 == 0.0 and self.c2 == 0.0 and self.mu == 0.0:
            object.__setattr__(self, "c1", c1)
            object.__setattr__(self, "c2", c2)
            object.__setattr__(self, "mu", mu)
            return
        for name, given, computed in (("c1", self.c1, c1), ("c2", self.c2, c2), ("mu", self.mu, mu)):
            if not math.isclose(given, computed, rel_tol=1e-9, abs_tol=1e-12):
                raise DomainError(
                    f"{name}={given} inconsistent with its defining formula ({computed})"
                )

    @property
    def k_min(self) -> float:
        """Smallest period for which one cycle still contracts by mu."""
        return self.c1 / (self.mu - self.gamma) ** 2


def _rate_formulas(xi, sigma_sq, q_star_sup, gamma, n_pairs):
    c1 = (2.0 / xi + 1.0) * n_pairs * (1.0 + gamma) ** 2 + (
        16.0 / xi**2 + 8.0 / xi
    ) * gamma**2
    c2 = (8.0 / xi**2 + 4.0 / xi) * (sigma_sq + 2.0 * gamma**2 * q_star_sup**2)
    mu = (1.0 + gamma) / 2.0
    return c1, c2, mu


def compute_constants(mdp: TabularMdp, xi: float, q_star: np.ndarray) -> RateConstants:
    """Rate constants for an environment: sigma_sq is the worst reward
    variance over active pairs, q_star_sup the sup norm of the supplied
    fixed point over active pairs."""
    if xi <= 0.0:
        raise DomainError("xi must be positive")
    sup = float(np.max(np.abs(q_star[mdp.pair_state, mdp.pair_action])))
    if not math.isfinite(sup):
        raise DomainError("q_star has non-finite entries")
    return RateConstants(
        xi=float(xi),
        sigma_sq=float(np.max(mdp.pair_reward_var)),
        q_star_sup=sup,
        gamma=mdp.gamma,
        n_pairs=mdp.num_active_pairs,
    )


# ---------------------------------------------------------------------------
# Step-size schedules


@dataclass(frozen=True)
class TheoryInverseStepSize:
    """alpha(k) = 2 / (xi * (k + s)) with s = 2/xi, i.e. s / (k + s).

    Restarts from alpha(0) = 1 at every cycle. The ``s/(k+s)`` form keeps
    alpha(0) exactly 1.0 in floating point.
    """

    xi: float

    def __post_init__(self):
        if not 0.0 < self.xi <= 1.0:
            raise DomainError("xi must lie in (0, 1]")

    @classmethod
    def from_pair_count(cls, n_pairs: int) -> "TheoryInverseStepSize":
        """Step sizes for uniform exploration over ``n_pairs`` pairs."""
        return cls(xi=1.0 / n_pairs)

    @property
    def s(self) -> float:
        return 2.0 / self.xi

    def alpha(self, k: int) -> float:
        s = self.s
        return s / (k + s)

    def alphas(self, count: int, start: int = 0) -> np.ndarray:
        s = self.s
        return s / (np.arange(start, start + count) + s)


@dataclass(frozen=True)
class ConstantStepSize:
    value: float

    def __post_init__(self):
        if not 0.0 < self.value <= 1.0:
            raise DomainError("step size must lie in (0, 1]")

    def alpha(self, k: int) -> float:
        return self.value

    def alphas(self, count: int, start: int = 0) -> np.ndarray:
        return np.full(count, self.value)


@dataclass(frozen=True)
class CustomStepSize:
    fn: Callable[[int], float]

    def alpha(self, k: int) -> float:
        return float(self.fn(k))

    def alphas(self, count: int, start: int = 0) -> np.ndarray:
        return np.array([float(self.fn(k)) for k in range(start, start + count)])


# ---------------------------------------------------------------------------
# Target-update schedules


def _ceil_guarded(x: float) -> int:
    """Ceiling with a snap to the nearest integer for float dust.

    Values within 1e-12 relative of an integer (window capped at 1/4) are
    treated as that integer, so exact products like 64 * 0.512**(-2/3) and
    ratios degenerating to 1 do not ceil one too high.
    """
    r = round(x)
    window = min(0.25, max(32.0 * np.spacing(abs(x)), 1e-12 * max(1.0, abs(x))))
    if abs(x - r) <= window:
        return int(r)
    return math.ceil(x)


def geometric_period(k0: int, gamma: float, n: int) -> int:
    """Update period ceil(k0 * gamma^(-2n/3)) of cycle n."""
    if k0 < 1:
        raise DomainError("k0 must be at least 1")
    if not 0.0 < gamma < 1.0:
        raise DomainError("gamma must lie in (0, 1)")
    if n < 0:
        raise DomainError("cycle index must be nonnegative")
    x = k0 * gamma ** (-(2.0 * n) / 3.0)
    if not math.isfinite(x) or x >= _EXACT_INT_LIMIT:
        raise ScheduleOverflowError(
            f"period k0={k0}, gamma={gamma}, n={n} exceeds the exact-integer range"
        )
    return _ceil_guarded(x)


@dataclass(frozen=True)
class FixedPeriod:
    """Constant update period."""

    k: int

    def __post_init__(self):
        if self.k < 1:
            raise DomainError("period must be at least 1")

    n_cycles: int | None = field(default=None, init=False)

    def period(self, n: int) -> int:
        return self.k


@dataclass(frozen=True)
class GeometricPeriod:
    """Update period growing as ceil(k0 * gamma^(-2n/3))."""

    k0: int
    gamma: float

    def __post_init__(self):
        geometric_period(self.k0, self.gamma, 0)

    n_cycles: int | None = field(default=None, init=False)

    def period(self, n: int) -> int:
        return geometric_period(self.k0, self.gamma, n)


@dataclass(frozen=True)
class ExplicitPeriod:
    """A finite list of update periods (custom or designer output)."""

    ks: tuple[int, ...]
    label: str = "custom"

    def __post_init__(self):
        if any(k < 1 for k in self.ks):
            raise DomainError("all periods must be at least 1")

    @property
    def n_cycles(self) -> int:
        return len(self.ks)

    def period(self, n: int) -> int:
        return self.ks[n]


@dataclass(frozen=True)
class AccuracyTriggered:
    """Adaptive inner-loop length: stop between k_min and k_max once the
    mean absolute TD-error statistic falls below the cycle's threshold.

    ``accuracy`` maps the 1-based cycle index to its threshold; the default
    is n^-2 (summable, so outer contraction dominates).
    """

    k_min: int
    k_max: int
    accuracy: Callable[[int], float] | None = None

    def __post_init__(self):
        if not 1 <= self.k_min <= self.k_max:
            raise DomainError("need 1 <= k_min <= k_max")

    n_cycles: int | None = field(default=None, init=False)

    def threshold(self, n: int) -> float:
        """Threshold for 1-based cycle index n."""
        if self.accuracy is None:
            return 1.0 / (n * n)
        eps = float(self.accuracy(n))
        if eps < 0.0:
            raise DomainError("accuracy thresholds must be nonnegative")
        return eps


TufSchedule = FixedPeriod | GeometricPeriod | ExplicitPeriod | AccuracyTriggered


def schedule_cost(periods: Sequence[int]) -> int:
    """Total sample cost of a finite schedule (exact integer sum)."""
    total = 0
    for k in periods:
        if int(k) != k:
            raise DomainError("periods must be integers")
        total += int(k)
    return total


@dataclass(frozen=True)
class UnrollResult:
    """Deterministic evaluation of the per-cycle error recursion
    e_{n+1} = mu * e_n + sqrt(c2 / K_n)."""

    bound: float
    per_cycle: tuple[float, ...]


def unroll_error_bound(
    e0: float, periods: Sequence[int], constants: RateConstants
) -> UnrollResult:
    """Unroll the error recursion from e0 across the given periods."""
    if e0 < 0.0:
        raise DomainError("e0 must be nonnegative")
    seq = [float(e0)]
    e = float(e0)
    for k in periods:
        if k < 1:
            raise DomainError("all periods must be at least 1")
        e = constants.mu * e + math.sqrt(constants.c2 / k)
        seq.append(e)
    return UnrollResult(bound=seq[-1], per_cycle=tuple(seq))


# ---------------------------------------------------------------------------
# Designer


@dataclass(frozen=True)
class DesignOutput:
    """A designed schedule plus its predicted cost and error bound.

    ``raw_periods`` are the real-valued periods from the closed form,
    before clamping to k_min and ceiling; ``periods`` are the integers a
    run actually uses. ``predicted_error_bound`` is the unrolled recursion
    on the integer periods and never exceeds the target accuracy.
    """

    family: str
    target_accuracy: float
    initial_error: float
    n_cycles: int
    periods: tuple[int, ...]
    raw_periods: tuple[float, ...]
    predicted_cost: int
    predicted_error_bound: float
    mu: float
    k_min: float
    within_validity: bool
    degenerate: bool

    def schedule(self) -> ExplicitPeriod:
        return ExplicitPeriod(self.periods, label=f"designed-{self.family}")


def _design_cycle_count(eps: float, e0: float, mu: float) -> int:
    x = math.log(eps / (2.0 * e0)) / math.log(mu)
    r = round(x)
    if abs(x - r) <= 1e-9 * max(1.0, abs(x)):
        return max(int(r), 0)
    return max(math.ceil(x), 0)


def _finalize_design(family, eps, e0, constants, raw, within):
    # plain ceiling: designed periods never land on intended integers, and
    # ceiling keeps every integer period >= its real-valued design value
    k_min = constants.k_min
    periods = tuple(max(math.ceil(max(k, k_min)), 1) for k in raw)
    bound = unroll_error_bound(e0, periods, constants).bound if periods else e0
    return DesignOutput(
        family=family,
        target_accuracy=eps,
        initial_error=e0,
        n_cycles=len(periods),
        periods=periods,
        raw_periods=tuple(raw),
        predicted_cost=schedule_cost(periods),
        predicted_error_bound=bound,
        mu=constants.mu,
        k_min=k_min,
        within_validity=within,
        degenerate=not periods,
    )


def _check_design_inputs(eps: float, e0: float) -> bool:
    """Returns True when the design degenerates to zero cycles."""
    if eps <= 0.0:
        raise DomainError("target accuracy must be positive")
    if e0 <= 0.0:
        raise DomainError("initial error must be positive")
    if eps >= 2.0 * e0:
        warnings.warn(
            f"target accuracy {eps} already met by the initial error bound "
            f"{e0}; returning an empty design",
            DegenerateDesignWarning,
            stacklevel=3,
        )
        return True
    return False


def design_fixed_period(eps: float, e0: float, constants: RateConstants) -> DesignOutput:
    """Smallest-cost constant-period design meeting the accuracy target.

    N = ceil(log(eps / 2 e0) / log(mu)) cycles with uniform period
    K = (4 c2 / eps^2) * ((1 - mu^N) / (1 - mu))^2, clamped to k_min and
    ceiled. Outside the guaranteed regime eps <= (1 - gamma) sqrt(c2/c1)
    a warning is emitted (the clamp keeps the contraction argument valid).
    """
    if _check_design_inputs(eps, e0):
        return _finalize_design("fixed", eps, e0, constants, (), True)
    mu, c1, c2 = constants.mu, constants.c1, constants.c2
    within = eps <= (1.0 - constants.gamma) * math.sqrt(c2 / c1)
    if not within:
        warnings.warn(
            f"eps={eps} is outside the fixed-design validity regime "
            f"(<= {(1.0 - constants.gamma) * math.sqrt(c2 / c1):.6g}); "
            "periods are clamped to k_min",
            ValidityRegimeWarning,
            stacklevel=2,
        )
    n = _design_cycle_count(eps, e0, mu)
    k = (4.0 * c2 / eps**2) * ((1.0 - mu**n) / (1.0 - mu)) ** 2
    return _finalize_design("fixed", eps, e0, constants, (k,) * n, within)


def design_growing_period(eps: float, e0: float, constants: RateConstants) -> DesignOutput:
    """Smallest-cost geometric-period design meeting the accuracy target.

    Same cycle count as the fixed design; periods
    K_j = C * mu^((2/3)(N-1-j)) with
    C = (4 c2 / eps^2) * ((1 - mu^(2N/3)) / (1 - mu^(2/3)))^2, so
    consecutive periods grow by mu^(-2/3). The sufficient regime for the
    smallest period to clear k_min is eps < 2 e0 (nu / (2 e0 + nu))^(3/2)
    with nu = (1 - gamma) / (1 - mu^(2/3)).
    """
    if _check_design_inputs(eps, e0):
        return _finalize_design("growing", eps, e0, constants, (), True)
    mu, c2 = constants.mu, constants.c2
    rho = mu ** (2.0 / 3.0)
    nu = (1.0 - constants.gamma) / (1.0 - rho)
    limit = 2.0 * e0 * (nu / (2.0 * e0 + nu)) ** 1.5
    within = eps < limit
    if not within:
        warnings.warn(
            f"eps={eps} is outside the growing-design validity regime "
            f"(< {limit:.6g}); periods are clamped to k_min",
            ValidityRegimeWarning,
            stacklevel=2,
        )
    n = _design_cycle_count(eps, e0, mu)
    c_eps = (4.0 * c2 / eps**2) * ((1.0 - rho**n) / (1.0 - rho)) ** 2
    raw = tuple(c_eps * rho ** float(n - 1 - j) for j in range(n))
    return _finalize_design("growing", eps, e0, constants, raw, within)


# ---------------------------------------------------------------------------
# Summability diagnostic


@dataclass(frozen=True)
class SummabilityDiagnostic:
    """Partial sum of 1/sqrt(K_n) and an advisory verdict on whether the
    full series converges (a sufficient condition for almost-sure
    convergence of the outer loop)."""

    partial_sum: float
    verdict: str
    tail_fraction: float


def summability_check(schedule: TufSchedule, horizon: int) -> SummabilityDiagnostic:
    """Advisory check of sum_n 1/sqrt(K_n) over the first ``horizon`` cycles.

    Fixed schedules are flagged divergent (linear partial sums), geometric
    ones convergent (geometric tail). Finite explicit lists get a heuristic
    verdict from the fraction of mass in the second half of the horizon;
    adaptive schedules are indeterminate (periods are data-dependent) and
    are summed at their k_max floor.
    """
    if horizon < 1:
        raise DomainError("horizon must be at least 1")
    if isinstance(schedule, AccuracyTriggered):
        terms = [1.0 / math.sqrt(schedule.k_max)] * horizon
        return SummabilityDiagnostic(
            partial_sum=float(sum(terms)), verdict="indeterminate", tail_fraction=0.5
        )
    if isinstance(schedule, ExplicitPeriod):
        horizon = min(horizon, schedule.n_cycles)
    if isinstance(schedule, GeometricPeriod):
        # real-valued periods, so long horizons cannot overflow; this upper
        # bounds the true terms (ceiling only shrinks them)
        g13 = schedule.gamma ** (1.0 / 3.0)
        terms = [g13**n / math.sqrt(schedule.k0) for n in range(horizon)]
    else:
        terms = [1.0 / math.sqrt(schedule.period(n)) for n in range(horizon)]
    total = float(sum(terms))
    tail = float(sum(terms[horizon // 2 :])) / total if total > 0.0 else 0.0
    if isinstance(schedule, FixedPeriod):
        verdict = "divergent"
    elif isinstance(schedule, GeometricPeriod):
        verdict = "convergent"
    else:
        verdict = "convergent" if tail < 0.2 else "divergent"
    return SummabilityDiagnostic(partial_sum=total, verdict=verdict, tail_fraction=tail)
