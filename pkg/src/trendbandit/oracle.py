"""Dynamic oracle schedule, expected regret and the closed-form regret bound."""
from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field
from typing import Sequence

from .trend import TrendFunction, cumulative_trend, trend_eval


@dataclass(frozen=True)
class OracleSchedule:
    counts: tuple[int, ...]
    gain: float
    horizon: int
    # gain after each step 0..horizon, so prefixes need no recomputation
    gain_path: tuple[float, ...] = field(default=(), repr=False, compare=False)

    def gain_at(self, t: int) -> float:
        if not 0 <= t <= self.horizon:
            raise ValueError(f"t={t} outside [0, {self.horizon}]")
        return self.gain_path[t]

    def to_dict(self) -> dict:
        return {"horizon": self.horizon, "counts": list(self.counts), "gain": self.gain}


@dataclass(frozen=True)
class RegretReport:
    empirical_gain: float
    oracle_gain: float
    regret: float
    per_checkpoint: tuple[tuple[int, float], ...] = ()

    def to_dict(self) -> dict:
        return {
            "empirical_gain": self.empirical_gain,
            "oracle_gain": self.oracle_gain,
            "regret": self.regret,
            "per_checkpoint": [list(p) for p in self.per_checkpoint],
        }


@dataclass(frozen=True)
class BoundReport:
    gaps: tuple[float, ...]
    bound: float | None  # None means undefined
    contributing_arms: frozenset[int]

    @property
    def defined(self) -> bool:
        return self.bound is not None

    def to_dict(self) -> dict:
        return {
            "gaps": list(self.gaps),
            "bound": "undefined" if self.bound is None else self.bound,
            "contributing_arms": sorted(self.contributing_arms),
        }


def _trends(trend, k):
    if isinstance(trend, TrendFunction):
        return [trend] * k
    if len(trend) != k:
        raise ValueError("need one trend per arm")
    return list(trend)


def expected_gain(counts: Sequence[int], means: Sequence[float], trend) -> float:
    """``sum_i mean_i * F_i(counts_i)``."""
    trends = _trends(trend, len(means))
    return sum(m * cumulative_trend(d, n) for m, d, n in zip(means, trends, counts))


def greedy_oracle(means: Sequence[float], trend, T: int) -> OracleSchedule:
    """Play ``argmax_i mean_i * D(n_i + 1)`` for ``T`` steps, ties to the lowest index.

    ``trend`` is one shared trend or a sequence with one trend per arm.
    """
    k = len(means)
    if k < 1:
        raise ValueError("oracle needs at least one arm")
    if T < 0:
        raise ValueError("horizon must be non-negative")
    trends = _trends(trend, k)
    counts = [0] * k
    value = [m * trend_eval(d, 1) for m, d in zip(means, trends)]
    per_arm_gain = [0.0] * k
    path = [0.0]
    for _ in range(T):
        best = 0
        best_value = value[0]
        for i in range(1, k):
            if value[i] > best_value:
                best, best_value = i, value[i]
        n = counts[best] + 1
        counts[best] = n
        per_arm_gain[best] = means[best] * cumulative_trend(trends[best], n)
        value[best] = means[best] * trend_eval(trends[best], n + 1)
        path.append(sum(per_arm_gain))
    return OracleSchedule(tuple(counts), expected_gain(counts, means, trends), T, tuple(path))


def exhaustive_oracle(means: Sequence[float], trend, T: int) -> OracleSchedule:
    """Best allocation over every composition of ``T`` into ``K`` counts.

    Exponential in K; meant as a cross-check for tiny instances where the
    greedy schedule may not be optimal (non-monotone trends).
    """
    k = len(means)
    trends = _trends(trend, k)
    best_counts, best_gain = None, -math.inf
    for cut in itertools.combinations(range(T + k - 1), k - 1):
        bounds = (-1,) + cut + (T + k - 1,)
        counts = tuple(bounds[j + 1] - bounds[j] - 1 for j in range(k))
        g = expected_gain(counts, means, trends)
        if g > best_gain:
            best_counts, best_gain = counts, g
    return OracleSchedule(best_counts, best_gain, T, ())


def expected_regret(run_counts: Sequence[int], means: Sequence[float], trend,
                    oracle: OracleSchedule) -> RegretReport:
    """Oracle expected gain minus the run's expected gain (true means, not draws)."""
    if len(run_counts) != len(means):
        raise ValueError(f"expected {len(means)} counts, got {len(run_counts)}")
    if sum(run_counts) != oracle.horizon:
        raise ValueError(f"run counts sum to {sum(run_counts)} but oracle horizon is {oracle.horizon}")
    gain = expected_gain(run_counts, means, trend)
    return RegretReport(gain, oracle.gain, oracle.gain - gain, ((oracle.horizon, oracle.gain - gain),))


def theorem1_bound(means: Sequence[float], trend: TrendFunction, T: int,
                   oracle: OracleSchedule, run_counts: Sequence[int],
                   condition: str = "overplayed") -> BoundReport:
    """``max_i mu_i * D_max * sum 8 ln T / gap_i^2 + k pi^2 / 3`` over contributing arms.

    ``gap_i = (D_min / D_max) * max_j mu_j - mu_i`` and ``k`` is the number of
    contributing arms. By default an arm contributes when the run played it
    more often than the oracle (``n_i > n*_i``); ``condition="underplayed"``
    selects ``n*_i > n_i`` instead. The bound is undefined (``None``) when a
    contributing gap is not positive.
    """
    if T < 2:
        raise ValueError("bound needs T >= 2")
    if len(run_counts) != len(means) or len(oracle.counts) != len(means):
        raise ValueError("counts and means must have the same length")
    if condition == "overplayed":
        contributing = frozenset(i for i, (a, b) in enumerate(zip(oracle.counts, run_counts)) if b > a)
    elif condition == "underplayed":
        contributing = frozenset(i for i, (a, b) in enumerate(zip(oracle.counts, run_counts)) if a > b)
    else:
        raise ValueError(f"condition must be 'overplayed' or 'underplayed', got {condition!r}")
    d_min, d_max = trend.D_min, trend.D_max
    ratio = d_min / d_max if d_max > 0 else 0.0
    top = max(means)
    gaps = tuple(ratio * top - m for m in means)
    if any(gaps[i] <= 0 for i in contributing):
        return BoundReport(gaps, None, contributing)
    total = sum(8.0 * math.log(T) / gaps[i] ** 2 for i in sorted(contributing))
    bound = top * d_max * total + len(contributing) * math.pi ** 2 / 3.0
    return BoundReport(gaps, bound, contributing)
