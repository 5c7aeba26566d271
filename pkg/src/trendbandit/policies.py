"""A-UCB and the comparison policies behind one select/update interface.

Index policies are deterministic given their statistics: ties go to the
lowest arm index, and every arm is played once (in order) before any index
is compared. Only EXP3 consumes the random stream passed to ``select``.
"""
from __future__ import annotations

import math
from collections import deque
from dataclasses import dataclass, field

import numpy as np

from .trend import TrendFunction, trend_eval

POLICY_NAMES = ("aucb", "ucb1", "exp3", "sw-ucb", "d-ucb")


class Policy:
    """Base class; subclasses fill in ``select`` and ``update``."""

    name = "policy"
    # trend-aware policies learn from the raw Bernoulli outcome, the others
    # from the observed modulated payoff
    uses_trend = False

    def __init__(self, n_arms: int):
        if n_arms < 1:
            raise ValueError("a policy needs at least one arm")
        self.n_arms = int(n_arms)

    def select(self, t: int, rng: np.random.Generator | None = None) -> int:
        raise NotImplementedError

    def update(self, arm: int, reward: float) -> None:
        raise NotImplementedError

    def params(self) -> dict:
        return {}

    def _check(self, arm: int, reward: float) -> None:
        if not 0 <= arm < self.n_arms:
            raise IndexError(f"arm index {arm} out of range for {self.n_arms} arms")
        if not math.isfinite(reward):
            raise ValueError(f"reward must be finite, got {reward!r}")


class UCB1(Policy):
    name = "ucb1"

    def __init__(self, n_arms: int, reward_scale: float = 1.0):
        super().__init__(n_arms)
        if reward_scale <= 0:
            raise ValueError("reward_scale must be positive")
        self.reward_scale = float(reward_scale)
        self.counts = [0] * self.n_arms
        self.empirical_means = [0.0] * self.n_arms

    def select(self, t, rng=None):
        counts = self.counts
        for i, c in enumerate(counts):
            if c == 0:
                return i
        two_log_t = 2.0 * math.log(t)
        best, best_value = 0, -math.inf
        for i, (m, c) in enumerate(zip(self.empirical_means, counts)):
            value = m + math.sqrt(two_log_t / c)
            if value > best_value:
                best, best_value = i, value
        return best

    def update(self, arm, reward):
        self._check(arm, reward)
        n = self.counts[arm] + 1
        self.counts[arm] = n
        m = self.empirical_means[arm]
        self.empirical_means[arm] = m + (reward / self.reward_scale - m) / n

    def params(self):
        return {"reward_scale": self.reward_scale}


class AUCB(UCB1):
    """UCB1 index multiplied by the known trend of each arm.

    With ``lookahead`` the trend is read at ``n_i + 1``, the count the arm
    reaches if it is pulled now; otherwise at the current count ``n_i``.
    ``update`` expects the raw (unmodulated) outcome.
    """

    name = "aucb"
    uses_trend = True

    def __init__(self, n_arms: int, trend: TrendFunction, lookahead: bool = True):
        super().__init__(n_arms)
        self.trend = trend
        self.lookahead = bool(lookahead)
        self._offset = 1 if self.lookahead else 0
        # cached trend factor per arm, refreshed on that arm's update
        self._factor = [trend_eval(trend, 1)] * self.n_arms

    def trend_factor(self, arm: int) -> float:
        return trend_eval(self.trend, max(1, self.counts[arm] + self._offset))

    def select(self, t, rng=None):
        counts = self.counts
        for i, c in enumerate(counts):
            if c == 0:
                return i
        two_log_t = 2.0 * math.log(t)
        best, best_value = 0, -math.inf
        for i, (m, c, d) in enumerate(zip(self.empirical_means, counts, self._factor)):
            value = (m + math.sqrt(two_log_t / c)) * d
            if value > best_value:
                best, best_value = i, value
        return best

    def update(self, arm, reward):
        super().update(arm, reward)
        self._factor[arm] = self.trend_factor(arm)

    def params(self):
        return {"lookahead": self.lookahead}


def aucb_index(state: AUCB, arm: int, t: int) -> float:
    """``(mean + sqrt(2 ln t / n)) * D(n + 1)`` for one arm (``D(n)`` without lookahead)."""
    n = state.counts[arm]
    if n < 1:
        raise ValueError(f"arm {arm} has not been initialised")
    if t < 1:
        raise ValueError("t must be >= 1")
    return (state.empirical_means[arm] + math.sqrt(2.0 * math.log(t) / n)) * state.trend_factor(arm)


class EXP3(Policy):
    """Exponential weights with uniform mixing ``gamma``; weights kept in log space."""

    name = "exp3"

    def __init__(self, n_arms: int, gamma: float = 0.1, reward_scale: float = 1.0):
        super().__init__(n_arms)
        if not 0.0 < gamma <= 1.0:
            raise ValueError(f"exp3 gamma must lie in (0, 1], got {gamma!r}")
        if reward_scale <= 0:
            raise ValueError("reward_scale must be positive")
        self.gamma = float(gamma)
        self.reward_scale = float(reward_scale)
        self.log_weights = [0.0] * self.n_arms
        self._probs = None

    @property
    def weights(self) -> np.ndarray:
        """Weights normalised so the largest is 1."""
        lw = np.asarray(self.log_weights)
        return np.exp(lw - lw.max())

    def probabilities(self) -> list[float]:
        top = max(self.log_weights)
        w = [math.exp(v - top) for v in self.log_weights]
        total = sum(w)
        k, g = self.n_arms, self.gamma
        return [(1.0 - g) * x / total + g / k for x in w]

    def select(self, t, rng=None):
        if rng is None:
            raise ValueError("exp3 needs a random stream to select an arm")
        probs = self.probabilities()
        self._probs = probs
        u = rng.random()
        acc = 0.0
        for i, p in enumerate(probs):
            acc += p
            if u < acc:
                return i
        # u landed in the rounding gap above the last partial sum
        return self.n_arms - 1

    def update(self, arm, reward):
        self._check(arm, reward)
        probs = self._probs if self._probs is not None else self.probabilities()
        x = reward / self.reward_scale / probs[arm]
        self.log_weights[arm] += self.gamma * x / self.n_arms
        self._probs = None

    def params(self):
        return {"gamma": self.gamma, "reward_scale": self.reward_scale}


class SWUCB(Policy):
    """Sliding-window UCB over the last ``window`` plays.

    Window sums are recomputed from the stored rewards of the arms touched by
    each push/evict, so they match a fresh left-to-right sum exactly.
    """

    name = "sw-ucb"

    def __init__(self, n_arms: int, window: int, xi: float = 2.0, reward_scale: float = 1.0):
        super().__init__(n_arms)
        if window < 1:
            raise ValueError(f"sw-ucb window must be >= 1, got {window!r}")
        if xi <= 0 or reward_scale <= 0:
            raise ValueError("xi and reward_scale must be positive")
        self.window = int(window)
        self.xi = float(xi)
        self.reward_scale = float(reward_scale)
        self.history: deque[tuple[int, float]] = deque()
        self._per_arm = [deque() for _ in range(self.n_arms)]
        self.sums = [0.0] * self.n_arms
        self.counts = [0] * self.n_arms

    def select(self, t, rng=None):
        counts = self.counts
        for i, c in enumerate(counts):
            if c == 0:
                return i
        bonus_num = self.xi * math.log(min(t, self.window))
        best, best_value = 0, -math.inf
        for i, (s, c) in enumerate(zip(self.sums, counts)):
            value = s / c + math.sqrt(bonus_num / c)
            if value > best_value:
                best, best_value = i, value
        return best

    def update(self, arm, reward):
        self._check(arm, reward)
        x = reward / self.reward_scale
        self.history.append((arm, x))
        self._per_arm[arm].append(x)
        touched = {arm}
        if len(self.history) > self.window:
            old, _ = self.history.popleft()
            self._per_arm[old].popleft()
            touched.add(old)
        for i in touched:
            self.sums[i] = sum(self._per_arm[i])
            self.counts[i] = len(self._per_arm[i])

    def params(self):
        return {"window": self.window, "xi": self.xi, "reward_scale": self.reward_scale}


class DUCB(Policy):
    """Discounted UCB: every statistic decays by ``discount`` per step."""

    name = "d-ucb"

    def __init__(self, n_arms: int, discount: float, xi: float = 2.0, reward_scale: float = 1.0):
        super().__init__(n_arms)
        if not 0.0 < discount < 1.0:
            raise ValueError(f"d-ucb discount must lie in (0, 1), got {discount!r}")
        if xi <= 0 or reward_scale <= 0:
            raise ValueError("xi and reward_scale must be positive")
        self.discount = float(discount)
        self.xi = float(xi)
        self.reward_scale = float(reward_scale)
        self.discounted_sums = [0.0] * self.n_arms
        self.discounted_counts = [0.0] * self.n_arms

    def select(self, t, rng=None):
        counts = self.discounted_counts
        for i, c in enumerate(counts):
            if c <= 0.0:
                return i
        bonus_num = self.xi * math.log(sum(counts))
        best, best_value = 0, -math.inf
        for i, (s, c) in enumerate(zip(self.discounted_sums, counts)):
            value = s / c + 2.0 * math.sqrt(bonus_num / c)
            if value > best_value:
                best, best_value = i, value
        return best

    def update(self, arm, reward):
        self._check(arm, reward)
        g = self.discount
        sums = [s * g for s in self.discounted_sums]
        counts = [c * g for c in self.discounted_counts]
        sums[arm] += reward / self.reward_scale
        counts[arm] += 1.0
        self.discounted_sums = sums
        self.discounted_counts = counts

    def params(self):
        return {"discount": self.discount, "xi": self.xi, "reward_scale": self.reward_scale}


@dataclass(frozen=True)
class PolicySpec:
    """A policy name plus explicit parameter overrides."""

    name: str
    params: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.name not in POLICY_NAMES:
            raise ValueError(f"unknown policy {self.name!r}; expected one of {', '.join(POLICY_NAMES)}")

    def __hash__(self):
        return hash((self.name, tuple(sorted(self.params.items()))))

    @classmethod
    def parse(cls, text: str) -> "PolicySpec":
        """Parse ``name`` or ``name:key=value,key=value`` (e.g. ``exp3:gamma=0.1``)."""
        name, _, rest = text.strip().partition(":")
        params = {}
        for item in filter(None, (p.strip() for p in rest.split(","))):
            key, eq, value = item.partition("=")
            if not eq:
                raise ValueError(f"malformed policy parameter {item!r} in {text!r}")
            params[key.strip()] = _parse_value(value.strip())
        return cls(name.strip(), params)

    def to_dict(self) -> dict:
        return {"name": self.name, "params": dict(sorted(self.params.items()))}


def _parse_value(text: str):
    low = text.lower()
    if low in ("true", "on", "yes"):
        return True
    if low in ("false", "off", "no"):
        return False
    try:
        return int(text)
    except ValueError:
        pass
    try:
        return float(text)
    except ValueError:
        raise ValueError(f"policy parameter value {text!r} is not a number or boolean") from None


def default_params(name: str, n_arms: int, horizon: int) -> dict:
    """Baseline parameters used when the config does not override them."""
    T = max(int(horizon), 2)
    if name == "exp3":
        return {"gamma": 0.1}
    if name == "sw-ucb":
        return {"window": max(1, round(4.0 * math.sqrt(T * math.log(T)) / n_arms)), "xi": 2.0}
    if name == "d-ucb":
        return {"discount": 1.0 - 1.0 / (4.0 * math.sqrt(T)), "xi": 2.0}
    return {}


_ALLOWED = {
    "aucb": {"lookahead"},
    "ucb1": set(),
    "exp3": {"gamma"},
    "sw-ucb": {"window", "xi"},
    "d-ucb": {"discount", "xi"},
}


def resolve_params(spec: PolicySpec, n_arms: int, horizon: int, lookahead: bool = True) -> dict:
    extra = set(spec.params) - _ALLOWED[spec.name]
    if extra:
        raise ValueError(f"unknown parameter(s) for policy '{spec.name}': {', '.join(sorted(extra))}")
    params = default_params(spec.name, n_arms, horizon)
    if spec.name == "aucb":
        params["lookahead"] = lookahead
    params.update(spec.params)
    return params


def make_policy(spec: PolicySpec | str, n_arms: int, trend: TrendFunction, horizon: int,
                lookahead: bool = True) -> Policy:
    """Construct a fresh policy for one run.

    Trend-blind baselines divide the observed payoff by ``trend.D_max`` so it
    lies in [0, 1].
    """
    if isinstance(spec, str):
        spec = PolicySpec.parse(spec)
    p = resolve_params(spec, n_arms, horizon, lookahead)
    scale = trend.D_max if trend.D_max > 0 else 1.0
    if spec.name == "aucb":
        return AUCB(n_arms, trend, lookahead=bool(p["lookahead"]))
    if spec.name == "ucb1":
        return UCB1(n_arms, reward_scale=scale)
    if spec.name == "exp3":
        return EXP3(n_arms, gamma=float(p["gamma"]), reward_scale=scale)
    if spec.name == "sw-ucb":
        return SWUCB(n_arms, window=int(p["window"]), xi=float(p["xi"]), reward_scale=scale)
    return DUCB(n_arms, discount=float(p["discount"]), xi=float(p["xi"]), reward_scale=scale)
