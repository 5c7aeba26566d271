"""Known trend functions and the trend-modulated Bernoulli environment."""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

KINDS = ("constant", "log_decreasing", "exp_growth", "gaussian", "logistic", "tabulated")

# positional parameter names per kind, used to accept either lists or mappings
PARAM_NAMES = {
    "constant": ("level",),
    "log_decreasing": ("a", "b"),
    "exp_growth": ("c", "k"),
    "gaussian": ("center", "width"),
    "logistic": ("L", "k", "n0"),
}


class TrendDomainError(ValueError):
    """Raised when a trend formula produces a non-finite value."""

    def __init__(self, n: int, value: float, kind: str):
        super().__init__(f"trend '{kind}' is not finite at n={n} (got {value!r})")
        self.n = n
        self.value = value
        self.kind = kind


def _formula(kind: str, params: tuple[float, ...], x: float) -> float:
    # scalar libm calls, not numpy ufuncs: results must not depend on SIMD dispatch
    if kind == "constant":
        return params[0]
    if kind == "log_decreasing":
        a, b = params
        return a * math.log(x) + b
    if kind == "exp_growth":
        c, k = params
        return c * math.exp(k * x)
    if kind == "gaussian":
        center, width = params
        return math.exp(-((x - center) ** 2) / width)
    if kind == "logistic":
        top, k, n0 = params
        z = -k * (x - n0)
        return 0.0 * top if z > 709.0 else top / (1.0 + math.exp(z))
    raise ValueError(f"unknown trend kind {kind!r}")


def _evaluate(kind, params, n, scale):
    try:
        value = _formula(kind, params, n / scale)
    except OverflowError:
        raise TrendDomainError(n, math.inf, kind) from None
    if not math.isfinite(value):
        raise TrendDomainError(n, value, kind)
    return value


@dataclass(frozen=True)
class TrendFunction:
    """A known reward shape ``D(n)`` over per-arm pull counts ``1..horizon_cap``.

    ``scale`` measures the formula argument in units of ``scale`` pulls, so a
    formula written for ``n`` in thousands uses ``scale=1000``. Values are
    tabulated once at construction; ``D_min``/``D_max`` come from that scan.
    """

    kind: str
    params: tuple[float, ...] = ()
    horizon_cap: int = 1
    floor: float = 0.0
    scale: float = 1.0
    values: tuple[float, ...] = ()
    _table: list = field(default=None, init=False, repr=False, compare=False)
    _cumulative: list = field(default=None, init=False, repr=False, compare=False)

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ValueError(f"unknown trend kind {self.kind!r}; expected one of {', '.join(KINDS)}")
        if int(self.horizon_cap) != self.horizon_cap or self.horizon_cap < 1:
            raise ValueError(f"horizon_cap must be a positive integer, got {self.horizon_cap!r}")
        if not (math.isfinite(self.floor) and self.floor >= 0):
            raise ValueError(f"floor must be a non-negative real, got {self.floor!r}")
        if not (math.isfinite(self.scale) and self.scale > 0):
            raise ValueError(f"scale must be positive, got {self.scale!r}")
        object.__setattr__(self, "horizon_cap", int(self.horizon_cap))
        object.__setattr__(self, "params", tuple(float(p) for p in self.params))
        object.__setattr__(self, "values", tuple(float(v) for v in self.values))

        cap = self.horizon_cap
        if self.kind == "tabulated":
            if not self.values:
                raise ValueError("tabulated trend needs at least one value")
            if any(not math.isfinite(v) or v < 0 for v in self.values):
                raise ValueError("tabulated values must be finite and non-negative")
            raw = list(self.values[:cap])
            raw += [raw[-1]] * (cap - len(raw))
        else:
            expected = len(PARAM_NAMES[self.kind])
            if len(self.params) != expected:
                raise ValueError(
                    f"trend '{self.kind}' takes {expected} parameters "
                    f"({', '.join(PARAM_NAMES[self.kind])}), got {len(self.params)}"
                )
            if self.kind == "gaussian" and self.params[1] <= 0:
                raise ValueError("gaussian width must be positive")
            raw = [_evaluate(self.kind, self.params, n, self.scale) for n in range(1, cap + 1)]

        floor = self.floor
        # index 0 is a placeholder so that table[n] == D(n)
        table = [0.0] + [v if v > floor else floor for v in raw]
        cumulative = [0.0] * (cap + 1)
        acc = 0.0
        for n in range(1, cap + 1):
            acc += table[n]
            cumulative[n] = acc
        object.__setattr__(self, "_table", table)
        object.__setattr__(self, "_cumulative", cumulative)
        object.__setattr__(self, "D_min", min(table[1:]))
        object.__setattr__(self, "D_max", max(table[1:]))

    @classmethod
    def constant(cls, level: float = 1.0, horizon_cap: int = 1, **kw) -> "TrendFunction":
        return cls("constant", (level,), horizon_cap, **kw)

    @classmethod
    def log_decreasing(cls, a: float, b: float, horizon_cap: int = 1, **kw) -> "TrendFunction":
        return cls("log_decreasing", (a, b), horizon_cap, **kw)

    @classmethod
    def exp_growth(cls, c: float, k: float, horizon_cap: int = 1, **kw) -> "TrendFunction":
        return cls("exp_growth", (c, k), horizon_cap, **kw)

    @classmethod
    def gaussian(cls, center: float, width: float, horizon_cap: int = 1, **kw) -> "TrendFunction":
        return cls("gaussian", (center, width), horizon_cap, **kw)

    @classmethod
    def logistic(cls, top: float, k: float, n0: float, horizon_cap: int = 1, **kw) -> "TrendFunction":
        return cls("logistic", (top, k, n0), horizon_cap, **kw)

    @classmethod
    def tabulated(cls, values: Sequence[float], horizon_cap: int | None = None, **kw) -> "TrendFunction":
        cap = len(values) if horizon_cap is None else horizon_cap
        return cls("tabulated", (), cap, values=tuple(values), **kw)

    def __call__(self, n: int) -> float:
        return trend_eval(self, n)

    @property
    def table(self) -> np.ndarray:
        """``D(0..horizon_cap)`` with a zero placeholder at index 0."""
        return np.asarray(self._table)

    @property
    def cumulative(self) -> np.ndarray:
        """``F(0..horizon_cap)``."""
        return np.asarray(self._cumulative)

    def scaled(self, factor: float) -> "TrendFunction":
        """Same trend multiplied by ``factor`` (tabulated copy)."""
        if factor <= 0:
            raise ValueError("factor must be positive")
        return TrendFunction.tabulated(
            [v * factor for v in self._table[1:]], self.horizon_cap, floor=self.floor * factor
        )

    def to_dict(self) -> dict:
        out = {
            "kind": self.kind,
            "params": dict(zip(PARAM_NAMES.get(self.kind, ()), self.params)),
            "horizon_cap": self.horizon_cap,
            "floor": self.floor,
            "scale": self.scale,
        }
        if self.kind == "tabulated":
            out["values"] = list(self.values)
        return out

    @classmethod
    def from_dict(cls, spec: dict, default_cap: int | None = None) -> "TrendFunction":
        """Build a trend from its config-file mapping.

        ``params`` may be a positional list or a mapping keyed by parameter name.
        """
        if not isinstance(spec, dict):
            raise ValueError(f"trend must be an object, got {type(spec).__name__}")
        unknown = set(spec) - {"kind", "params", "horizon_cap", "floor", "scale", "values"}
        if unknown:
            raise ValueError(f"unknown trend field(s): {', '.join(sorted(unknown))}")
        kind = spec.get("kind")
        if kind not in KINDS:
            raise ValueError(f"unknown trend kind {kind!r}")
        cap = spec.get("horizon_cap", default_cap)
        if cap is None:
            raise ValueError("trend.horizon_cap is required")
        params = spec.get("params", ())
        if isinstance(params, dict):
            names = PARAM_NAMES.get(kind, ())
            extra = set(params) - set(names)
            if extra:
                raise ValueError(f"unknown parameter(s) for trend '{kind}': {', '.join(sorted(extra))}")
            missing = [p for p in names if p not in params]
            if missing:
                raise ValueError(f"missing parameter(s) for trend '{kind}': {', '.join(missing)}")
            params = [params[p] for p in names]
        return cls(
            kind,
            tuple(params),
            cap,
            floor=float(spec.get("floor", 0.0)),
            scale=float(spec.get("scale", 1.0)),
            values=tuple(spec.get("values", ())),
        )


def trend_eval(trend: TrendFunction, n: int) -> float:
    """``max(floor, D(n))`` with ``n`` clamped to ``horizon_cap``."""
    if n < 1:
        raise ValueError(f"trend argument must be >= 1, got {n}")
    return trend._table[min(int(n), trend.horizon_cap)]


def cumulative_trend(trend: TrendFunction, n: int) -> float:
    """``F(n) = D(1) + ... + D(n)``, accumulated left to right; ``F(0) = 0``."""
    if not 0 <= n <= trend.horizon_cap:
        raise ValueError(f"cumulative argument must lie in [0, {trend.horizon_cap}], got {n}")
    return trend._cumulative[int(n)]


@dataclass(frozen=True)
class ArmSpec:
    mean: float

    def __post_init__(self):
        if not 0.0 <= self.mean <= 1.0:
            raise ValueError(f"arm mean must lie in [0, 1], got {self.mean!r}")


class BanditEnvironment:
    """K Bernoulli arms whose rewards are modulated by their own pull count.

    The s-th pull of an arm pays ``raw * D(s)`` with ``raw ~ Bernoulli(mean)``.
    """

    def __init__(self, arms: Sequence[ArmSpec | float], trend: TrendFunction,
                 arm_trends: Sequence[TrendFunction | None] | None = None):
        if len(arms) < 1:
            raise ValueError("environment needs at least one arm")
        self.arms = [a if isinstance(a, ArmSpec) else ArmSpec(float(a)) for a in arms]
        self.trend = trend
        if arm_trends is not None and len(arm_trends) != len(self.arms):
            raise ValueError("arm_trends must have one entry per arm")
        self.trends = [
            (arm_trends[i] if arm_trends is not None and arm_trends[i] is not None else trend)
            for i in range(len(self.arms))
        ]
        self.means = [a.mean for a in self.arms]
        self.pull_counts = [0] * len(self.arms)
        self.step = 0

    @property
    def n_arms(self) -> int:
        return len(self.arms)

    def pull(self, arm: int, rng: np.random.Generator) -> tuple[int, float]:
        if not 0 <= arm < len(self.arms):
            raise IndexError(f"arm index {arm} out of range for {len(self.arms)} arms")
        raw = 1 if rng.random() < self.means[arm] else 0
        n = self.pull_counts[arm] + 1
        self.pull_counts[arm] = n
        self.step += 1
        return raw, raw * trend_eval(self.trends[arm], n)
