"""Seeded, replicated experiments with checkpointed reward and regret."""
from __future__ import annotations

import hashlib
import math
import statistics
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace
from functools import lru_cache

import numpy as np

from .oracle import OracleSchedule, greedy_oracle
from .policies import POLICY_NAMES, PolicySpec, make_policy, resolve_params
from .trend import TrendDomainError, TrendFunction


PAPER_MEANS = (0.6, 0.4, 0.3, 0.3, 0.15, 0.1, 0.05, 0.05)

METRICS = ("modulated_reward", "raw_reward", "expected_regret", "oracle_agreement_rate")


class ConfigError(ValueError):
    """Invalid experiment configuration."""


class RunError(RuntimeError):
    """A single run failed; carries the (policy, run) that failed."""

    def __init__(self, policy: str, run: int, cause: Exception):
        super().__init__(f"run {run} of policy '{policy}' failed: {cause}")
        self.policy = policy
        self.run = run
        self.cause = cause


@dataclass(frozen=True)
class ExperimentConfig:
    scenario: str
    trend: TrendFunction
    means: tuple[float, ...] = PAPER_MEANS
    horizon: int = 32000
    runs: int = 20
    checkpoint_interval: int = 1000
    policies: tuple[PolicySpec, ...] = tuple(PolicySpec(n) for n in POLICY_NAMES)
    master_seed: int = 0
    index_lookahead: bool = True
    common_random_numbers: bool = True

    def __post_init__(self):
        object.__setattr__(self, "means", tuple(float(m) for m in self.means))
        object.__setattr__(self, "policies", tuple(self.policies))
        k = len(self.means)
        if k < 1:
            raise ConfigError("means: at least one arm is required")
        for m in self.means:
            if not 0.0 <= m <= 1.0:
                raise ConfigError(f"means: {m!r} is outside [0, 1]")
        if not isinstance(self.horizon, int) or self.horizon < 0:
            raise ConfigError(f"horizon: must be a non-negative integer, got {self.horizon!r}")
        if 0 < self.horizon < k:
            raise ConfigError(f"horizon: {self.horizon} is smaller than the number of arms {k}")
        if not isinstance(self.runs, int) or self.runs < 1:
            raise ConfigError(f"runs: must be >= 1, got {self.runs!r}")
        if not isinstance(self.checkpoint_interval, int) or self.checkpoint_interval < 1:
            raise ConfigError(f"checkpoint_interval: must be >= 1, got {self.checkpoint_interval!r}")
        if not isinstance(self.master_seed, int) or not 0 <= self.master_seed < 2**64:
            raise ConfigError(f"master_seed: must be a 64-bit unsigned integer, got {self.master_seed!r}")
        if self.trend.horizon_cap < self.horizon:
            raise ConfigError(
                f"trend.horizon_cap: {self.trend.horizon_cap} is below the horizon {self.horizon}"
            )
        if len({p.name for p in self.policies}) != len(self.policies):
            raise ConfigError("policies: each policy name may appear only once")
        for p in self.policies:
            try:
                resolve_params(p, k, self.horizon)
            except ValueError as exc:
                raise ConfigError(f"policies: {exc}") from None

    @property
    def n_arms(self) -> int:
        return len(self.means)

    def checkpoints(self) -> list[int]:
        """Every ``checkpoint_interval`` steps, plus a final partial one."""
        ts = list(range(self.checkpoint_interval, self.horizon + 1, self.checkpoint_interval))
        if self.horizon and (not ts or ts[-1] != self.horizon):
            ts.append(self.horizon)
        return ts

    def to_dict(self) -> dict:
        return {
            "scenario": self.scenario,
            "means": list(self.means),
            "trend": self.trend.to_dict(),
            "horizon": self.horizon,
            "runs": self.runs,
            "checkpoint_interval": self.checkpoint_interval,
            "policies": [p.to_dict() for p in self.policies],
            "master_seed": self.master_seed,
            "index_lookahead": self.index_lookahead,
            "common_random_numbers": self.common_random_numbers,
        }

    @classmethod
    def from_dict(cls, data: dict) -> "ExperimentConfig":
        if not isinstance(data, dict):
            raise ConfigError("config must be a JSON object")
        known = {"scenario", "means", "trend", "horizon", "runs", "checkpoint_interval",
                 "policies", "master_seed", "index_lookahead", "common_random_numbers"}
        unknown = set(data) - known
        if unknown:
            raise ConfigError(f"unknown config field(s): {', '.join(sorted(unknown))}")
        for required in ("scenario", "trend"):
            if required not in data:
                raise ConfigError(f"missing config field '{required}'")
        horizon = data.get("horizon", 32000)
        try:
            trend = TrendFunction.from_dict(data["trend"], default_cap=horizon)
        except TrendDomainError:
            raise
        except ValueError as exc:
            raise ConfigError(f"trend: {exc}") from None
        policies = []
        for entry in data.get("policies", [{"name": n} for n in POLICY_NAMES]):
            try:
                if isinstance(entry, str):
                    policies.append(PolicySpec.parse(entry))
                elif isinstance(entry, dict):
                    extra = set(entry) - {"name", "params"}
                    if extra:
                        raise ValueError(f"unknown policy field(s): {', '.join(sorted(extra))}")
                    policies.append(PolicySpec(entry.get("name"), dict(entry.get("params", {}))))
                else:
                    raise ValueError(f"policy entry {entry!r} must be a string or object")
            except ValueError as exc:
                raise ConfigError(f"policies: {exc}") from None
        lookahead = data.get("index_lookahead", True)
        if not isinstance(lookahead, bool):
            raise ConfigError(f"index_lookahead: must be true or false, got {lookahead!r}")
        crn = data.get("common_random_numbers", True)
        if not isinstance(crn, bool):
            raise ConfigError(f"common_random_numbers: must be true or false, got {crn!r}")
        try:
            return cls(
                scenario=str(data["scenario"]),
                trend=trend,
                means=tuple(data.get("means", PAPER_MEANS)),
                horizon=horizon,
                runs=data.get("runs", 20),
                checkpoint_interval=data.get("checkpoint_interval", 1000),
                policies=tuple(policies),
                master_seed=data.get("master_seed", 0),
                index_lookahead=lookahead,
                common_random_numbers=crn,
            )
        except (TypeError, ValueError) as exc:
            if isinstance(exc, ConfigError):
                raise
            raise ConfigError(str(exc)) from None

    def with_overrides(self, **changes) -> "ExperimentConfig":
        return replace(self, **changes)


@dataclass(frozen=True)
class Checkpoint:
    t: int
    modulated_reward: float
    raw_reward: float
    expected_regret: float
    oracle_agreement_rate: float
    counts: tuple[int, ...]


@dataclass(frozen=True)
class RunRecord:
    policy: str
    run: int
    seed: int
    checkpoints: tuple[Checkpoint, ...]
    final_counts: tuple[int, ...]

    def series(self, metric: str) -> list[float]:
        return [getattr(c, metric) for c in self.checkpoints]


@dataclass(frozen=True)
class AggregateRecord:
    policy: str
    t: tuple[int, ...]
    mean: dict = field(default_factory=dict)  # metric -> tuple over checkpoints
    std: dict = field(default_factory=dict)


def run_seed(master_seed: int, policy: str, run: int) -> int:
    """64-bit seed: first 8 bytes (big-endian) of BLAKE2b over ``"<master>:<policy>:<run>"``."""
    digest = hashlib.blake2b(f"{master_seed}:{policy}:{run}".encode(), digest_size=8).digest()
    return int.from_bytes(digest, "big")


def arm_seed(master_seed: int, run: int, arm: int) -> int:
    """Seed of the shared reward sequence of one arm in one run (same hash as ``run_seed``)."""
    digest = hashlib.blake2b(f"{master_seed}:arm{arm}:{run}".encode(), digest_size=8).digest()
    return int.from_bytes(digest, "big")


def make_rng(seed: int) -> np.random.Generator:
    return np.random.Generator(np.random.PCG64(seed))


def reward_tape(means, horizon: int, master_seed: int, run: int) -> list[list[int]]:
    """Raw outcomes ``tape[i][s - 1]`` of the s-th pull of arm i, shared by all policies."""
    tape = []
    for i, m in enumerate(means):
        u = make_rng(arm_seed(master_seed, run, i)).random(horizon)
        tape.append((u < m).astype(int).tolist())
    return tape


@lru_cache(maxsize=16)
def cached_oracle(means: tuple[float, ...], trend: TrendFunction, horizon: int) -> OracleSchedule:
    return greedy_oracle(means, trend, horizon)


def simulate(policy, means, trend: TrendFunction, horizon: int, rng: np.random.Generator,
             checkpoints=(), oracle: OracleSchedule | None = None, on_step=None, tape=None):
    """Run ``select -> pull -> update`` for ``horizon`` steps.

    Raw outcomes come from ``tape`` when given (see ``reward_tape``), otherwise
    from ``rng`` one draw per step, as ``BanditEnvironment.pull`` does.
    Returns ``(checkpoint list, final counts)``. ``on_step(t, arm)`` is called
    after every selection when given.
    """
    k = len(means)
    means = list(means)
    d = trend._table
    F = trend._cumulative
    cap = trend.horizon_cap
    counts = [0] * k
    # mu_i * D(n_i + 1): the oracle's score for each arm at the run's own counts
    score = [m * d[1] for m in means]
    uses_trend = policy.uses_trend
    select, update = policy.select, policy.update
    random = rng.random
    marks = set(checkpoints)
    total_mod = total_raw = 0.0
    agree = 0
    out = []
    for t in range(1, horizon + 1):
        arm = select(t, rng)
        if on_step is not None:
            on_step(t, arm)
        if score[arm] >= max(score):
            agree += 1
        m = means[arm]
        n = counts[arm] + 1
        if tape is None:
            raw = 1 if random() < m else 0
        else:
            raw = tape[arm][n - 1]
        counts[arm] = n
        z = raw * d[n if n <= cap else cap]
        total_mod += z
        total_raw += raw
        nxt = n + 1
        score[arm] = m * d[nxt if nxt <= cap else cap]
        update(arm, raw if uses_trend else z)
        if t in marks:
            gain = sum(mu * F[c] for mu, c in zip(means, counts))
            regret = (oracle.gain_path[t] - gain) if oracle is not None else math.nan
            out.append(Checkpoint(t, total_mod, float(total_raw), regret, agree / t, tuple(counts)))
    return out, tuple(counts)


def run_single(config: ExperimentConfig, policy: PolicySpec | str, run: int) -> RunRecord:
    """One seeded replication of one policy."""
    if isinstance(policy, str):
        policy = PolicySpec.parse(policy)
    seed = run_seed(config.master_seed, policy.name, run)
    try:
        agent = make_policy(policy, config.n_arms, config.trend, config.horizon, config.index_lookahead)
        oracle = cached_oracle(config.means, config.trend, config.horizon)
        tape = (reward_tape(config.means, config.horizon, config.master_seed, run)
                if config.common_random_numbers else None)
        cps, counts = simulate(agent, config.means, config.trend, config.horizon, make_rng(seed),
                               config.checkpoints(), oracle, tape=tape)
    except (TrendDomainError, ValueError, IndexError, OverflowError) as exc:
        raise RunError(policy.name, run, exc) from exc
    return RunRecord(policy.name, run, seed, tuple(cps), counts)


def aggregate(records: list[RunRecord]) -> AggregateRecord:
    """Mean and sample standard deviation per checkpoint, folded in run order."""
    if not records:
        raise ValueError("nothing to aggregate")
    records = sorted(records, key=lambda r: r.run)
    policy = records[0].policy
    ts = tuple(c.t for c in records[0].checkpoints)
    mean, std = {}, {}
    for metric in METRICS:
        columns = list(zip(*(r.series(metric) for r in records))) if ts else []
        mean[metric] = tuple(math.fsum(col) / len(col) for col in columns)
        std[metric] = tuple(statistics.stdev(col) if len(col) > 1 else 0.0 for col in columns)
    return AggregateRecord(policy, ts, mean, std)


def _run_task(args):
    config, policy, run = args
    return run_single(config, policy, run)


def run_experiment(config: ExperimentConfig, jobs: int = 1):
    """All runs of every policy, plus one aggregate per policy.

    Output ordering is fixed (policy order from the config, then run index) and
    does not depend on ``jobs``.
    """
    tasks = [(config, p, r) for p in config.policies for r in range(config.runs)]
    if jobs > 1 and len(tasks) > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            records = list(pool.map(_run_task, tasks))
    else:
        records = [_run_task(t) for t in tasks]
    aggregates = []
    for p in config.policies:
        group = [r for r in records if r.policy == p.name]
        aggregates.append(aggregate(group))
    return aggregates, records
