"""Multi-armed bandits whose rewards follow a known trend in the pull count."""

__version__ = "0.1.0"

from .trend import (  # noqa: E402
    ArmSpec,
    BanditEnvironment,
    TrendDomainError,
    TrendFunction,
    cumulative_trend,
    trend_eval,
)
from .policies import AUCB, DUCB, EXP3, SWUCB, UCB1, PolicySpec, aucb_index, make_policy  # noqa: E402
from .oracle import (  # noqa: E402
    BoundReport,
    OracleSchedule,
    RegretReport,
    expected_regret,
    greedy_oracle,
    theorem1_bound,
)
from .harness import ExperimentConfig, RunRecord, AggregateRecord, run_experiment, run_single  # noqa: E402
