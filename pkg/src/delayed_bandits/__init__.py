"""Stochastic multi-armed bandits with delayed, anonymous and possibly lost feedback."""

from .algorithms import (
    AGENTS,
    UCB,
    ConstantRadius,
    LogRadius,
    OptimisticPessimisticSE,
    PhasedSuccessiveElimination,
    SuccessiveElimination,
    make_agent,
)
from .bounds import bound_value, instance_bound
from .distributions import (
    INFINITY,
    ArmModel,
    Bernoulli,
    Fixed,
    Mixture,
    PacketLoss,
    Pareto,
    PointMass,
    Table,
    TwoPoint,
    quantile,
)
from .environment import Environment, FeedbackEvent, play
from .harness import ExperimentConfig, load_config, mix_seed, preset, run_experiment, simulate
from .instances import INSTANCES, InstanceSpec, make_instance
from .metrics import Aggregate, RunRecord, aggregate

__version__ = "0.1.0"
