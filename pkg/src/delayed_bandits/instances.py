"""Named problem instances.

Every constructor is a pure function of its arguments (random choices come
from an explicit seed) and returns an :class:`InstanceSpec` that serialises to
the same dict schema used by experiment config files.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Mapping, Sequence

import numpy as np

from .distributions import (
    ArmModel,
    Bernoulli,
    Fixed,
    PacketLoss,
    Pareto,
    PointMass,
    Table,
    TwoPoint,
)

GAP_TOL = 1e-12


@dataclass(frozen=True)
class InstanceSpec:
    name: str
    arms: tuple[ArmModel, ...]
    optimal_arm: int
    gaps: tuple[float, ...]
    provenance: str = ""
    params: Mapping = field(default_factory=dict)

    def __post_init__(self):
        means = [a.mean for a in self.arms]
        best = max(means)
        if len(self.gaps) != len(self.arms):
            raise ValueError("one gap per arm required")
        for g, mu in zip(self.gaps, means):
            if abs(g - (best - mu)) > GAP_TOL:
                raise ValueError(f"gap {g} inconsistent with arm mean {mu} (best {best})")
        if abs(self.gaps[self.optimal_arm]) > GAP_TOL:
            raise ValueError("optimal arm must have zero gap")

    @property
    def K(self) -> int:
        return len(self.arms)

    @property
    def means(self) -> list[float]:
        return [a.mean for a in self.arms]

    @property
    def min_gap(self) -> float:
        pos = [g for g in self.gaps if g > GAP_TOL]
        return min(pos) if pos else 0.0

    @property
    def reward_independent(self) -> bool:
        return all(a.reward_independent for a in self.arms)

    def to_dict(self) -> dict:
        return {
            "name": self.name,
            "arms": [a.to_dict() for a in self.arms],
            "optimal_arm": self.optimal_arm,
            "gaps": list(self.gaps),
            "provenance": self.provenance,
            "params": dict(self.params),
        }

    @classmethod
    def from_dict(cls, data: Mapping) -> "InstanceSpec":
        arms = tuple(ArmModel.from_dict(a) for a in data["arms"])
        if "gaps" in data:
            gaps = tuple(float(g) for g in data["gaps"])
        else:
            gaps = _gaps(arms)
        optimal = data.get("optimal_arm")
        if optimal is None:
            optimal = int(np.argmax([a.mean for a in arms]))
        return cls(
            name=str(data.get("name", "custom")),
            arms=arms,
            optimal_arm=int(optimal),
            gaps=gaps,
            provenance=str(data.get("provenance", "")),
            params=dict(data.get("params", {})),
        )


def _gaps(arms: Sequence[ArmModel]) -> tuple[float, ...]:
    means = [a.mean for a in arms]
    best = max(means)
    return tuple(best - mu for mu in means)


def from_arms(name: str, arms: Sequence[ArmModel], provenance: str = "", **params) -> InstanceSpec:
    arms = tuple(arms)
    means = [a.mean for a in arms]
    return InstanceSpec(
        name=name,
        arms=arms,
        optimal_arm=int(np.argmax(means)),
        gaps=_gaps(arms),
        provenance=provenance,
        params=params,
    )


def _rng(seed) -> np.random.Generator:
    return np.random.Generator(np.random.PCG64(seed))


def make_fig1(K: int = 20, d: int = 0, mean_seed: int = 0) -> InstanceSpec:
    """K Bernoulli arms with means uniform on [0.25, 0.75]; every arm delayed by ``d``."""
    if d < 0:
        raise ValueError("delay must be >= 0")
    means = _rng(mean_seed).uniform(0.25, 0.75, size=K)
    arms = [ArmModel.independent(Bernoulli(float(mu)), Fixed(d)) for mu in means]
    return from_arms("fig1", arms, "fixed delays, Bernoulli means U[0.25, 0.75]", K=K, d=d, mean_seed=mean_seed)


def make_ucb_adversarial(K: int = 10, d: int = 100, seed: int = 0) -> InstanceSpec:
    """One deterministic reward-1 arm hidden in the upper half of the index range,
    K-1 fair coins, all with fixed delay ``d >= K``."""
    if d < K:
        raise ValueError(f"the adversarial instance needs d >= K (got d={d}, K={K})")
    lo = math.ceil(K / 2)
    best = int(_rng(seed).integers(lo, K)) if lo < K else K - 1
    arms = [
        ArmModel.independent(PointMass(1.0) if i == best else Bernoulli(0.5), Fixed(d))
        for i in range(K)
    ]
    return from_arms("ucb-adv", arms, "UCB lower-bound instance", K=K, d=d, seed=seed)


def make_pareto(delta: float = 0.1, alpha1: float = 1.0, alpha2: float = 0.2) -> InstanceSpec:
    """Two arms with means 0.4 and 0.4 + delta and Pareto delays."""
    if not 0.0 <= delta <= 0.6:
        raise ValueError("delta must lie in [0, 0.6]")
    arms = [
        ArmModel.independent(Bernoulli(0.4), Pareto(alpha1)),
        ArmModel.independent(Bernoulli(0.4 + delta), Pareto(alpha2)),
    ]
    return from_arms("fig2", arms, "Pareto delays", delta=delta, alpha1=alpha1, alpha2=alpha2)


def _random_gaps(K: int, seed, low: float = 0.15, high: float = 0.25) -> np.ndarray:
    return _rng(seed).uniform(low, high, size=K - 1)


def make_packet_loss(K: int = 10, p_opt: float = 0.1, gap_seed: int = 0, best_mean: float = 0.5) -> InstanceSpec:
    """Packet loss on the optimal arm only; sub-optimal gaps i.i.d. U[0.15, 0.25].

    Arm 0 is optimal.  ``best_mean`` is not given by the source experiment.
    """
    gaps = _random_gaps(K, gap_seed)
    arms = [ArmModel.independent(Bernoulli(best_mean), PacketLoss(p_opt))]
    arms += [ArmModel.independent(Bernoulli(best_mean - float(g)), PacketLoss(1.0)) for g in gaps]
    return from_arms("fig3", arms, "packet loss on the best arm", K=K, p_opt=p_opt, gap_seed=gap_seed)


def make_reward_dependent_bias(
    K: int = 3, d_big: int = 5000, gap_seed: int = 0, best_mean: float = 0.6
) -> InstanceSpec:
    """Reward-dependent delays that bias observed means against the best arm.

    The best arm's 1-rewards and the other arms' 0-rewards are delayed by
    ``d_big``; all other feedback is immediate.  Arm 0 is optimal.
    """
    gaps = _random_gaps(K, gap_seed)
    slow, fast = Fixed(d_big), Fixed(0)
    arms = [ArmModel(Bernoulli(best_mean), {1.0: slow, 0.0: fast})]
    arms += [ArmModel(Bernoulli(best_mean - float(g)), {0.0: slow, 1.0: fast}) for g in gaps]
    return from_arms("fig4", arms, "reward-dependent biased delays", K=K, d_big=d_big, gap_seed=gap_seed)


def make_dep_lower(variant: str, delta: float, d_tilde: int) -> InstanceSpec:
    """The two-arm pair that cannot be told apart before round ``d_tilde``.

    Arm 0 is a fair coin delayed by ``d_tilde`` with probability 1 - 2*delta.
    Arm 1 has mean 1/2 -/+ delta (variant I1/I2); the reward value that is
    rarer under the variant is delayed by ``d_tilde`` with probability
    4*delta / (1 + 2*delta).
    """
    if not 0.0 < delta <= 0.5:
        raise ValueError("delta must lie in (0, 1/2]")
    variant = variant.upper()
    if variant not in ("I1", "I2"):
        raise ValueError("variant must be 'I1' or 'I2'")
    p_slow = 4 * delta / (1 + 2 * delta)
    split = Table(((d_tilde, p_slow), (0, 1.0 - p_slow)))
    arm0 = ArmModel.independent(Bernoulli(0.5), Table(((d_tilde, 1 - 2 * delta), (0, 2 * delta))))
    if variant == "I1":
        arm1 = ArmModel(Bernoulli(0.5 - delta), {0.0: split, 1.0: Fixed(0)})
    else:
        arm1 = ArmModel(Bernoulli(0.5 + delta), {0.0: Fixed(0), 1.0: split})
    name = "dep-lower-i1" if variant == "I1" else "dep-lower-i2"
    return from_arms(name, [arm0, arm1], "reward-dependent lower-bound pair", delta=delta, d_tilde=d_tilde)


def make_twopoint_lower(gaps: Sequence[float], d_tilde: int, q: float, seed: int = 0) -> InstanceSpec:
    """Bernoulli arms with means 1/2 - gap, all delayed ``d_tilde`` w.p. ``q`` (else lost),
    in a uniformly random order."""
    gaps = np.asarray(gaps, dtype=float)
    order = _rng(seed).permutation(len(gaps))
    law = Fixed(d_tilde) if q == 1.0 else TwoPoint(d_tilde, q)
    arms = [ArmModel.independent(Bernoulli(0.5 - float(gaps[j])), law) for j in order]
    return from_arms("twopoint", arms, "two-point delay construction", d_tilde=d_tilde, q=q, seed=seed)


INSTANCES = {
    "fig1": make_fig1,
    "fig2": make_pareto,
    "fig3": make_packet_loss,
    "fig4": make_reward_dependent_bias,
    "ucb-adv": make_ucb_adversarial,
    "dep-lower-i1": lambda delta=0.1, d_tilde=100: make_dep_lower("I1", delta, d_tilde),
    "dep-lower-i2": lambda delta=0.1, d_tilde=100: make_dep_lower("I2", delta, d_tilde),
    "twopoint": make_twopoint_lower,
}


def make_instance(name: str, **params) -> InstanceSpec:
    try:
        ctor = INSTANCES[name]
    except KeyError:
        raise ValueError(f"unknown instance {name!r}; expected one of {sorted(INSTANCES)}") from None
    return ctor(**params)
