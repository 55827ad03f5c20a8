"""Bandit agents for delayed, anonymous feedback.

All agents share one interface::

    agent.choose(t) -> arm       # called once per round, before the draw
    agent.observe(events)        # feedback delivered at the end of the round
    agent.reset(K, T, radius_scale=None, rng_seed=None)

Confidence radii are pluggable functions of ``(count, T)``; see
:class:`LogRadius` and :class:`ConstantRadius`.  Logarithms are natural.
Radii are tabulated once per run for counts ``0..T`` so the per-round work is
a list lookup.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Iterable

import numpy as np

from .environment import FeedbackEvent


@dataclass(frozen=True)
class LogRadius:
    """``sqrt(scale * log(T) / max(count, 1))``."""

    scale: float = 2.0

    def table(self, horizon: int) -> list[float]:
        counts = np.maximum(np.arange(horizon + 1, dtype=float), 1.0)
        return np.sqrt(self.scale * math.log(horizon) / counts).tolist()

    def __call__(self, count: int, horizon: int) -> float:
        return math.sqrt(self.scale * math.log(horizon) / max(count, 1))

    def to_dict(self) -> dict:
        return {"kind": "log", "scale": self.scale}


@dataclass(frozen=True)
class ConstantRadius:
    """``sqrt(c / max(count, 1))``; the horizon-free radius used for the fixed-delay figure."""

    c: float = 2.0

    def table(self, horizon: int) -> list[float]:
        counts = np.maximum(np.arange(horizon + 1, dtype=float), 1.0)
        return np.sqrt(self.c / counts).tolist()

    def __call__(self, count: int, horizon: int) -> float:
        return math.sqrt(self.c / max(count, 1))

    def to_dict(self) -> dict:
        return {"kind": "constant", "c": self.c}


def radius_from_dict(data: dict | None):
    if data is None:
        return LogRadius()
    kind = data.get("kind", "log")
    if kind == "log":
        return LogRadius(float(data.get("scale", 2.0)))
    if kind == "constant":
        return ConstantRadius(float(data.get("c", 2.0)))
    raise ValueError(f"unknown radius kind {kind!r}")


class Agent:
    """Shared pull/observation bookkeeping.

    ``m[i]`` counts pulls, ``n[i]`` counts observed feedback and
    ``reward_sum[i]`` sums observed rewards.  ``0 <= n[i] <= m[i]`` always.
    """

    name = "agent"

    def __init__(self, n_arms: int, horizon: int, radius=None, radius_scale: float | None = None):
        self.reset(n_arms, horizon, radius_scale, radius=radius)

    def reset(self, n_arms: int, horizon: int, radius_scale: float | None = None, rng_seed=None, *, radius=None):
        if n_arms < 1:
            raise ValueError("need at least one arm")
        if horizon < 2:
            raise ValueError("horizon must be >= 2 so that log(T) > 0")
        if radius is None:
            radius = getattr(self, "radius", None) or LogRadius()
        if radius_scale is not None:
            radius = LogRadius(radius_scale)
        self.radius = radius
        self.K = n_arms
        self.T = horizon
        self.log_T = math.log(horizon)
        self.m = [0] * n_arms
        self.n = [0] * n_arms
        self.reward_sum = [0.0] * n_arms
        self._rad = radius.table(horizon)
        self._init_state()
        return self

    def _init_state(self):
        pass

    def choose(self, t: int) -> int:  # pragma: no cover - abstract
        raise NotImplementedError

    def observe(self, events: Iterable[FeedbackEvent]) -> None:
        n, s = self.n, self.reward_sum
        for arm, r in events:
            n[arm] += 1
            s[arm] += r

    # observed-mean confidence bounds, with the optimistic convention mean = 1 at n = 0
    def observed_mean(self, arm: int) -> float:
        n = self.n[arm]
        return self.reward_sum[arm] / n if n else 1.0

    def ucb(self, arm: int) -> float:
        return self.observed_mean(arm) + self._rad[self.n[arm]]

    def lcb(self, arm: int) -> float:
        return self.observed_mean(arm) - self._rad[self.n[arm]]

    def _eliminate(self, arms: list[int], ucb, lcb) -> list[int]:
        """Arms ``i`` in ``arms`` with ``ucb(i) < max_j lcb(j)``."""
        if len(arms) < 2:
            return []
        best_lcb = max(lcb(j) for j in arms)
        return [i for i in arms if ucb(i) < best_lcb]


class UCB(Agent):
    """UCB on observed feedback: one initial sweep over the arms, then argmax of
    ``mean + radius(n)`` with ties broken by lowest index."""

    name = "ucb"

    def _init_state(self):
        self.init_cursor = 0
        rad0 = self._rad[0]
        self._index = [1.0 + rad0] * self.K

    def choose(self, t: int) -> int:
        if self.init_cursor < self.K:
            arm = self.init_cursor
            self.init_cursor += 1
        else:
            idx = self._index
            arm = idx.index(max(idx))
        self.m[arm] += 1
        return arm

    def observe(self, events):
        n, s, idx, rad = self.n, self.reward_sum, self._index, self._rad
        for arm, r in events:
            c = n[arm] + 1
            n[arm] = c
            s[arm] += r
            idx[arm] = s[arm] / c + rad[c]

    def index(self, arm: int) -> float:
        return self._index[arm]


class SuccessiveElimination(Agent):
    """Round-robin over the active set; after every complete pass, drop arms whose
    UCB falls below the best LCB (bounds from observed feedback)."""

    name = "se"

    def _init_state(self):
        self.active = list(range(self.K))
        self.rr_cursor = 0
        self.eliminated: list[int] = []

    def choose(self, t: int) -> int:
        if self.rr_cursor >= len(self.active):
            self.eliminate()
            self.rr_cursor = 0
        arm = self.active[self.rr_cursor]
        self.rr_cursor += 1
        self.m[arm] += 1
        return arm

    def eliminate(self) -> list[int]:
        removed = self._eliminate(self.active, self.ucb, self.lcb)
        if removed:
            gone = set(removed)
            self.active = [i for i in self.active if i not in gone]
            self.eliminated.extend(removed)
        return removed


class PhasedSuccessiveElimination(Agent):
    """Phased SE.

    In phase ``l`` the arms of ``S_l`` (initially the active set) are pulled
    round-robin; an arm leaves ``S_l`` as soon as it has
    ``16 log(T) * 4**l`` observations.  When ``S_l`` empties the usual
    elimination runs on the active set and the next phase starts.
    """

    name = "pse"

    def _init_state(self):
        self.active = list(range(self.K))
        self.phase = 1
        self.max_phase = max(1, math.ceil(math.log2(self.T)))
        self.in_phase = list(self.active)
        self.eliminated: list[int] = []
        self._last = -1
        self.threshold = self.phase_threshold(self.phase)

    def phase_threshold(self, phase: int) -> float:
        return 16.0 * self.log_T * 4.0**phase

    def _end_phase(self):
        removed = self._eliminate(self.active, self.ucb, self.lcb)
        if removed:
            gone = set(removed)
            self.active = [i for i in self.active if i not in gone]
            self.eliminated.extend(removed)
        while True:
            if self.phase < self.max_phase:
                self.phase += 1
            self.threshold = self.phase_threshold(self.phase)
            self.in_phase = [i for i in self.active if self.n[i] < self.threshold]
            if self.in_phase:
                break
            if self.phase >= self.max_phase:
                self.in_phase = list(self.active)
                break
        self._last = -1

    def choose(self, t: int) -> int:
        if not self.in_phase:
            self._end_phase()
        nxt = None
        for i in self.in_phase:
            if i > self._last:
                nxt = i
                break
        arm = self.in_phase[0] if nxt is None else nxt
        self._last = arm
        self.m[arm] += 1
        return arm

    def observe(self, events):
        n, s = self.n, self.reward_sum
        for arm, r in events:
            n[arm] += 1
            s[arm] += r
        thr = self.threshold
        if any(n[i] >= thr for i in self.in_phase):
            self.in_phase = [i for i in self.in_phase if n[i] < thr]


class OptimisticPessimisticSE(Agent):
    """SE for reward-dependent delays.

    Missing feedback is imputed as reward 1 for the upper bound and as 0 for
    the lower bound; both bounds are normalised by pulls ``m`` and use the
    radius at ``m``:

        mean_lo = reward_sum / m
        mean_hi = (m - n) / m + mean_lo
    """

    name = "opse"

    def _init_state(self):
        self.active = list(range(self.K))
        self.rr_cursor = 0
        self.eliminated: list[int] = []

    def estimators(self, arm: int) -> tuple[float, float]:
        m = self.m[arm]
        lo = self.reward_sum[arm] / m
        return lo, (m - self.n[arm]) / m + lo

    def ucb(self, arm: int) -> float:
        return self.estimators(arm)[1] + self._rad[self.m[arm]]

    def lcb(self, arm: int) -> float:
        return self.estimators(arm)[0] - self._rad[self.m[arm]]

    def choose(self, t: int) -> int:
        if self.rr_cursor >= len(self.active):
            self.eliminate()
            self.rr_cursor = 0
        arm = self.active[self.rr_cursor]
        self.rr_cursor += 1
        self.m[arm] += 1
        return arm

    def eliminate(self) -> list[int]:
        removed = self._eliminate(self.active, self.ucb, self.lcb)
        if removed:
            gone = set(removed)
            self.active = [i for i in self.active if i not in gone]
            self.eliminated.extend(removed)
        return removed


class UniformRandom(Agent):
    """Uniformly random arm each round; a baseline for metric checks."""

    name = "uniform"

    def __init__(self, n_arms: int, horizon: int, seed=None, **kwargs):
        self._seed = seed
        super().__init__(n_arms, horizon, **kwargs)

    def _init_state(self):
        rng = np.random.Generator(np.random.PCG64(self._seed))
        self._arms = rng.integers(0, self.K, size=self.T).tolist()

    def choose(self, t: int) -> int:
        arm = self._arms[t - 1]
        self.m[arm] += 1
        return arm


AGENTS = {
    "ucb": UCB,
    "se": SuccessiveElimination,
    "pse": PhasedSuccessiveElimination,
    "opse": OptimisticPessimisticSE,
}


def make_agent(name: str, n_arms: int, horizon: int, radius=None) -> Agent:
    try:
        cls = AGENTS[name]
    except KeyError:
        raise ValueError(f"unknown algorithm {name!r}; expected one of {sorted(AGENTS)}") from None
    return cls(n_arms, horizon, radius=radius)
