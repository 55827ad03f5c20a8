"""The delayed-feedback bandit protocol.

Each round the agent names an arm, the environment draws a (reward, delay)
pair for that arm and schedules the feedback.  Feedback generated at round
``s`` with delay ``d`` is handed out at the end of round ``s + d`` and is
therefore usable from round ``s + d + 1`` on; ``d = 0`` feedback comes back in
the same call to :meth:`Environment.step`.  Infinite delays are counted and
never delivered.

Agents only ever see :class:`FeedbackEvent` tuples.  The realised rewards of
every pull are kept on the environment (``actions``/``rewards``) for metrics
and oracles; nothing in the agent interface exposes them.
"""

from __future__ import annotations

from typing import Callable, NamedTuple, Sequence

import numpy as np

from .distributions import INFINITY, ArmModel, UniformStream


class FeedbackEvent(NamedTuple):
    """Observed feedback: which arm, and its reward.  No round, no delay."""

    arm: int
    reward: float


class HorizonExceeded(RuntimeError):
    pass


class Environment:
    """Mutable state of one run of the protocol.

    Args:
        arms: joint reward/delay law per arm.
        horizon: number of rounds ``T``.
        rng: seed, numpy generator, or an existing :class:`UniformStream`.
        full_vector: draw the (reward, delay) pair of *every* arm each round and
            keep only the chosen coordinate, as in the textbook protocol.  The
            default draws the chosen arm only; both give the same law.
    """

    def __init__(
        self,
        arms: Sequence[ArmModel],
        horizon: int,
        rng=None,
        *,
        full_vector: bool = False,
    ):
        if horizon < 1:
            raise ValueError("horizon must be >= 1")
        if not arms:
            raise ValueError("need at least one arm")
        self.arms = list(arms)
        self.K = len(self.arms)
        self.horizon = int(horizon)
        self.full_vector = full_vector
        self._u = rng if isinstance(rng, UniformStream) else UniformStream(rng)

        means = np.array([a.mean for a in self.arms], dtype=float)
        self.means = means
        self.gaps = (means.max() - means).tolist()

        self._reward_fn = [a.reward.from_uniform for a in self.arms]
        self._delay_fn = [
            {r: law.from_uniform for r, law in a.delay_given_reward.items()} for a in self.arms
        ]

        self.t = 1
        self.pending: dict[int, list[FeedbackEvent]] = {}
        self.pending_count = 0
        self.beyond_horizon = 0
        self.delivered_count = 0
        self.dropped_count = 0
        self.actions: list[int] = []
        self.rewards: list[float] = []
        self.pulls = [0] * self.K
        self.true_reward_sum = [0.0] * self.K
        self._regret = 0.0

    def _draw(self, arm: int) -> tuple[float, float]:
        u = self._u
        r = self._reward_fn[arm](u())
        return r, self._delay_fn[arm][r](u())

    def step(self, arm: int) -> list[FeedbackEvent]:
        """Play ``arm`` in the current round and return feedback arriving now."""
        t = self.t
        if t > self.horizon:
            raise HorizonExceeded(f"round {t} is past the horizon {self.horizon}")
        if not 0 <= arm < self.K:
            raise IndexError(f"arm {arm} out of range for K={self.K}")

        if self.full_vector:
            pairs = [self._draw(i) for i in range(self.K)]
            r, d = pairs[arm]
        else:
            r, d = self._draw(arm)

        self.actions.append(arm)
        self.rewards.append(r)
        self.pulls[arm] += 1
        self.true_reward_sum[arm] += r
        self._regret += self.gaps[arm]

        event = FeedbackEvent(arm, r)
        arrived = self.pending.pop(t, None)
        if arrived is not None:
            self.pending_count -= len(arrived)
        else:
            arrived = []
        if d == 0:
            arrived.append(event)
        elif d == INFINITY:
            self.dropped_count += 1
        elif t + d > self.horizon:
            self.beyond_horizon += 1
        else:
            self.pending.setdefault(t + d, []).append(event)
            self.pending_count += 1
        self.delivered_count += len(arrived)
        self.t = t + 1
        return arrived

    @property
    def completed_rounds(self) -> int:
        return self.t - 1

    @property
    def outstanding(self) -> int:
        """Events generated but not yet delivered (including those past T)."""
        return self.pending_count + self.beyond_horizon

    def conservation_holds(self) -> bool:
        return self.delivered_count + self.outstanding + self.dropped_count == self.completed_rounds

    def pseudo_regret(self) -> float:
        return self._regret

    def regret_curve(self) -> np.ndarray:
        """Cumulative realised-gap sum after each completed round."""
        gaps = np.asarray(self.gaps)
        return np.cumsum(gaps[np.asarray(self.actions, dtype=np.int64)]) if self.actions else np.zeros(0)

    def full_information_mean(self, arm: int) -> float:
        m = self.pulls[arm]
        return self.true_reward_sum[arm] / m if m else float("nan")


def pseudo_regret(gaps: Sequence[float], pulls: Sequence[int]) -> float:
    """Sum of per-pull gaps given per-arm pull counts."""
    return float(sum(g * p for g, p in zip(gaps, pulls)))


def play(
    agent,
    env: Environment,
    rounds: int | None = None,
    on_round: Callable[[int, int, list], None] | None = None,
) -> Environment:
    """Run the agent against the environment until the horizon (or ``rounds``).

    ``on_round(t, arm, delivered)`` is called after feedback has been handed to
    the agent; it is the hook used by the invariant checks.
    """
    last = env.horizon if rounds is None else min(env.horizon, env.t - 1 + rounds)
    choose, observe, step = agent.choose, agent.observe, env.step
    if on_round is None:
        for t in range(env.t, last + 1):
            events = step(choose(t))
            if events:
                observe(events)
    else:
        for t in range(env.t, last + 1):
            arm = choose(t)
            events = step(arm)
            if events:
                observe(events)
            on_round(t, arm, events)
    return env
