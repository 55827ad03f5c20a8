"""Reward and delay laws for a single arm.

Delays live in the naturals extended with ``INFINITY``; an infinite delay means
the feedback never arrives.  Finite delays are plain ``int`` and ``INFINITY`` is
``math.inf``, so ordering comparisons work without a wrapper type.

Every sampler consumes exactly one uniform draw per call, whatever the outcome
(including infinite delays and point masses).  Two environments that differ
only in their delay laws therefore stay aligned on the same random stream.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Iterable, Mapping, Sequence, Union

import numpy as np

INFINITY = math.inf

# Delays past this are beyond any simulated horizon; Pareto draws are clipped
# here instead of overflowing.
DELAY_CAP = 2**62

PROB_TOL = 1e-12

Delay = Union[int, float]


def is_finite(delay: Delay) -> bool:
    return delay != INFINITY


def check_delay(delay) -> Delay:
    if delay == INFINITY:
        return INFINITY
    if isinstance(delay, float):
        if not delay.is_integer():
            raise ValueError(f"delay must be a natural number or INFINITY, got {delay!r}")
        delay = int(delay)
    if not isinstance(delay, (int, np.integer)) or delay < 0:
        raise ValueError(f"delay must be a natural number or INFINITY, got {delay!r}")
    return int(delay)


def _check_prob(p: float, name: str = "probability") -> float:
    p = float(p)
    if not 0.0 <= p <= 1.0 or math.isnan(p):
        raise ValueError(f"{name} must lie in [0, 1], got {p}")
    return p


def _check_q(q: float) -> float:
    q = float(q)
    if not 0.0 < q <= 1.0:
        raise ValueError(f"quantile level must lie in (0, 1], got {q}")
    return q


class UniformStream:
    """Buffered stream of U[0, 1) doubles drawn from a seeded numpy generator.

    Scalar calls into ``numpy.random.Generator`` dominate a per-round simulation
    loop, so uniforms are drawn in blocks and handed out one at a time.  The
    sequence is a pure function of the generator state.
    """

    __slots__ = ("_gen", "_buf", "_pos", "_block")

    def __init__(self, gen: np.random.Generator | int | None = None, block: int = 4096):
        if not isinstance(gen, np.random.Generator):
            gen = np.random.Generator(np.random.PCG64(gen))
        self._gen = gen
        self._block = block
        self._buf: list[float] = []
        self._pos = 0

    def __call__(self) -> float:
        pos = self._pos
        if pos == len(self._buf):
            self._buf = self._gen.random(self._block).tolist()
            pos = 0
        self._pos = pos + 1
        return self._buf[pos]

    def take(self, n: int) -> np.ndarray:
        return np.fromiter((self() for _ in range(n)), dtype=float, count=n)


# ---------------------------------------------------------------------------
# rewards


@dataclass(frozen=True)
class Bernoulli:
    p: float

    def __post_init__(self):
        _check_prob(self.p, "Bernoulli p")

    def mean(self) -> float:
        return self.p

    def support(self) -> tuple[float, ...]:
        return (0.0, 1.0)

    def pmf(self, value: float) -> float:
        return self.p if value == 1.0 else (1.0 - self.p if value == 0.0 else 0.0)

    def from_uniform(self, u: float) -> float:
        return 1.0 if u < self.p else 0.0

    def to_dict(self) -> dict:
        return {"kind": "bernoulli", "p": self.p}


@dataclass(frozen=True)
class PointMass:
    v: float

    def __post_init__(self):
        _check_prob(self.v, "PointMass value")

    def mean(self) -> float:
        return self.v

    def support(self) -> tuple[float, ...]:
        return (float(self.v),)

    def pmf(self, value: float) -> float:
        return 1.0 if value == self.v else 0.0

    def from_uniform(self, u: float) -> float:
        return float(self.v)

    def to_dict(self) -> dict:
        return {"kind": "point_mass", "v": self.v}


RewardDist = Union[Bernoulli, PointMass]


# ---------------------------------------------------------------------------
# delays


class _DelayBase:
    def cdf(self, gamma: Delay) -> float:  # pragma: no cover - abstract
        raise NotImplementedError

    def quantile(self, q: float) -> Delay:  # pragma: no cover - abstract
        raise NotImplementedError

    def prob_finite(self) -> float:
        return self.cdf(DELAY_CAP)


@dataclass(frozen=True)
class Fixed(_DelayBase):
    d: int

    def __post_init__(self):
        d = check_delay(self.d)
        if d == INFINITY:
            raise ValueError("Fixed delay must be finite; use PacketLoss(0) for lost feedback")
        object.__setattr__(self, "d", d)

    def from_uniform(self, u: float) -> Delay:
        return self.d

    def cdf(self, gamma: Delay) -> float:
        return 1.0 if gamma >= self.d else 0.0

    def quantile(self, q: float) -> Delay:
        _check_q(q)
        return self.d

    def atoms(self) -> list[tuple[Delay, float]]:
        return [(self.d, 1.0)]

    def to_dict(self) -> dict:
        return {"kind": "fixed", "d": self.d}


@dataclass(frozen=True)
class PacketLoss(_DelayBase):
    """Zero delay with probability ``p``, lost forever otherwise."""

    p: float

    def __post_init__(self):
        _check_prob(self.p, "PacketLoss p")

    def from_uniform(self, u: float) -> Delay:
        return 0 if u < self.p else INFINITY

    def cdf(self, gamma: Delay) -> float:
        if gamma == INFINITY:
            return 1.0
        return self.p if gamma >= 0 else 0.0

    def quantile(self, q: float) -> Delay:
        q = _check_q(q)
        return 0 if q <= self.p else INFINITY

    def atoms(self) -> list[tuple[Delay, float]]:
        return [(0, self.p), (INFINITY, 1.0 - self.p)]

    def to_dict(self) -> dict:
        return {"kind": "packet_loss", "p": self.p}


@dataclass(frozen=True)
class TwoPoint(_DelayBase):
    """Delay ``d`` with probability ``q``, lost forever otherwise."""

    d: int
    q: float

    def __post_init__(self):
        d = check_delay(self.d)
        if d == INFINITY:
            raise ValueError("TwoPoint delay must be finite")
        object.__setattr__(self, "d", d)
        _check_prob(self.q, "TwoPoint q")

    def from_uniform(self, u: float) -> Delay:
        return self.d if u < self.q else INFINITY

    def cdf(self, gamma: Delay) -> float:
        if gamma == INFINITY:
            return 1.0
        return self.q if gamma >= self.d else 0.0

    def quantile(self, q: float) -> Delay:
        q = _check_q(q)
        return self.d if q <= self.q else INFINITY

    def atoms(self) -> list[tuple[Delay, float]]:
        return [(self.d, self.q), (INFINITY, 1.0 - self.q)]

    def to_dict(self) -> dict:
        return {"kind": "two_point", "d": self.d, "q": self.q}


@dataclass(frozen=True)
class Pareto(_DelayBase):
    """Ceiling of a continuous Pareto(alpha, scale 1) draw.

    Support starts at 1 and ``Pr[D <= g] = 1 - g**(-alpha)`` holds exactly for
    every integer ``g >= 1``.
    """

    alpha: float

    def __post_init__(self):
        if not self.alpha > 0 or math.isinf(self.alpha):
            raise ValueError(f"Pareto alpha must be a positive real, got {self.alpha}")

    def from_uniform(self, u: float) -> Delay:
        # 1 - u lies in (0, 1], so the draw is always >= 1
        log_x = -math.log1p(-u) / self.alpha
        if log_x > 43.0:  # e**43 > 2**62
            return DELAY_CAP
        return min(math.ceil(math.exp(log_x)), DELAY_CAP)

    def cdf(self, gamma: Delay) -> float:
        if gamma == INFINITY:
            return 1.0
        g = math.floor(gamma)
        if g < 1:
            return 0.0
        return -math.expm1(-self.alpha * math.log(g))

    def quantile(self, q: float) -> Delay:
        q = _check_q(q)
        if q == 1.0:
            return INFINITY
        x = math.exp(-math.log1p(-q) / self.alpha)
        if x >= DELAY_CAP:
            return INFINITY
        g = max(1, math.ceil(x))
        # float rounding can land one step off either way
        while g > 1 and self.cdf(g - 1) >= q:
            g -= 1
        while self.cdf(g) < q:
            g += 1
        return g

    def to_dict(self) -> dict:
        return {"kind": "pareto", "alpha": self.alpha}


@dataclass(frozen=True)
class Table(_DelayBase):
    """Finite-support delay law given as ``(delay, probability)`` entries."""

    entries: tuple[tuple[Delay, float], ...]
    _delays: tuple = field(init=False, repr=False, compare=False)
    _cum: tuple = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        cleaned = []
        for delay, p in self.entries:
            cleaned.append((check_delay(delay), _check_prob(p, "Table entry probability")))
        total = math.fsum(p for _, p in cleaned)
        if abs(total - 1.0) > PROB_TOL:
            raise ValueError(f"Table probabilities must sum to 1, got {total!r}")
        merged: dict[Delay, float] = {}
        for delay, p in cleaned:
            if p > 0.0:
                merged[delay] = merged.get(delay, 0.0) + p
        support = sorted(merged)
        cum, acc = [], 0.0
        for delay in support:
            acc += merged[delay]
            cum.append(acc)
        cum[-1] = 1.0
        object.__setattr__(self, "entries", tuple((d, p) for d, p in cleaned))
        object.__setattr__(self, "_delays", tuple(support))
        object.__setattr__(self, "_cum", tuple(cum))

    def from_uniform(self, u: float) -> Delay:
        for delay, c in zip(self._delays, self._cum):
            if u < c:
                return delay
        return self._delays[-1]

    def cdf(self, gamma: Delay) -> float:
        out = 0.0
        for delay, c in zip(self._delays, self._cum):
            if delay <= gamma:
                out = c
            else:
                break
        return out

    def quantile(self, q: float) -> Delay:
        q = _check_q(q)
        for delay, c in zip(self._delays, self._cum):
            if delay == INFINITY:
                break
            if c >= q:
                return delay
        return INFINITY

    def atoms(self) -> list[tuple[Delay, float]]:
        prev = 0.0
        out = []
        for delay, c in zip(self._delays, self._cum):
            out.append((delay, c - prev))
            prev = c
        return out

    def to_dict(self) -> dict:
        return {
            "kind": "table",
            "entries": [[_delay_to_json(d), p] for d, p in self.entries],
        }


@dataclass(frozen=True)
class Mixture(_DelayBase):
    """Weighted mixture of delay laws; used for the marginal delay of an arm."""

    components: tuple[tuple[float, _DelayBase], ...]

    def cdf(self, gamma: Delay) -> float:
        return math.fsum(w * dist.cdf(gamma) for w, dist in self.components)

    def quantile(self, q: float) -> Delay:
        q = _check_q(q)
        if self.cdf(DELAY_CAP) < q:
            return INFINITY
        lo, hi = 0, DELAY_CAP
        if self.cdf(0) >= q:
            return 0
        # invariant: cdf(lo) < q <= cdf(hi)
        while hi - lo > 1:
            mid = (lo + hi) // 2
            if self.cdf(mid) >= q:
                hi = mid
            else:
                lo = mid
        return hi


DelayDist = Union[Fixed, PacketLoss, TwoPoint, Pareto, Table]


def quantile(dist: _DelayBase, q: float) -> Delay:
    """Smallest natural ``g`` with ``Pr[D <= g] >= q``; INFINITY when none exists."""
    return dist.quantile(q)


def _delay_to_json(d: Delay):
    return "inf" if d == INFINITY else d


def _delay_from_json(d) -> Delay:
    if isinstance(d, str) and d.lower() in ("inf", "infinity"):
        return INFINITY
    return check_delay(d)


# ---------------------------------------------------------------------------
# joint law


@dataclass(frozen=True)
class ArmModel:
    """Joint reward/delay law of one arm.

    ``delay_given_reward`` maps each reward support point to the delay law used
    when that reward is realised.  Reward-independent arms map every support
    point to the same law; build them with :meth:`independent`.
    """

    reward: RewardDist
    delay_given_reward: Mapping[float, DelayDist]

    def __post_init__(self):
        mapping = {float(k): v for k, v in self.delay_given_reward.items()}
        support = self.reward.support()
        missing = [r for r in support if r not in mapping]
        extra = [r for r in mapping if r not in support]
        if missing or extra:
            raise ValueError(
                f"delay laws must cover exactly the reward support {support}; "
                f"missing {missing}, unexpected {extra}"
            )
        object.__setattr__(self, "delay_given_reward", mapping)

    @classmethod
    def independent(cls, reward: RewardDist, delay: DelayDist) -> "ArmModel":
        return cls(reward, {r: delay for r in reward.support()})

    @property
    def mean(self) -> float:
        return self.reward.mean()

    @property
    def reward_independent(self) -> bool:
        laws = list(self.delay_given_reward.values())
        return all(law == laws[0] for law in laws[1:])

    def marginal_delay(self) -> _DelayBase:
        laws = list(self.delay_given_reward.values())
        if self.reward_independent:
            return laws[0]
        return Mixture(
            tuple(
                (self.reward.pmf(r), law)
                for r, law in self.delay_given_reward.items()
                if self.reward.pmf(r) > 0
            )
        )

    def delay_quantile(self, q: float) -> Delay:
        return self.marginal_delay().quantile(q)

    def to_dict(self) -> dict:
        if self.reward_independent:
            law = next(iter(self.delay_given_reward.values()))
            return {"reward": self.reward.to_dict(), "delay": law.to_dict()}
        return {
            "reward": self.reward.to_dict(),
            "delay_given_reward": {
                repr(float(r)): law.to_dict() for r, law in self.delay_given_reward.items()
            },
        }

    @classmethod
    def from_dict(cls, data: Mapping) -> "ArmModel":
        reward = reward_from_dict(data["reward"])
        if "delay" in data:
            return cls.independent(reward, delay_from_dict(data["delay"]))
        return cls(
            reward,
            {float(k): delay_from_dict(v) for k, v in data["delay_given_reward"].items()},
        )


def sample_reward(model: ArmModel, rng: UniformStream) -> float:
    return model.reward.from_uniform(rng())


def sample_delay(model: ArmModel, reward: float, rng: UniformStream) -> Delay:
    try:
        law = model.delay_given_reward[reward]
    except KeyError:
        raise ValueError(f"reward {reward!r} is not in the support of {model.reward}") from None
    return law.from_uniform(rng())


def reward_from_dict(data: Mapping) -> RewardDist:
    kind = data.get("kind")
    if kind == "bernoulli":
        return Bernoulli(float(data["p"]))
    if kind == "point_mass":
        return PointMass(float(data["v"]))
    raise ValueError(f"unknown reward kind {kind!r}")


def delay_from_dict(data: Mapping) -> DelayDist:
    kind = data.get("kind")
    if kind == "fixed":
        return Fixed(int(data["d"]))
    if kind == "packet_loss":
        return PacketLoss(float(data["p"]))
    if kind == "two_point":
        return TwoPoint(int(data["d"]), float(data["q"]))
    if kind == "pareto":
        return Pareto(float(data["alpha"]))
    if kind == "table":
        return Table(tuple((_delay_from_json(d), float(p)) for d, p in data["entries"]))
    raise ValueError(f"unknown delay kind {kind!r}")


def empirical_cdf(samples: Iterable[Delay], points: Sequence[int]) -> np.ndarray:
    arr = np.asarray([s if s != INFINITY else np.inf for s in samples], dtype=float)
    arr.sort()
    return np.searchsorted(arr, np.asarray(points, dtype=float), side="right") / len(arr)
