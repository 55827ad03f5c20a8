"""Monte-Carlo checks of the concentration lemmas behind the regret analysis.

Each check runs independent seeded trials through :class:`Environment`,
counts the trials in which the lemma's bad event occurs, and compares that
rate with the lemma's probability ceiling.  The verdict is

    pass  iff  rate <= ceiling + 3 * sqrt(ceiling * (1 - ceiling) / trials)

i.e. three binomial standard errors of a rate sitting exactly at the
ceiling.  With the default trial counts the slack is below ``1 / trials``,
so a pass means zero observed bad events.

Every check has a negative control: a deliberately wrong configuration that
must fail, showing the check can detect a violation at all.
"""

from __future__ import annotations

import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from functools import partial
from typing import Callable, Sequence

import numpy as np

from .algorithms import OptimisticPessimisticSE
from .distributions import INFINITY, ArmModel, Bernoulli, Fixed, PacketLoss, PointMass, TwoPoint
from .environment import Environment, play
from .harness import default_threads, mix_seed
from .instances import InstanceSpec, make_dep_lower


@dataclass
class OracleReport:
    lemma: str
    trials: int
    failures: int
    ceiling: float
    params: dict = field(default_factory=dict)
    vacuous: bool = False
    note: str = ""

    @property
    def rate(self) -> float:
        return self.failures / self.trials if self.trials else 0.0

    @property
    def slack(self) -> float:
        c = min(max(self.ceiling, 0.0), 1.0)
        return 3.0 * math.sqrt(c * (1.0 - c) / self.trials) if self.trials else 0.0

    @property
    def passed(self) -> bool:
        return self.rate <= self.ceiling + self.slack

    def line(self) -> str:
        verdict = "PASS" if self.passed else "FAIL"
        extra = " (vacuous)" if self.vacuous else ""
        return (
            f"{self.lemma}: {verdict}{extra} trials={self.trials} failures={self.failures} "
            f"rate={self.rate:.3g} ceiling={self.ceiling:.3g} slack={self.slack:.3g}"
        )


def _count_failures(trial: Callable[[int], bool], seed: int, trials: int, threads: int | None) -> int:
    """Number of trials ``j`` with ``trial(mix_seed(seed, j))`` true."""
    threads = threads or 1
    if threads <= 1 or trials < 2 * threads:
        return sum(bool(trial(mix_seed(seed, j))) for j in range(trials))
    bounds = np.linspace(0, trials, threads * 4 + 1).astype(int)
    chunks = [(int(a), int(b)) for a, b in zip(bounds[:-1], bounds[1:]) if b > a]
    with ProcessPoolExecutor(max_workers=threads) as pool:
        return sum(pool.map(partial(_chunk, trial, seed), chunks))


def _chunk(trial, seed, span) -> int:
    a, b = span
    return sum(bool(trial(mix_seed(seed, j))) for j in range(a, b))


def _deliveries_by_round(env: Environment, arm_of_round: Sequence[int], watch: int) -> np.ndarray:
    """Step ``env`` through the given arm sequence; per-round count of delivered
    feedback for arm ``watch``."""
    out = np.zeros(len(arm_of_round), dtype=np.int64)
    step = env.step
    for k, arm in enumerate(arm_of_round):
        events = step(arm)
        if events:
            out[k] = sum(1 for e in events if e.arm == watch)
    return out


# ---------------------------------------------------------------------------
# estimator concentration


def _concentration_trial(arms, T, pulls_per_arm, factor, seed) -> bool:
    K = len(arms)
    rounds = K * pulls_per_arm
    env = Environment(arms, rounds, seed)
    log_T = math.log(T)
    means = [a.mean for a in arms]
    n = [0] * K
    s = [0.0] * K
    step = env.step
    for k in range(rounds):
        for arm, r in step(k % K):
            n[arm] += 1
            s[arm] += r
            if abs(s[arm] / n[arm] - means[arm]) > factor * math.sqrt(2.0 * log_T / n[arm]):
                return True
    return False


def check_estimator_concentration(
    T: int = 1000,
    K: int = 3,
    pulls_per_arm: int | None = None,
    trials: int = 10_000,
    *,
    arms: Sequence[ArmModel] | None = None,
    radius_factor: float = 1.0,
    seed: int = 0,
    threads: int | None = None,
) -> OracleReport:
    """Bad event: some arm's observed mean leaves ``mean +- sqrt(2 log T / n)``
    at any moment it has ``n`` observations.  Ceiling ``2 / T**2``.

    Arms default to ``K`` fair coins without delay and are played
    round-robin for ``pulls_per_arm`` (default ``T // K``) pulls each.
    ``radius_factor`` scales the radius; 0.5 is the negative control.
    """
    if arms is None:
        arms = [ArmModel.independent(Bernoulli(0.5), Fixed(0)) for _ in range(K)]
    arms = list(arms)
    if not all(a.reward_independent for a in arms):
        raise ValueError("estimator concentration needs reward-independent delays")
    pulls = pulls_per_arm if pulls_per_arm is not None else T // len(arms)
    trial = partial(_concentration_trial, arms, T, pulls, radius_factor)
    failures = _count_failures(trial, seed, trials, threads)
    return OracleReport(
        "estimator_concentration",
        trials,
        failures,
        2.0 / T**2,
        params={"T": T, "K": len(arms), "pulls_per_arm": pulls, "radius_factor": radius_factor},
    )


# ---------------------------------------------------------------------------
# Chernoff quantile bound


def _wait_for(dist, q) -> tuple[int, bool]:
    d = dist.quantile(q)
    if d != INFINITY:
        return int(d), False
    finite = [a for a, _ in dist.atoms() if a != INFINITY] if hasattr(dist, "atoms") else []
    return (int(max(finite)) if finite else 0), True


def _chernoff_trial(dist, q, m, wait, seed) -> bool:
    arms = [ArmModel.independent(PointMass(0.0), dist), ArmModel.independent(PointMass(0.0), Fixed(0))]
    env = Environment(arms, m + wait, seed)
    seen = _deliveries_by_round(env, [0] * m + [1] * wait, watch=0)
    return seen.sum() < q * m / 2.0


def check_chernoff_quantile(
    dist,
    q: float,
    m: int,
    trials: int,
    *,
    wait: int | None = None,
    seed: int = 0,
    threads: int | None = None,
) -> OracleReport:
    """Bad event: fewer than ``q m / 2`` of ``m`` consecutive pulls are
    observed by round ``m + d(q)``.  Ceiling ``exp(-q m / 8)``.

    When ``d(q)`` is infinite the wait is the largest finite atom of the law
    (zero if there is none) and the report is flagged vacuous.  ``wait``
    overrides the quantile wait; it exists for the negative control.
    """
    vacuous = False
    if wait is None:
        wait, vacuous = _wait_for(dist, q)
    trial = partial(_chernoff_trial, dist, q, m, wait)
    failures = _count_failures(trial, seed, trials, threads)
    return OracleReport(
        "chernoff_quantile",
        trials,
        failures,
        math.exp(-q * m / 8.0),
        params={"dist": dist.to_dict(), "q": q, "m": m, "wait": wait},
        vacuous=vacuous,
    )


# ---------------------------------------------------------------------------
# Hoeffding quantile bound


def _hoeffding_trial(dist, q, m, d, log_T, seed) -> bool:
    env = Environment([ArmModel.independent(PointMass(0.0), dist)], m, seed)
    n_t = np.cumsum(_deliveries_by_round(env, [0] * m, watch=0))
    t = np.arange(1, m + 1)
    lagged = np.maximum(t - d, 0)
    return bool(np.any(n_t < q * lagged - np.sqrt(2.0 * log_T * t)))


def check_hoeffding_quantile(
    dist,
    q: float,
    m: int,
    trials: int,
    *,
    T: int = 100,
    lag: int | None = None,
    seed: int = 0,
    threads: int | None = None,
) -> OracleReport:
    """Bad event: at some round ``t <= m`` of a single arm pulled every round,
    ``n_t < q m_{t - d(q)} - sqrt(2 log T m_t)``.  Ceiling ``T**-4``.

    ``T`` only enters through ``log T``.  ``lag`` overrides ``d(q)`` (negative
    control); an infinite quantile makes the lagged pull count zero, so the
    event is impossible and the report is flagged vacuous.
    """
    vacuous = False
    if lag is None:
        d = dist.quantile(q)
        vacuous = d == INFINITY
        lag = m if vacuous else int(d)
    trial = partial(_hoeffding_trial, dist, q, m, lag, math.log(T))
    failures = _count_failures(trial, seed, trials, threads)
    return OracleReport(
        "hoeffding_quantile",
        trials,
        failures,
        float(T) ** -4,
        params={"dist": dist.to_dict(), "q": q, "m": m, "T": T, "lag": lag},
        vacuous=vacuous,
    )


# ---------------------------------------------------------------------------
# interval size for the optimistic/pessimistic estimators


def _interval_trial(inst_arms, horizon, qs, lags, radius, seed) -> tuple[bool, bool]:
    """(interval inequality violated somewhere, violated where Hoeffding held)."""
    K = len(inst_arms)
    env = Environment(inst_arms, horizon, seed)
    agent = OptimisticPessimisticSE(K, horizon, radius=radius)
    seen = np.zeros((horizon, K), dtype=np.int64)

    def hook(t, arm, events):
        for e in events:
            seen[t - 1, e.arm] += 1

    play(agent, env, on_round=hook)
    actions = np.asarray(env.actions)
    m = np.cumsum(actions[:, None] == np.arange(K), axis=0)
    n = np.cumsum(seen, axis=0)
    log_T = math.log(horizon)
    any_bad = cond_bad = False
    t = np.arange(1, horizon + 1)
    for i in range(K):
        mi, ni = m[:, i], n[:, i]
        ok = mi > 0
        if not ok.any():
            continue
        lag_idx = t - lags[i]
        m_lag = np.where(lag_idx >= 1, mi[np.clip(lag_idx - 1, 0, None)], 0)
        mm = np.where(ok, mi, 1)
        lhs = (mm - ni) / mm
        rhs = (mm - m_lag) / mm + 1.0 - qs[i] + np.sqrt(2.0 * log_T / mm)
        bad = ok & (lhs > rhs + 1e-12)
        hoeffding = ni >= qs[i] * m_lag - np.sqrt(2.0 * log_T * mm)
        any_bad |= bool(bad.any())
        cond_bad |= bool((bad & hoeffding).any())
    return any_bad, cond_bad


def check_interval_size(
    instance: InstanceSpec | None = None,
    rounds: int = 2000,
    trials: int = 2000,
    *,
    q: Sequence[float] | float | None = None,
    lags: Sequence[int] | None = None,
    radius=None,
    seed: int = 0,
    threads: int | None = None,
) -> OracleReport:
    """Bad event: along an OPSE trace, some arm has
    ``(m - n) / m > (m_t - m_{t-d(q)}) / m_t + 1 - q + sqrt(2 log T / m_t)``.
    Ceiling ``T**-4``.

    The inequality is implied by the Hoeffding event, so violations at steps
    where that event holds are counted separately in ``params`` and must be
    zero.  Defaults: the I1 lower-bound pair with delta 0.1, lag 200,
    ``q = 1 - 2 delta`` and lags ``d_i(q)`` from the marginal delay laws.
    """
    if instance is None:
        instance = make_dep_lower("I1", 0.1, 200)
    K = instance.K
    if q is None:
        delta = float(instance.params.get("delta", 0.1))
        q = 1.0 - 2.0 * delta
    qs = [float(q)] * K if np.isscalar(q) else [float(x) for x in q]
    if lags is None:
        lags = []
        for arm, qi in zip(instance.arms, qs):
            d = arm.marginal_delay().quantile(qi)
            lags.append(rounds + 1 if d == INFINITY else int(d))
    lags = [int(x) for x in lags]
    threads = threads or 1
    trial = partial(_interval_trial, list(instance.arms), rounds, qs, lags, radius)
    if threads <= 1:
        results = [trial(mix_seed(seed, j)) for j in range(trials)]
    else:
        with ProcessPoolExecutor(max_workers=threads) as pool:
            results = list(pool.map(trial, [mix_seed(seed, j) for j in range(trials)], chunksize=max(1, trials // (4 * threads))))
    failures = sum(a for a, _ in results)
    conditional = sum(c for _, c in results)
    return OracleReport(
        "interval_size",
        trials,
        failures,
        float(rounds) ** -4,
        params={"instance": instance.name, "T": rounds, "q": qs, "lags": lags, "conditional_violations": conditional},
    )


# ---------------------------------------------------------------------------
# the named suite

LEMMAS = ("estimator_concentration", "chernoff_quantile", "hoeffding_quantile", "interval_size")


def _suite(full: bool):
    """(lemma, positive checks, negative control) as zero-argument callables taking threads."""
    scale = 10 if full else 1
    return {
        "estimator_concentration": (
            [lambda th: check_estimator_concentration(1000, 3, trials=10_000, threads=th)],
            lambda th: check_estimator_concentration(1000, 3, trials=200, radius_factor=0.5, threads=th),
        ),
        "chernoff_quantile": (
            [
                lambda th: check_chernoff_quantile(PacketLoss(0.5), 0.5, 200, 20_000 * (5 if full else 1), threads=th),
                lambda th: check_chernoff_quantile(TwoPoint(10, 0.4), 0.4, 400, 5_000 * scale, threads=th),
            ],
            lambda th: check_chernoff_quantile(PacketLoss(0.3), 0.9, 200, 200, wait=0, threads=th),
        ),
        "hoeffding_quantile": (
            [lambda th: check_hoeffding_quantile(PacketLoss(0.7), 0.7, 300, 20_000 * (5 if full else 1), T=100, threads=th)],
            lambda th: check_hoeffding_quantile(PacketLoss(0.7), 0.95, 300, 200, T=100, lag=0, threads=th),
        ),
        "interval_size": (
            [lambda th: check_interval_size(trials=2000 * (5 if full else 1), threads=th)],
            lambda th: check_interval_size(trials=50, q=1.0, lags=[0, 0], threads=th),
        ),
    }


@dataclass
class SuiteResult:
    reports: list[tuple[OracleReport, bool]]  # (report, is_negative_control)

    @property
    def ok(self) -> bool:
        for rep, control in self.reports:
            if control == rep.passed:
                return False
            if not control and rep.params.get("conditional_violations", 0):
                return False
        return True

    def lines(self) -> list[str]:
        out = []
        for rep, control in self.reports:
            if control:
                status = "ok, control failed as expected" if not rep.passed else "BAD, control passed"
                out.append(f"[control] {rep.line()} -> {status}")
            else:
                out.append(rep.line())
        return out


def run_suite(lemma: str | None = None, *, full: bool = False, threads: int | None = None, controls: bool = True) -> SuiteResult:
    suite = _suite(full)
    if lemma is not None and lemma not in suite:
        raise ValueError(f"unknown lemma {lemma!r}; expected one of {LEMMAS}")
    threads = threads or default_threads()
    reports = []
    for name in LEMMAS:
        if lemma is not None and name != lemma:
            continue
        checks, control = suite[name]
        for chk in checks:
            reports.append((chk(threads), False))
        if controls:
            reports.append((control(threads), True))
    return SuiteResult(reports)
