"""Run records, cross-run aggregation and CSV output."""

from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np

RUN_HEADER = ("instance", "algorithm", "seed", "round", "cum_regret")
AGG_HEADER = ("instance", "algorithm", "round", "mean", "stderr", "runs")


def fmt(x: float) -> str:
    return f"{x:.9g}"


@dataclass
class RunRecord:
    instance: str
    algorithm: str
    seed: int
    checkpoints: list[int]
    regret_curve: list[float]
    m: list[int] = field(default_factory=list)
    n: list[int] = field(default_factory=list)
    eliminated_optimal: bool = False
    actions: list[int] | None = None

    @property
    def final_regret(self) -> float:
        return self.regret_curve[-1] if self.regret_curve else 0.0


def checkpoint_rounds(T: int, every: int) -> list[int]:
    if every < 1:
        raise ValueError("checkpoint interval must be >= 1")
    rounds = list(range(every, T + 1, every))
    if not rounds or rounds[-1] != T:
        rounds.append(T)
    return rounds


def record_checkpointed(run, every: int, keep_actions: bool = False) -> RunRecord:
    """Thin a finished run to its regret at rounds ``every, 2*every, ..., T``."""
    env, agent = run.env, run.agent
    T = env.completed_rounds
    rounds = checkpoint_rounds(T, every)
    curve = env.regret_curve()
    idx = np.asarray(rounds, dtype=np.int64) - 1
    optimal = getattr(run, "optimal_arm", None)
    eliminated = getattr(agent, "eliminated", ())
    return RunRecord(
        instance=run.instance,
        algorithm=run.algorithm,
        seed=run.seed,
        checkpoints=rounds,
        regret_curve=curve[idx].tolist() if T else [],
        m=list(agent.m),
        n=list(agent.n),
        eliminated_optimal=optimal is not None and optimal in eliminated,
        actions=list(env.actions) if keep_actions else None,
    )


@dataclass
class Aggregate:
    instance: str
    algorithm: str
    checkpoints: list[int]
    mean: np.ndarray
    stderr: np.ndarray
    runs: int
    stderr_defined: bool = True
    eliminated_optimal_rate: float = 0.0

    @property
    def final_mean(self) -> float:
        return float(self.mean[-1])

    @property
    def final_stderr(self) -> float:
        return float(self.stderr[-1])

    def band(self) -> np.ndarray:
        """Half-width of the plotted interval: four standard errors."""
        return 4.0 * self.stderr


def aggregate(records: Sequence[RunRecord]) -> Aggregate:
    """Pointwise mean and standard error (n-1 denominator) across runs.

    Records are put in seed order first, so the result does not depend on the
    order in which parallel runs finished.
    """
    if not records:
        raise ValueError("nothing to aggregate")
    first = records[0]
    for r in records[1:]:
        if (r.instance, r.algorithm) != (first.instance, first.algorithm):
            raise ValueError(
                f"mixed configurations: {(r.instance, r.algorithm)} vs {(first.instance, first.algorithm)}"
            )
        if r.checkpoints != first.checkpoints:
            raise ValueError("records have different checkpoint rounds")
    ordered = sorted(records, key=lambda r: r.seed)
    data = np.array([r.regret_curve for r in ordered], dtype=float)
    runs = len(ordered)
    mean = data.mean(axis=0)
    if runs > 1:
        stderr = data.std(axis=0, ddof=1) / math.sqrt(runs)
    else:
        stderr = np.zeros_like(mean)
    return Aggregate(
        instance=first.instance,
        algorithm=first.algorithm,
        checkpoints=list(first.checkpoints),
        mean=mean,
        stderr=stderr,
        runs=runs,
        stderr_defined=runs > 1,
        eliminated_optimal_rate=sum(r.eliminated_optimal for r in ordered) / runs,
    )


def write_runs_csv(records: Iterable[RunRecord], fh) -> None:
    w = csv.writer(fh, lineterminator="\n")
    w.writerow(RUN_HEADER)
    for r in records:
        for rnd, val in zip(r.checkpoints, r.regret_curve):
            w.writerow((r.instance, r.algorithm, r.seed, rnd, fmt(val)))


def read_runs_csv(fh) -> list[RunRecord]:
    out: dict[tuple, RunRecord] = {}
    reader = csv.reader(fh)
    header = tuple(next(reader))
    if header != RUN_HEADER:
        raise ValueError(f"unexpected header {header}")
    for inst, alg, seed, rnd, val in reader:
        key = (inst, alg, int(seed))
        rec = out.get(key)
        if rec is None:
            rec = out[key] = RunRecord(inst, alg, int(seed), [], [])
        rec.checkpoints.append(int(rnd))
        rec.regret_curve.append(float(val))
    return list(out.values())


def write_aggregate_csv(aggs: Iterable[Aggregate], fh) -> None:
    w = csv.writer(fh, lineterminator="\n")
    w.writerow(AGG_HEADER)
    for a in aggs:
        for rnd, mu, se in zip(a.checkpoints, a.mean, a.stderr):
            w.writerow((a.instance, a.algorithm, rnd, fmt(mu), fmt(se), a.runs))


def read_aggregate_csv(fh) -> list[Aggregate]:
    rows: dict[tuple, list] = {}
    reader = csv.reader(fh)
    header = tuple(next(reader))
    if header != AGG_HEADER:
        raise ValueError(f"unexpected header {header}")
    for inst, alg, rnd, mu, se, runs in reader:
        rows.setdefault((inst, alg, int(runs)), []).append((int(rnd), float(mu), float(se)))
    out = []
    for (inst, alg, runs), vals in rows.items():
        out.append(
            Aggregate(
                instance=inst,
                algorithm=alg,
                checkpoints=[v[0] for v in vals],
                mean=np.array([v[1] for v in vals]),
                stderr=np.array([v[2] for v in vals]),
                runs=runs,
                stderr_defined=runs > 1,
            )
        )
    return out


def to_csv_string(writer, items) -> str:
    buf = io.StringIO()
    writer(items, buf)
    return buf.getvalue()
