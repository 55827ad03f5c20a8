"""Experiment configuration, seeding and orchestration.

Config files are YAML (JSON is accepted too, being a YAML subset)::

    instance:
      preset: fig1                 # or an inline spec: {name: ..., arms: [...]}
      params: {K: 20, d: 0, mean_seed: 0}
    algorithms:
      - se                         # bare name: default radius sqrt(2 log T / n)
      - name: ucb
        radius: {kind: constant, c: 2}
    horizon: 20000
    runs: 100
    base_seed: 0
    checkpoint_every: 100
    sweep: {param: d, values: [0, 50, 100]}   # optional
    output: out/fig1

Run ``j`` of a config uses the generator seed ``mix_seed(base_seed, j)``
(SplitMix64), and the generator itself is numpy's PCG64.
"""

from __future__ import annotations

import copy
import json
import logging
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Callable, Mapping, Sequence

import jsonschema
import numpy as np
import yaml

from . import bounds
from .algorithms import AGENTS, make_agent, radius_from_dict
from .environment import Environment, play
from .instances import INSTANCES, InstanceSpec, make_dep_lower, make_instance
from .metrics import (
    Aggregate,
    RunRecord,
    aggregate,
    fmt,
    record_checkpointed,
    write_aggregate_csv,
    write_runs_csv,
)

log = logging.getLogger(__name__)

THREADS_ENV = "DELAYED_BANDITS_THREADS"

MASK64 = (1 << 64) - 1
_GOLDEN = 0x9E3779B97F4A7C15


class ConfigError(Exception):
    exit_code = 2


class UnknownPresetError(ConfigError):
    exit_code = 4


class OutputError(Exception):
    exit_code = 5


def mix_seed(base_seed: int, index: int) -> int:
    """SplitMix64 output for stream position ``index + 1`` after ``base_seed``.

    The affine step is injective in ``index`` (odd multiplier mod 2**64) and
    the finaliser is a bijection on 64-bit words, so distinct run indices get
    distinct seeds.
    """
    z = (base_seed + (index + 1) * _GOLDEN) & MASK64
    z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & MASK64
    z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & MASK64
    return z ^ (z >> 31)


def mix_seeds(base_seed: int, count: int) -> np.ndarray:
    """Vectorised :func:`mix_seed` for indices ``0..count-1`` (uint64)."""
    with np.errstate(over="ignore"):
        z = np.uint64(base_seed & MASK64) + (np.arange(1, count + 1, dtype=np.uint64) * np.uint64(_GOLDEN))
        z = (z ^ (z >> np.uint64(30))) * np.uint64(0xBF58476D1CE4E5B9)
        z = (z ^ (z >> np.uint64(27))) * np.uint64(0x94D049BB133111EB)
        return z ^ (z >> np.uint64(31))


def default_threads() -> int:
    raw = os.environ.get(THREADS_ENV)
    if raw:
        try:
            return max(1, int(raw))
        except ValueError:
            log.warning("ignoring non-integer %s=%r", THREADS_ENV, raw)
    return os.cpu_count() or 1


# ---------------------------------------------------------------------------
# single runs


@dataclass
class Run:
    instance: str
    algorithm: str
    seed: int
    optimal_arm: int
    env: Environment
    agent: Any


def simulate(
    instance: InstanceSpec,
    algorithm: str,
    horizon: int,
    seed: int,
    radius=None,
    *,
    on_round: Callable | None = None,
    full_vector: bool = False,
    label: str | None = None,
) -> Run:
    env = Environment(instance.arms, horizon, seed, full_vector=full_vector)
    agent = make_agent(algorithm, instance.K, horizon, radius=radius)
    play(agent, env, on_round=on_round)
    return Run(label or instance.name, algorithm, seed, instance.optimal_arm, env, agent)


# ---------------------------------------------------------------------------
# config

_DIST = {"type": "object", "required": ["kind"]}
_ARM = {
    "type": "object",
    "required": ["reward"],
    "properties": {
        "reward": _DIST,
        "delay": _DIST,
        "delay_given_reward": {"type": "object", "additionalProperties": _DIST},
    },
    "oneOf": [{"required": ["delay"]}, {"required": ["delay_given_reward"]}],
}
_RADIUS = {
    "type": "object",
    "properties": {
        "kind": {"enum": ["log", "constant"]},
        "scale": {"type": "number", "exclusiveMinimum": 0},
        "c": {"type": "number", "exclusiveMinimum": 0},
    },
    "additionalProperties": False,
}

CONFIG_SCHEMA = {
    "type": "object",
    "required": ["instance", "algorithms", "horizon", "runs"],
    "additionalProperties": False,
    "properties": {
        "instance": {
            "type": "object",
            "oneOf": [
                {"required": ["preset"]},
                {"required": ["arms"]},
            ],
            "properties": {
                "preset": {"type": "string"},
                "params": {"type": "object"},
                "name": {"type": "string"},
                "arms": {"type": "array", "minItems": 1, "items": _ARM},
                "optimal_arm": {"type": "integer"},
                "gaps": {"type": "array", "items": {"type": "number"}},
                "provenance": {"type": "string"},
            },
        },
        "algorithms": {
            "type": "array",
            "minItems": 1,
            "items": {
                "oneOf": [
                    {"enum": sorted(AGENTS)},
                    {
                        "type": "object",
                        "required": ["name"],
                        "additionalProperties": False,
                        "properties": {"name": {"enum": sorted(AGENTS)}, "radius": _RADIUS},
                    },
                ]
            },
        },
        "horizon": {"type": "integer", "minimum": 2},
        "runs": {"type": "integer", "minimum": 1},
        "base_seed": {"type": "integer", "minimum": 0},
        "checkpoint_every": {"type": "integer", "minimum": 1},
        "sweep": {
            "type": "object",
            "required": ["param", "values"],
            "additionalProperties": False,
            "properties": {"param": {"type": "string"}, "values": {"type": "array", "minItems": 1}},
        },
        "output": {"type": "string"},
        "threads": {"type": "integer", "minimum": 1},
        "choices": {"type": "array", "items": {"type": "string"}},
        "bounds": {"type": "boolean"},
    },
}


@dataclass
class ExperimentConfig:
    instance: dict
    algorithms: list[dict]
    horizon: int
    runs: int
    base_seed: int = 0
    checkpoint_every: int = 0
    sweep: dict | None = None
    output: str | None = None
    threads: int | None = None
    choices: list[str] = field(default_factory=list)
    bounds: bool = True

    @classmethod
    def from_dict(cls, data: Mapping) -> "ExperimentConfig":
        validate_config(data)
        data = copy.deepcopy(dict(data))
        algs = [a if isinstance(a, dict) else {"name": a} for a in data.pop("algorithms")]
        cfg = cls(algorithms=algs, **data)
        if not cfg.checkpoint_every:
            cfg.checkpoint_every = max(1, cfg.horizon // 100)
        cfg.check()
        return cfg

    def to_dict(self) -> dict:
        out = {
            "instance": copy.deepcopy(self.instance),
            "algorithms": copy.deepcopy(self.algorithms),
            "horizon": self.horizon,
            "runs": self.runs,
            "base_seed": self.base_seed,
            "checkpoint_every": self.checkpoint_every,
        }
        for key in ("sweep", "output", "threads"):
            if getattr(self, key) is not None:
                out[key] = copy.deepcopy(getattr(self, key))
        if self.choices:
            out["choices"] = list(self.choices)
        if not self.bounds:
            out["bounds"] = False
        return out

    def instances(self) -> list[tuple[str, InstanceSpec]]:
        """Concrete instances, one per sweep value, with display labels."""
        if self.sweep is None:
            inst = build_instance(self.instance)
            return [(inst.name, inst)]
        out = []
        param = self.sweep["param"]
        for value in self.sweep["values"]:
            spec = copy.deepcopy(self.instance)
            if "preset" not in spec:
                raise ConfigError("instance.sweep: only preset instances can be swept")
            spec.setdefault("params", {})[param] = value
            inst = build_instance(spec)
            out.append((f"{inst.name}[{param}={value}]", inst))
        return out

    def check(self) -> None:
        for label, inst in self.instances():
            if self.horizon < inst.K:
                raise ConfigError(f"horizon: T={self.horizon} is smaller than K={inst.K} ({label})")
        if not 1 <= self.checkpoint_every <= self.horizon:
            raise ConfigError("checkpoint_every: must lie in [1, horizon]")
        for i, alg in enumerate(self.algorithms):
            try:
                radius_from_dict(alg.get("radius"))
            except ValueError as exc:
                raise ConfigError(f"algorithms/{i}/radius: {exc}") from None


def validate_config(data: Any) -> None:
    validator = jsonschema.Draft202012Validator(CONFIG_SCHEMA)
    errors = sorted(validator.iter_errors(data), key=lambda e: list(e.absolute_path))
    if errors:
        err = errors[0]
        path = "/".join(str(p) for p in err.absolute_path) or "<root>"
        raise ConfigError(f"{path}: {err.message}")


def build_instance(spec: Mapping) -> InstanceSpec:
    if "preset" in spec:
        name = spec["preset"]
        if name == "dep-lower":
            params = dict(spec.get("params", {}))
            return make_dep_lower(params.pop("variant", "I1"), **_defaults_dep(params))
        if name not in INSTANCES:
            raise UnknownPresetError(f"instance/preset: unknown instance {name!r}")
        try:
            return make_instance(name, **spec.get("params", {}))
        except (TypeError, ValueError) as exc:
            raise ConfigError(f"instance/params: {exc}") from None
    try:
        return InstanceSpec.from_dict(spec)
    except (KeyError, TypeError, ValueError) as exc:
        raise ConfigError(f"instance: {exc}") from None


def _defaults_dep(params: dict) -> dict:
    return {"delta": params.get("delta", 0.1), "d_tilde": params.get("d_tilde", 1000)}


def load_config(path: str | os.PathLike) -> ExperimentConfig:
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from None
    try:
        data = yaml.safe_load(text)
    except yaml.YAMLError as exc:
        raise ConfigError(f"config is not valid YAML/JSON: {exc}") from None
    return ExperimentConfig.from_dict(data)


# ---------------------------------------------------------------------------
# presets

_FIG1_RADIUS = {"kind": "constant", "c": 2.0}


def preset(name: str) -> ExperimentConfig:
    """Experiment configs mirroring the published experiments.

    Values not fixed by the source are listed in ``choices``.
    """
    if name == "fig1":
        data = {
            "instance": {"preset": "fig1", "params": {"K": 20, "mean_seed": 0}},
            "algorithms": [{"name": "ucb", "radius": _FIG1_RADIUS}, {"name": "se", "radius": _FIG1_RADIUS}],
            "horizon": 20_000,
            "runs": 100,
            "checkpoint_every": 200,
            "sweep": {"param": "d", "values": [0, 50, 100, 200, 400, 500, 800]},
            "choices": [
                "arm means drawn once from mean_seed=0 and shared by all runs",
                "delay grid {0,50,100,200,400,500,800}",
            ],
        }
    elif name == "fig1-sweep":
        data = preset("fig1").to_dict()
        data.update(horizon=200_000, checkpoint_every=2000)
        data["sweep"] = {"param": "d", "values": [0, 50, 100, 200, 400, 800]}
        data["choices"] = ["delay grid {0,50,100,200,400,800}", "arm means drawn once from mean_seed=0"]
    elif name == "fig2":
        data = {
            "instance": {"preset": "fig2", "params": {"alpha1": 1.0, "alpha2": 0.2}},
            "algorithms": ["se"],
            "horizon": 3000,
            "runs": 300,
            "checkpoint_every": 30,
            "sweep": {"param": "delta", "values": [0.04, 0.08, 0.1, 0.15, 0.2, 0.25, 0.3, 0.4, 0.5, 0.6]},
            "choices": [
                "gap grid {0.04,0.08,0.1,0.15,0.2,0.25,0.3,0.4,0.5,0.6}",
                "Pareto delays discretised by ceiling",
                "PatientBandits baseline omitted",
            ],
        }
    elif name == "fig3":
        data = {
            "instance": {"preset": "fig3", "params": {"K": 10, "p_opt": 0.1, "gap_seed": 0}},
            "algorithms": ["se", "pse"],
            "horizon": 20_000,
            "runs": 300,
            "checkpoint_every": 100,
            "choices": ["gaps i.i.d. U[0.15,0.25] from gap_seed=0", "best arm mean 0.5"],
        }
    elif name == "fig4":
        radius = {"kind": "constant", "c": 2.0}
        data = {
            "instance": {"preset": "fig4", "params": {"K": 3, "d_big": 5000, "gap_seed": 0}},
            "algorithms": [
                {"name": "opse", "radius": radius},
                {"name": "ucb", "radius": radius},
                {"name": "se", "radius": radius},
            ],
            "horizon": 60_000,
            "runs": 100,
            "checkpoint_every": 600,
            "choices": [
                "gaps i.i.d. U[0.15,0.25] from gap_seed=0",
                "best arm mean 0.6",
                "confidence radius sqrt(2/count) as in the fixed-delay experiment",
                "SE included as a negative control",
            ],
        }
    elif name == "ucb-adv":
        data = {
            "instance": {"preset": "ucb-adv", "params": {"K": 10, "seed": 0}},
            "algorithms": ["ucb", "se"],
            "horizon": 10_000,
            "runs": 200,
            "checkpoint_every": 100,
            "sweep": {"param": "d", "values": [100, 200, 400]},
            "choices": ["optimal index drawn from seed=0", "delay grid {100,200,400}"],
        }
    elif name == "dep-lower":
        data = {
            "instance": {"preset": "dep-lower", "params": {"delta": 0.1, "d_tilde": 1000}},
            "algorithms": ["opse", "ucb"],
            "horizon": 5000,
            "runs": 100,
            "checkpoint_every": 50,
            "sweep": {"param": "variant", "values": ["I1", "I2"]},
            "choices": ["delta=0.1, d_tilde=1000, T=5000"],
        }
    else:
        raise UnknownPresetError(f"unknown preset {name!r}; expected one of {PRESETS}")
    return ExperimentConfig.from_dict(data)


PRESETS = ("fig1", "fig1-sweep", "fig2", "fig3", "fig4", "ucb-adv", "dep-lower")


# ---------------------------------------------------------------------------
# orchestration


def _run_task(task) -> RunRecord:
    inst_dict, label, alg, radius, horizon, seed, every = task
    inst = InstanceSpec.from_dict(inst_dict)
    run = simulate(inst, alg, horizon, seed, radius_from_dict(radius), label=label)
    return record_checkpointed(run, every)


def run_records(cfg: ExperimentConfig, threads: int | None = None) -> dict[tuple[str, str], list[RunRecord]]:
    """Execute every (instance, algorithm, run) of ``cfg``; records keyed by
    (instance label, algorithm) and ordered by run index."""
    threads = threads or cfg.threads or default_threads()
    seeds = [int(s) for s in mix_seeds(cfg.base_seed, cfg.runs)]
    tasks, keys = [], []
    for label, inst in cfg.instances():
        inst_dict = inst.to_dict()
        for alg in cfg.algorithms:
            for seed in seeds:
                tasks.append((inst_dict, label, alg["name"], alg.get("radius"), cfg.horizon, seed, cfg.checkpoint_every))
                keys.append((label, alg["name"]))
    if threads <= 1 or len(tasks) == 1:
        results = [_run_task(t) for t in tasks]
    else:
        with ProcessPoolExecutor(max_workers=threads) as pool:
            results = list(pool.map(_run_task, tasks, chunksize=max(1, len(tasks) // (4 * threads))))
    out: dict[tuple[str, str], list[RunRecord]] = {}
    for key, rec in zip(keys, results):
        out.setdefault(key, []).append(rec)
    return out


def _bound_kinds(alg: str, inst: InstanceSpec) -> list[str]:
    if inst.reward_independent:
        return {"se": ["se_per_arm", "se_single_q"], "pse": ["pse"]}.get(alg, [])
    return ["opse"] if alg == "opse" else []


def summarize(cfg: ExperimentConfig, aggs: Sequence[Aggregate]) -> dict:
    insts = dict(cfg.instances())
    rows = []
    for agg in aggs:
        inst = insts[agg.instance]
        row = {
            "instance": agg.instance,
            "algorithm": agg.algorithm,
            "runs": agg.runs,
            "final_mean": float(fmt(agg.final_mean)),
            "final_stderr": float(fmt(agg.final_stderr)),
            "stderr_defined": agg.stderr_defined,
            "eliminated_optimal_rate": agg.eliminated_optimal_rate,
        }
        if cfg.bounds:
            for kind in _bound_kinds(agg.algorithm, inst):
                row[f"bound_{kind}"] = float(fmt(bounds.instance_bound(kind, inst, cfg.horizon)))
        rows.append(row)
    return {"config": cfg.to_dict(), "results": rows}


def run_experiment(cfg: ExperimentConfig, out_dir: str | os.PathLike | None = None, threads: int | None = None) -> list[Aggregate]:
    """Run all seeds, aggregate per (instance, algorithm) and write outputs.

    Writes ``runs.csv``, ``aggregate.csv`` and ``summary.json`` into the
    output directory when one is given (argument or ``cfg.output``).
    """
    records = run_records(cfg, threads)
    aggs = [aggregate(recs) for recs in records.values()]
    out_dir = out_dir if out_dir is not None else cfg.output
    if out_dir is not None:
        write_outputs(Path(out_dir), records, aggs, summarize(cfg, aggs))
    return aggs


def write_outputs(out: Path, records, aggs, summary) -> None:
    try:
        out.mkdir(parents=True, exist_ok=True)
        with open(out / "runs.csv", "w", newline="") as fh:
            write_runs_csv((r for recs in records.values() for r in recs), fh)
        with open(out / "aggregate.csv", "w", newline="") as fh:
            write_aggregate_csv(aggs, fh)
        with open(out / "summary.json", "w") as fh:
            json.dump(summary, fh, indent=2, sort_keys=True)
            fh.write("\n")
    except OSError as exc:
        raise OutputError(f"cannot write outputs to {out}: {exc}") from None
