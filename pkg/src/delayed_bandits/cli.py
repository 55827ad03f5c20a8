"""Command line entry point.

    delayed-bandits run --config PATH [--out DIR] [--seed N] [--runs M] [--threads K]
    delayed-bandits experiment NAME [--out DIR] [--runs M] [--horizon T] [--seed N]
                                    [--param KEY=VALUE ...] [--sweep V1,V2,...] [--threads K]
    delayed-bandits verify [--lemma ID] [--full] [--threads K]
    delayed-bandits bounds --config PATH

Exit codes: 0 success, 2 invalid config, 3 oracle failure, 4 unknown preset,
5 unwritable output.  ``DELAYED_BANDITS_THREADS`` sets the default worker
count (otherwise the number of CPUs).
"""

from __future__ import annotations

import argparse
import logging
import sys

import yaml

from . import bounds, oracles
from .harness import (
    PRESETS,
    ConfigError,
    ExperimentConfig,
    OutputError,
    load_config,
    preset,
    run_experiment,
)
from .metrics import fmt

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_ORACLE = 3

log = logging.getLogger("delayed_bandits")


def _parse_param(text: str) -> tuple[str, object]:
    key, sep, value = text.partition("=")
    if not sep or not key:
        raise ConfigError(f"--param expects KEY=VALUE, got {text!r}")
    return key, yaml.safe_load(value)


def _apply_overrides(cfg: ExperimentConfig, args) -> ExperimentConfig:
    data = cfg.to_dict()
    if getattr(args, "runs", None) is not None:
        data["runs"] = args.runs
    if getattr(args, "seed", None) is not None:
        data["base_seed"] = args.seed
    if getattr(args, "horizon", None) is not None:
        data["horizon"] = args.horizon
        data["checkpoint_every"] = max(1, args.horizon // 100)
    for item in getattr(args, "param", None) or []:
        key, value = _parse_param(item)
        data["instance"].setdefault("params", {})[key] = value
    if getattr(args, "sweep", None):
        if "sweep" not in data:
            raise ConfigError("--sweep: this experiment has no sweep parameter")
        data["sweep"]["values"] = [yaml.safe_load(v) for v in args.sweep.split(",")]
    return ExperimentConfig.from_dict(data)


def _print_summary(aggs) -> None:
    for a in aggs:
        print(
            f"{a.instance:<28} {a.algorithm:<5} runs={a.runs:<4} "
            f"final_regret={fmt(a.final_mean)} stderr={fmt(a.final_stderr)} "
            f"eliminated_optimal={a.eliminated_optimal_rate:.2f}"
        )


def cmd_run(args) -> int:
    cfg = _apply_overrides(load_config(args.config), args)
    aggs = run_experiment(cfg, args.out, threads=args.threads)
    _print_summary(aggs)
    return EXIT_OK


def cmd_experiment(args) -> int:
    cfg = _apply_overrides(preset(args.name), args)
    out = args.out if args.out is not None else cfg.output
    aggs = run_experiment(cfg, out, threads=args.threads)
    _print_summary(aggs)
    return EXIT_OK


def cmd_verify(args) -> int:
    try:
        result = oracles.run_suite(args.lemma, full=args.full, threads=args.threads)
    except ValueError as exc:
        raise ConfigError(str(exc)) from None
    for line in result.lines():
        print(line)
    return EXIT_OK if result.ok else EXIT_ORACLE


def cmd_bounds(args) -> int:
    cfg = load_config(args.config)
    for label, inst in cfg.instances():
        for kind in bounds.KINDS:
            if kind == "opse" or inst.reward_independent:
                value = bounds.instance_bound(kind, inst, cfg.horizon)
                print(f"{label:<28} {kind:<12} {fmt(value)}")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="delayed-bandits", description="Bandits with delayed anonymous feedback.")
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True)

    r = sub.add_parser("run", help="run an experiment config file")
    r.add_argument("--config", required=True)
    r.add_argument("--out")
    r.add_argument("--seed", type=int)
    r.add_argument("--runs", type=int)
    r.add_argument("--threads", type=int)
    r.set_defaults(func=cmd_run)

    e = sub.add_parser("experiment", help="run a named preset")
    e.add_argument("name", help=f"one of {', '.join(PRESETS)}")
    e.add_argument("--out")
    e.add_argument("--seed", type=int)
    e.add_argument("--runs", type=int)
    e.add_argument("--horizon", type=int)
    e.add_argument("--param", action="append", metavar="KEY=VALUE", help="instance parameter override")
    e.add_argument("--sweep", metavar="V1,V2,...", help="replace the sweep values")
    e.add_argument("--threads", type=int)
    e.set_defaults(func=cmd_experiment)

    v = sub.add_parser("verify", help="run the lemma oracle suite")
    v.add_argument("--lemma", choices=oracles.LEMMAS)
    v.add_argument("--full", action="store_true", help="larger trial counts")
    v.add_argument("--threads", type=int)
    v.set_defaults(func=cmd_verify)

    b = sub.add_parser("bounds", help="print regret bound values for a config")
    b.add_argument("--config", required=True)
    b.set_defaults(func=cmd_bounds)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    try:
        return args.func(args)
    except (ConfigError, OutputError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return exc.exit_code


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
