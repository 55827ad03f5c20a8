"""Acceptance criteria at full scale, one test per criterion.

Each test prints a single ``[criterion N] PASS|FAIL ...`` line.  Runtime
budgets are stated for 4 cores; on a machine with fewer cores the budget is
scaled by ``4 / cores``.
"""

import math
import os
import time

import numpy as np
from delayed_bandits import bounds, oracles
from delayed_bandits.algorithms import ConstantRadius, make_agent
from delayed_bandits.environment import Environment, play
from delayed_bandits.harness import ExperimentConfig, mix_seed, preset, run_experiment, simulate

CORES = os.cpu_count() or 1
SCALE = max(1.0, 4.0 / CORES)

_cache = {}


def budget(seconds):
    return seconds * SCALE


def emit(capsys, n, ok, detail):
    with capsys.disabled():
        print(f"\n[criterion {n}] {'PASS' if ok else 'FAIL'} {detail}")


def run_preset(name, **over):
    key = (name, repr(sorted(over.items())))
    if key not in _cache:
        data = preset(name).to_dict()
        data.update(over)
        cfg = ExperimentConfig.from_dict(data)
        t0 = time.perf_counter()
        aggs = run_experiment(cfg)
        _cache[key] = (cfg, {(a.instance, a.algorithm): a for a in aggs}, time.perf_counter() - t0)
    return _cache[key]


def sep(a, b):
    """4x the combined standard error of two independent means."""
    return 4.0 * math.hypot(a.final_stderr, b.final_stderr)


def test_criterion_1_fig1(capsys):
    cfg, aggs, elapsed = run_preset("fig1")
    ucb = {d: aggs[(f"fig1[d={d}]", "ucb")] for d in cfg.sweep["values"]}
    se = {d: aggs[(f"fig1[d={d}]", "se")] for d in cfg.sweep["values"]}
    d0 = se[0].final_mean - ucb[0].final_mean >= sep(se[0], ucb[0])
    d500 = ucb[500].final_mean - se[500].final_mean >= sep(se[500], ucb[500])
    grid = [0, 50, 100, 200, 400, 800]
    cross = next((d for d in grid if se[d].final_mean < ucb[d].final_mean), None)
    ok = d0 and d500 and cross is not None and 50 <= cross <= 400 and elapsed <= budget(300)
    emit(capsys, 1, ok,
         f"d=0 UCB {ucb[0].final_mean:.0f} vs SE {se[0].final_mean:.0f}; d=500 UCB {ucb[500].final_mean:.0f} "
         f"vs SE {se[500].final_mean:.0f}; crossover d={cross}; {elapsed:.0f}s (budget {budget(300):.0f}s)")
    assert ok


def test_criterion_2_ucb_adversarial(capsys):
    cfg, aggs, elapsed = run_preset("ucb-adv")
    ds = cfg.sweep["values"]
    u = [aggs[(f"ucb-adv[d={d}]", "ucb")].final_mean for d in ds]
    s = [aggs[(f"ucb-adv[d={d}]", "se")].final_mean for d in ds]
    ratio = u[-1] / u[0]
    spread = max(s) / min(s)
    ok = all(a < b for a, b in zip(u, u[1:])) and ratio >= 2 and spread <= 1.3 and elapsed <= budget(180)
    emit(capsys, 2, ok, f"UCB {[round(x) for x in u]} ratio {ratio:.2f}; SE {[round(x) for x in s]} spread {spread:.2f}; "
         f"{elapsed:.0f}s (budget {budget(180):.0f}s)")
    assert ok


def flat_interval(agg, T, frac_len=1 / 20, frac_rise=0.01):
    c, m = np.asarray(agg.checkpoints), agg.mean
    final = m[-1]
    for i in range(len(c)):
        j = np.searchsorted(c, c[i] + T * frac_len)
        if j < len(c) and m[j] - m[i] < frac_rise * final:
            return int(c[i]), int(c[j])
    return None


def test_criterion_3_fig3(capsys):
    cfg, aggs, elapsed = run_preset("fig3")
    (label,) = {k[0] for k in aggs}
    pse, se = aggs[(label, "pse")], aggs[(label, "se")]
    better = se.final_mean - pse.final_mean >= sep(se, pse)
    flat = flat_interval(pse, cfg.horizon)
    ok = better and flat is not None and elapsed <= budget(300)
    emit(capsys, 3, ok, f"PSE {pse.final_mean:.0f}+-{pse.final_stderr:.1f} vs SE {se.final_mean:.0f}+-{se.final_stderr:.1f}; "
         f"flat PSE segment {flat}; {elapsed:.0f}s (budget {budget(300):.0f}s)")
    assert ok


def test_criterion_4_fig4(capsys):
    cfg, aggs, elapsed = run_preset("fig4")
    (label,) = {k[0] for k in aggs}
    opse, ucb, se = aggs[(label, "opse")], aggs[(label, "ucb")], aggs[(label, "se")]
    inst = cfg.instances()[0][1]
    floor = 0.5 * inst.min_gap * (cfg.horizon - 10**4)
    ok = (ucb.final_mean - opse.final_mean >= sep(ucb, opse)
          and se.eliminated_optimal_rate > 0.5 and se.final_mean > floor and elapsed <= budget(600))
    emit(capsys, 4, ok, f"OPSE {opse.final_mean:.0f}+-{opse.final_stderr:.0f} vs UCB {ucb.final_mean:.0f}+-{ucb.final_stderr:.0f}; "
         f"SE drops best arm in {se.eliminated_optimal_rate:.0%} of runs, regret {se.final_mean:.0f} > {floor:.0f}; "
         f"{elapsed:.0f}s (budget {budget(600):.0f}s)")
    assert ok


def test_criterion_5_fig2(capsys):
    cfg, aggs, _ = run_preset("fig2")
    deltas = cfg.sweep["values"]
    rows = [aggs[(f"fig2[delta={d}]", "se")] for d in deltas]
    means = np.array([a.final_mean for a in rows])
    errs = np.array([a.final_stderr for a in rows])
    k = int(np.argmax(means))
    tol = 4 * np.hypot(errs[1:], errs[:-1])
    steps = np.diff(means)
    rising = np.all(steps[:k] >= -tol[:k])
    falling = np.all(steps[k:] <= tol[k:])
    ok = means[0] < means[k] and means[-1] < means[k] and deltas[k] <= 0.3 and rising and falling
    emit(capsys, 5, ok, "SE regret by gap " + ", ".join(f"{d}:{m:.0f}" for d, m in zip(deltas, means)) + f"; peak at {deltas[k]}")
    assert ok


def test_criterion_6_oracles(capsys):
    t0 = time.perf_counter()
    result = oracles.run_suite()
    elapsed = time.perf_counter() - t0
    ok = result.ok and elapsed <= budget(300)
    with capsys.disabled():
        for line in result.lines():
            print("    " + line)
    emit(capsys, 6, ok, f"{sum(not c for _, c in result.reports)} lemma checks, "
         f"{sum(c for _, c in result.reports)} negative controls; {elapsed:.0f}s (budget {budget(300):.0f}s)")
    assert ok


def test_criterion_7_exact_invariants(capsys):
    cfg = preset("fig4")
    inst = cfg.instances()[0][1]
    radius = ConstantRadius(2.0)
    exceptions = 0
    conservation = True
    checked = 0
    for j in range(100):
        seed = mix_seed(cfg.base_seed, j)
        holder = {}

        def check(t, arm, events):
            nonlocal exceptions, checked
            env, agent = holder["run"]
            for i in range(inst.K):
                if agent.m[i]:
                    obs, true = agent.reward_sum[i], env.true_reward_sum[i]
                    checked += 1
                    if not (obs <= true <= agent.m[i] - agent.n[i] + obs):
                        exceptions += 1

        env = Environment(inst.arms, cfg.horizon, seed)
        agent = make_agent("opse", inst.K, cfg.horizon, radius=radius)
        holder["run"] = (env, agent)
        play(agent, env, on_round=check)
        conservation &= env.delivered_count + env.outstanding + env.dropped_count == cfg.horizon

    # every other preset run is checked for conservation on a small sample too
    for name in ("fig1", "fig2", "fig3", "ucb-adv", "dep-lower"):
        c = preset(name)
        for label, other in c.instances()[:2]:
            for alg in c.algorithms:
                run = simulate(other, alg["name"], min(c.horizon, 5000), mix_seed(0, 1))
                conservation &= run.env.conservation_holds() and run.env.completed_rounds == min(c.horizon, 5000)

    reruns = []
    for _ in range(2):
        run = simulate(inst, "opse", cfg.horizon, mix_seed(cfg.base_seed, 3), radius)
        reruns.append((np.asarray(run.env.actions).tobytes(), run.env.regret_curve().tobytes()))
    identical = reruns[0] == reruns[1]
    ok = exceptions == 0 and conservation and identical
    emit(capsys, 7, ok, f"sandwich checked {checked} arm-steps, {exceptions} exceptions; conservation {conservation}; "
         f"bit-identical rerun {identical}")
    assert ok


def test_criterion_8_bounds(capsys):
    pairs = []
    for name in ("fig1", "fig2", "fig3", "ucb-adv"):
        cfg, aggs, _ = run_preset(name)
        insts = dict(cfg.instances())
        for (label, alg), agg in aggs.items():
            for kind in {"se": ("se_per_arm", "se_single_q"), "pse": ("pse",)}.get(alg, ()):
                pairs.append((label, alg, kind, agg.final_mean, bounds.instance_bound(kind, insts[label], cfg.horizon)))
    # PSE on the presets that do not run it, at a reduced run count
    for name in ("fig1", "fig2", "ucb-adv"):
        pse = dict(preset(name).algorithms[0], name="pse")
        cfg, aggs, _ = run_preset(name, runs=20, algorithms=[pse])
        insts = dict(cfg.instances())
        for (label, alg), agg in aggs.items():
            pairs.append((label, alg, "pse", agg.final_mean, bounds.instance_bound("pse", insts[label], cfg.horizon)))
    cfg, aggs, _ = run_preset("fig4")
    (label, inst), = cfg.instances()
    pairs.append((label, "opse", "opse", aggs[(label, "opse")].final_mean, bounds.instance_bound("opse", inst, cfg.horizon)))
    bad = [p for p in pairs if not p[3] <= p[4]]
    worst = max(pairs, key=lambda p: p[3] / p[4])
    ok = not bad
    emit(capsys, 8, ok, f"{len(pairs)} (instance, algorithm, bound) pairs, {len(bad)} violations; "
         f"tightest {worst[0]} {worst[1]} {worst[2]}: {worst[3]:.0f} <= {worst[4]:.0f}")
    assert ok, bad
