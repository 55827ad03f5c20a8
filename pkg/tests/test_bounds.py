import math

import pytest

from delayed_bandits.bounds import KINDS, bound_value, bound_with_argmin, instance_bound
from delayed_bandits.distributions import Fixed, PacketLoss, Pareto
from delayed_bandits.instances import make_packet_loss, make_reward_dependent_bias


def test_single_q_fixed_example():
    T = 10**4
    v, q = bound_with_argmin("se_single_q", [0.0, 0.2], [Fixed(100), Fixed(100)], T)
    assert q == 1.0
    assert v == pytest.approx(325 * math.log(T) / 0.2 + 400)
    assert abs(v - 15368) < 2


def test_single_q_fixed_general():
    gaps = [0.0, 0.1, 0.3]
    v = bound_value("se_single_q", gaps, [Fixed(7)] * 3, 500)
    assert v == pytest.approx(325 * math.log(500) * (10 + 1 / 0.3) + 28)


def test_pse_packet_loss_minimiser():
    T = 1000
    ps = [1.0, 0.5, 0.25]
    gaps = [0.0, 0.2, 0.4]
    v, q = bound_with_argmin("pse", gaps, [PacketLoss(p) for p in ps], T)
    assert q == [0.5, 0.25]
    assert v == pytest.approx(290 * math.log(T) * (1 / (0.5 * 0.2) + 1 / (0.25 * 0.4)))


def test_all_zero_gaps():
    for kind in KINDS:
        assert bound_value(kind, [0.0, 0.0], [Fixed(1), Fixed(2)], 100) == 0.0


def test_se_per_arm_fixed():
    T = 1000
    L = math.log(T)
    gaps = [0.0, 0.5]
    v = bound_value("se_per_arm", gaps, [Fixed(10), Fixed(20)], T)
    assert v == pytest.approx(40 * L / 0.5 * 2 + math.log(2) * 30 * 0.5)


def test_opse_formula():
    T = 6 * 10**4
    inst = make_reward_dependent_bias()
    v = instance_bound("opse", inst, T)
    sub = [g for g in inst.gaps if g > 0]
    L = math.log(T)
    # delays are 0 or 5000; check the two quantile terms directly
    d_sub = max(a.marginal_delay().quantile(1 - g / 4) for a, g in zip(inst.arms, inst.gaps) if g > 0)
    d_star = inst.arms[0].marginal_delay().quantile(1 - min(sub) / 4)
    assert v == pytest.approx(1166 * L * sum(1 / g for g in sub) + 4 * math.log(3) * (d_sub + d_star))


def test_bound_infinite_when_no_finite_quantile():
    v = bound_value("pse", [0.0, 0.2], [Fixed(0), PacketLoss(0.0)], 100)
    assert v == math.inf


def test_pareto_bounds_finite():
    for kind in ("se_per_arm", "se_single_q", "pse"):
        assert math.isfinite(bound_value(kind, [0.0, 0.1], [Pareto(0.2), Pareto(1.0)], 3000))


def test_instance_bound_packet_loss():
    inst = make_packet_loss()
    assert instance_bound("pse", inst, 20000) < instance_bound("se_single_q", inst, 20000)


def test_unknown_kind():
    with pytest.raises(ValueError):
        bound_value("nope", [0.0, 0.1], [Fixed(0)] * 2, 10)
