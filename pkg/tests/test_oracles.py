import math

import pytest

from delayed_bandits.distributions import ArmModel, Fixed, PacketLoss, PointMass, TwoPoint
from delayed_bandits.instances import make_dep_lower
from delayed_bandits.oracles import (
    OracleReport,
    check_chernoff_quantile,
    check_estimator_concentration,
    check_hoeffding_quantile,
    check_interval_size,
)


def test_report_verdict_rule():
    rep = OracleReport("x", 10_000, 0, 1e-6)
    assert rep.slack == pytest.approx(3 * math.sqrt(1e-6 * (1 - 1e-6) / 10_000))
    assert rep.passed
    assert not OracleReport("x", 10_000, 1, 1e-6).passed
    assert OracleReport("x", 100, 5, 0.05).passed


def test_concentration_point_mass_never_deviates():
    arms = [ArmModel.independent(PointMass(0.3), Fixed(0)) for _ in range(3)]
    rep = check_estimator_concentration(1000, trials=50, arms=arms, radius_factor=1e-9)
    assert rep.failures == 0


def test_concentration_small_run_and_control():
    assert check_estimator_concentration(1000, 3, trials=300).passed
    assert not check_estimator_concentration(1000, 3, trials=300, radius_factor=0.5).passed


def test_concentration_rejects_reward_dependent():
    inst = make_dep_lower("I1", 0.1, 10)
    with pytest.raises(ValueError):
        check_estimator_concentration(arms=inst.arms, trials=1)


def test_chernoff_fixed_delay_never_fails():
    rep = check_chernoff_quantile(Fixed(5), 1.0, 100, 100)
    assert rep.failures == 0 and rep.params["wait"] == 5


def test_chernoff_examples():
    assert check_chernoff_quantile(PacketLoss(0.5), 0.5, 200, 2000).passed
    assert check_chernoff_quantile(TwoPoint(10, 0.4), 0.4, 400, 500).passed
    assert not check_chernoff_quantile(PacketLoss(0.3), 0.9, 200, 50, wait=0).passed


def test_chernoff_all_infinite_is_flagged_vacuous():
    rep = check_chernoff_quantile(PacketLoss(0.0), 0.5, 40, 20)
    assert rep.vacuous and rep.failures == 20


def test_hoeffding_examples():
    assert check_hoeffding_quantile(Fixed(7), 1.0, 200, 50).failures == 0
    assert check_hoeffding_quantile(PacketLoss(0.7), 0.7, 300, 2000, T=100).passed
    assert check_hoeffding_quantile(PacketLoss(0.7), 1e-9, 300, 50, T=100, lag=0).failures == 0
    assert not check_hoeffding_quantile(PacketLoss(0.7), 0.95, 300, 50, T=100, lag=0).passed


def test_interval_examples():
    rep = check_interval_size(trials=100)
    assert rep.passed and rep.params["conditional_violations"] == 0
    # no missing feedback: left side is zero
    arms = [ArmModel.independent(PointMass(0.9), Fixed(0)), ArmModel.independent(PointMass(0.1), Fixed(0))]
    from delayed_bandits.instances import from_arms

    assert check_interval_size(from_arms("nodelay", arms), rounds=300, trials=5, q=1.0, lags=[0, 0]).failures == 0
    assert not check_interval_size(trials=10, q=1.0, lags=[0, 0]).passed


def test_oracles_are_deterministic():
    a = check_hoeffding_quantile(PacketLoss(0.7), 0.99, 300, 30, T=100, lag=0)
    b = check_hoeffding_quantile(PacketLoss(0.7), 0.99, 300, 30, T=100, lag=0)
    assert (a.failures, a.params) == (b.failures, b.params)
