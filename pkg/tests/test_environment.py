import numpy as np
import pytest
from scipy import stats

from delayed_bandits.algorithms import SuccessiveElimination, UCB
from delayed_bandits.distributions import ArmModel, Bernoulli, Fixed, PacketLoss, Pareto, PointMass, Table
from delayed_bandits.environment import Environment, FeedbackEvent, HorizonExceeded, play, pseudo_regret


def one_arm(delay, reward=None):
    return [ArmModel.independent(reward or Bernoulli(0.5), delay)]


def test_zero_delay_returns_same_round():
    env = Environment(one_arm(Fixed(0), PointMass(1.0)), 5, 0)
    assert env.step(0) == [FeedbackEvent(0, 1.0)]


def test_fixed_two_delivers_at_s_plus_d():
    env = Environment(one_arm(Fixed(2)), 3, 0)
    got = [env.step(0) for _ in range(3)]
    assert got[0] == [] and got[1] == []
    assert len(got[2]) == 1 and got[2][0].reward == env.rewards[0]


def test_all_lost():
    env = Environment(one_arm(PacketLoss(0.0)), 100, 0)
    delivered = sum(len(env.step(0)) for _ in range(100))
    assert delivered == 0
    assert env.dropped_count == 100
    assert env.conservation_holds()


def test_rejects_past_horizon_and_bad_arm():
    env = Environment(one_arm(Fixed(0)), 1, 0)
    with pytest.raises(IndexError):
        env.step(1)
    env.step(0)
    with pytest.raises(HorizonExceeded):
        env.step(0)


def test_same_round_arrivals_in_emission_order():
    # round 1 delay 2, round 2 delay 1, round 3 delay 0: all land in round 3
    law = Table(((0, 1 / 3), (1, 1 / 3), (2, 1 / 3)))
    arms = [ArmModel.independent(PointMass(0.0), Fixed(2)), ArmModel.independent(PointMass(0.5), Fixed(1)),
            ArmModel.independent(PointMass(1.0), Fixed(0))]
    env = Environment(arms, 3, 0)
    env.step(0)
    env.step(1)
    out = env.step(2)
    assert [e.arm for e in out] == [0, 1, 2]
    assert law.quantile(1.0) == 2


def test_feedback_is_anonymous():
    a = Environment(one_arm(Fixed(1), PointMass(1.0)), 10, 0)
    b = Environment(one_arm(Fixed(4), PointMass(1.0)), 10, 0)
    ea = [e for _ in range(10) for e in a.step(0)]
    eb = [e for _ in range(10) for e in b.step(0)]
    assert repr(ea[0]) == repr(eb[0])
    assert FeedbackEvent._fields == ("arm", "reward")


@pytest.mark.parametrize(
    "gaps,pulls,expected",
    [([0, 0.1], [70, 30], 3.0), ([0, 0.3], [100, 0], 0.0), ([0, 0.2, 0.5], [10, 4, 2], 1.8)],
)
def test_pseudo_regret_examples(gaps, pulls, expected):
    assert pseudo_regret(gaps, pulls) == pytest.approx(expected)


def test_env_pseudo_regret_matches_pulls():
    arms = [ArmModel.independent(Bernoulli(p), Fixed(3)) for p in (0.6, 0.5, 0.1)]
    env = Environment(arms, 300, 1)
    play(UCB(3, 300), env)
    assert env.pseudo_regret() == pytest.approx(pseudo_regret(env.gaps, env.pulls))
    assert env.regret_curve()[-1] == pytest.approx(env.pseudo_regret())


def test_conservation_with_mixed_delays():
    arms = [ArmModel.independent(Bernoulli(0.5), Pareto(0.3)), ArmModel.independent(Bernoulli(0.4), PacketLoss(0.5))]
    env = Environment(arms, 2000, 2)
    play(SuccessiveElimination(2, 2000), env)
    assert env.delivered_count + env.outstanding + env.dropped_count == 2000
    assert env.conservation_holds()


def test_determinism():
    arms = [ArmModel.independent(Bernoulli(p), Pareto(0.5)) for p in (0.5, 0.4)]
    runs = []
    for _ in range(2):
        env = Environment(arms, 1000, 42)
        play(UCB(2, 1000), env)
        runs.append((list(env.actions), env.regret_curve().tobytes()))
    assert runs[0] == runs[1]


def _final_regrets(full_vector, seeds):
    arms = [ArmModel.independent(Bernoulli(p), Fixed(5)) for p in (0.7, 0.5, 0.4)]
    out = []
    for s in seeds:
        env = Environment(arms, 150, s, full_vector=full_vector)
        play(UCB(3, 150), env)
        out.append(env.pseudo_regret())
    return np.array(out)


def test_chosen_arm_sampling_matches_full_vector():
    a = _final_regrets(False, range(1000))
    b = _final_regrets(True, range(1000, 2000))
    assert stats.ks_2samp(a, b).pvalue > 0.01
