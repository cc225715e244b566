import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from seqpgg.game import (CostModel, GameParams, SuccessMode, SynergyMode, cumulative_sum,
                         payoff_terms, reward, success, utilities, welfare)
from oracles import reward_oracle, welfare_oracle

BASE = GameParams()
LIN = CostModel.linear(1.0)
BASE_KW = dict(gamma=1.5, rho=1.8, B=1.0, P=0.5)


def test_cumulative_sum_examples():
    assert cumulative_sum((0.267, 1.0, 1.0), 3) == pytest.approx(2.267)
    assert cumulative_sum((0.3, 0.2, 0.1), 0) == 0
    assert cumulative_sum((0.5, 0.5, 0.5), 2) == pytest.approx(1.0)


def test_cumulative_sum_out_of_range():
    with pytest.raises(IndexError):
        cumulative_sum((0.1, 0.2), 3)
    with pytest.raises(IndexError):
        cumulative_sum((0.1, 0.2), -1)


def test_reward_agent3_baseline():
    r = reward(3, (0.267, 1.0, 1.0), BASE, LIN)
    assert r.total == pytest.approx(-1 + 1.5 + 0.6 * 2.267)
    assert r.total == pytest.approx(1.860, abs=1e-3)


def test_first_agent_has_no_synergy():
    assert reward(1, (0.7, 0.2, 0.9), BASE, LIN).synergy_term == 0.0


def test_zero_profile_only_penalty():
    for i in (1, 2, 3):
        assert reward(i, (0, 0, 0), BASE, LIN).total == pytest.approx(-0.5)


def test_success_examples():
    assert success((0.267, 1.0, 1.0), BASE)
    assert not success((0, 0, 0), BASE)
    # reaching the threshold exactly counts as success
    assert success((0.5, 0.5, 0.0), BASE)
    assert reward(1, (0.5, 0.5, 0.0), BASE, LIN).penalty_term == 0.0


def test_welfare_examples():
    assert welfare((0.267, 1.0, 1.0), BASE, LIN) == pytest.approx(
        welfare_oracle((0.267, 1.0, 1.0), **BASE_KW))
    assert welfare((0.267, 1.0, 1.0), BASE, LIN) == pytest.approx(3.713, abs=2e-3)
    assert welfare((0, 0, 0), BASE, LIN) == pytest.approx(-1.5)
    assert welfare((1, 1, 1), BASE, LIN) == pytest.approx(5.4)


def test_final_score_and_self_synergy_variants():
    p = GameParams(success_mode=SuccessMode.FINAL_SCORE, synergy_mode=SynergyMode.SELF)
    prof = (0.9, 0.4, 0.95)
    for i in (1, 2, 3):
        assert reward(i, prof, p, LIN).total == pytest.approx(
            reward_oracle(i, prof, 3, final_score=True, self_synergy=True, **BASE_KW))
    assert not success(prof, p)
    assert success((0.0, 0.0, 1.0), p)


def test_params_validation():
    with pytest.raises(ValueError):
        GameParams(c_min=0.5, c_max=0.2)
    with pytest.raises(ValueError):
        GameParams(threshold=0.0)
    with pytest.raises(ValueError):
        GameParams(n=0)
    with pytest.raises(ValueError):
        GameParams(c_max=float("inf"))
    with pytest.raises(ValueError):
        CostModel.linear(0.0)
    with pytest.raises(ValueError):
        reward(1, (0.2, 1.5, 0.0), BASE, LIN)
    with pytest.raises(ValueError):
        reward(1, (0.2, 0.5), BASE, LIN)


def test_cost_model():
    q = CostModel.quadratic(0.1, 0.5)
    assert q(0.4) == pytest.approx(0.1 * 0.4 + 0.5 * 0.16)
    assert q.marginal(0.4) == pytest.approx(0.1 + 0.4)


def test_payoff_terms_needs_some_cost():
    with pytest.raises(ValueError):
        payoff_terms(BASE, None, 0.5, 0.2, 1.0)
    t = payoff_terms(BASE, None, 0.5, 0.2, 1.0, incurred=0.3)
    assert t.cost_term == pytest.approx(-0.3)


profiles = st.lists(st.floats(0.0, 1.0, allow_nan=False), min_size=1, max_size=5)


@settings(max_examples=200, deadline=None)
@given(profiles, st.floats(0, 3), st.floats(0, 3), st.floats(0.1, 3), st.floats(0, 2),
       st.floats(0.1, 2), st.floats(0, 1))
def test_reward_matches_oracle_and_decomposes(prof, gamma, rho, B, P, a, b):
    n = len(prof)
    p = GameParams(n=n, gamma_coop=gamma, rho=rho, threshold=B, penalty=P)
    cost = CostModel.quadratic(a, b)
    for i in range(1, n + 1):
        r = reward(i, prof, p, cost)
        assert r.total == r.cost_term + r.synergy_term + r.share_term + r.penalty_term
        assert r.total == pytest.approx(reward_oracle(i, prof, n, gamma, rho, B, P, a, b),
                                        abs=1e-12)
        assert r.cost_term <= 0
        assert r.penalty_term in (0.0, -P)
        assert (r.penalty_term == -P) == (not success(prof, p)) or P == 0
        if i == 1:
            assert r.synergy_term == 0.0
    u = utilities(prof, p, cost)
    assert welfare(prof, p, cost) == pytest.approx(float(np.sum(u)))


@settings(max_examples=100, deadline=None)
@given(profiles, st.floats(0, 3), st.floats(0, 3), st.floats(0, 3))
def test_welfare_linear_in_rho(prof, gamma, r1, r2):
    n = len(prof)
    p1 = GameParams(n=n, gamma_coop=gamma, rho=r1)
    p2 = GameParams(n=n, gamma_coop=gamma, rho=r2)
    diff = welfare(prof, p2, LIN) - welfare(prof, p1, LIN)
    assert diff == pytest.approx((r2 - r1) * sum(prof), abs=1e-9)


@settings(max_examples=50, deadline=None)
@given(profiles)
def test_scaling_sanity(prof):
    n = len(prof)
    p = GameParams(n=n, gamma_coop=0, rho=0, penalty=0)
    cost = CostModel.quadratic(0.7, 0.2)
    for i in range(1, n + 1):
        assert reward(i, prof, p, cost).total == pytest.approx(-float(cost(prof[i - 1])))


def test_batched_profiles():
    stack = np.array([[0.267, 1.0, 1.0], [0, 0, 0], [1, 1, 1]])
    u = utilities(stack, BASE, LIN)
    assert u.shape == (3, 3)
    np.testing.assert_allclose(u.sum(axis=1), [3.7133, -1.5, 5.4], atol=1e-3)
