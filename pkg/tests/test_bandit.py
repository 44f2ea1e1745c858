import numpy as np
import pytest

from parbalans.cli.actions.bandit import (ACCEPT, BEST, BETTER, BINARY_REWARD_POOL, EPSILON_GREEDY,
                                          REJECT, REWARD_POOL, SOFTMAX, THOMPSON, BanditException,
                                          NonBinaryRewardForThompson, PolicySpec, RewardVector,
                                          init_state, select_arm, softmax_probabilities, update)


def test_reward_pool():
    assert len(REWARD_POOL) == 8
    assert [r.as_tuple() for r in BINARY_REWARD_POOL] == [(1, 1, 1, 0), (1, 1, 0, 0)]
    assert all(r.is_binary for r in BINARY_REWARD_POOL)
    assert sum(r.is_binary for r in REWARD_POOL) == 2
    assert RewardVector(8, 4, 2, 1).scale == 8
    with pytest.raises(BanditException):
        RewardVector(0, 0, 0, 0)
    with pytest.raises(BanditException):
        RewardVector(1, -1, 0, 0)


@pytest.mark.parametrize('kind, parameter', [
    (EPSILON_GREEDY, 0.6), (EPSILON_GREEDY, None), (SOFTMAX, 0.5), (SOFTMAX, 3.5),
    (THOMPSON, 0.1), ('ucb', None),
])
def test_policy_ranges(kind, parameter):
    with pytest.raises(BanditException):
        PolicySpec(kind, parameter)


def test_cold_start_pulls_in_index_order():
    rng = np.random.default_rng(0)
    state = init_state(PolicySpec(SOFTMAX, 2.0), 4)
    rewards = REWARD_POOL[0]
    pulled = []
    for _ in range(4):
        arm = select_arm(state, rng)
        pulled.append(arm)
        state = update(state, arm, REJECT, rewards)
    assert pulled == [0, 1, 2, 3]


def test_update_is_functional():
    state = init_state(PolicySpec(EPSILON_GREEDY, 0.1), 3)
    after = update(state, 1, BEST, RewardVector(8, 4, 2, 1))
    assert list(state.counts) == [0, 0, 0]
    assert list(after.counts) == [0, 1, 0]
    assert after.means[1] == pytest.approx(1.0)
    after = update(after, 1, ACCEPT, RewardVector(8, 4, 2, 1))
    assert after.means[1] == pytest.approx((1.0 + 0.25) / 2)


def test_update_validation():
    state = init_state(PolicySpec(EPSILON_GREEDY, 0.1), 2)
    with pytest.raises(BanditException):
        update(state, 2, BEST, REWARD_POOL[0])
    with pytest.raises(BanditException):
        update(state, 0, 'great', REWARD_POOL[0])
    with pytest.raises(BanditException):
        init_state(PolicySpec(THOMPSON), 0)


def test_thompson_needs_binary_rewards():
    state = init_state(PolicySpec(THOMPSON), 2)
    with pytest.raises(NonBinaryRewardForThompson):
        update(state, 0, BEST, RewardVector(8, 4, 2, 1))
    state = update(state, 0, BETTER, RewardVector(1, 1, 0, 0))
    state = update(state, 0, ACCEPT, RewardVector(1, 1, 0, 0))
    assert (state.successes[0], state.failures[0]) == (1, 1)


def test_greedy_exploits_best_mean():
    state = init_state(PolicySpec(EPSILON_GREEDY, 0.0), 3)
    rewards = RewardVector(3, 2, 1, 0)
    for arm, outcome in ((0, REJECT), (1, BEST), (2, ACCEPT)):
        state = update(state, arm, outcome, rewards)
    rng = np.random.default_rng(1)
    assert set(select_arm(state, rng) for _ in range(50)) == {1}


def test_epsilon_explores():
    state = init_state(PolicySpec(EPSILON_GREEDY, 0.5), 3)
    rewards = RewardVector(3, 2, 1, 0)
    for arm, outcome in ((0, REJECT), (1, BEST), (2, REJECT)):
        state = update(state, arm, outcome, rewards)
    rng = np.random.default_rng(2)
    picks = [select_arm(state, rng) for _ in range(3000)]
    # greedy half plus a third of the uniform half
    assert picks.count(1) / 3000.0 == pytest.approx(0.5 + 0.5 / 3, abs=0.04)


def test_softmax_probabilities():
    p = softmax_probabilities([0.0, 1.0], 1.0)
    assert p[1] / p[0] == pytest.approx(np.e)
    assert softmax_probabilities([5.0, 5.0, 5.0], 2.0) == pytest.approx([1 / 3.0] * 3)
    assert softmax_probabilities([1000.0, 0.0], 1.0)[0] == pytest.approx(1.0)


def test_thompson_prefers_successful_arm():
    state = init_state(PolicySpec(THOMPSON), 2)
    rewards = RewardVector(1, 1, 0, 0)
    for _ in range(30):
        state = update(state, 0, BEST, rewards)
        state = update(state, 1, REJECT, rewards)
    rng = np.random.default_rng(3)
    picks = [select_arm(state, rng) for _ in range(200)]
    assert picks.count(0) > 190


def test_selection_is_seeded():
    state = init_state(PolicySpec(SOFTMAX, 1.0), 3)
    for arm in range(3):
        state = update(state, arm, (BEST, BETTER, REJECT)[arm], REWARD_POOL[3])
    first = [select_arm(state, np.random.default_rng(9)) for _ in range(5)]
    second = [select_arm(state, np.random.default_rng(9)) for _ in range(5)]
    assert first == second


def _pulled(policy, outcomes, rewards):
    state = init_state(policy, len(outcomes))
    for arm, outcome in enumerate(outcomes):
        state = update(state, arm, outcome, rewards)
    return state


@pytest.mark.parametrize('scale', [1e-3, 0.5, 7.0, 1e4])
def test_softmax_is_scale_invariant(scale):
    means = np.array([0.1, 0.75, 0.3, 0.0, 1.0])
    base = softmax_probabilities(means, 1.7)
    scaled = softmax_probabilities(means * scale, 1.7 * scale)
    assert np.max(np.abs(base - scaled)) <= 1e-12


def test_softmax_with_large_tau_is_uniform():
    assert softmax_probabilities([0.0, 0.5, 1.0], 1e6) == pytest.approx([1 / 3.0] * 3, abs=1e-6)
    # means a thousandth apart at the largest tau allowed
    state = _pulled(PolicySpec(SOFTMAX, 3.0), (BETTER, REJECT, REJECT), RewardVector(1000, 1, 0, 0))
    rng = np.random.default_rng(5)
    draws = 10000
    counts = np.bincount([select_arm(state, rng) for _ in range(draws)], minlength=3)
    sigma = np.sqrt((1 / 3.0) * (2 / 3.0) / draws)
    assert np.all(np.abs(counts / float(draws) - 1 / 3.0) <= 3 * sigma)


@pytest.mark.parametrize('epsilon, arms', [(0.1, 3), (0.3, 5), (0.5, 4)])
def test_epsilon_greedy_exploration_rate(epsilon, arms):
    outcomes = (BEST,) + (REJECT,) * (arms - 1)
    state = _pulled(PolicySpec(EPSILON_GREEDY, epsilon), outcomes, RewardVector(8, 4, 2, 1))
    rng = np.random.default_rng(6)
    draws = 100000
    picks = np.array([select_arm(state, rng) for _ in range(draws)])
    rate = epsilon * (arms - 1) / float(arms)
    sigma = np.sqrt(rate * (1 - rate) / draws)
    assert abs(np.mean(picks != 0) - rate) <= 3 * sigma


def test_thompson_separates_certain_arms():
    state = init_state(PolicySpec(THOMPSON), 2)
    rewards = RewardVector(1, 1, 0, 0)
    for _ in range(100):
        state = update(state, 0, BEST, rewards)
        state = update(state, 1, REJECT, rewards)
    assert (state.successes.tolist(), state.failures.tolist()) == ([100, 0], [0, 100])
    rng = np.random.default_rng(7)
    picks = [select_arm(state, rng) for _ in range(10000)]
    assert picks.count(0) >= 9900
