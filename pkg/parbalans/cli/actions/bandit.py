"""Bandit policies choosing which destroy operator to pull next.

Rewards are mapped from iteration outcomes through a RewardVector and
rescaled by the vector's largest component, so empirical means live in
[0, 1] whatever the pool entry. Every arm is pulled once, in index order,
before a policy takes over.
"""
from dataclasses import dataclass, replace

import numpy as np

from parbalans.cli.actions.utils import ParBalansException

__all__ = ['RewardVector', 'PolicySpec', 'PolicyState', 'init_state', 'select_arm', 'update',
           'softmax_probabilities', 'REWARD_POOL', 'BINARY_REWARD_POOL', 'OUTCOMES',
           'EPSILON_GREEDY', 'SOFTMAX', 'THOMPSON', 'POLICY_KINDS', 'BanditException',
           'NonBinaryRewardForThompson']

BEST, BETTER, ACCEPT, REJECT = 'best', 'better', 'accept', 'reject'
OUTCOMES = (BEST, BETTER, ACCEPT, REJECT)

EPSILON_GREEDY, SOFTMAX, THOMPSON = 'epsilon_greedy', 'softmax', 'thompson'
POLICY_KINDS = (EPSILON_GREEDY, SOFTMAX, THOMPSON)

EPSILON_RANGE = (0.0, 0.5)
TAU_RANGE = (1.0, 3.0)


class BanditException(ParBalansException):
    pass


class NonBinaryRewardForThompson(BanditException):
    pass


@dataclass(frozen=True)
class RewardVector:
    best: float
    better: float
    accept: float
    reject: float

    def __post_init__(self):
        values = self.as_tuple()
        if min(values) < 0 or max(values) <= 0:
            raise BanditException("Reward vector %s must be non-negative and not all zero"
                                  % list(values))

    def as_tuple(self):
        return (self.best, self.better, self.accept, self.reject)

    def value(self, outcome):
        return getattr(self, outcome)

    @property
    def is_binary(self):
        return all(v in (0, 1) for v in self.as_tuple())

    @property
    def scale(self):
        return max(self.as_tuple())


REWARD_POOL = tuple(RewardVector(*v) for v in (
    (8, 4, 2, 1), (3, 2, 1, 0), (5, 2, 1, 0), (16, 4, 2, 1),
    (8, 3, 1, 0), (5, 4, 2, 0), (1, 1, 1, 0), (1, 1, 0, 0)))

BINARY_REWARD_POOL = (RewardVector(1, 1, 1, 0), RewardVector(1, 1, 0, 0))


@dataclass(frozen=True)
class PolicySpec:
    kind: str
    # epsilon for epsilon_greedy, tau for softmax, unused for thompson
    parameter: float = None

    def __post_init__(self):
        if self.kind == EPSILON_GREEDY:
            low, high = EPSILON_RANGE
        elif self.kind == SOFTMAX:
            low, high = TAU_RANGE
        elif self.kind == THOMPSON:
            if self.parameter is not None:
                raise BanditException("Thompson sampling takes no parameter")
            return
        else:
            raise BanditException("Unknown policy '%s'" % self.kind)
        if self.parameter is None or not low <= self.parameter <= high:
            raise BanditException("%s parameter %s outside [%s, %s]"
                                  % (self.kind, self.parameter, low, high))


@dataclass(frozen=True, eq=False)
class PolicyState:
    policy: PolicySpec
    counts: np.ndarray
    sums: np.ndarray
    successes: np.ndarray
    failures: np.ndarray

    @property
    def arms(self):
        return len(self.counts)

    @property
    def means(self):
        return self.sums / np.maximum(self.counts, 1)


def init_state(policy, arms):
    if arms < 1:
        raise BanditException("A bandit needs at least one arm")
    return PolicyState(policy, np.zeros(arms, dtype=int), np.zeros(arms),
                       np.zeros(arms, dtype=int), np.zeros(arms, dtype=int))


def softmax_probabilities(means, tau):
    z = np.asarray(means, dtype=float) / tau
    z = np.exp(z - z.max())
    return z / z.sum()


def select_arm(state, rng):
    """Pick an arm. Reads `state` and draws from `rng`, nothing else."""
    untried = np.flatnonzero(state.counts == 0)
    if untried.size:
        return int(untried[0])
    kind = state.policy.kind
    if kind == EPSILON_GREEDY:
        if rng.random() < state.policy.parameter:
            return int(rng.integers(state.arms))
        return int(np.argmax(state.means))
    if kind == SOFTMAX:
        return int(rng.choice(state.arms, p=softmax_probabilities(state.means, state.policy.parameter)))
    return int(np.argmax(rng.beta(1 + state.successes, 1 + state.failures)))


def update(state, arm, outcome, rewards):
    """Return the state after crediting `arm` with the reward for `outcome`"""
    if not 0 <= arm < state.arms:
        raise BanditException("Arm %s out of range [0, %s)" % (arm, state.arms))
    if outcome not in OUTCOMES:
        raise BanditException("Unknown outcome '%s'" % outcome)
    reward = rewards.value(outcome)
    successes, failures = state.successes, state.failures
    if state.policy.kind == THOMPSON:
        if not rewards.is_binary:
            raise NonBinaryRewardForThompson("Thompson sampling needs binary rewards, got %s"
                                             % list(rewards.as_tuple()))
        successes, failures = successes.copy(), failures.copy()
        if reward == 1:
            successes[arm] += 1
        else:
            failures[arm] += 1
    counts, sums = state.counts.copy(), state.sums.copy()
    counts[arm] += 1
    sums[arm] += reward / rewards.scale
    return replace(state, counts=counts, sums=sums, successes=successes, failures=failures)
