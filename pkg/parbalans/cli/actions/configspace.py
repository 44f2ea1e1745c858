"""The worker configuration space, destroy-set sampling and pool generation.

Sampling is uniform wherever a choice is "random": the operator count over
[4, 16], families, operators inside a family, and every hyperparameter over
its range.
"""
import logging
from collections import OrderedDict
from dataclasses import dataclass

from numpy.random import default_rng

from parbalans.cli.actions.alns import (AcceptanceCriterion, HILL_CLIMBING, SIMULATED_ANNEALING,
                                        STEP_RANGE)
from parbalans.cli.actions.bandit import (BINARY_REWARD_POOL, EPSILON_RANGE, POLICY_KINDS,
                                          REWARD_POOL, TAU_RANGE, EPSILON_GREEDY, SOFTMAX, THOMPSON,
                                          PolicySpec, RewardVector)
from parbalans.cli.actions.operators import FAMILIES, PERCENTAGES, OperatorSpec, parse_operator
from parbalans.cli.actions.utils import ParBalansException, USAGE_ERROR, read_json, write_json
from parbalans.cli.actions.validation import (MAX_OPERATORS, MIN_OPERATORS, check_keys,
                                              validate_config)

__all__ = ['Configuration', 'OPERATOR_CATEGORIES', 'OPERATOR_POOL', 'sample_destroy_set',
           'sample_config', 'generate_pool', 'default_config', 'config_to_dict',
           'config_from_dict', 'write_pool', 'read_pool', 'InvalidConfiguration',
           'PoolExhausted', 'InvalidPoolSize']

log = logging.getLogger(__name__)

OPERATOR_CATEGORIES = OrderedDict(
    (family, tuple(OperatorSpec(family, p).identifier for p in PERCENTAGES[family]))
    for family in FAMILIES)

OPERATOR_POOL = tuple(op for ops in OPERATOR_CATEGORIES.values() for op in ops)

MAX_POOL_SIZE = 10 ** 6
MAX_RETRIES = 1000

CONFIG_KEYS = ('id', 'destroy_ops', 'acceptance', 'policy', 'rewards')


class InvalidConfiguration(ParBalansException):
    pass


class PoolExhausted(ParBalansException):
    pass


class InvalidPoolSize(ParBalansException):
    code = USAGE_ERROR


@dataclass(frozen=True)
class Configuration:
    id: str
    destroy_ops: tuple
    acceptance: AcceptanceCriterion
    policy: PolicySpec
    rewards: RewardVector

    @property
    def structural_key(self):
        """Identity for uniqueness: operator ids plus hyperparameters to 6 decimals"""
        def rounded(value):
            return None if value is None else round(value, 6)
        return (tuple(sorted(op.identifier for op in self.destroy_ops)),
                self.acceptance.kind, rounded(self.acceptance.step),
                self.policy.kind, rounded(self.policy.parameter),
                self.rewards.as_tuple())


def _canonical(identifiers):
    return [parse_operator(op) for op in sorted(identifiers, key=OPERATOR_POOL.index)]


def sample_destroy_set(rng, n=None):
    """
    Draw a destroy-operator set. With n >= 6 operators one per family is
    taken first and the rest come from the remaining identifiers; with fewer,
    n distinct families contribute one operator each.
    """
    if n is None:
        n = int(rng.integers(MIN_OPERATORS, MAX_OPERATORS + 1))
    if not MIN_OPERATORS <= n <= MAX_OPERATORS:
        raise InvalidConfiguration("Operator count %s outside [%s, %s]"
                                   % (n, MIN_OPERATORS, MAX_OPERATORS))
    categories = list(OPERATOR_CATEGORIES.values())
    if n >= len(FAMILIES):
        chosen = [ops[int(rng.integers(len(ops)))] for ops in categories]
        remaining = [op for op in OPERATOR_POOL if op not in chosen]
        chosen += [str(op) for op in rng.choice(remaining, n - len(FAMILIES), replace=False)]
    else:
        families = rng.choice(len(categories), n, replace=False)
        chosen = [categories[f][int(rng.integers(len(categories[f])))] for f in families]
    return _canonical(chosen)


def sample_config(rng, config_id='cfg'):
    destroy_ops = tuple(sample_destroy_set(rng))
    if rng.random() < 0.5:
        acceptance = AcceptanceCriterion(HILL_CLIMBING)
    else:
        acceptance = AcceptanceCriterion(SIMULATED_ANNEALING, float(rng.uniform(*STEP_RANGE)))
    kind = POLICY_KINDS[int(rng.integers(len(POLICY_KINDS)))]
    if kind == EPSILON_GREEDY:
        policy = PolicySpec(kind, float(rng.uniform(*EPSILON_RANGE)))
    elif kind == SOFTMAX:
        policy = PolicySpec(kind, float(rng.uniform(*TAU_RANGE)))
    else:
        policy = PolicySpec(kind)
    rewards = REWARD_POOL[int(rng.integers(len(REWARD_POOL)))]
    if policy.kind == THOMPSON:
        rewards = BINARY_REWARD_POOL[int(rng.integers(len(BINARY_REWARD_POOL)))]
    return Configuration(config_id, destroy_ops, acceptance, policy, rewards)


def generate_pool(size, seed):
    """`size` structurally distinct configurations, deterministic in `seed`"""
    if not 1 <= size <= MAX_POOL_SIZE:
        raise InvalidPoolSize("Pool size must be within [1, %s], got %s" % (MAX_POOL_SIZE, size))
    rng = default_rng(seed)
    width = max(3, len(str(size - 1)))
    pool, seen = [], set()
    for i in range(size):
        for _ in range(MAX_RETRIES):
            candidate = sample_config(rng, 'cfg_%0*d' % (width, i))
            if candidate.structural_key not in seen:
                break
        else:
            raise PoolExhausted("No new distinct configuration after %s draws at slot %s"
                                % (MAX_RETRIES, i))
        seen.add(candidate.structural_key)
        pool.append(candidate)
    log.info("Generated %s configurations from seed %s", size, seed)
    return pool


def default_config():
    """The out-of-the-box single-worker configuration"""
    ops = ('c', 'm_10', 'm_20', 'm_30', 'm_40', 'm_50', 'lb_10', 'lb_20', 'lb_30',
           'p_05', 'p_10', 'p_15', 'r_20', 'r_30', 'ri_20', 'ri_30')
    return Configuration('default', tuple(_canonical(ops)), AcceptanceCriterion(HILL_CLIMBING),
                         PolicySpec('thompson'), RewardVector(1, 1, 0, 0))


## JSON ##

def config_to_dict(configuration):
    acceptance = {'kind': configuration.acceptance.kind}
    if configuration.acceptance.kind == SIMULATED_ANNEALING:
        acceptance['step'] = configuration.acceptance.step
    policy = {'kind': configuration.policy.kind}
    if configuration.policy.parameter is not None:
        policy['parameter'] = configuration.policy.parameter
    return {
        'id': configuration.id,
        'destroy_ops': [op.identifier for op in configuration.destroy_ops],
        'acceptance': acceptance,
        'policy': policy,
        'rewards': list(configuration.rewards.as_tuple()),
    }


def config_from_dict(record):
    if not isinstance(record, dict):
        raise InvalidConfiguration("Configuration records must be JSON objects")
    errors = check_keys(record, CONFIG_KEYS) + validate_config(record)
    if errors:
        raise InvalidConfiguration("Invalid configuration %s: %s"
                                   % (record.get('id'), '; '.join(msg for _, msg in errors)))
    acceptance = record['acceptance']
    policy = record['policy']
    return Configuration(record['id'], tuple(_canonical(record['destroy_ops'])),
                         AcceptanceCriterion(acceptance['kind'], acceptance.get('step')),
                         PolicySpec(policy['kind'], policy.get('parameter')),
                         RewardVector(*record['rewards']))


def write_pool(fnm, pool):
    write_json(fnm, [config_to_dict(c) for c in pool])


def read_pool(fnm):
    records = read_json(fnm)
    if not isinstance(records, list):
        raise InvalidConfiguration("Pool file '%s' must hold a JSON list" % fnm)
    pool = [config_from_dict(r) for r in records]
    ids = [c.id for c in pool]
    if len(set(ids)) != len(ids):
        raise InvalidConfiguration("Duplicate configuration ids in '%s'" % fnm)
    return pool
