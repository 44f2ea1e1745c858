"""Checks for configuration records and run manifests in their JSON form.

Each validator returns a list of (field, message) pairs; an empty list means
the field is fine.
"""
import operator
from functools import reduce

from parbalans.cli.actions.alns import HILL_CLIMBING, SIMULATED_ANNEALING, STEP_RANGE
from parbalans.cli.actions.bandit import (BINARY_REWARD_POOL, EPSILON_RANGE, REWARD_POOL, TAU_RANGE,
                                          EPSILON_GREEDY, SOFTMAX, THOMPSON)
from parbalans.cli.actions.operators import FAMILIES, UnknownOperator, parse_operator

MIN_OPERATORS, MAX_OPERATORS = 4, 16


def check_range(setting_name, value, min_val, max_val, typecheck=float):
    try:
        value = typecheck(value)
    except (TypeError, ValueError):
        return [(setting_name, "%s value couldn't be converted to a number. We've got %r."
                 % (setting_name, value))]
    if value < min_val:
        return [(setting_name, "%s is less than allowed (%s < %s)." % (setting_name, value, min_val))]
    if value > max_val:
        return [(setting_name, "%s is larger than allowed (%s > %s)." % (setting_name, value, max_val))]
    return []


def check_required(setting_name, settings):
    if settings.get(setting_name) is None:
        return [(setting_name, "%s is required" % setting_name)]
    return []


def validate_id(settings):
    if not settings.get('id'):
        return [('id', "Configuration id cannot be missing")]
    return []


def validate_destroy_ops(settings):
    ops = settings.get('destroy_ops')
    if not isinstance(ops, list) or not all(isinstance(op, str) for op in ops):
        return [('destroy_ops', "destroy_ops must be a list of operator identifiers")]
    try:
        specs = [parse_operator(op) for op in ops]
    except UnknownOperator as e:
        return [('destroy_ops', str(e))]
    if len(set(ops)) != len(ops):
        return [('destroy_ops', "Duplicate destroy operators in %s" % ops)]
    errors = check_range('destroy_ops', len(ops), MIN_OPERATORS, MAX_OPERATORS, int)
    if len(ops) >= len(FAMILIES) and set(s.family for s in specs) != set(FAMILIES):
        errors.append(('destroy_ops', "%s operators must cover all %s families"
                       % (len(ops), len(FAMILIES))))
    return errors


def validate_acceptance(settings):
    acceptance = settings.get('acceptance') or {}
    kind = acceptance.get('kind')
    if kind == HILL_CLIMBING:
        return []
    if kind == SIMULATED_ANNEALING:
        return check_required('step', acceptance) or check_range('step', acceptance['step'], *STEP_RANGE)
    return [('acceptance', "Unknown acceptance criterion %r" % kind)]


def validate_policy(settings):
    policy = settings.get('policy') or {}
    kind = policy.get('kind')
    if kind == EPSILON_GREEDY:
        return check_required('parameter', policy) or \
            check_range('epsilon', policy['parameter'], *EPSILON_RANGE)
    if kind == SOFTMAX:
        return check_required('parameter', policy) or \
            check_range('tau', policy['parameter'], *TAU_RANGE)
    if kind == THOMPSON:
        return []
    return [('policy', "Unknown learning policy %r" % kind)]


def validate_rewards(settings):
    rewards = settings.get('rewards')
    pool = [list(r.as_tuple()) for r in REWARD_POOL]
    if rewards not in pool:
        return [('rewards', "Reward vector %s is not one of %s" % (rewards, pool))]
    if (settings.get('policy') or {}).get('kind') == THOMPSON and \
            rewards not in [list(r.as_tuple()) for r in BINARY_REWARD_POOL]:
        return [('rewards', "Thompson sampling requires binary rewards, got %s" % rewards)]
    return []


validators = {
    'id': validate_id,
    'destroy_ops': validate_destroy_ops,
    'acceptance': validate_acceptance,
    'policy': validate_policy,
    'rewards': validate_rewards,
}


def validate_config(settings, attribute_filter=None):
    """
    Checks a configuration record against the configuration space.

    @param settings: configuration in its JSON form
    @type settings: dict

    @param attribute_filter: which attributes from settings to check
    @type attribute_filter: list

    @return: a list of errors mapping incorrect fields to the corresponding error message.
    @type: list
    """
    fields = set(attribute_filter or validators.keys())
    return reduce(operator.add, [validators[key](settings) for key in sorted(fields)], [])


def check_keys(record, allowed, required=()):
    """Reject unknown keys and report missing ones"""
    errors = [(key, "Unknown key '%s'" % key) for key in sorted(set(record) - set(allowed))]
    errors += [(key, "%s is required" % key) for key in required if record.get(key) is None]
    return errors
