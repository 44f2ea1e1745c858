"""Seeded generators for small binary benchmark instances."""
import numpy as np

from parbalans.cli.actions.model import (BINARY, GE, LE, MAXIMIZE, MINIMIZE, LinearConstraint,
                                         Variable, build_model)
from parbalans.cli.actions.utils import ParBalansException, USAGE_ERROR

__all__ = ['knapsack', 'set_cover', 'independent_set', 'generators', 'generate']


def _binaries(count):
    return [Variable('x%d' % j, BINARY) for j in range(count)]


def knapsack(size, seed=0):
    """Max profit 0/1 knapsack with capacity half the total weight"""
    rng = np.random.default_rng(seed)
    weights = rng.integers(5, 31, size)
    profits = rng.integers(5, 31, size)
    capacity = int(weights.sum()) // 2
    constraint = LinearConstraint('capacity', dict(enumerate(weights.tolist())), LE, capacity)
    return build_model('knapsack_%d_%d' % (size, seed), MAXIMIZE, _binaries(size), [constraint],
                       dict(enumerate(profits.tolist())))


def set_cover(size, seed=0, elements=None, unit_costs=False, density=0.3):
    """Min-cost cover of `elements` (default 2*size) by `size` random sets;
    every element lies in at least one set"""
    rng = np.random.default_rng(seed)
    elements = elements or 2 * size
    member = rng.random((elements, size)) < density
    for e in np.flatnonzero(~member.any(axis=1)):
        member[e, rng.integers(size)] = True
    costs = np.ones(size, dtype=int) if unit_costs else rng.integers(1, 11, size)
    constraints = [LinearConstraint('cover%d' % e, dict((int(j), 1) for j in np.flatnonzero(row)),
                                    GE, 1)
                   for e, row in enumerate(member)]
    return build_model('set_cover_%d_%d' % (size, seed), MINIMIZE, _binaries(size), constraints,
                       dict(enumerate(costs.tolist())))


def independent_set(size, seed=0, density=0.3):
    """Maximum independent set on a G(size, density) random graph"""
    rng = np.random.default_rng(seed)
    upper = np.triu(rng.random((size, size)) < density, k=1)
    constraints = [LinearConstraint('edge%d_%d' % (u, v), {int(u): 1, int(v): 1}, LE, 1)
                   for u, v in zip(*np.nonzero(upper))]
    return build_model('independent_set_%d_%d' % (size, seed), MAXIMIZE, _binaries(size),
                       constraints, dict((j, 1) for j in range(size)))


generators = {
    'knapsack': knapsack,
    'set_cover': set_cover,
    'independent_set': independent_set,
}


def generate(kind, size, seed=0):
    if kind not in generators:
        raise ParBalansException("Unknown instance kind '%s' (expected one of %s)"
                                 % (kind, ', '.join(sorted(generators))), USAGE_ERROR)
    if size < 1:
        raise ParBalansException("Instance size must be >= 1, got %s" % size, USAGE_ERROR)
    return generators[kind](size, seed)
