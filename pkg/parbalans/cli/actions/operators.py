"""Destroy operators. Each turns an incumbent into a NeighborhoodSpec:

- mutation-p: free ceil(p*d/100) random integer variables, fix the rest.
- crossover: fix the integer variables on which the incumbent and a random
  archived solution agree.
- local_branching-p: Hamming-ball constraint of radius ceil(p*|B|/100)
  around the incumbent over the binaries B (Fischetti & Lodi).
- proximity-p: objective cutoff by p percent, minimize the distance to the
  incumbent instead (Fischetti & Monaci).
- rens-p: fix LP-integral variables, restrict fractional ones to their
  floor/ceil (Berthold).
- rins-p: fix variables where LP and incumbent agree (Danna, Rothberg &
  Le Pape).

For rens/rins, if more than ceil(p*d/100) variables stay free a random
excess is fixed at the incumbent. Continuous variables are never fixed.
"""
from collections import deque
from dataclasses import dataclass, field

import numpy as np

from parbalans.cli.actions.model import INT_TOL, LE, LinearConstraint, NeighborhoodSpec
from parbalans.cli.actions.utils import ParBalansException

__all__ = ['OperatorSpec', 'OperatorContext', 'build_neighborhood', 'parse_operator',
           'FAMILIES', 'PREFIXES', 'PERCENTAGES', 'MissingRelaxation', 'EmptyNeighborhood',
           'UnknownOperator']

CROSSOVER, MUTATION, LOCAL_BRANCHING = 'crossover', 'mutation', 'local_branching'
PROXIMITY, RENS, RINS = 'proximity', 'rens', 'rins'

FAMILIES = (CROSSOVER, MUTATION, LOCAL_BRANCHING, PROXIMITY, RENS, RINS)

PREFIXES = {
    CROSSOVER: 'c',
    MUTATION: 'm',
    LOCAL_BRANCHING: 'lb',
    PROXIMITY: 'p',
    RENS: 'r',
    RINS: 'ri',
}

PERCENTAGES = {
    CROSSOVER: (None,),
    MUTATION: (10, 20, 30, 40, 50),
    LOCAL_BRANCHING: (10, 20, 30, 40, 50),
    PROXIMITY: (5, 10, 15, 20, 30),
    RENS: (10, 20, 30, 40, 50),
    RINS: (10, 20, 30, 40, 50),
}

LP_TOL = 1e-6


class UnknownOperator(ParBalansException):
    pass


class MissingRelaxation(ParBalansException):
    pass


class EmptyNeighborhood(ParBalansException):
    pass


@dataclass(frozen=True)
class OperatorSpec:
    family: str
    percentage: int = None

    def __post_init__(self):
        if self.family not in FAMILIES:
            raise UnknownOperator("Unknown operator family '%s'" % self.family)
        if self.percentage not in PERCENTAGES[self.family]:
            raise UnknownOperator("Percentage %s not allowed for %s" % (self.percentage, self.family))

    @property
    def identifier(self):
        if self.percentage is None:
            return PREFIXES[self.family]
        return '%s_%02d' % (PREFIXES[self.family], self.percentage)

    def __str__(self):
        return self.identifier


_by_prefix = dict((prefix, family) for family, prefix in PREFIXES.items())


def parse_operator(identifier):
    """'m_30' -> OperatorSpec('mutation', 30); 'c' -> OperatorSpec('crossover')"""
    prefix, _, percentage = identifier.partition('_')
    if prefix not in _by_prefix:
        raise UnknownOperator("Unknown operator '%s'" % identifier)
    try:
        return OperatorSpec(_by_prefix[prefix], int(percentage) if percentage else None)
    except ValueError:
        raise UnknownOperator("Unknown operator '%s'" % identifier)


@dataclass(frozen=True, eq=False)
class OperatorContext:
    incumbent: object
    archive: deque = field(default_factory=deque)
    lp_values: np.ndarray = None
    rng: np.random.Generator = None


def _share(percentage, count):
    # ceil(p * count / 100) without float rounding
    return (percentage * count + 99) // 100


def _fix_at(values, indices):
    return dict((int(j), float(round(values[j]))) for j in indices)


def _mutation(spec, ctx, model, percentage=None):
    pool = np.flatnonzero(model.integer_mask)
    if not pool.size:
        raise EmptyNeighborhood("No integer variables to destroy")
    free = ctx.rng.choice(pool, _share(percentage or spec.percentage, pool.size), replace=False)
    fixed = np.setdiff1d(pool, free)
    return NeighborhoodSpec(fixings=_fix_at(ctx.incumbent.values, fixed),
                            tag=spec.identifier if percentage is None else 'c->m_%02d' % percentage)


def _crossover(spec, ctx, model):
    incumbent = ctx.incumbent.values
    others = [s for s in ctx.archive if not np.array_equal(s.values, incumbent)]
    if not others:
        return _mutation(spec, ctx, model, percentage=30)
    mate = others[int(ctx.rng.integers(len(others)))].values
    pool = np.flatnonzero(model.integer_mask)
    agree = pool[np.abs(incumbent[pool] - mate[pool]) <= INT_TOL]
    if agree.size == pool.size:
        raise EmptyNeighborhood("Crossover parents agree on every integer variable")
    return NeighborhoodSpec(fixings=_fix_at(incumbent, agree), tag=spec.identifier)


def _distance_terms(model, incumbent):
    """Coefficients and constant of the Hamming distance to the incumbent over binaries"""
    binaries = np.flatnonzero(model.binary_mask)
    ones = binaries[incumbent[binaries] > 0.5]
    coefficients = dict((int(j), 1.0) for j in binaries)
    coefficients.update((int(j), -1.0) for j in ones)
    return binaries, coefficients, float(ones.size)


def _local_branching(spec, ctx, model):
    binaries, coefficients, ones = _distance_terms(model, ctx.incumbent.values)
    if not binaries.size:
        raise EmptyNeighborhood("Local branching needs binary variables")
    radius = _share(spec.percentage, binaries.size)
    ball = LinearConstraint('_local_branching', coefficients, LE, radius - ones)
    return NeighborhoodSpec(extra_constraints=(ball,), tag=spec.identifier)


def _proximity(spec, ctx, model):
    if not model.objective:
        raise EmptyNeighborhood("Proximity needs a non-constant objective")
    value = ctx.incumbent.objective - model.offset
    delta = spec.percentage / 100.0 * max(abs(value), 1.0)
    cutoff = LinearConstraint('_proximity_cutoff', model.objective, LE, value - delta)
    _, coefficients, ones = _distance_terms(model, ctx.incumbent.values)
    return NeighborhoodSpec(extra_constraints=(cutoff,), objective_override=(coefficients, ones),
                            tag=spec.identifier)


def _cap_free(spec, ctx, pool, free, fixings):
    """Fix a random excess of `free` at the incumbent so at most ceil(p*d/100) stay free"""
    limit = _share(spec.percentage, pool.size)
    if free.size > limit:
        refix = ctx.rng.choice(free, free.size - limit, replace=False)
        fixings.update(_fix_at(ctx.incumbent.values, refix))
        free = np.setdiff1d(free, refix)
    return free


def _rens(spec, ctx, model):
    if ctx.lp_values is None:
        raise MissingRelaxation("RENS needs the LP relaxation")
    pool = np.flatnonzero(model.integer_mask)
    lp = ctx.lp_values
    integral = np.abs(lp[pool] - np.round(lp[pool])) <= LP_TOL
    fixings = _fix_at(lp, pool[integral])
    free = _cap_free(spec, ctx, pool, pool[~integral], fixings)
    if not free.size:
        raise EmptyNeighborhood("RENS would fix every integer variable")
    overrides = dict((int(j), (float(np.floor(lp[j])), float(np.ceil(lp[j])))) for j in free)
    return NeighborhoodSpec(fixings=fixings, bound_overrides=overrides, tag=spec.identifier)


def _rins(spec, ctx, model):
    if ctx.lp_values is None:
        raise MissingRelaxation("RINS needs the LP relaxation")
    pool = np.flatnonzero(model.integer_mask)
    incumbent = ctx.incumbent.values
    agree = np.abs(ctx.lp_values[pool] - incumbent[pool]) <= LP_TOL
    fixings = _fix_at(incumbent, pool[agree])
    free = _cap_free(spec, ctx, pool, pool[~agree], fixings)
    if not free.size:
        raise EmptyNeighborhood("RINS would fix every integer variable")
    return NeighborhoodSpec(fixings=fixings, tag=spec.identifier)


_builders = {
    CROSSOVER: _crossover,
    MUTATION: _mutation,
    LOCAL_BRANCHING: _local_branching,
    PROXIMITY: _proximity,
    RENS: _rens,
    RINS: _rins,
}


def build_neighborhood(spec, ctx, model):
    """Apply destroy operator `spec` to the incumbent in `ctx`"""
    return _builders[spec.family](spec, ctx, model)
