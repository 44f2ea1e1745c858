from collections import deque

import numpy as np
import pytest

from parbalans.cli.actions import instances
from parbalans.cli.actions.configspace import OPERATOR_POOL
from parbalans.cli.actions.model import MINIMIZE, apply_neighborhood, evaluate, parse_mps
from parbalans.cli.actions.operators import (CROSSOVER, LOCAL_BRANCHING, MUTATION, PROXIMITY,
                                             EmptyNeighborhood, MissingRelaxation, OperatorContext,
                                             OperatorSpec, UnknownOperator, build_neighborhood,
                                             parse_operator)
from tests.support import FIXTURE_MPS

SIZE = 20


@pytest.fixture
def model():
    return instances.knapsack(SIZE, seed=3)


@pytest.fixture
def incumbent(model):
    x = np.zeros(SIZE)
    x[[1, 4, 7]] = 1
    return evaluate(model, x)


def _ctx(incumbent, archive=(), lp_values=None, seed=0):
    return OperatorContext(incumbent, deque(archive), lp_values, np.random.default_rng(seed))


def test_identifiers_parse_back():
    assert len(OPERATOR_POOL) == 26
    for identifier in OPERATOR_POOL:
        assert parse_operator(identifier).identifier == identifier
    assert parse_operator('c') == OperatorSpec(CROSSOVER)
    assert parse_operator('p_05') == OperatorSpec(PROXIMITY, 5)


@pytest.mark.parametrize('identifier', ['x_10', 'm_15', 'p_50', 'c_10', 'lb', 'm_ten'])
def test_unknown_identifiers(identifier):
    with pytest.raises(UnknownOperator):
        parse_operator(identifier)


def test_mutation_frees_ceiling_share(model, incumbent):
    spec = build_neighborhood(parse_operator('m_30'), _ctx(incumbent), model)
    assert len(spec.fixings) == SIZE - 6
    for j, value in spec.fixings.items():
        assert value == incumbent.values[j]
    assert spec.tag == 'm_30'


def test_mutation_is_seeded(model, incumbent):
    first = build_neighborhood(parse_operator('m_10'), _ctx(incumbent, seed=4), model)
    second = build_neighborhood(parse_operator('m_10'), _ctx(incumbent, seed=4), model)
    assert first.fixings == second.fixings


def test_continuous_variables_are_never_fixed():
    model = parse_mps(FIXTURE_MPS)
    incumbent = evaluate(model, [3, 1, 3])
    spec = build_neighborhood(OperatorSpec(MUTATION, 50), _ctx(incumbent), model)
    assert set(spec.fixings) <= {0, 1}
    assert len(spec.fixings) == 1


def test_crossover_without_partner_falls_back(model, incumbent):
    spec = build_neighborhood(parse_operator('c'), _ctx(incumbent, archive=[incumbent]), model)
    assert spec.tag == 'c->m_30'
    assert len(spec.fixings) == SIZE - 6


def test_crossover_fixes_agreement(model, incumbent):
    other = incumbent.values.copy()
    other[[1, 2, 3]] = 1 - other[[1, 2, 3]]
    mate = evaluate(model, other)
    spec = build_neighborhood(parse_operator('c'), _ctx(incumbent, archive=[incumbent, mate]), model)
    assert spec.tag == 'c'
    assert set(spec.fixings) == set(range(SIZE)) - {1, 2, 3}


def test_local_branching_ball(model, incumbent):
    spec = build_neighborhood(OperatorSpec(LOCAL_BRANCHING, 20), _ctx(incumbent), model)
    sub = apply_neighborhood(model, spec)
    assert sub.constraints[-1].name == '_local_branching'
    # radius ceil(20% of 20) = 4
    near = incumbent.values.copy()
    near[[0, 2, 3, 4]] = 1 - near[[0, 2, 3, 4]]
    far = near.copy()
    far[5] = 1
    row = sub.constraints[-1]
    distance = sum(v * near[j] for j, v in row.coefficients.items())
    assert distance <= row.rhs + 1e-9
    distance = sum(v * far[j] for j, v in row.coefficients.items())
    assert distance > row.rhs


def test_proximity_cutoff_and_distance_objective(model, incumbent):
    spec = build_neighborhood(parse_operator('p_10'), _ctx(incumbent), model)
    sub = apply_neighborhood(model, spec)
    assert sub.sense == MINIMIZE
    own = evaluate(sub, incumbent.values)
    # the incumbent is at distance 0 but violates the cutoff
    assert own.objective == pytest.approx(0.0)
    assert not own.feasible
    cutoff = sub.constraints[-1]
    assert cutoff.name == '_proximity_cutoff'
    value = incumbent.objective - model.offset
    assert cutoff.rhs == pytest.approx(value - 0.1 * max(abs(value), 1.0))
    flipped = incumbent.values.copy()
    flipped[[0, 9]] = 1
    assert evaluate(sub, flipped).objective == pytest.approx(2.0)


@pytest.mark.parametrize('identifier', ['r_50', 'ri_50'])
def test_relaxation_operators_need_lp(model, incumbent, identifier):
    with pytest.raises(MissingRelaxation):
        build_neighborhood(parse_operator(identifier), _ctx(incumbent), model)


def test_rens_restricts_fractional_to_floor_ceil(model, incumbent):
    lp = np.ones(SIZE)
    lp[:5] = 0.5
    spec = build_neighborhood(parse_operator('r_50'), _ctx(incumbent, lp_values=lp), model)
    assert set(spec.fixings) == set(range(5, SIZE))
    assert all(v == 1.0 for v in spec.fixings.values())
    assert spec.bound_overrides == dict((j, (0.0, 1.0)) for j in range(5))


def test_rens_caps_free_share(model, incumbent):
    lp = np.ones(SIZE)
    lp[:5] = 0.5
    spec = build_neighborhood(parse_operator('r_10'), _ctx(incumbent, lp_values=lp), model)
    # ceil(10% of 20) = 2 stay free, the other 3 fractional ones go to the incumbent
    assert len(spec.bound_overrides) == 2
    assert len(spec.fixings) == SIZE - 2
    for j in set(range(5)) - set(spec.bound_overrides):
        assert spec.fixings[j] == incumbent.values[j]


def test_rens_on_integral_relaxation_is_empty(model, incumbent):
    with pytest.raises(EmptyNeighborhood):
        build_neighborhood(parse_operator('r_50'), _ctx(incumbent, lp_values=np.ones(SIZE)), model)


def test_rins_fixes_agreement(model, incumbent):
    lp = incumbent.values.copy()
    lp[10:16] = 0.5
    spec = build_neighborhood(parse_operator('ri_50'), _ctx(incumbent, lp_values=lp), model)
    assert set(spec.fixings) == set(range(SIZE)) - set(range(10, 16))
    capped = build_neighborhood(parse_operator('ri_10'), _ctx(incumbent, lp_values=lp), model)
    assert len(capped.fixings) == SIZE - 2
    with pytest.raises(EmptyNeighborhood):
        build_neighborhood(parse_operator('ri_10'),
                           _ctx(incumbent, lp_values=incumbent.values.copy()), model)


def _mate(model, incumbent):
    other = incumbent.values.copy()
    other[[1, 2, 3]] = 1 - other[[1, 2, 3]]
    return evaluate(model, other)


@pytest.mark.parametrize('identifier', ['m_10', 'm_50', 'c', 'lb_10', 'lb_50', 'ri_10', 'ri_50'])
@pytest.mark.parametrize('seed', range(5))
def test_neighborhood_contains_incumbent(model, incumbent, identifier, seed):
    assert incumbent.feasible
    lp = incumbent.values.copy()
    lp[10:16] = 0.5
    ctx = _ctx(incumbent, archive=[incumbent, _mate(model, incumbent)], lp_values=lp, seed=seed)
    sub = apply_neighborhood(model, build_neighborhood(parse_operator(identifier), ctx, model))
    assert evaluate(sub, incumbent.values).feasible


def test_crossover_fallback_draws_like_mutation(model, incumbent):
    fallback, mutation = np.zeros(SIZE), np.zeros(SIZE)
    sizes = set()
    for seed in range(1000):
        c = build_neighborhood(parse_operator('c'), _ctx(incumbent, [incumbent], seed=seed), model)
        m = build_neighborhood(parse_operator('m_30'), _ctx(incumbent, seed=seed), model)
        fallback[list(c.fixings)] += 1
        mutation[list(m.fixings)] += 1
        sizes.update((len(c.fixings), len(m.fixings)))
    assert sizes == {SIZE - 6}
    assert np.array_equal(fallback, mutation)
    # every variable is fixed about 70% of the time
    assert np.all(np.abs(fallback / 1000.0 - 0.7) < 0.07)
