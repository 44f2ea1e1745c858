import os

import pytest

from parbalans.cli.actions import instances
from parbalans.cli.actions.configspace import generate_pool
from parbalans.cli.actions.metrics import gap_at
from parbalans.cli.actions.model import BINARY, GE, LE, MINIMIZE, LinearConstraint, Variable, build_model
from parbalans.cli.actions.orchestrator import (AllWorkersInfeasible, PlanInvalid, PortfolioPlan,
                                                plan_for_threads, run_portfolio, worker_seed,
                                                write_portfolio)
from parbalans.cli.actions.utils import read_json


@pytest.fixture(scope='module')
def pool():
    return generate_pool(180, 7)


@pytest.fixture(scope='module')
def model():
    return instances.set_cover(25, seed=6)


def test_reduced_pools_fit_180_cores(pool):
    ranking = [c.id for c in reversed(pool)]
    assert len(plan_for_threads(pool, 4, 180).configs) == 45
    assert len(plan_for_threads(pool, 4, 180, ranking[:45]).configs) == 45
    plan = plan_for_threads(pool, 8, 180, ranking[:20])
    assert [c.id for c in plan.configs] == ranking[:20]
    assert len(plan_for_threads(pool, 16, 180, ranking[:10]).configs) == 10
    assert len(plan_for_threads(pool, 1, 4).configs) == 4


def test_plan_rejections(pool):
    with pytest.raises(PlanInvalid):
        PortfolioPlan(tuple(pool[:46]), 4, 180, 60.0)
    with pytest.raises(PlanInvalid):
        PortfolioPlan((), 1, 4, 60.0)
    with pytest.raises(PlanInvalid):
        PortfolioPlan(tuple(pool[:2]), 1, 4, 0.0)
    with pytest.raises(PlanInvalid):
        PortfolioPlan((pool[0], pool[0]), 1, 4, 10.0)
    with pytest.raises(PlanInvalid):
        plan_for_threads(pool, 0, 4)
    with pytest.raises(PlanInvalid):
        plan_for_threads(pool, 1, 4, ['nope'])
    with pytest.raises(PlanInvalid):
        plan_for_threads([], 1, 4)


def test_worker_seeds():
    assert worker_seed(3, 'cfg_001') == worker_seed(3, 'cfg_001')
    assert worker_seed(3, 'cfg_001') != worker_seed(3, 'cfg_002')
    assert worker_seed(3, 'cfg_001') != worker_seed(4, 'cfg_001')
    assert 0 <= worker_seed(0, 'x') < 2 ** 64


def _plan(pool, n=4, seconds=2.0):
    return PortfolioPlan(tuple(pool[:n]), 1, n, seconds, master_seed=5)


def test_aggregate_is_pointwise_minimum(pool, model):
    result = run_portfolio(model, _plan(pool), clock_mode='simulated')
    assert list(result.workers) == [c.id for c in pool[:4]]
    times = sorted(set([0.0, 2.0] + [t for w in result.workers.values() for t in w.trace.times]))
    for t in times:
        assert gap_at(result.aggregate, t) == min(gap_at(w.trace, t) for w in result.workers.values())
    assert result.aggregate.final_gap() == 0.0
    best = result.workers[result.best_config_id]
    assert best.trace.final_gap() == 0.0


def test_larger_portfolio_is_never_worse(pool, model):
    small = run_portfolio(model, _plan(pool, 2), clock_mode='simulated')
    large = run_portfolio(model, _plan(pool, 4), clock_mode='simulated')
    x_star = min(small.reference_objective, large.reference_objective)
    small = run_portfolio(model, _plan(pool, 2), reference_objective=x_star, clock_mode='simulated')
    large = run_portfolio(model, _plan(pool, 4), reference_objective=x_star, clock_mode='simulated')
    for t in [0.0, 0.5, 1.0, 1.5, 2.0]:
        assert gap_at(large.aggregate, t) <= gap_at(small.aggregate, t)


def test_reference_is_replaced_when_beaten(pool, model):
    result = run_portfolio(model, _plan(pool), reference_objective=10 ** 6, clock_mode='simulated')
    assert result.reference_objective < 10 ** 6
    assert result.aggregate.final_gap() == 0.0


def test_all_infeasible(pool):
    toy = build_model('toy', MINIMIZE, [Variable('x', BINARY)],
                      [LinearConstraint('lo', {0: 1}, GE, 1), LinearConstraint('hi', {0: 1}, LE, 0)],
                      {0: 1})
    with pytest.raises(AllWorkersInfeasible):
        run_portfolio(toy, _plan(pool, 2, 1.0), clock_mode='simulated')


def test_written_artifacts(tmp_path, pool, model):
    result = run_portfolio(model, _plan(pool), clock_mode='simulated')
    outdir = str(tmp_path)
    summary = write_portfolio(result, outdir, extra={'note': 'x'})
    assert sorted(os.listdir(os.path.join(outdir, 'workers'))) == \
        sorted('%s.csv' % c.id for c in pool[:4])
    assert os.path.isfile(os.path.join(outdir, 'aggregate.csv'))
    on_disk = read_json(os.path.join(outdir, 'summary.json'))
    assert on_disk == summary
    assert on_disk['note'] == 'x'
    assert [w['config_id'] for w in on_disk['workers']] == [c.id for c in pool[:4]]


def test_simulated_runs_are_byte_identical(tmp_path, pool, model):
    contents = []
    for run in ('a', 'b'):
        outdir = str(tmp_path / run)
        write_portfolio(run_portfolio(model, _plan(pool), clock_mode='simulated'), outdir)
        with open(os.path.join(outdir, 'aggregate.csv')) as f:
            contents.append(f.read())
    assert contents[0] == contents[1]


def test_wall_clock_pool(pool):
    model = instances.knapsack(15, seed=2)
    result = run_portfolio(model, _plan(pool, 2, 1.0), clock_mode='wall')
    assert len(result.workers) == 2
    assert result.aggregate.final_gap() == 0.0
    assert all(0.0 <= t <= 1.0 for t in result.aggregate.times)
