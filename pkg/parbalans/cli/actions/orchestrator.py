"""Portfolio runs: N differently configured workers, T reserved cores each,
aggregated by the pointwise minimum of their primal gaps.

Under the simulated clock workers run one after another in configuration
order, each on a fresh clock, which makes a run a function of its plan.
Under the wall clock every worker gets its own process; improvements are
pushed to a managed queue stamped against a common monotonic origin and a
managed event stops everybody at the deadline.
"""
import hashlib
import logging
import multiprocessing
import os
import threading
import time
from collections import OrderedDict
from dataclasses import dataclass, replace

from parbalans.cli import config
from parbalans.cli.actions.alns import SOLVED, NoFeasibleSolution, run_worker, settle_reference
from parbalans.cli.actions.clock import SimulatedClock, WallClock
from parbalans.cli.actions.metrics import GapTrace, aggregate_min, build_trace, write_trace_csv
from parbalans.cli.actions.model import external_objective
from parbalans.cli.actions.utils import (ConsoleProgressBar, EMPTY_RESULT, ParBalansException,
                                         USAGE_ERROR, write_json)

__all__ = ['PortfolioPlan', 'PortfolioResult', 'plan_for_threads', 'run_portfolio', 'worker_seed',
           'write_portfolio', 'PlanInvalid', 'AllWorkersInfeasible']

log = logging.getLogger(__name__)

# seconds granted to workers after the deadline to notice the stop event
STOP_GRACE = 30


class PlanInvalid(ParBalansException):
    code = USAGE_ERROR


class AllWorkersInfeasible(ParBalansException):
    code = EMPTY_RESULT


@dataclass(frozen=True, eq=False)
class PortfolioPlan:
    configs: tuple
    threads_per_worker: int
    core_cap: int
    wall_seconds: float
    master_seed: int = 0

    def __post_init__(self):
        object.__setattr__(self, 'configs', tuple(self.configs))
        self.validate()

    def validate(self):
        n, t = len(self.configs), self.threads_per_worker
        if n < 1:
            raise PlanInvalid("A portfolio needs at least one worker")
        if t < 1:
            raise PlanInvalid("Threads per worker must be >= 1, got %s" % t)
        if n * t > self.core_cap:
            raise PlanInvalid("%s workers x %s threads = %s exceeds the core cap of %s"
                              % (n, t, n * t, self.core_cap))
        if self.wall_seconds <= 0:
            raise PlanInvalid("wall_seconds must be positive, got %s" % self.wall_seconds)
        ids = [c.id for c in self.configs]
        if len(set(ids)) != len(ids):
            raise PlanInvalid("Configuration ids in a plan must be unique")


@dataclass(frozen=True, eq=False)
class PortfolioResult:
    workers: OrderedDict
    aggregate: GapTrace
    best_config_id: str
    reference_objective: float


def plan_for_threads(pool, threads, core_cap, ranking=None, wall_seconds=60.0, master_seed=0):
    """
    As many workers as fit the core cap at `threads` cores each, taken from
    the head of `ranking` (configuration ids) or of the pool.
    """
    if not pool:
        raise PlanInvalid("Cannot plan from an empty pool")
    if threads < 1:
        raise PlanInvalid("Threads per worker must be >= 1, got %s" % threads)
    candidates = list(pool)
    if ranking is not None:
        by_id = dict((c.id, c) for c in pool)
        missing = [i for i in ranking if i not in by_id]
        if missing:
            raise PlanInvalid("Ranking names configurations missing from the pool: %s" % missing)
        candidates = [by_id[i] for i in ranking]
    n = min(core_cap // threads, len(candidates))
    log.info("Plan: %s workers x %s threads under a cap of %s cores", n, threads, core_cap)
    return PortfolioPlan(tuple(candidates[:n]), threads, core_cap, wall_seconds, master_seed)


def worker_seed(master_seed, config_id):
    digest = hashlib.sha256(('%s:%s' % (master_seed, config_id)).encode('utf-8')).digest()
    return int.from_bytes(digest[:8], 'big')


class TraceCollector(object):
    """Timestamped best-objective updates from all workers"""

    def __init__(self):
        self._lock = threading.Lock()
        self.events = OrderedDict()

    def push(self, config_id, t, objective):
        with self._lock:
            self.events.setdefault(config_id, []).append((t, objective))


def _solve(model, configuration, plan, clock, reference_objective, backend, should_stop,
           on_improvement):
    try:
        return run_worker(model, configuration, plan.wall_seconds,
                          worker_seed(plan.master_seed, configuration.id), clock=clock,
                          reference_objective=reference_objective, backend=backend,
                          should_stop=should_stop, on_improvement=on_improvement,
                          thread_hint=plan.threads_per_worker)
    except NoFeasibleSolution as e:
        log.warning("%s", e)
        return e.result


def _run_sequential(model, plan, reference_objective, backend, collector, progress):
    pbar = ConsoleProgressBar('Workers', len(plan.configs), enabled=progress)
    results = []
    for configuration in plan.configs:
        def on_improvement(t, objective, config_id=configuration.id):
            collector.push(config_id, t, objective)
        results.append(_solve(model, configuration, plan, SimulatedClock(), reference_objective,
                              backend, None, on_improvement))
        pbar.step()
    pbar.finish()
    return results


def _pool_worker(task):
    model, configuration, plan, origin, reference_objective, backend, stop, queue = task
    clock = WallClock(origin)

    def on_improvement(t, objective):
        queue.put((configuration.id, clock.now(), objective))

    return _solve(model, configuration, plan, clock, reference_objective, backend,
                  stop.is_set, on_improvement)


def _run_pool(model, plan, reference_objective, backend, collector):
    manager = multiprocessing.Manager()
    try:
        stop, queue = manager.Event(), manager.Queue()
        origin = time.monotonic()
        tasks = [(model, c, plan, origin, reference_objective, backend, stop, queue)
                 for c in plan.configs]
        with multiprocessing.Pool(processes=len(tasks)) as pool:
            pending = pool.map_async(_pool_worker, tasks)
            pending.wait(plan.wall_seconds)
            if not pending.ready():
                log.info("Deadline reached, stopping workers")
                stop.set()
            results = pending.get(STOP_GRACE + plan.wall_seconds)
        while not queue.empty():
            collector.push(*queue.get_nowait())
    finally:
        manager.shutdown()
    return results


def run_portfolio(model, plan, reference_objective=None, clock_mode=None, backend=None,
                  progress=False):
    """
    Run every worker of `plan` on `model` and aggregate their traces.

    @param reference_objective: best-known objective (model sense) for the
        gaps; replaced by any better objective the workers find
    @param clock_mode: 'simulated' or 'wall', default from configuration
    """
    plan.validate()
    mode = clock_mode or config.c('clock', 'mode')
    collector = TraceCollector()
    if mode == 'simulated':
        results = _run_sequential(model, plan, reference_objective, backend, collector, progress)
    elif mode == 'wall':
        if backend is not None and not isinstance(backend, str):
            backend = backend.__name__.rsplit('.', 1)[-1]
        results = _run_pool(model, plan, reference_objective, backend, collector)
    else:
        raise ParBalansException("Unknown clock mode '%s'" % mode, USAGE_ERROR)

    solved = [r for r in results if r.status == SOLVED]
    if not solved:
        raise AllWorkersInfeasible("None of the %s workers found a feasible solution"
                                   % len(results))
    found = external_objective(model, min(r.best.objective for r in solved))
    x_star = settle_reference(model, found, reference_objective, "The portfolio")

    workers = OrderedDict()
    for result in results:
        events = collector.events.get(result.config_id, [])
        workers[result.config_id] = replace(result, trace=build_trace(events, x_star, plan.wall_seconds),
                                            reference_objective=x_star)
    aggregate = aggregate_min(w.trace for w in workers.values())

    def reached(item):
        index, trace = item[0], item[1].trace
        return (trace.final_gap(capped=False) if trace.points else float('inf'),
                trace.points[-1][0] if trace.points else float('inf'), index)
    best = min(((i, w) for i, w in enumerate(workers.values())), key=reached)[1]
    log.info("Portfolio of %s: best %s from %s", len(workers), found, best.config_id)
    return PortfolioResult(workers, aggregate, best.config_id, x_star)


def write_portfolio(result, outdir, raw=False, extra=None):
    """One CSV per worker under workers/, aggregate.csv and summary.json"""
    for config_id, worker in result.workers.items():
        write_trace_csv(worker.trace, os.path.join(outdir, 'workers', '%s.csv' % config_id), raw)
    write_trace_csv(result.aggregate, os.path.join(outdir, 'aggregate.csv'), raw)
    summary = {
        'best_config_id': result.best_config_id,
        'reference_objective': result.reference_objective,
        'final_gap': result.aggregate.final_gap(capped=not raw),
        'workers': [w.summary() for w in result.workers.values()],
    }
    summary.update(extra or {})
    write_json(os.path.join(outdir, 'summary.json'), summary)
    return summary
