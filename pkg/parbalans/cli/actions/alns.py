"""One Balans worker: adaptive large neighborhood search whose destroy
operator is picked by a bandit and whose repair is a budgeted sub-MIP solve.
"""
import logging
import math
from collections import deque
from dataclasses import dataclass, field, replace

import numpy as np

from parbalans.cli import config
from parbalans.cli.actions.bandit import (ACCEPT, BEST, BETTER, OUTCOMES, REJECT, init_state,
                                          select_arm, update)
from parbalans.cli.actions.clock import make_clock
from parbalans.cli.actions.lp import OPTIMAL as LP_OPTIMAL, solve_lp
from parbalans.cli.actions.metrics import GapTrace, build_trace
from parbalans.cli.actions.model import apply_neighborhood, evaluate, external_objective
from parbalans.cli.actions.operators import (EmptyNeighborhood, MissingRelaxation, OperatorContext,
                                             build_neighborhood)
from parbalans.cli.actions.subsolver import get_backend
from parbalans.cli.actions.subsolver.common import SolveBudget
from parbalans.cli.actions.utils import EMPTY_RESULT, USAGE_ERROR, ParBalansException

__all__ = ['AcceptanceCriterion', 'WorkerResult', 'accept', 'run_worker', 'settle_reference',
           'NoFeasibleSolution', 'HILL_CLIMBING', 'SIMULATED_ANNEALING', 'SOLVED', 'NO_SOLUTION']

log = logging.getLogger(__name__)

HILL_CLIMBING, SIMULATED_ANNEALING = 'hill_climbing', 'simulated_annealing'
SOLVED, NO_SOLUTION = 'solved', 'no_solution'

STEP_RANGE = (0.01, 1.0)
MIN_TEMPERATURE = 1e-6


class NoFeasibleSolution(ParBalansException):
    code = EMPTY_RESULT

    def __init__(self, msg, result=None):
        super(NoFeasibleSolution, self).__init__(msg)
        self.result = result


@dataclass(frozen=True)
class AcceptanceCriterion:
    kind: str
    step: float = None
    # on the relative-delta scale; cooled geometrically by `step`
    temperature: float = 1.0

    def __post_init__(self):
        if self.kind == SIMULATED_ANNEALING:
            if self.step is None or not STEP_RANGE[0] <= self.step <= STEP_RANGE[1]:
                raise ParBalansException("Annealing step %s outside [%s, %s]"
                                         % ((self.step,) + STEP_RANGE))
            if self.temperature <= 0:
                raise ParBalansException("Temperature must be positive, got %s" % self.temperature)
        elif self.kind != HILL_CLIMBING:
            raise ParBalansException("Unknown acceptance criterion '%s'" % self.kind)


def accept(criterion, candidate_obj, current_obj, rng):
    """Decide on a candidate (minimization). Returns (accepted, criterion after cooling)."""
    if criterion.kind == HILL_CLIMBING:
        return candidate_obj <= current_obj, criterion
    if candidate_obj <= current_obj:
        accepted = True
    else:
        delta = (candidate_obj - current_obj) / max(abs(current_obj), 1e-10)
        accepted = bool(rng.random() < math.exp(-delta / criterion.temperature))
    cooled = max(MIN_TEMPERATURE, criterion.temperature * criterion.step)
    return accepted, replace(criterion, temperature=cooled)


@dataclass(frozen=True, eq=False)
class WorkerResult:
    config_id: str
    status: str
    # incumbent on the original model (internal objective), None without a solution
    best: object
    # objective in the model's own sense
    objective: float
    # (seconds, objective) for every new global best
    events: list
    trace: GapTrace
    iterations: int = 0
    pulls: dict = field(default_factory=dict)
    outcomes: dict = field(default_factory=dict)
    arm_outcomes: dict = field(default_factory=dict)
    # x* the trace was built against
    reference_objective: float = None

    def summary(self):
        return {
            'config_id': self.config_id,
            'status': self.status,
            'objective': self.objective,
            'iterations': self.iterations,
            'pulls': self.pulls,
            'outcomes': self.outcomes,
            'arm_outcomes': self.arm_outcomes,
        }


def _worker_settings():
    return dict((key, float(value)) for key, value in config.clist('worker'))


def _improves(candidate, reference):
    return candidate < reference - 1e-9 * max(1.0, abs(reference))


def settle_reference(model, found, reference_objective, who):
    """x* for gap traces: the best-known objective, or `found` (both in the
    model's sense) when there is none or `found` beats it"""
    if reference_objective is None:
        return found
    # the sense conversion is its own inverse: compare in minimization form
    if external_objective(model, found) < external_objective(model, reference_objective):
        log.warning("%s beat the reference objective %s with %s, using it instead",
                    who, reference_objective, found)
        return found
    return reference_objective


def run_worker(model, configuration, wall_seconds, seed, clock=None, reference_objective=None,
               backend=None, should_stop=None, on_improvement=None, thread_hint=1):
    """
    Run one worker for `wall_seconds` on `clock` (simulated by default).

    @param configuration: the worker's Configuration
    @param reference_objective: best-known objective in the model's sense, used
        as x* for the trace; the worker's own best when omitted
    @param should_stop: callable polled at iteration and node boundaries
    @param on_improvement: callable(seconds, objective) fired on every new best
    """
    if wall_seconds <= 0:
        raise ParBalansException("wall_seconds must be positive, got %s" % wall_seconds,
                                 USAGE_ERROR)
    clock = clock or make_clock()
    backend = backend if hasattr(backend, 'solve_mip') else get_backend(backend)
    settings = _worker_settings()
    gap_limit = float(config.c('solver', 'gap_limit'))
    rng = np.random.default_rng(seed)
    start = clock.now()

    def elapsed():
        return clock.now() - start

    def stopped():
        return should_stop is not None and should_stop()

    ops = list(configuration.destroy_ops)
    names = [op.identifier for op in ops]
    events = []

    def record(solution, t):
        value = external_objective(model, solution.objective)
        events.append((t, value))
        log.info("%s: new best %s at %.3fs", configuration.id, value, t)
        if on_improvement is not None:
            on_improvement(t, value)

    initial = SolveBudget(wall_seconds=min(settings['initial_fraction'] * wall_seconds,
                                           settings['initial_cap_seconds']),
                          gap_limit=gap_limit, thread_hint=thread_hint)
    first = backend.find_first_feasible(model, initial, seed=int(rng.integers(2 ** 31)),
                                        clock=clock, should_stop=should_stop)
    if first.incumbent is None:
        result = WorkerResult(configuration.id, NO_SOLUTION, None, None, [], GapTrace((), wall_seconds),
                              pulls=dict((n, 0) for n in names),
                              outcomes=dict((o, 0) for o in OUTCOMES))
        raise NoFeasibleSolution("%s found no feasible solution (%s) within %.3fs"
                                 % (configuration.id, first.status, initial.wall_seconds), result)

    incumbent = best = first.incumbent
    record(best, first.history[-1][0] if first.history else elapsed())

    relaxation = solve_lp(model)
    lp_values = relaxation.values if relaxation.status == LP_OPTIMAL else None

    state = init_state(configuration.policy, len(ops))
    archive = deque([incumbent], maxlen=int(settings['archive_capacity']))
    criterion = configuration.acceptance
    outcomes = dict((o, 0) for o in OUTCOMES)
    arm_outcomes = dict((n, dict((o, 0) for o in OUTCOMES)) for n in names)
    repair_seconds = min(max(wall_seconds / settings['repair_divisor'],
                             settings['repair_min_seconds']), settings['repair_max_seconds'])
    iterations = 0

    while elapsed() < wall_seconds and not stopped():
        iterations += 1
        arm = select_arm(state, rng)
        ctx = OperatorContext(incumbent, archive, lp_values, rng)
        outcome = REJECT
        try:
            sub = apply_neighborhood(model, build_neighborhood(ops[arm], ctx, model))
        except (EmptyNeighborhood, MissingRelaxation) as e:
            log.debug("%s: skipping %s (%s)", configuration.id, names[arm], e)
            clock.tick()
        else:
            start_point = evaluate(sub, incumbent.values)
            warm = incumbent if start_point.feasible and start_point.integral else None
            budget = SolveBudget(wall_seconds=min(repair_seconds, wall_seconds - elapsed()),
                                 node_limit=int(settings['repair_node_limit']),
                                 gap_limit=gap_limit, thread_hint=thread_hint)
            repaired = backend.solve_mip(sub, warm, budget, seed=int(rng.integers(2 ** 31)),
                                         clock=clock, should_stop=should_stop)
            if repaired.nodes == 0:
                clock.tick()
            if repaired.incumbent is not None:
                candidate = evaluate(model, repaired.incumbent.values)
                if candidate.feasible and candidate.integral:
                    accepted, criterion = accept(criterion, candidate.objective,
                                                 incumbent.objective, rng)
                    if _improves(candidate.objective, best.objective):
                        outcome = BEST
                        best = candidate
                        record(best, elapsed())
                    elif _improves(candidate.objective, incumbent.objective):
                        outcome = BETTER
                    elif accepted:
                        outcome = ACCEPT
                    if outcome != REJECT:
                        incumbent = candidate
                        archive.append(candidate)
                else:
                    log.warning("%s: repair of %s returned a point infeasible for the original model",
                                configuration.id, names[arm])
        state = update(state, arm, outcome, configuration.rewards)
        outcomes[outcome] += 1
        arm_outcomes[names[arm]][outcome] += 1

    objective = external_objective(model, best.objective)
    x_star = settle_reference(model, objective, reference_objective, configuration.id)
    log.info("%s: %s iterations, best %s", configuration.id, iterations, objective)
    return WorkerResult(configuration.id, SOLVED, best, objective, events,
                        build_trace(events, x_star, wall_seconds), iterations,
                        dict(zip(names, (int(c) for c in state.counts))), outcomes, arm_outcomes,
                        x_star)
