"""Reference LP-based branch and bound.

Depth-first plunging until the first incumbent, best-bound afterwards,
branching on the most fractional variable (lowest index on ties). The
search is single threaded and deterministic: `seed` and `thread_hint` are
accepted for interface compatibility and otherwise ignored.
"""
import heapq
import itertools
import logging
import math

import numpy as np

from parbalans.cli import config
from parbalans.cli.actions.clock import make_clock
from parbalans.cli.actions.lp import solve_lp, OPTIMAL as LP_OPTIMAL, INFEASIBLE as LP_INFEASIBLE
from parbalans.cli.actions.model import DimensionMismatch, INT_TOL, evaluate
from parbalans.cli.actions.subsolver.common import (MipResult, SolveBudget, OPTIMAL, FEASIBLE,
                                                    INFEASIBLE, UNKNOWN)

__all__ = ['solve_mip', 'find_first_feasible']

log = logging.getLogger(__name__)

INF = float('inf')


def _prune_tolerance(objective):
    return 1e-9 * max(1.0, abs(objective))


def _gap_closed(objective, bound, gap_limit):
    return objective - bound <= gap_limit * max(abs(objective), 1e-10)


def solve_mip(model, warm_start=None, budget=None, seed=0, clock=None, should_stop=None,
              first_feasible=False):
    """
    Solve `model` within `budget`. Never returns an incumbent worse than a
    feasible, integral `warm_start`.

    @param clock: time source; ticked once per node
    @param should_stop: optional callable polled at every node boundary
    @param first_feasible: stop at the first integral feasible solution
    """
    budget = budget or SolveBudget(node_limit=int(config.c('worker', 'repair_node_limit')))
    clock = clock or make_clock()
    lp_limit = int(config.c('solver', 'lp_iteration_limit'))
    start = clock.now()
    ints = model.integer_mask

    incumbent, history = None, []
    if warm_start is not None:
        if len(warm_start.values) != model.n_vars:
            raise DimensionMismatch("Warm start has %s values, model has %s variables"
                                    % (len(warm_start.values), model.n_vars))
        candidate = evaluate(model, warm_start.values)
        if candidate.feasible and candidate.integral:
            incumbent = candidate
            history.append((0.0, candidate.objective))

    lower = model.lower_bounds.copy()
    upper = model.upper_bounds.copy()
    lower[ints] = np.ceil(lower[ints] - INT_TOL)
    upper[ints] = np.floor(upper[ints] + INT_TOL)

    seq = itertools.count()
    open_nodes = [] if np.any(lower > upper) else [(-INF, next(seq), lower, upper)]
    best_first = False
    lost_bound = INF      # bound of subtrees dropped without proof
    nodes = 0
    gap_closed = False
    interrupted = False

    def switch_to_best_first():
        heapq.heapify(open_nodes)
        return True

    if incumbent is not None:
        best_first = switch_to_best_first()

    while open_nodes:
        if incumbent is not None and best_first:
            if _gap_closed(incumbent.objective, min(open_nodes[0][0], lost_bound),
                           budget.gap_limit):
                gap_closed = True
                break
        if (budget.node_limit is not None and nodes >= budget.node_limit) or \
                clock.now() - start >= budget.wall_seconds or \
                (should_stop is not None and should_stop()):
            interrupted = True
            break

        node = heapq.heappop(open_nodes) if best_first else open_nodes.pop()
        bound, _, node_lower, node_upper = node
        if incumbent is not None and bound >= incumbent.objective - _prune_tolerance(incumbent.objective):
            continue

        nodes += 1
        clock.tick()
        lp = solve_lp(model, lp_limit, node_lower, node_upper)
        if lp.status == LP_INFEASIBLE:
            continue
        if lp.status != LP_OPTIMAL:
            log.debug("Node LP ended with status %s, dropping subtree", lp.status)
            lost_bound = min(lost_bound, bound)
            continue
        bound = lp.objective
        if incumbent is not None and bound >= incumbent.objective - _prune_tolerance(incumbent.objective):
            continue

        x = lp.values
        distance = np.where(ints, np.abs(x - np.round(x)), 0.0)
        if distance.max(initial=0.0) <= INT_TOL:
            values = x.copy()
            values[ints] = np.round(values[ints])
            candidate = evaluate(model, values)
            if candidate.feasible and (incumbent is None or candidate.objective < incumbent.objective):
                incumbent = candidate
                history.append((clock.now() - start, candidate.objective))
                log.debug("New incumbent %s at node %s", candidate.objective, nodes)
                if first_feasible:
                    break
                if not best_first:
                    best_first = switch_to_best_first()
            continue

        j = int(np.argmax(distance))
        floor_value, ceil_value = math.floor(x[j]), math.ceil(x[j])
        down_upper = node_upper.copy()
        down_upper[j] = floor_value
        up_lower = node_lower.copy()
        up_lower[j] = ceil_value
        down = (bound, node_lower, down_upper)
        up = (bound, up_lower, node_upper)
        nearer, farther = (up, down) if x[j] - floor_value >= 0.5 else (down, up)
        if best_first:
            for child in (nearer, farther):
                heapq.heappush(open_nodes, (child[0], next(seq), child[1], child[2]))
        else:
            for child in (farther, nearer):
                open_nodes.append((child[0], next(seq), child[1], child[2]))

    proven = not open_nodes and lost_bound == INF and not interrupted
    if incumbent is not None:
        if proven or gap_closed:
            status = OPTIMAL
        else:
            status = FEASIBLE
        pending = min([n[0] for n in open_nodes] + [lost_bound, incumbent.objective])
        dual_bound = incumbent.objective if proven else pending
    else:
        status = INFEASIBLE if proven else UNKNOWN
        dual_bound = INF if proven else min([n[0] for n in open_nodes] + [lost_bound])
    elapsed = clock.now() - start
    log.debug("B&B on '%s': %s after %s nodes", model.name, status, nodes)
    return MipResult(status, incumbent, dual_bound, nodes, elapsed, history)


def find_first_feasible(model, budget=None, seed=0, clock=None, should_stop=None):
    """Run branch and bound until the first integral feasible solution"""
    return solve_mip(model, None, budget, seed, clock, should_stop, first_feasible=True)
