"""Dense bounded-variable primal simplex for LP relaxations.

Every row gets a slack so that `A x + s = b` with slack bounds encoding the
relation (`<=`: s >= 0, `>=`: s <= 0, `=`: s = 0). Phase one starts from
artificial columns, phase two optimizes the real costs. Dantzig pricing is
used until 1000 degenerate pivots have been seen, then Bland's rule.
"""
import logging
from dataclasses import dataclass

import numpy as np

from parbalans.cli import config
from parbalans.cli.actions.model import BOUND_TOL, FEAS_TOL

__all__ = ['LpResult', 'solve_lp', 'OPTIMAL', 'INFEASIBLE', 'UNBOUNDED', 'ITERATION_LIMIT']

log = logging.getLogger(__name__)

OPTIMAL, INFEASIBLE, UNBOUNDED, ITERATION_LIMIT = 'optimal', 'infeasible', 'unbounded', 'iteration_limit'

INF = float('inf')
PIVOT_TOL = 1e-9
PRICE_TOL = 1e-9
STEP_TOL = 1e-12
BLAND_AFTER = 1000
REFACTOR_EVERY = 50


@dataclass(frozen=True, eq=False)
class LpResult:
    status: str
    values: np.ndarray = None
    objective: float = None
    iterations: int = 0


class _NumericalFailure(Exception):
    pass


class _BoundedSimplex(object):

    def __init__(self, matrix, rhs, lower, upper, iteration_limit):
        m, ncols = matrix.shape
        start = np.where(np.isfinite(lower), lower, np.where(np.isfinite(upper), upper, 0.0))
        residual = rhs - matrix @ start
        signs = np.where(residual >= 0, 1.0, -1.0)
        self.m, self.ncols = m, ncols
        self.matrix = np.hstack([matrix, np.diag(signs)])
        self.rhs = rhs
        self.lower = np.concatenate([lower, np.zeros(m)])
        self.upper = np.concatenate([upper, np.full(m, INF)])
        self.x = np.concatenate([start, np.abs(residual)])
        self.basis = np.arange(ncols, ncols + m)
        self.is_basic = np.zeros(ncols + m, dtype=bool)
        self.is_basic[self.basis] = True
        self.enterable = np.concatenate([np.ones(ncols, dtype=bool), np.zeros(m, dtype=bool)])
        self.limit = iteration_limit
        self.iterations = 0
        self.degenerate = 0
        self.bland = False
        self._refactor()

    def _refactor(self):
        if not self.m:
            self.tableau = np.zeros((0, self.ncols))
            self.beta = np.zeros(0)
            return
        basis_matrix = self.matrix[:, self.basis]
        try:
            self.tableau = np.linalg.solve(basis_matrix, self.matrix)
            self.beta = np.linalg.solve(basis_matrix, self.rhs)
        except np.linalg.LinAlgError:
            raise _NumericalFailure()
        self._update_basic()

    def _update_basic(self):
        nonbasic = ~self.is_basic
        self.x[self.basis] = self.beta - self.tableau[:, nonbasic] @ self.x[nonbasic]

    def _pivot(self, row, col):
        tableau = self.tableau
        pivot = tableau[row, col]
        tableau[row] /= pivot
        self.beta[row] /= pivot
        factors = tableau[:, col].copy()
        factors[row] = 0.0
        tableau -= np.outer(factors, tableau[row])
        self.beta -= factors * self.beta[row]
        leaving = self.basis[row]
        self.is_basic[leaving] = False
        self.is_basic[col] = True
        self.basis[row] = col

    def iterate(self, cost):
        x = self.x
        while True:
            if self.iterations >= self.limit:
                return ITERATION_LIMIT
            reduced = cost - cost[self.basis] @ self.tableau
            free = self.enterable & ~self.is_basic
            can_up = free & (reduced < -PRICE_TOL) & (x < self.upper - BOUND_TOL)
            can_down = free & (reduced > PRICE_TOL) & (x > self.lower + BOUND_TOL)
            candidates = np.flatnonzero(can_up | can_down)
            if not candidates.size:
                return OPTIMAL
            if self.bland:
                col = candidates[0]
            else:
                col = candidates[np.argmax(np.abs(reduced[candidates]))]
            direction = 1.0 if reduced[col] < 0 else -1.0

            alpha = direction * self.tableau[:, col]
            basic = self.basis
            ratios = np.full(self.m, INF)
            dec = alpha > PIVOT_TOL
            inc = alpha < -PIVOT_TOL
            ratios[dec] = (x[basic][dec] - self.lower[basic][dec]) / alpha[dec]
            ratios[inc] = (self.upper[basic][inc] - x[basic][inc]) / -alpha[inc]
            ratios = np.maximum(ratios, 0.0)

            step, row = self.upper[col] - self.lower[col], None
            if self.m:
                best = ratios.min()
                if best < step:
                    step = best
                    ties = np.flatnonzero(ratios <= best + STEP_TOL)
                    if self.bland:
                        row = ties[np.argmin(basic[ties])]
                    else:
                        row = ties[np.argmax(np.abs(alpha[ties]))]
            if not np.isfinite(step):
                return UNBOUNDED

            self.iterations += 1
            if step <= STEP_TOL:
                self.degenerate += 1
                if not self.bland and self.degenerate > BLAND_AFTER:
                    log.debug("Switching to Bland's rule after %s degenerate pivots", self.degenerate)
                    self.bland = True
            x[col] += direction * step
            if row is not None:
                leaving = basic[row]
                x[leaving] = self.lower[leaving] if alpha[row] > 0 else self.upper[leaving]
                self._pivot(row, col)
                if self.iterations % REFACTOR_EVERY == 0:
                    self._refactor()
                    continue
            self._update_basic()

    def drive_out_artificials(self):
        """Replace basic artificials (all at zero after phase one) by
        structural columns where possible, then pin every artificial to 0."""
        for row in range(self.m):
            if self.basis[row] < self.ncols:
                continue
            candidates = np.flatnonzero(~self.is_basic[:self.ncols] &
                                        (np.abs(self.tableau[row, :self.ncols]) > PIVOT_TOL))
            if candidates.size:
                self.x[self.basis[row]] = 0.0
                self._pivot(row, candidates[0])
        self.upper[self.ncols:] = 0.0
        self.x[self.ncols:][~self.is_basic[self.ncols:]] = 0.0
        self._refactor()

    def solve(self, cost):
        phase_one = np.concatenate([np.zeros(self.ncols), np.ones(self.m)])
        status = self.iterate(phase_one)
        if status != OPTIMAL:
            return status
        if self.x[self.ncols:].sum() > FEAS_TOL:
            return INFEASIBLE
        self.drive_out_artificials()
        return self.iterate(np.concatenate([cost, np.zeros(self.m)]))


def _activity_range(matrix, lower, upper):
    """Smallest and largest row activity over the box [lower, upper]"""
    with np.errstate(invalid='ignore'):
        low = np.where(matrix > 0, matrix * lower, np.where(matrix < 0, matrix * upper, 0.0))
        high = np.where(matrix > 0, matrix * upper, np.where(matrix < 0, matrix * lower, 0.0))
    return low.sum(axis=1), high.sum(axis=1)


def solve_lp(model, iteration_limit=None, lower=None, upper=None):
    """
    Solve the LP relaxation of a model, ignoring integrality.

    Fixed columns are substituted out first; rows the box already decides
    are either reported infeasible or dropped.

    @param lower, upper: optional per-variable bound arrays replacing the
        model's own bounds (used by branch-and-bound nodes)
    """
    if iteration_limit is None:
        iteration_limit = int(config.c('solver', 'lp_iteration_limit'))
    lower = model.lower_bounds if lower is None else np.asarray(lower, dtype=float)
    upper = model.upper_bounds if upper is None else np.asarray(upper, dtype=float)
    if np.any(lower > upper + BOUND_TOL):
        return LpResult(INFEASIBLE)
    upper = np.maximum(upper, lower)

    rows = model.rows
    free = lower < upper
    matrix = rows.matrix[:, free]
    rhs = rows.rhs - rows.matrix[:, ~free] @ lower[~free]
    low, high = _activity_range(matrix, lower[free], upper[free])
    violated = ((rows.le | rows.eq) & (low > rhs + FEAS_TOL)) | \
        ((rows.ge | rows.eq) & (high < rhs - FEAS_TOL))
    if violated.any():
        return LpResult(INFEASIBLE)
    decided = (rows.le & (high <= rhs)) | (rows.ge & (low >= rhs)) | \
        (rows.eq & (low >= rhs - FEAS_TOL) & (high <= rhs + FEAS_TOL))
    matrix, rhs = matrix[~decided], rhs[~decided]
    le, ge = rows.le[~decided], rows.ge[~decided]

    m = len(rhs)
    slack_lower = np.where(ge, -INF, 0.0)
    slack_upper = np.where(le, INF, 0.0)
    cost = np.concatenate([model.objective_vector[free], np.zeros(m)])
    try:
        simplex = _BoundedSimplex(np.hstack([matrix, np.eye(m)]), rhs,
                                  np.concatenate([lower[free], slack_lower]),
                                  np.concatenate([upper[free], slack_upper]), iteration_limit)
        status = simplex.solve(cost)
    except _NumericalFailure:
        log.warning("Singular basis in LP of '%s', giving up", model.name)
        return LpResult(ITERATION_LIMIT)
    if status == ITERATION_LIMIT:
        log.warning("LP iteration limit (%s) hit on '%s'", iteration_limit, model.name)
    if status != OPTIMAL:
        return LpResult(status, iterations=simplex.iterations)
    values = lower.copy()
    values[free] = simplex.x[:int(free.sum())]
    values = np.clip(values, lower, upper)
    objective = float(model.objective_vector @ values) + model.offset
    return LpResult(OPTIMAL, values, objective, simplex.iterations)
