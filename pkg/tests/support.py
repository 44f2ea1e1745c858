"""Brute-force oracles and fixtures shared by the test modules."""
import itertools

import numpy as np

from parbalans.cli.actions import instances
from parbalans.cli.actions.metrics import GapTrace
from parbalans.cli.actions.model import (CONTINUOUS, LE, LinearConstraint, MINIMIZE, Variable,
                                         build_model)
from parbalans.cli.actions.simulator import TraceDb

FIXTURE_MPS = """\
* small mixed model exercising every section
NAME          FIXTURE
OBJSENSE
    MAX
ROWS
 N  profit
 L  cap
 G  floor
 E  link
 L  band
COLUMNS
    MARKER                 'MARKER'                 'INTORG'
    x         profit    3.0        cap       2.0
    x         link      1.0
    y         profit    2.0        cap       1.0
    y         floor     1.0        band      1.0
    MARKER                 'MARKER'                 'INTEND'
    z         profit    1.5        cap       1.0
    z         link      -1.0
RHS
    RHS       cap       10.0       floor     1.0
    RHS       link      0.0        band      4.0
    RHS       profit    -2.5
RANGES
    RNG       band      3.0
BOUNDS
 UP BND       x         4
 BV BND       y
 LO BND       z         -1.0
 UP BND       z         6.5
ENDATA
"""


def binary_optimum(model):
    """Exact optimum (internal, minimization form) of an all-binary model by
    enumerating every 0/1 assignment; None when infeasible."""
    n = model.n_vars
    points = np.array(list(itertools.product((0.0, 1.0), repeat=n)))
    points = points[np.all((points >= model.lower_bounds) & (points <= model.upper_bounds), axis=1)]
    if model.constraints:
        rows = model.rows
        activity = points @ rows.matrix.T
        ok = np.all(activity[:, rows.le] <= rows.rhs[rows.le] + 1e-9, axis=1) & \
            np.all(activity[:, rows.ge] >= rows.rhs[rows.ge] - 1e-9, axis=1) & \
            np.all(np.abs(activity[:, rows.eq] - rows.rhs[rows.eq]) <= 1e-9, axis=1)
        points = points[ok]
    if not len(points):
        return None
    return float((points @ model.objective_vector).min()) + model.offset


def random_binary_instance(seed):
    """A knapsack, set cover or independent set instance with 6..15 binaries"""
    rng = np.random.default_rng(seed)
    kind = ('knapsack', 'set_cover', 'independent_set')[seed % 3]
    return instances.generate(kind, int(rng.integers(6, 16)), seed)


def random_lp(seed, max_vars=6, max_rows=8):
    """
    min c.x subject to A x <= b inside a finite box, feasible by construction.
    Returns (model, c, A, b, lower, upper).
    """
    rng = np.random.default_rng(seed)
    n = int(rng.integers(1, max_vars + 1))
    m = int(rng.integers(1, max_rows + 1))
    lower = rng.uniform(-3, 0, n).round(2)
    upper = lower + rng.uniform(0.5, 5, n).round(2)
    c = rng.normal(size=n).round(3)
    A = rng.uniform(-1, 1, (m, n)).round(3)
    A[A == 0] = 0.5
    inside = lower + rng.uniform(0, 1, n) * (upper - lower)
    b = (A @ inside + rng.uniform(0.01, 1, m)).round(3)
    variables = [Variable('x%d' % j, CONTINUOUS, lower[j], upper[j]) for j in range(n)]
    constraints = [LinearConstraint('r%d' % i, dict(enumerate(A[i])), LE, b[i]) for i in range(m)]
    model = build_model('lp_%d' % seed, MINIMIZE, variables, constraints, dict(enumerate(c)))
    return model, c, A, b, lower, upper


def vertex_optimum(c, A, b, lower, upper, tol=1e-7):
    """Best objective over every basic point of {A x <= b, lower <= x <= upper}"""
    n = len(c)
    eye = np.eye(n)
    # every face as a row `g x = h`
    faces = np.vstack([A, eye, eye])
    levels = np.concatenate([b, lower, upper])
    combos = np.array(list(itertools.combinations(range(len(faces)), n)))
    systems, rhs = faces[combos], levels[combos]
    regular = np.abs(np.linalg.det(systems)) > 1e-10
    points = np.linalg.solve(systems[regular], rhs[regular][..., None])[..., 0]
    feasible = np.all(points @ A.T <= b + tol, axis=1) & np.all(points >= lower - tol, axis=1) & \
        np.all(points <= upper + tol, axis=1)
    if not feasible.any():
        return None
    return float((points[feasible] @ c).min())


def random_trace(rng, horizon=100.0, max_points=6):
    """A random valid GapTrace: increasing times, strictly decreasing gaps"""
    k = int(rng.integers(0, max_points + 1))
    times = np.sort(rng.choice(np.arange(0, int(horizon)), k, replace=False)).astype(float)
    gaps = np.sort(rng.uniform(0, 1.5, k))[::-1]
    keep = np.concatenate([[True], np.diff(gaps) < 0]) if k else np.zeros(0, dtype=bool)
    return GapTrace(tuple((t, 100.0 + g, g) for t, g in zip(times[keep], gaps[keep])), horizon)


def synthetic_db(seed, configs=6, instances_=3, horizon=100.0):
    rng = np.random.default_rng(seed)
    ids = ['cfg_%03d' % k for k in range(configs)]
    names = ['inst_%d' % k for k in range(instances_)]
    traces = dict((c, dict((i, random_trace(rng, horizon)) for i in names)) for c in ids)
    return TraceDb(traces, dict((i, horizon) for i in names))
