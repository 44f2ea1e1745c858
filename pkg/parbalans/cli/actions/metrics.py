"""Primal gap, primal integral and gap-trace algebra.

A GapTrace is piecewise constant and right-continuous: the gap of a point
holds from its time until the next point. Before the first point there is
no solution and the gap is 1. Points store raw gaps; capping at 1 happens
when gaps are read (`gap_at`, `primal_integral`, CSV output) unless raw
values are asked for.
"""
import bisect
import csv
import logging
import math
import os
from dataclasses import dataclass

from parbalans.cli import config
from parbalans.cli.actions.utils import ParBalansException, USAGE_ERROR, mkdir_p

__all__ = ['GapTrace', 'primal_gap', 'gap_at', 'primal_integral', 'aggregate_min', 'build_trace',
           'write_trace_csv', 'read_trace_csv', 'percent_minutes', 'MetricsException',
           'HorizonMismatch', 'InvalidWindow', 'EPSILON', 'CSV_HEADER']

log = logging.getLogger(__name__)

EPSILON = 1e-10
CSV_HEADER = ('t_seconds', 'objective', 'gap')


class MetricsException(ParBalansException):
    pass


class HorizonMismatch(MetricsException):
    pass


class InvalidWindow(MetricsException):
    code = USAGE_ERROR


@dataclass(frozen=True)
class GapTrace:
    points: tuple
    horizon: float

    def __post_init__(self):
        points = tuple((float(t), float(obj), float(gap)) for t, obj, gap in self.points)
        for (t0, _, g0), (t1, _, g1) in zip(points, points[1:]):
            if t1 <= t0:
                raise MetricsException("Trace times must be strictly increasing (%r after %r)" % (t1, t0))
            if g1 > g0:
                raise MetricsException("Trace gaps must be non-increasing (%r after %r)" % (g1, g0))
        if points and points[0][0] < 0:
            raise MetricsException("Trace starts at negative time %r" % points[0][0])
        object.__setattr__(self, 'points', points)
        object.__setattr__(self, 'horizon', float(self.horizon))

    @property
    def times(self):
        return [p[0] for p in self.points]

    def final_gap(self, capped=True):
        return gap_at(self, self.horizon, capped)

    @property
    def final_objective(self):
        return self.points[-1][1] if self.points else None


def _cap(gap, capped):
    return min(gap, 1.0) if capped else gap


def primal_gap(x, x_star, eps=EPSILON, capped=True):
    """|x - x*| / max(|x*|, eps); 1 when there is no solution (x is None)"""
    if x is None:
        return 1.0
    return _cap(abs(x - x_star) / max(abs(x_star), eps), capped)


def _index_at(trace, t):
    return bisect.bisect_right(trace.times, t) - 1


def gap_at(trace, t, capped=True):
    idx = _index_at(trace, t)
    if idx < 0:
        return 1.0
    return _cap(trace.points[idx][2], capped)


def primal_integral(trace, t0=0.0, t1=None, capped=True):
    """Exact integral of the step gap function over [t0, t1]"""
    t1 = trace.horizon if t1 is None else t1
    if not 0 <= t0 <= t1 <= trace.horizon:
        raise InvalidWindow("Window [%s, %s] not inside [0, %s]" % (t0, t1, trace.horizon))
    total, prev, current = 0.0, t0, gap_at(trace, t0, capped)
    for t, _, gap in trace.points:
        if t <= t0:
            continue
        if t >= t1:
            break
        total += current * (t - prev)
        prev, current = t, _cap(gap, capped)
    return total + current * (t1 - prev)


def percent_minutes(integral_seconds):
    """Convert a gap-fraction x seconds integral to gap-percent x minutes"""
    return integral_seconds * 100.0 / 60.0


def aggregate_min(traces):
    """Pointwise minimum of traces sharing a horizon. Only points where the
    minimum strictly drops are kept; the objective comes from the first
    trace attaining it."""
    traces = list(traces)
    if not traces:
        raise MetricsException("Cannot aggregate an empty set of traces")
    horizon = traces[0].horizon
    for trace in traces[1:]:
        if not math.isclose(trace.horizon, horizon, rel_tol=1e-12, abs_tol=1e-12):
            raise HorizonMismatch("Horizons differ: %s vs %s" % (horizon, trace.horizon))
    if len(traces) == 1:
        return traces[0]
    times = sorted(set(t for trace in traces for t in trace.times))
    points = []
    for t in times:
        best = None
        for trace in traces:
            idx = _index_at(trace, t)
            if idx >= 0 and (best is None or trace.points[idx][2] < best[2]):
                best = trace.points[idx]
        if not points or best[2] < points[-1][2]:
            points.append((t, best[1], best[2]))
    return GapTrace(tuple(points), horizon)


def build_trace(events, x_star, horizon, eps=None):
    """
    Turn (time, objective) improvement events into a GapTrace against x*.
    Events past the horizon are pinned to it; events at an already recorded
    time replace the earlier point.
    """
    eps = eps or float(config.c('metrics', 'epsilon'))
    points = []
    for t, objective in sorted(events, key=lambda e: e[0]):
        t = min(max(t, 0.0), horizon)
        gap = primal_gap(objective, x_star, eps, capped=False)
        if points and gap >= points[-1][2]:
            continue
        if points and t <= points[-1][0]:
            t = points.pop()[0]
        points.append((t, objective, gap))
    return GapTrace(tuple(points), horizon)


def write_trace_csv(trace, fnm, raw=False):
    """Write `t_seconds,objective,gap` rows; gaps capped at 1 unless raw"""
    parent = os.path.dirname(fnm)
    if parent:
        mkdir_p(parent)
    with open(fnm, 'w', newline='') as f:
        writer = csv.writer(f, lineterminator='\n')
        writer.writerow(CSV_HEADER)
        for t, objective, gap in trace.points:
            writer.writerow((repr(t), repr(objective), repr(_cap(gap, not raw))))


def read_trace_csv(fnm, horizon):
    try:
        with open(fnm, newline='') as f:
            rows = list(csv.reader(f))
    except IOError as e:
        raise MetricsException("Cannot read trace '%s': %s" % (fnm, e.strerror or e))
    if not rows or tuple(rows[0]) != CSV_HEADER:
        raise MetricsException("Trace '%s' lacks the header %s" % (fnm, ','.join(CSV_HEADER)))
    try:
        points = [(float(t), float(obj), float(gap)) for t, obj, gap in rows[1:]]
    except ValueError as e:
        raise MetricsException("Malformed trace row in '%s': %s" % (fnm, e))
    return GapTrace(tuple(points), horizon)
