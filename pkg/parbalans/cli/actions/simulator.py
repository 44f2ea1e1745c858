"""Portfolio simulation over a database of recorded traces.

A run draws an n-subset of configurations, takes the pointwise minimum of
their traces on every instance and scores the subset by the final gap and
the primal integral averaged over instances. No solver is involved.

Layout on disk: `traces/<config_id>/<instance_id>.csv` plus `horizons.json`
mapping instance ids to horizons in seconds.
"""
import csv
import itertools
import logging
import math
import os
from dataclasses import dataclass, field

import numpy as np

from parbalans.cli.actions.metrics import (aggregate_min, gap_at, primal_integral, read_trace_csv,
                                           write_trace_csv)
from parbalans.cli.actions.utils import (ParBalansException, USAGE_ERROR, mkdir_p, read_json,
                                         write_json)

__all__ = ['TraceDb', 'SimulationReport', 'load_trace_db', 'write_trace_db', 'simulate',
           'exhaustive', 'rank_configs', 'warmup_window', 'report_to_dict', 'write_summary_csv',
           'SimulatorException', 'NotRectangular', 'TooManySubsets', 'SUMMARY_HEADER']

log = logging.getLogger(__name__)

MAX_SUBSETS = 10 ** 6
SUMMARY_HEADER = ('n', 'runs', 'gap_mean', 'gap_std', 'pi_mean', 'pi_std', 'best_gap', 'best_ids')


class SimulatorException(ParBalansException):
    pass


class NotRectangular(SimulatorException):
    pass


class TooManySubsets(SimulatorException):
    code = USAGE_ERROR


@dataclass(frozen=True, eq=False)
class TraceDb:
    # config id -> instance id -> GapTrace
    traces: dict
    horizons: dict

    @property
    def config_ids(self):
        return sorted(self.traces)

    @property
    def instance_ids(self):
        return sorted(self.horizons)

    def check_rectangular(self):
        missing = ['%s/%s' % (c, i) for c in self.config_ids for i in self.instance_ids
                   if i not in self.traces[c]]
        if missing:
            raise NotRectangular("Missing traces: %s" % ', '.join(missing[:10]) +
                                 (' ...' if len(missing) > 10 else ''))
        if not self.traces or not self.horizons:
            raise NotRectangular("Empty trace database")

    def restrict(self, config_ids):
        """The database limited to `config_ids`"""
        unknown = [c for c in config_ids if c not in self.traces]
        if unknown:
            raise SimulatorException("Unknown configurations: %s" % ', '.join(unknown), USAGE_ERROR)
        return TraceDb(dict((c, self.traces[c]) for c in config_ids), self.horizons)


@dataclass(frozen=True, eq=False)
class SimulationReport:
    n: int
    runs: int
    gap_mean: float
    gap_std: float
    pi_mean: float
    pi_std: float
    best: dict
    worst: dict
    records: list = field(default_factory=list)


def load_trace_db(root):
    horizons_fnm = os.path.join(root, 'horizons.json')
    if not os.path.isfile(horizons_fnm):
        raise SimulatorException("No horizons.json in '%s'" % root)
    horizons = dict((k, float(v)) for k, v in read_json(horizons_fnm).items())
    traces_dir = os.path.join(root, 'traces')
    if not os.path.isdir(traces_dir):
        raise SimulatorException("No traces/ directory in '%s'" % root)
    traces = {}
    for config_id in sorted(os.listdir(traces_dir)):
        config_dir = os.path.join(traces_dir, config_id)
        if not os.path.isdir(config_dir):
            continue
        traces[config_id] = {}
        for fnm in sorted(os.listdir(config_dir)):
            instance_id, ext = os.path.splitext(fnm)
            if ext != '.csv':
                continue
            if instance_id not in horizons:
                raise SimulatorException("No horizon for instance '%s'" % instance_id)
            traces[config_id][instance_id] = read_trace_csv(os.path.join(config_dir, fnm),
                                                            horizons[instance_id])
    log.info("Loaded %s configurations x %s instances from %s", len(traces), len(horizons), root)
    return TraceDb(traces, horizons)


def write_trace_db(root, db, raw=False):
    for config_id, by_instance in db.traces.items():
        for instance_id, trace in by_instance.items():
            write_trace_csv(trace, os.path.join(root, 'traces', config_id, '%s.csv' % instance_id), raw)
    write_json(os.path.join(root, 'horizons.json'), db.horizons)


def warmup_window(db, fraction, t1=None):
    """Per-instance windows starting at `fraction` of each instance's own horizon"""
    if not 0 <= fraction < 1:
        raise SimulatorException("Warm-up fraction must be in [0, 1), got %s" % fraction,
                                 USAGE_ERROR)
    return dict((i, (fraction * h, t1)) for i, h in db.horizons.items())


def _windows(db, window):
    """Per-instance (t0, t1) from one shared window or a mapping by instance
    id; a missing or None end means the horizon"""
    if isinstance(window, dict):
        missing = [i for i in db.horizons if i not in window]
        if missing:
            raise SimulatorException("No window for instances: %s" % ', '.join(sorted(missing)),
                                     USAGE_ERROR)
        return dict((i, (window[i][0], h if window[i][1] is None else window[i][1]))
                    for i, h in db.horizons.items())
    t0, t1 = window or (0.0, None)
    return dict((i, (t0, h if t1 is None else t1)) for i, h in db.horizons.items())


def _scorer(db, window):
    windows = _windows(db, window)
    cache = {}

    def score(subset):
        if subset not in cache:
            gaps, integrals = [], []
            for instance_id in db.instance_ids:
                t0, t1 = windows[instance_id]
                aggregate = aggregate_min([db.traces[c][instance_id] for c in subset])
                gaps.append(gap_at(aggregate, t1))
                integrals.append(primal_integral(aggregate, t0, t1))
            cache[subset] = (float(np.mean(gaps)), float(np.mean(integrals)))
        return cache[subset]
    return score


def _record(subset, score):
    return {'ids': list(subset), 'gap': score[0], 'pi': score[1]}


def _rank_key(record):
    return (record['gap'], record['pi'], record['ids'])


def _check_n(db, n):
    if not 1 <= n <= len(db.config_ids):
        raise SimulatorException("Subset size %s outside [1, %s]" % (n, len(db.config_ids)),
                                 USAGE_ERROR)


def _subsets(rng, ids, n, runs, stratified):
    if not stratified:
        for _ in range(runs):
            yield tuple(ids[k] for k in sorted(rng.choice(len(ids), n, replace=False)))
        return
    # consecutive chunks of shuffled permutations: every config appears
    # equally often before any appears again
    order, drawn = [], 0
    while drawn < runs:
        if len(order) < n:
            order = list(rng.permutation(len(ids)))
        chunk, order = order[:n], order[n:]
        yield tuple(ids[k] for k in sorted(chunk))
        drawn += 1


def simulate(db, n, runs=1000, seed=0, window=None, stratified=False):
    """
    Sample `runs` subsets of size `n` and report mean and (population) std of
    their scores, with the best and worst subsets seen.

    @param window: (t0, t1) for the primal integral, or a mapping from
        instance id to (t0, t1); t1 is also where the final gap is read.
        Defaults to the whole horizon.
    @param stratified: draw subsets as chunks of random permutations instead
        of independently
    """
    db.check_rectangular()
    _check_n(db, n)
    if runs < 1:
        raise SimulatorException("runs must be >= 1, got %s" % runs, USAGE_ERROR)
    rng = np.random.default_rng(seed)
    score = _scorer(db, window)
    records = [_record(s, score(s)) for s in _subsets(rng, db.config_ids, n, runs, stratified)]
    gaps = np.array([r['gap'] for r in records])
    integrals = np.array([r['pi'] for r in records])
    report = SimulationReport(n, runs, float(gaps.mean()), float(gaps.std()),
                              float(integrals.mean()), float(integrals.std()),
                              min(records, key=_rank_key), max(records, key=_rank_key), records)
    log.info("n=%s: gap %.6f +- %.6f over %s runs", n, report.gap_mean, report.gap_std, runs)
    return report


def exhaustive(db, n, window=None):
    """Score every n-subset; the exact expectation of `simulate`. Records are
    ranked by gap, then primal integral, then ids."""
    db.check_rectangular()
    _check_n(db, n)
    count = math.comb(len(db.config_ids), n)
    if count > MAX_SUBSETS:
        raise TooManySubsets("C(%s, %s) = %s subsets exceeds %s"
                             % (len(db.config_ids), n, count, MAX_SUBSETS))
    score = _scorer(db, window)
    records = sorted((_record(s, score(s)) for s in itertools.combinations(db.config_ids, n)),
                     key=_rank_key)
    gaps = np.array([r['gap'] for r in records])
    integrals = np.array([r['pi'] for r in records])
    return SimulationReport(n, count, float(gaps.mean()), float(gaps.std()),
                            float(integrals.mean()), float(integrals.std()),
                            records[0], records[-1], records)


def rank_configs(db, window=None):
    """Configuration ids by average final gap, then primal integral, then id"""
    return [r['ids'][0] for r in exhaustive(db, 1, window).records]


def report_to_dict(report, with_records=False):
    data = {
        'n': report.n,
        'runs': report.runs,
        'gap_mean': report.gap_mean,
        'gap_std': report.gap_std,
        'pi_mean': report.pi_mean,
        'pi_std': report.pi_std,
        'best': report.best,
        'worst': report.worst,
    }
    if with_records:
        data['records'] = report.records
    return data


def write_summary_csv(reports, fnm):
    """One row per subset size, mirroring mean +- std tables"""
    parent = os.path.dirname(fnm)
    if parent:
        mkdir_p(parent)
    with open(fnm, 'w', newline='') as f:
        writer = csv.writer(f, lineterminator='\n')
        writer.writerow(SUMMARY_HEADER)
        for r in reports:
            writer.writerow((r.n, r.runs, repr(r.gap_mean), repr(r.gap_std), repr(r.pi_mean),
                             repr(r.pi_std), repr(r.best['gap']), ';'.join(r.best['ids'])))
