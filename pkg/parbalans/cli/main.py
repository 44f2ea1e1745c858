"""Command line: pool generation, instance generation, single-worker solves,
portfolio runs, trace-database simulation and a scaled-down reproduction
preset. Every command writes CSV/JSON artifacts only."""
import argparse
import logging
import os
import sys

from parbalans.cli import config
from parbalans.cli.actions import configspace, instances, orchestrator, simulator
from parbalans.cli.actions.alns import run_worker
from parbalans.cli.actions.clock import make_clock
from parbalans.cli.actions.metrics import (build_trace, percent_minutes, primal_integral,
                                           write_trace_csv)
from parbalans.cli.actions.model import dump_json, read_mps, write_mps
from parbalans.cli.actions.sysresources import get_cpu_count
from parbalans.cli.actions.utils import (ConsoleProgressBar, DATA_ERROR, ParBalansException,
                                         UsageException, mkdir_p, read_json, write_json)
from parbalans.cli.actions.validation import check_keys

log = logging.getLogger(__name__)

MANIFEST_KEYS = ('instance', 'pool', 'configs', 'n', 'threads', 'core_cap', 'wall_seconds',
                 'master_seed', 'reference_objective', 'ranking', 'clock')
MANIFEST_REQUIRED = ('instance', 'wall_seconds')

# structural constants of the full-scale study, shrunk by `repro --scale`
REPRO_POOL_SIZE = 180
REPRO_RUNS = 1000
REPRO_CORES = 180
REPRO_REDUCED = {4: 45, 8: 20, 16: 10}
REPRO_N_GRID = (2, 4, 8, 16, 32, 64, 128)
REPRO_INSTANCES = (('knapsack', 40), ('set_cover', 40), ('independent_set', 40))
REPRO_WARMUP = 0.1


def _progress_enabled(args):
    return args.progress or config.c('general', 'progress').strip().lower() in ('yes', 'true', '1')


def _load_pool(fnm):
    pool = configspace.read_pool(fnm)
    if not pool:
        raise UsageException("Pool '%s' is empty" % fnm)
    return pool


def _pick_config(args):
    if not args.config_id or args.config_id == 'default':
        return configspace.default_config()
    if not args.pool:
        raise UsageException("--config-id needs --pool")
    by_id = dict((c.id, c) for c in _load_pool(args.pool))
    if args.config_id not in by_id:
        raise UsageException("No configuration '%s' in %s" % (args.config_id, args.pool))
    return by_id[args.config_id]


def _integrals(trace, t0=0.0):
    seconds = primal_integral(trace, t0)
    return {'primal_integral': seconds, 'primal_integral_percent_minutes': percent_minutes(seconds)}


def cmd_gen_configs(args):
    pool = configspace.generate_pool(args.size, args.seed)
    configspace.write_pool(args.out, pool)
    print("Wrote %s configurations to %s" % (len(pool), args.out))


def cmd_gen_instance(args):
    model = instances.generate(args.kind, args.size, args.seed)
    if os.path.dirname(args.out):
        mkdir_p(os.path.dirname(args.out))
    with open(args.out, 'w') as f:
        f.write(write_mps(model))
    print("Wrote %s (%s variables, %s constraints) to %s"
          % (model.name, model.n_vars, len(model.constraints), args.out))


def cmd_solve(args):
    if args.seconds <= 0:
        raise UsageException("--seconds must be positive, got %s" % args.seconds)
    model = read_mps(args.instance)
    configuration = _pick_config(args)
    if args.dump_json:
        with open(os.path.join(args.out, 'model.json'), 'w') as f:
            dump_json(model, f)
    result = run_worker(model, configuration, args.seconds, args.seed,
                        clock=make_clock(args.clock), reference_objective=args.reference)
    x_star, trace = result.reference_objective, result.trace
    write_trace_csv(trace, os.path.join(args.out, 'trace.csv'), raw=args.raw_gap)
    summary = result.summary()
    summary.update(seed=args.seed, seconds=args.seconds, reference_objective=x_star,
                   final_gap=trace.final_gap(capped=not args.raw_gap), **_integrals(trace))
    write_json(os.path.join(args.out, 'summary.json'), summary)
    print("%s: objective %s after %s iterations" % (configuration.id, result.objective,
                                                     result.iterations))


def _read_manifest(fnm):
    manifest = read_json(fnm)
    if not isinstance(manifest, dict):
        raise UsageException("Manifest '%s' must be a JSON object" % fnm)
    errors = check_keys(manifest, MANIFEST_KEYS, MANIFEST_REQUIRED)
    if ('pool' in manifest) == ('configs' in manifest):
        errors.append(('pool', "Exactly one of 'pool' and 'configs' is required"))
    if errors:
        raise UsageException("Invalid manifest %s: %s" % (fnm, '; '.join(m for _, m in errors)))
    base = os.path.dirname(os.path.abspath(fnm))
    for key in ('instance', 'pool'):
        if key in manifest:
            manifest[key] = os.path.join(base, manifest[key])
    return manifest


def cmd_portfolio(args):
    manifest = _read_manifest(args.manifest)
    model = read_mps(manifest['instance'])
    if 'pool' in manifest:
        pool = _load_pool(manifest['pool'])
    else:
        pool = [configspace.config_from_dict(r) for r in manifest['configs']]
    threads = int(manifest.get('threads', 1))
    core_cap = int(manifest.get('core_cap') or get_cpu_count())
    ranking = manifest.get('ranking')
    candidates = pool
    if ranking is not None:
        by_id = dict((c.id, c) for c in pool)
        candidates = [by_id[i] for i in ranking if i in by_id]
    if 'n' in manifest:
        plan = orchestrator.PortfolioPlan(tuple(candidates[:int(manifest['n'])]), threads, core_cap,
                                          float(manifest['wall_seconds']),
                                          int(manifest.get('master_seed', 0)))
    else:
        plan = orchestrator.plan_for_threads(pool, threads, core_cap, ranking,
                                             float(manifest['wall_seconds']),
                                             int(manifest.get('master_seed', 0)))
    result = orchestrator.run_portfolio(model, plan, manifest.get('reference_objective'),
                                        clock_mode=manifest.get('clock'),
                                        progress=_progress_enabled(args))
    summary = orchestrator.write_portfolio(result, args.out, raw=args.raw_gap,
                                           extra=_integrals(result.aggregate))
    print("ParBalans-%s (T=%s): final gap %s, best worker %s"
          % (len(plan.configs), threads, summary['final_gap'], result.best_config_id))


def _write_reports(reports, out, with_records=False):
    write_json(os.path.join(out, 'report.json'),
               [simulator.report_to_dict(r, with_records) for r in reports])
    simulator.write_summary_csv(reports, os.path.join(out, 'summary.csv'))


def cmd_simulate(args):
    db = simulator.load_trace_db(args.tracedir)
    if args.warmup_fraction is not None:
        window = simulator.warmup_window(db, args.warmup_fraction, args.t1)
    else:
        window = (args.t0, args.t1)
    for n in args.n:
        if not 1 <= n <= len(db.config_ids):
            raise UsageException("n=%s but the pool has %s configurations" % (n, len(db.config_ids)))
    if args.exhaustive:
        reports = [simulator.exhaustive(db, n, window) for n in args.n]
    else:
        reports = [simulator.simulate(db, n, args.runs, args.seed, window, args.stratified)
                   for n in args.n]
    _write_reports(reports, args.out, args.records)
    for r in reports:
        print("n=%s: gap %.6f +- %.6f, PI %.6f +- %.6f" % (r.n, r.gap_mean, r.gap_std,
                                                            r.pi_mean, r.pi_std))


def _scaled(value, scale):
    return max(1, int(round(value * scale)))


def thread_grid(threads, cores, scale=1.0, available=REPRO_POOL_SIZE):
    """
    Reduced-pool size for `threads` cores per worker and the portfolio sizes
    simulated over it: those fitting both the reduced pool and the core cap.
    """
    reduced = min(_scaled(REPRO_REDUCED.get(threads, REPRO_CORES // threads), scale), available)
    limit = max(1, min(reduced, max(cores, threads) // threads))
    return reduced, [n for n in REPRO_N_GRID if n <= limit] or [limit]


def cmd_repro(args):
    """Record every pool configuration alone on generated instances, then
    simulate portfolios over the recorded traces and derive reduced pools."""
    if not 0 < args.scale <= 1:
        raise UsageException("--scale must be in (0, 1], got %s" % args.scale)
    pool = configspace.generate_pool(_scaled(REPRO_POOL_SIZE, args.scale), args.seed)
    configspace.write_pool(os.path.join(args.out, 'pool.json'), pool)
    models = []
    for k, (kind, size) in enumerate(REPRO_INSTANCES):
        model = instances.generate(kind, size, args.seed + k)
        with open(os.path.join(args.out, '%s.mps' % model.name), 'w') as f:
            f.write(write_mps(model))
        models.append(model)

    pbar = ConsoleProgressBar('Recording', len(pool) * len(models), enabled=_progress_enabled(args))
    traces, horizons = dict((c.id, {}) for c in pool), {}
    for model in models:
        results = []
        for configuration in pool:
            plan = orchestrator.PortfolioPlan((configuration,), 1, 1, args.seconds, args.seed)
            results.append(orchestrator.run_portfolio(model, plan, clock_mode='simulated'))
            pbar.step()
        found = [r.workers[r.best_config_id] for r in results]
        x_star = min(found, key=lambda w: w.best.objective).objective
        for configuration, worker in zip(pool, found):
            traces[configuration.id][model.name] = build_trace(worker.events, x_star, args.seconds)
        horizons[model.name] = args.seconds
    pbar.finish()
    db = simulator.TraceDb(traces, horizons)
    simulator.write_trace_db(os.path.join(args.out, 'tracedb'), db)

    window = simulator.warmup_window(db, REPRO_WARMUP)
    grid = [n for n in REPRO_N_GRID if n <= len(pool)] or [len(pool)]
    reports = [simulator.simulate(db, n, REPRO_RUNS, args.seed, window) for n in grid]
    _write_reports(reports, args.out)

    ranking = simulator.rank_configs(db, window)
    cores = _scaled(REPRO_CORES, args.scale)
    plans = {}
    for threads in args.threads:
        reduced_size, sizes = thread_grid(threads, cores, args.scale, len(ranking))
        top = ranking[:reduced_size]
        plan = orchestrator.plan_for_threads(pool, threads, max(cores, threads), top, args.seconds,
                                             args.seed)
        plans[str(threads)] = [c.id for c in plan.configs]
        reduced = db.restrict(top)
        _write_reports([simulator.simulate(reduced, n, REPRO_RUNS, args.seed, window) for n in sizes],
                       os.path.join(args.out, 'threads_%s' % threads))
    write_json(os.path.join(args.out, 'plans.json'), {'core_cap': cores, 'ranking': ranking,
                                                      'plans': plans})
    print("Recorded %s configurations on %s instances; reports in %s"
          % (len(pool), len(models), args.out))


def build_parser():
    parser = argparse.ArgumentParser(prog='parbalans', description=__doc__)
    parser.add_argument('-v', '--verbose', action='count', default=0)
    parser.add_argument('--progress', action='store_true', help='show progress bars')
    sub = parser.add_subparsers(dest='command', required=True)

    gen = sub.add_parser('gen-configs', help='generate a configuration pool')
    gen.add_argument('--size', type=int, default=REPRO_POOL_SIZE)
    gen.add_argument('--seed', type=int, default=0)
    gen.add_argument('--out', required=True)
    gen.set_defaults(func=cmd_gen_configs)

    inst = sub.add_parser('gen-instance', help='write a generated instance as MPS')
    inst.add_argument('--kind', choices=sorted(instances.generators), required=True)
    inst.add_argument('--size', type=int, required=True)
    inst.add_argument('--seed', type=int, default=0)
    inst.add_argument('--out', required=True)
    inst.set_defaults(func=cmd_gen_instance)

    solve = sub.add_parser('solve', help='run a single worker on an MPS instance')
    solve.add_argument('instance')
    solve.add_argument('--config-id', default=None, help="configuration id, or 'default'")
    solve.add_argument('--pool', help='pool file holding --config-id')
    solve.add_argument('--seconds', type=float, required=True)
    solve.add_argument('--seed', type=int, default=0)
    solve.add_argument('--reference', type=float, help='best-known objective')
    solve.add_argument('--clock', choices=('simulated', 'wall'))
    solve.add_argument('--raw-gap', action='store_true')
    solve.add_argument('--dump-json', action='store_true', help='also write model.json')
    solve.add_argument('--out', required=True)
    solve.set_defaults(func=cmd_solve)

    port = sub.add_parser('portfolio', help='run a portfolio from a JSON manifest')
    port.add_argument('manifest')
    port.add_argument('--raw-gap', action='store_true')
    port.add_argument('--out', required=True)
    port.set_defaults(func=cmd_portfolio)

    sim = sub.add_parser('simulate', help='simulate portfolios over a trace database')
    sim.add_argument('tracedir')
    sim.add_argument('--n', type=int, nargs='+', required=True)
    sim.add_argument('--runs', type=int, default=REPRO_RUNS)
    sim.add_argument('--seed', type=int, default=0)
    sim.add_argument('--t0', type=float, default=0.0)
    sim.add_argument('--t1', type=float, default=None)
    sim.add_argument('--warmup-fraction', type=float, default=None,
                     help='start the integral at this fraction of the horizon')
    sim.add_argument('--exhaustive', action='store_true')
    sim.add_argument('--stratified', action='store_true')
    sim.add_argument('--records', action='store_true', help='include per-run records')
    sim.add_argument('--out', required=True)
    sim.set_defaults(func=cmd_simulate)

    repro = sub.add_parser('repro', help='scaled-down reproduction preset')
    repro.add_argument('--scale', type=float, default=0.05)
    repro.add_argument('--seconds', type=float, default=20.0)
    repro.add_argument('--seed', type=int, default=0)
    repro.add_argument('--threads', type=int, nargs='+', default=sorted(REPRO_REDUCED))
    repro.add_argument('--out', required=True)
    repro.set_defaults(func=cmd_repro)
    return parser


def _setup_logging(verbose):
    level = config.c('logging', 'level').upper()
    if verbose:
        level = 'INFO' if verbose == 1 else 'DEBUG'
    logging.basicConfig(level=getattr(logging, level, logging.WARNING),
                        format='%(asctime)s %(name)s %(levelname)s %(message)s')


def main(argv=None):
    args = build_parser().parse_args(argv)
    _setup_logging(args.verbose)
    if getattr(args, 'out', None) and args.command not in ('gen-configs', 'gen-instance'):
        os.makedirs(args.out, exist_ok=True)
    try:
        args.func(args)
    except ParBalansException as e:
        print("Error: %s" % e, file=sys.stderr)
        return e.code
    except (IOError, OSError) as e:
        print("Error: %s" % e, file=sys.stderr)
        return DATA_ERROR
    return 0


if __name__ == '__main__':
    sys.exit(main())
