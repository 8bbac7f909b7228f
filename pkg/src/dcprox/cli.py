"""Command-line runner: ``run``, ``compare``, ``check`` and ``rates``.

Exit codes: 0 converged (or all checks passed), 1 failed check, 2 iteration
limit or too few points for a rate fit, 3 hypothesis violation or numerical
failure during a solve, 4 configuration, compatibility or input-format error.
"""

from __future__ import annotations

import argparse
import json
import logging
import math
import sys
from pathlib import Path

import numpy as np

from .analysis import TooFewPoints, classify_rate, estimate_kl_exponent
from .bppa import solve_bppa, solve_ppa
from .checks import CheckContext, check_trace
from .config import ConfigError, load_config
from .core import DcError, HypothesisViolation
from .inertial import (InertialParameterError, delta_grid, solve_inertial,
                       validate_inertial_params)
from .problems import PROBLEMS
from .traceio import TraceFormatError, read_trace_csv, to_jsonable, write_json, write_trace_csv

__all__ = ['main', 'cmd_run', 'cmd_compare', 'cmd_check', 'cmd_rates',
           'EXIT_OK', 'EXIT_CHECK_FAILED', 'EXIT_MAX_ITER', 'EXIT_VIOLATION', 'EXIT_CONFIG']

log = logging.getLogger('dcprox.cli')

EXIT_OK = 0
EXIT_CHECK_FAILED = 1
EXIT_MAX_ITER = 2
EXIT_VIOLATION = 3
EXIT_CONFIG = 4

_TERMINATION_EXIT = {'converged': EXIT_OK, 'max_iter': EXIT_MAX_ITER,
                     'armijo_fail': EXIT_VIOLATION, 'diverged': EXIT_VIOLATION,
                     'hypothesis_violation': EXIT_VIOLATION, 'error': EXIT_VIOLATION}


def _fail(msg):
    print('error: ' + ' '.join(str(msg).split()), file=sys.stderr)


def _setup(cfg):
    """Build the problem and validate every solver against it before iterating."""
    factory = PROBLEMS[cfg.problem_name]
    try:
        problem = factory.build(cfg.problem_parameters, cfg.seed)
    except KeyError as exc:
        raise ConfigError('problem {}: missing parameter {}'.format(cfg.problem_name, exc)) from None
    except (ValueError, TypeError) as exc:
        raise ConfigError('problem {}: {}'.format(cfg.problem_name, exc)) from None
    for spec in cfg.solvers:
        capable = getattr(problem, spec.kind + '_compatible')
        if spec.kind not in factory.compat or not capable:
            raise ConfigError('solver {} is incompatible with problem {} (supported: {})'
                              .format(spec.kind, cfg.problem_name,
                                      ', '.join(sorted(factory.compat))))
        if spec.kind == 'inertial':
            try:
                validate_inertial_params(spec.params, problem.L1)
            except InertialParameterError as exc:
                raise ConfigError('inertial parameters rejected: {}'.format(exc)) from None
        else:
            try:
                spec.bppa.validate(problem.L1)
            except ValueError as exc:
                raise ConfigError('{} config rejected: {}'.format(spec.kind, exc)) from None
        for name in ('x0', 'y0'):
            v = getattr(spec, name)
            if v is not None and len(v) != problem.dim:
                raise ConfigError('{} has length {} but the problem dimension is {}'
                                  .format(name, len(v), problem.dim))
    return problem


def _start(problem, spec, cfg):
    if spec.x0 is not None:
        return np.asarray(spec.x0, dtype=float)
    if problem.default_x0 is not None:
        return np.asarray(problem.default_x0, dtype=float)
    return np.random.default_rng(cfg.seed).standard_normal(problem.dim)


def _context(problem, spec, cfg):
    slack = float(cfg.slack_overrides.get('default', 1e-10))
    ctx = CheckContext(L1=problem.L1, L2=problem.L2, slack=slack,
                       slack_overrides=cfg.slack_overrides, enabled=cfg.checks_enabled)
    if spec.kind == 'inertial':
        dc = validate_inertial_params(spec.params, problem.L1)
        ctx.derived = dc
        opts = spec.options
        ctx.grid = tuple(opts.delta_grid) if opts.delta_grid else delta_grid(dc, opts.grid_size)
    else:
        c = spec.bppa
        ctx.lam = c.initial_lambda(problem.L1)
        ctx.lam_upper = ctx.lam if c.lambda_rule == 'constant' else c.lambda_bar
        ctx.alpha = c.alpha
        ctx.lambda_hat = c.lambda_hat
    return ctx


def _solve(problem, spec, x0):
    """Run one solver leg; returns ``(trace, status, message)``."""
    try:
        if spec.kind == 'bppa':
            trace = solve_bppa(problem, x0, spec.bppa)
        elif spec.kind == 'ppa':
            trace = solve_ppa(problem, x0, spec.bppa)
        else:
            y0 = None if spec.y0 is None else np.asarray(spec.y0, dtype=float)
            trace = solve_inertial(problem, x0, y0, spec.params, spec.options)
    except HypothesisViolation as exc:
        return getattr(exc, 'trace', None), 'hypothesis_violation', str(exc)
    except (DcError, ValueError, ArithmeticError) as exc:
        return None, 'error', '{}: {}'.format(type(exc).__name__, exc)
    return trace, trace.termination, trace.message


def _rates(trace, fstar=None):
    out = {}
    try:
        out['rate_report'] = classify_rate(trace, fstar).to_dict()
    except (TooFewPoints, ValueError) as exc:
        out['rate_report'] = {'error': str(exc)}
    grads = [r.grad_residual for r in trace.records]
    if any(g is not None for g in grads):
        try:
            est = estimate_kl_exponent(trace, fstar)
            out['kl_estimate'] = {'kappa': est.kappa, 'M': est.M}
        except (TooFewPoints, ValueError) as exc:
            out['kl_estimate'] = {'error': str(exc)}
    return out


def _leg_report(problem, spec, cfg, trace, status, message):
    rep = {'solver': spec.kind, 'problem': problem.label, 'termination': status,
           'message': message or ''}
    if trace is None or not trace.records:
        rep.update(iterations=0, final_f=None, final_iterate=None, checks=[],
                   checks_passed=False)
        return rep
    last = trace.records[-1]
    rep['iterations'] = len(trace.records) - 1
    rep['final_f'] = last.f_x
    rep['final_iterate'] = None if last.x is None else last.x.tolist()
    if spec.kind == 'inertial':
        rep['final_auxiliary'] = None if last.y is None else last.y.tolist()
        rep['final_coupling_norm'] = last.coupling_norm
        rep['derived'] = trace.config_snapshot.get('derived')
        rep['delta_grid'] = trace.config_snapshot.get('delta_grid')
    rep.update(_rates(trace, problem.known_fstar))
    results = check_trace(trace, spec.kind, _context(problem, spec, cfg))
    rep['checks'] = [r.to_dict() for r in results]
    rep['checks_passed'] = all(r.passed for r in results)
    return rep


def _default_paths(cfg, config_path):
    stem = Path(config_path).stem
    trace = cfg.resolve(cfg.trace_path) if cfg.trace_path else cfg.base_dir / (stem + '.trace.csv')
    report = (cfg.resolve(cfg.report_path) if cfg.report_path
              else cfg.base_dir / (stem + '.report.json'))
    return trace, report


def _leg_path(base, kind, idx, kinds):
    tag = kind if kinds.count(kind) == 1 else '{}.{}'.format(idx, kind)
    return base.with_name('{}.{}{}'.format(base.stem, tag, base.suffix))


def _load(config_path, seed):
    cfg = load_config(config_path, seed_override=seed)
    problem = _setup(cfg)
    return cfg, problem


def cmd_run(config_path, seed=None, quiet=False):
    """Solve the configured problem, write the trace CSV and report JSON."""
    try:
        cfg, problem = _load(config_path, seed)
    except ConfigError as exc:
        _fail(exc)
        return EXIT_CONFIG
    spec = cfg.solver
    trace_path, report_path = _default_paths(cfg, config_path)
    trace, status, message = _solve(problem, spec, _start(problem, spec, cfg))
    if trace is not None:
        write_trace_csv(trace, trace_path, wall_time=cfg.record_wall_time)
    rep = _leg_report(problem, spec, cfg, trace, status, message)
    rep.update(version=1, command='run', seed=cfg.seed, config=cfg.raw,
               trace_path=str(trace_path) if trace is not None else None)
    write_json(report_path, rep)
    code = _TERMINATION_EXIT.get(status, EXIT_VIOLATION)
    if code == EXIT_OK and not rep['checks_passed']:
        code = EXIT_VIOLATION
    if status in ('hypothesis_violation', 'error', 'armijo_fail', 'diverged'):
        _fail(message or status)
    if not quiet:
        print('{} on {}: {} after {} iterations, f = {}'.format(
            spec.kind, problem.label, status, rep['iterations'],
            '%.17g' % rep['final_f'] if rep['final_f'] is not None else 'n/a'))
    return code


def _iterations_to(trace, fstar, tol):
    if trace is None:
        return None
    for r in trace.records:
        if r.f_x - fstar <= tol:
            return r.k
    return None


def _dominance(trace):
    """Count shared states where the boosted move did no worse than the proximal point."""
    total = no_worse = strict = 0
    recs = trace.records
    for r, n in zip(recs, recs[1:]):
        if r.f_y is None or r.eta_k is None:
            continue
        total += 1
        no_worse += n.f_x <= r.f_y
        strict += n.f_x < r.f_y
    return {'states': total, 'no_worse': no_worse, 'strict': strict}


def cmd_compare(config_path, seed=None, quiet=False):
    """Run every listed solver from the same start and report side by side."""
    try:
        cfg, problem = _load(config_path, seed)
    except ConfigError as exc:
        _fail(exc)
        return EXIT_CONFIG
    trace_base, report_path = _default_paths(cfg, config_path)
    kinds = [s.kind for s in cfg.solvers]
    common_x0 = _start(problem, cfg.solvers[0], cfg)
    legs, traces = [], []
    for i, spec in enumerate(cfg.solvers):
        x0 = common_x0 if spec.x0 is None else np.asarray(spec.x0, dtype=float)
        trace, status, message = _solve(problem, spec, x0)
        rep = _leg_report(problem, spec, cfg, trace, status, message)
        if trace is not None:
            path = trace_base if len(kinds) == 1 else _leg_path(trace_base, spec.kind, i, kinds)
            write_trace_csv(trace, path, wall_time=cfg.record_wall_time)
            rep['trace_path'] = str(path)
        legs.append(rep)
        traces.append(trace)
    finals = [t.records[-1].f_x for t in traces if t is not None and t.records]
    fstar = problem.known_fstar
    if fstar is None and finals:
        fstar = min(finals)
    for rep, trace in zip(legs, traces):
        rep['iterations_to_tol'] = None if fstar is None else _iterations_to(trace, fstar, cfg.f_tol)
        if rep['termination'] == 'hypothesis_violation':
            _fail('{}: {}'.format(rep['solver'], rep['message']))
    out = {'version': 1, 'command': 'compare', 'problem': problem.label, 'seed': cfg.seed,
           'f_tol': cfg.f_tol, 'fstar_reference': fstar, 'legs': legs, 'config': cfg.raw}
    dom = [_dominance(t) for s, t in zip(cfg.solvers, traces)
           if s.kind == 'bppa' and t is not None]
    if dom:
        out['dominance'] = dom[0]
    write_json(report_path, out)
    codes = []
    for rep in legs:
        c = _TERMINATION_EXIT.get(rep['termination'], EXIT_VIOLATION)
        if c == EXIT_OK and not rep['checks_passed']:
            c = EXIT_VIOLATION
        codes.append(c)
    code = EXIT_VIOLATION if EXIT_VIOLATION in codes else max(codes)
    if not quiet:
        for rep in legs:
            print('{:<9} {:<21} iterations={:<6} to_tol={:<6} f={}'.format(
                rep['solver'], rep['termination'], rep['iterations'],
                str(rep['iterations_to_tol']),
                '%.17g' % rep['final_f'] if rep['final_f'] is not None else 'n/a'))
        if dom:
            print('boost no worse than proximal point in {no_worse}/{states} states '
                  '(strictly better in {strict})'.format(**dom[0]))
    return code


def _pick_solver(cfg, which):
    if which is None:
        if len(cfg.solvers) != 1:
            raise ConfigError('config lists {} solvers; choose one with --solver'
                              .format(len(cfg.solvers)))
        return cfg.solvers[0]
    if which.isdigit():
        i = int(which)
        if i >= len(cfg.solvers):
            raise ConfigError('--solver index {} out of range'.format(i))
        return cfg.solvers[i]
    found = [s for s in cfg.solvers if s.kind == which]
    if len(found) != 1:
        raise ConfigError('--solver {!r} does not identify exactly one solver'.format(which))
    return found[0]


def cmd_check(trace_path, config_path, solver=None, seed=None, quiet=False):
    """Re-verify the per-iteration inequalities of a stored trace."""
    try:
        cfg, problem = _load(config_path, seed)
        spec = _pick_solver(cfg, solver)
        trace = read_trace_csv(trace_path, solver=spec.kind, label=problem.label)
        results = check_trace(trace, spec.kind, _context(problem, spec, cfg))
    except ValueError as exc:
        # ConfigError, TraceFormatError and an empty trace all land here
        _fail(exc)
        return EXIT_CONFIG
    ok = all(r.passed for r in results)
    for r in results:
        if r.warning:
            log.warning('%s: %s', r.name, r.detail)
    if not quiet or not ok:
        print('{:<20} {:<6} {:>7} {:>12}  {}'.format('check', 'result', 'rows', 'worst', 'detail'))
        for r in results:
            verdict = 'FAIL' if not r.passed else ('WARN' if r.warning else 'PASS')
            worst = '' if r.n_checked == 0 else '%.3e' % r.worst_excess
            print('{:<20} {:<6} {:>7} {:>12}  {}'.format(r.name, verdict, r.n_checked,
                                                          worst, r.detail))
    return EXIT_OK if ok else EXIT_CHECK_FAILED


def cmd_rates(trace_path, fstar=None, quiet=False):
    """Print the rate classification and Lojasiewicz exponent estimate as JSON."""
    try:
        trace = read_trace_csv(trace_path)
    except TraceFormatError as exc:
        _fail(exc)
        return EXIT_CONFIG
    try:
        report = classify_rate(trace, fstar)
    except TooFewPoints as exc:
        _fail(exc)
        return EXIT_MAX_ITER
    except ValueError as exc:
        _fail(exc)
        return EXIT_CONFIG
    out = {'rate_report': report.to_dict()}
    if any(r.grad_residual is not None for r in trace.records):
        try:
            est = estimate_kl_exponent(trace, fstar)
            out['kl_estimate'] = {'kappa': est.kappa, 'M': est.M}
        except (TooFewPoints, ValueError) as exc:
            out['kl_estimate'] = {'error': str(exc)}
    print(json.dumps(to_jsonable(out), indent=2, sort_keys=True))
    return EXIT_OK


def _seed(text):
    v = int(text)
    if not 0 <= v < 2 ** 64:
        raise argparse.ArgumentTypeError('seed must be an unsigned 64-bit integer')
    return v


def _fstar(text):
    v = float(text)
    if not math.isfinite(v):
        raise argparse.ArgumentTypeError('fstar must be finite')
    return v


def build_parser():
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument('--quiet', action='store_true', default=argparse.SUPPRESS,
                        help='only print errors and requested output')
    common.add_argument('--seed', type=_seed, default=argparse.SUPPRESS,
                        help='override problem.seed from the config')
    p = argparse.ArgumentParser(prog='dcprox', parents=[common],
                                description='Proximal methods for difference-of-convex problems.')
    sub = p.add_subparsers(dest='command', required=True)
    r = sub.add_parser('run', parents=[common], help='solve one configured problem')
    r.add_argument('config')
    c = sub.add_parser('compare', parents=[common], help='run several solvers side by side')
    c.add_argument('config')
    k = sub.add_parser('check', parents=[common], help='re-verify a stored trace')
    k.add_argument('trace')
    k.add_argument('--problem', required=True, metavar='CONFIG',
                   help='config that produced the trace')
    k.add_argument('--solver', default=None,
                   help='solver kind or index when the config lists several')
    t = sub.add_parser('rates', parents=[common], help='classify the convergence rate of a trace')
    t.add_argument('trace')
    t.add_argument('--fstar', type=_fstar, default=None, help='optimal value, if known')
    return p


def main(argv=None):
    args = build_parser().parse_args(argv)
    quiet = getattr(args, 'quiet', False)
    seed = getattr(args, 'seed', None)
    logging.basicConfig(level=logging.WARNING if quiet else logging.INFO,
                        format='%(levelname)s %(name)s: %(message)s', stream=sys.stderr,
                        force=True)
    if args.command == 'run':
        return cmd_run(args.config, seed, quiet)
    if args.command == 'compare':
        return cmd_compare(args.config, seed, quiet)
    if args.command == 'check':
        return cmd_check(args.trace, args.problem, args.solver, seed, quiet)
    return cmd_rates(args.trace, args.fstar, quiet)


if __name__ == '__main__':
    sys.exit(main())
