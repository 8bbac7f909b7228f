"""Boosted proximal point algorithm and the plain proximal point baseline.

Each iteration solves the strongly convex subproblem for ``y^k`` and, in the
boosted variant, runs an Armijo backtracking along ``d^k = y^k - x^k`` starting
from ``y^k``.  The sufficient-decrease inequalities the method guarantees under
its hypotheses are re-checked live; a violation aborts the run.
"""

from __future__ import annotations

import dataclasses
import logging
import math
import time
from dataclasses import dataclass
from typing import Optional

import numpy as np

from .core import (CapabilityError, HypothesisViolation, InvalidProblemState,
                   IterateRecord, Trace, as_vector, dc_gradient, dc_value)
from .prox import subproblem_solve

__all__ = ['BppaConfig', 'StepOutcome', 'ArmijoFailure', 'armijo_search',
           'bppa_step', 'solve_bppa', 'solve_ppa']

log = logging.getLogger(__name__)


class ArmijoFailure(HypothesisViolation):
    """No step ``eta**m`` with ``m <= max_m`` gave sufficient decrease."""


def _slack(ref, rel):
    return rel * max(1.0, abs(ref))


@dataclass
class BppaConfig:
    """Parameters of the boosted proximal point method.

    ``lambda_value`` defaults to ``L1 + 2 * lambda_hat``.  With
    ``lambda_rule='adaptive'`` the proximal parameter is doubled (up to
    ``lambda_bar``) whenever the proximal-step decrease check fails, which
    tolerates understated local Lipschitz constants.
    """

    eta: float = 0.5
    alpha: float = 0.1
    lambda_hat: float = 0.5
    lambda_bar: float = math.inf
    lambda_rule: str = 'constant'
    lambda_value: Optional[float] = None
    tol_d: Optional[float] = None
    max_iter: int = 1000
    max_armijo: int = 60
    allow_m0: bool = False
    slack: float = 1e-10
    f_floor: float = -math.inf
    check: bool = True

    def validate(self, L1):
        if not 0.0 < self.eta < 1.0:
            raise ValueError('eta must lie in (0, 1), got {}'.format(self.eta))
        if not self.alpha > 0:
            raise ValueError('alpha must be positive, got {}'.format(self.alpha))
        if not self.lambda_hat > 0:
            raise ValueError('lambda_hat must be positive, got {}'.format(self.lambda_hat))
        if self.lambda_rule not in ('constant', 'adaptive'):
            raise ValueError('lambda_rule must be constant or adaptive')
        if self.max_iter < 0 or self.max_armijo < 1:
            raise ValueError('max_iter must be >= 0 and max_armijo >= 1')
        lam = self.initial_lambda(L1)
        if lam < L1 + 2 * self.lambda_hat:
            raise ValueError('lambda {} violates L1 + 2*lambda_hat = {} <= lambda'
                             .format(lam, L1 + 2 * self.lambda_hat))
        if lam > self.lambda_bar:
            raise ValueError('lambda {} exceeds lambda_bar {}'.format(lam, self.lambda_bar))
        return lam

    def initial_lambda(self, L1):
        if self.lambda_value is not None:
            return float(self.lambda_value)
        return L1 + 2.0 * self.lambda_hat

    def to_dict(self):
        return dataclasses.asdict(self)


@dataclass
class StepOutcome:
    x: np.ndarray
    y: np.ndarray
    d: np.ndarray
    d_norm: float
    lambda_k: float
    f_x: float
    f_y: float
    m_k: Optional[int] = None
    eta_k: Optional[float] = None
    x_next: Optional[np.ndarray] = None
    f_next: Optional[float] = None
    decrease_bound: Optional[float] = None
    terminated: bool = False


def armijo_search(f, y, d, eta, alpha, max_m=60, f_y=None, m_start=1):
    """Smallest ``m >= m_start`` with ``f(y + eta^m d) <= f(y) - alpha eta^m |d|^2``.

    Returns ``(m, eta**m)``.  Raises :class:`ArmijoFailure` past ``max_m``.
    """
    y = np.asarray(y, dtype=float)
    d = np.asarray(d, dtype=float)
    dd = float(d @ d)
    if f_y is None:
        f_y = float(f(y))
    if not math.isfinite(f_y):
        raise ValueError('armijo_search needs a finite f(y)')
    step = eta ** m_start
    for m in range(m_start, max_m + 1):
        if float(f(y + step * d)) <= f_y - alpha * step * dd:
            return m, step
        step *= eta
    raise ArmijoFailure('Armijo backtracking failed after m={} (lambda_k too small or '
                        'L1 understated?)'.format(max_m), check='armijo')


def _tol(config, x):
    if config.tol_d is not None:
        return config.tol_d
    return 1e-10 * (1.0 + float(np.linalg.norm(x)))


def bppa_step(problem, x, lambda_k, config, f_x=None, boost=True, k=None):
    """One iteration from ``x``: proximal point ``y``, then the boosted move.

    With ``boost=False`` this is a plain proximal point step (``x_next = y``).
    """
    x = as_vector(x, problem.dim)
    L1 = problem.L1
    if f_x is None:
        f_x = dc_value(problem, x)
    y = subproblem_solve(problem, x, lambda_k).y
    d = y - x
    d_norm = float(np.linalg.norm(d))
    dd = d_norm ** 2
    f_y = dc_value(problem, y)
    out = StepOutcome(x=x, y=y, d=d, d_norm=d_norm, lambda_k=lambda_k, f_x=f_x, f_y=f_y)
    if d_norm <= _tol(config, x):
        out.terminated = True
        return out
    if config.check:
        excess = f_y - (f_x - 0.5 * (lambda_k - L1) * dd)
        if excess > _slack(f_x, config.slack):
            raise HypothesisViolation(
                'proximal-step decrease failed at k={}: f(y)-bound={:.3e}'.format(k, excess),
                check='prox_decrease', k=k, excess=excess)
    if not boost:
        out.x_next, out.f_next = y, f_y
        out.decrease_bound = 0.5 * (lambda_k - L1) * dd
        return out
    m, eta_k = armijo_search(lambda u: dc_value(problem, u), y, d, config.eta,
                             config.alpha, config.max_armijo, f_y=f_y,
                             m_start=0 if config.allow_m0 else 1)
    x_next = y + eta_k * d
    f_next = dc_value(problem, x_next)
    bound = (0.5 * (lambda_k - L1) + config.alpha * eta_k) * dd
    if config.check:
        excess = f_next - (f_x - bound)
        if excess > _slack(f_x, config.slack):
            raise HypothesisViolation(
                'boosted decrease failed at k={}: excess {:.3e}'.format(k, excess),
                check='boosted_decrease', k=k, excess=excess)
    out.m_k, out.eta_k = m, eta_k
    out.x_next, out.f_next, out.decrease_bound = x_next, f_next, bound
    return out


def _require(problem, boost):
    if boost and not problem.bppa_compatible:
        raise CapabilityError('problem {!r} is not bppa-compatible: g and h must be '
                              'differentiable, g finite with a prox, L1 declared'
                              .format(problem.label))
    if not boost and not problem.ppa_compatible:
        raise CapabilityError('problem {!r} is not ppa-compatible: g needs a prox and h '
                              'a gradient or subgradient'.format(problem.label))


def _solve(problem, x0, config, boost):
    _require(problem, boost)
    lam = config.validate(problem.L1)
    x = as_vector(x0, problem.dim)
    f_x = dc_value(problem, x)
    if not math.isfinite(f_x):
        raise ValueError('f(x0) is not finite; start inside dom g')
    smooth = problem.g.smooth is not None and problem.h.smooth is not None
    snapshot = config.to_dict()
    snapshot['lambda_initial'] = lam
    snapshot['L1'] = problem.L1
    snapshot['known_fstar'] = problem.known_fstar
    trace = Trace(problem.label, 'bppa' if boost else 'ppa', snapshot)
    sum_d_sq = 0.0
    t0 = time.perf_counter()
    k = 0
    while True:
        while True:
            try:
                step = bppa_step(problem, x, lam, config, f_x=f_x, boost=boost, k=k)
                break
            except InvalidProblemState as exc:
                step = None
                trace.message = 'non-finite values at k={}: {}'.format(k, exc)
                break
            except HypothesisViolation as exc:
                if (config.lambda_rule != 'adaptive' or exc.check != 'prox_decrease'
                        or 2 * lam > config.lambda_bar):
                    exc.trace = trace
                    raise
                lam *= 2.0
                log.debug('k=%d: doubling lambda to %g', k, lam)
        if step is None:
            trace.records.append(IterateRecord(k=k, x=x, f_x=f_x,
                                               wall_time_s=time.perf_counter() - t0))
            trace.termination = 'diverged'
            break
        sum_d_sq += step.d_norm ** 2
        rec = IterateRecord(k=k, x=x, f_x=f_x, d_norm=step.d_norm, lambda_k=lam,
                            f_y=step.f_y, m_k=step.m_k, eta_k=step.eta_k,
                            sum_d_sq=sum_d_sq)
        if smooth:
            rec.grad_residual = float(np.linalg.norm(dc_gradient(problem, x)))
        if problem.L2 is not None:
            rec.grad_bound = (problem.L2 + lam) * step.d_norm
        rec.wall_time_s = time.perf_counter() - t0
        if step.terminated or k >= config.max_iter:
            # the last row records the subproblem at x^K but no move
            rec.m_k = rec.eta_k = None
            trace.records.append(rec)
            trace.termination = 'converged' if step.terminated else 'max_iter'
            break
        trace.records.append(rec)
        x, f_x = step.x_next, step.f_next
        if not f_x >= config.f_floor:
            trace.records.append(IterateRecord(k=k + 1, x=x, f_x=f_x,
                                               wall_time_s=time.perf_counter() - t0))
            trace.termination = 'diverged'
            trace.message = 'f fell below floor {}'.format(config.f_floor)
            break
        k += 1
    log.info('%s on %s: %s after %d iterations, f=%.17g', trace.solver, problem.label,
             trace.termination, len(trace.records) - 1, trace.records[-1].f_x)
    return trace


def solve_bppa(problem, x0, config=None):
    """Run the boosted proximal point method from ``x0``.

    Stops when ``|d^k| <= tol_d`` or after ``max_iter`` moves.  An Armijo
    failure ends the run with termination ``'armijo_fail'``; a failed decrease
    check raises :class:`HypothesisViolation` carrying the partial trace.
    """
    config = config or BppaConfig()
    try:
        return _solve(problem, x0, config, boost=True)
    except ArmijoFailure as exc:
        trace = getattr(exc, 'trace', None)
        if trace is None:
            raise
        trace.termination = 'armijo_fail'
        trace.message = str(exc)
        return trace


def solve_ppa(problem, x0, config=None):
    """Plain proximal point iteration ``x^{k+1} = y^k``; same stopping rule."""
    return _solve(problem, x0, config or BppaConfig(), boost=False)
