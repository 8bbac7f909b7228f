"""Inertial proximal method for ``phi + g - h`` with energy monitoring.

The iteration couples the primal iterate ``x`` with an auxiliary ``y``::

    x+ = prox_{lam g}(x - lam (grad phi(x) - q) - mu (alpha x + beta y)),  q in dh(x)
    y+ = y - (alpha x + beta y + gamma alpha (x+ - x)) / rho

Under the parameter conditions checked by :func:`validate_inertial_params` the
energies ``delta f(x) + |a x + b y|^2 / 2`` decrease for every ``delta`` in an
explicit interval, which the solver monitors along the run.
"""

from __future__ import annotations

import dataclasses
import logging
import math
import time
from dataclasses import dataclass
from typing import Optional

import numpy as np

from .core import (CapabilityError, DcError, HypothesisViolation, IterateRecord,
                   Trace, as_vector, dc_value)
from .prox import prox

__all__ = ['InertialParameterError', 'InertialParams', 'DerivedConstants',
           'InertialState', 'InertialOptions', 'validate_inertial_params',
           'inertial_step', 'inertial_step_smooth', 'energy', 'lyapunov',
           'solve_inertial', 'delta_grid']

log = logging.getLogger(__name__)

STEP_TOL = 1e-12


class InertialParameterError(DcError, ValueError):
    """Parameters violate a convergence hypothesis.

    ``violation`` names the first failed condition; ``violations`` lists all.
    """

    def __init__(self, violations, details):
        self.violations = tuple(violations)
        self.violation = self.violations[0]
        self.details = details
        super().__init__('; '.join('{}: {}'.format(v, details[v]) for v in self.violations))


@dataclass(frozen=True)
class InertialParams:
    lam: float
    mu: float
    alpha: float
    beta: float
    gamma: float
    tau: float

    @classmethod
    def from_dict(cls, d):
        d = dict(d)
        if 'lambda' in d:
            d['lam'] = d.pop('lambda')
        return cls(**{k: float(d[k]) for k in ('lam', 'mu', 'alpha', 'beta', 'gamma', 'tau')})

    def to_dict(self):
        d = dataclasses.asdict(self)
        d['lambda'] = d.pop('lam')
        return d


@dataclass(frozen=True)
class DerivedConstants:
    rho: float
    a: float
    b: float
    a2: float
    b2: float
    delta_lo: float
    delta_hi: float
    delta1: float
    abar: float
    # the alternate (a2 + b2) * beta scaling, reported but not used
    delta1_alt: float
    step_value: float

    def to_dict(self):
        return dataclasses.asdict(self)


@dataclass
class InertialState:
    x: np.ndarray
    y: np.ndarray
    q: Optional[np.ndarray] = None


def validate_inertial_params(p, L1):
    """Check the convergence hypotheses and return the derived constants.

    Raises :class:`InertialParameterError` naming every violated condition.
    The step condition ``lam L1 + mu (gamma alpha + rho) <= 1`` is accepted up
    to a ``1e-12`` relative tolerance so boundary parameter sets survive
    rounding in ``L1``.
    """
    lam, mu, al, be, ga, tau = p.lam, p.mu, p.alpha, p.beta, p.gamma, p.tau
    bad = {}
    if not lam > 0:
        bad['lambda_nonpositive'] = 'lambda must be > 0 (got {})'.format(lam)
    if not mu > 0:
        bad['mu_nonpositive'] = 'mu must be > 0 (got {})'.format(mu)
    if not be > 0:
        bad['beta_nonpositive'] = 'beta must be > 0 (got {})'.format(be)
    if not al + be > 0:
        bad['alpha_beta_sum'] = 'alpha + beta must be > 0 (got {})'.format(al + be)
    if be > 0 and not tau > -(2 + al) / (2 * be):
        bad['tau_too_small'] = 'tau must exceed -(2 + alpha)/(2 beta) = {} (got {})'.format(
            -(2 + al) / (2 * be), tau)
    if not ga >= 0.5:
        bad['gamma_below_half'] = 'gamma must be >= 1/2 (got {})'.format(ga)
    if L1 is None or not L1 >= 0:
        bad['lipschitz_missing'] = 'a finite L1 >= 0 is required (got {})'.format(L1)
    rho = 1 + tau * be + (al + be) / 2
    step_value = math.nan
    if not bad:
        step_value = lam * L1 + mu * (ga * al + rho)
        if step_value > 1 + STEP_TOL:
            bad['step_condition'] = ('lambda*L1 + mu*(gamma*alpha + rho) must be <= 1 '
                                     '(got {:.17g})'.format(step_value))
    s = 2 + al + be
    a = b = a2 = b2 = math.nan
    if not bad:
        a, b = 2 * al / s, 2 * be / s
        a2 = a * (1 + 2 * b * (ga - 0.5))
        b2 = b * (1 + b * (tau - 0.5))
        # a negative alpha can make the decrease weight vanish and the interval empty
        if not 2 * a2 + b2 > 0:
            bad['abar_nonpositive'] = ('2*a2 + b2 must be > 0 for a Lyapunov decrease '
                                       '(got {:.17g})'.format(2 * a2 + b2))
    if bad:
        raise InertialParameterError(list(bad), bad)
    c = lam / (rho * mu)
    # b2 > 0 follows from the tau bound and a2 + b2 >= 2*a2 + b2 > 0 when a2 <= 0
    root_b2 = math.sqrt(b2)
    root_ab = math.sqrt(a2 + b2)
    return DerivedConstants(
        rho=rho, a=a, b=b, a2=a2, b2=b2,
        delta_lo=c * (root_b2 - root_ab) ** 2, delta_hi=c * (root_b2 + root_ab) ** 2,
        delta1=(a2 + b2) * c, abar=0.5 * min(2 * a2 + b2, b2),
        delta1_alt=(a2 + b2) * be, step_value=step_value)


def delta_grid(dc, size=5):
    """Evenly spaced energies' ``delta`` values, both interval endpoints included."""
    return tuple(float(d) for d in np.linspace(dc.delta_lo, dc.delta_hi, size))


def energy(dc, delta, x, y, f_x):
    w = dc.a * np.asarray(x, float) + dc.b * np.asarray(y, float)
    return delta * f_x + 0.5 * float(w @ w)


def lyapunov(dc, x, y, f_x):
    return energy(dc, dc.delta1, x, y, f_x)


def _advance(problem, state, p, dc, q, literal=False):
    x, y = state.x, state.y
    w = p.alpha * x + p.beta * y
    if literal:
        # (1/lam)|u - x|^2 instead of (1/(2 lam))|u - x|^2: prox step lam/2
        t = 0.5 * p.lam
        v = x - t * (problem.phi.gradient(x) - q) - 0.5 * p.mu * w
    else:
        t = p.lam
        v = x - t * (problem.phi.gradient(x) - q) - p.mu * w
    x_next = prox(problem.g.prox, t, v).y
    y_next = y - (w + p.gamma * p.alpha * (x_next - x)) / dc.rho
    return InertialState(x_next, y_next, q)


def inertial_step(problem, state, p, dc):
    """One step with ``q`` taken from ``h``'s subgradient selection."""
    if problem.g.prox is None:
        raise CapabilityError('g has no prox capability')
    if problem.h.subgradient is not None:
        q = problem.h.subgradient(state.x)
    else:
        q = problem.h.select_subgradient(state.x)
    return _advance(problem, state, p, dc, q)


def inertial_step_smooth(problem, state, p, dc, literal_quadratic=False):
    """Step for differentiable ``h`` (``q = grad h(x)``).

    ``literal_quadratic`` weights the proximal term by ``1/lam`` rather than
    ``1/(2 lam)``, halving the effective prox step and the coupling weight.
    """
    if problem.h.smooth is None:
        raise CapabilityError('inertial_step_smooth needs a differentiable h')
    if problem.g.prox is None:
        raise CapabilityError('g has no prox capability')
    q = problem.h.smooth.gradient(state.x)
    return _advance(problem, state, p, dc, q, literal=literal_quadratic)


@dataclass
class InertialOptions:
    tol: Optional[float] = None
    max_iter: int = 10_000
    grid_size: int = 5
    delta_grid: Optional[tuple] = None
    smooth_step: Optional[bool] = None
    alg3_literal_quadratic: bool = False
    check: bool = True
    slack: float = 1e-10
    norm_ceiling: float = 1e8

    def to_dict(self):
        return dataclasses.asdict(self)


def _decrease_rhs(dc, phi_k, dx, dy):
    ddx, ddy = float(dx @ dx), float(dy @ dy)
    dm = dx - dy
    return phi_k - 0.5 * (2 * dc.a2 + dc.b2) * ddx - 0.5 * dc.b2 * ddy - 0.5 * dc.b2 * float(dm @ dm)


def solve_inertial(problem, x0, y0=None, params=None, opts=None):
    """Run the inertial proximal method and monitor energies.

    ``y0`` defaults to ``-(alpha/beta) x0`` so the coupling term starts at zero.
    Stops when ``|z^{k+1} - z^k| <= tol`` (default ``1e-10 (1 + |z^k|)``).  Each
    step checks the Lyapunov decrease inequality and raises
    :class:`HypothesisViolation` (with ``.trace``) when it fails.
    """
    if params is None:
        raise ValueError('inertial parameters are required')
    opts = opts or InertialOptions()
    if not problem.inertial_compatible:
        raise CapabilityError('problem {!r} is not inertial-compatible: g needs a prox '
                              'and h a subgradient'.format(problem.label))
    dc = validate_inertial_params(params, problem.L1)
    smooth = opts.smooth_step
    if smooth is None:
        smooth = problem.h.smooth is not None
    if smooth and problem.h.smooth is None:
        raise CapabilityError('smooth inertial step requested but h is not differentiable')
    grid = tuple(opts.delta_grid) if opts.delta_grid else delta_grid(dc, opts.grid_size)
    for d in grid:
        if not dc.delta_lo - 1e-12 <= d <= dc.delta_hi + 1e-12:
            log.warning('delta %g outside [%g, %g]: monotonicity not guaranteed',
                        d, dc.delta_lo, dc.delta_hi)
    x = as_vector(x0, problem.dim)
    y = -(params.alpha / params.beta) * x if y0 is None else as_vector(y0, problem.dim)
    state = InertialState(x, y)
    f_x = dc_value(problem, x)
    if not math.isfinite(f_x):
        raise ValueError('f(x0) is not finite; start inside dom g')
    snapshot = {'params': params.to_dict(), 'options': opts.to_dict(),
                'derived': dc.to_dict(), 'delta_grid': list(grid),
                'step': 'smooth' if smooth else 'subgradient',
                'L1': problem.L1, 'known_fstar': problem.known_fstar}
    trace = Trace(problem.label, 'inertial', snapshot)
    t0 = time.perf_counter()

    def record(k, st, fx):
        return IterateRecord(
            k=k, x=st.x, y=st.y, f_x=fx,
            energies=tuple(energy(dc, d, st.x, st.y, fx) for d in grid),
            lyapunov=lyapunov(dc, st.x, st.y, fx),
            coupling_norm=float(np.linalg.norm(params.alpha * st.x + params.beta * st.y)))

    rec = record(0, state, f_x)
    k = 0
    while True:
        if k >= opts.max_iter:
            trace.termination = 'max_iter'
            break
        if smooth:
            nxt = inertial_step_smooth(problem, state, params, dc, opts.alg3_literal_quadratic)
        else:
            nxt = inertial_step(problem, state, params, dc)
        f_next = dc_value(problem, nxt.x)
        dx, dy = nxt.x - state.x, nxt.y - state.y
        rec.dx_norm = float(np.linalg.norm(dx))
        rec.dy_norm = float(np.linalg.norm(dy))
        rec.d_norm = math.hypot(rec.dx_norm, rec.dy_norm)
        rec.wall_time_s = time.perf_counter() - t0
        trace.records.append(rec)
        nrec = record(k + 1, nxt, f_next)
        if opts.check:
            excess = nrec.lyapunov - _decrease_rhs(dc, rec.lyapunov, dx, dy)
            if excess > opts.slack * max(1.0, abs(rec.lyapunov)):
                trace.records.append(nrec)
                trace.termination = 'diverged'
                exc = HypothesisViolation(
                    'Lyapunov increase at k={}: excess {:.3e}'.format(k, excess),
                    check='lyapunov_decrease', k=k, excess=excess)
                exc.trace = trace
                raise exc
        z_norm = math.hypot(float(np.linalg.norm(state.x)), float(np.linalg.norm(state.y)))
        tol = opts.tol if opts.tol is not None else 1e-10 * (1.0 + z_norm)
        step_norm = rec.d_norm
        state, rec, k = nxt, nrec, k + 1
        if step_norm <= tol:
            trace.termination = 'converged'
            break
        if not math.isfinite(f_next) or max(np.abs(state.x).max(), np.abs(state.y).max()) > opts.norm_ceiling:
            trace.termination = 'diverged'
            trace.message = 'iterates exceeded norm ceiling {}'.format(opts.norm_ceiling)
            break
    rec.wall_time_s = time.perf_counter() - t0
    trace.records.append(rec)
    log.info('inertial on %s: %s after %d iterations, f=%.17g', problem.label,
             trace.termination, k, rec.f_x)
    return trace
