"""Convergence-rate machinery: recursive rate bounds, empirical rate fits,
Lojasiewicz exponent estimation and sampled KL inequality checks."""

from __future__ import annotations

import dataclasses
import logging
import math
from dataclasses import dataclass, field
from typing import NamedTuple, Optional

import numpy as np

from .core import DcError, Trace, as_vector, dc_gradient, dc_value

__all__ = ['TooFewPoints', 'RateReport', 'KlEstimate', 'LojasiewiczResult',
           'rate_bound_check', 'rate_predict', 'admissible_sequence',
           'classify_rate', 'estimate_kl_exponent', 'lojasiewicz_check',
           'resolve_fstar']

log = logging.getLogger(__name__)

FLOOR_REL = 1e-14
# a drop onto the floor from above this multiple of it counts as finite termination
FINITE_JUMP = 1e6
MIN_TAIL = 20


class TooFewPoints(DcError, ValueError):
    pass


def _pow(t, mu):
    # 0**0 == 1 by convention; numpy already follows it
    return np.power(t, mu)


def rate_bound_check(t, mu, nu):
    """Per-index truth of ``t_k^mu <= nu (t_k - t_{k+1})`` (slack 1e-12).

    Returns ``(holds, first_violation)`` with ``holds`` of length ``len(t) - 1``.
    """
    if not nu > 0:
        raise ValueError('nu must be positive')
    t = np.asarray(t, dtype=float)
    if np.any(t < 0):
        raise ValueError('sequence must be nonnegative')
    holds = _pow(t[:-1], mu) <= nu * (t[:-1] - t[1:]) + 1e-12
    bad = np.flatnonzero(~holds)
    return holds, (int(bad[0]) if bad.size else None)


def rate_predict(mu, nu, t0, k):
    """Upper bound on ``t_k`` for a sequence obeying the recursive bound from ``t_0``.

    * ``mu == 0``: ``max(t0 - k/nu, 0)``, zero once ``k >= nu t0``.
    * ``0 < mu <= 1``: ``t0 (1 - 1/nu)^k``; for ``mu < 1`` valid only once the
      sequence is below 1.
    * ``mu > 1``: ``(t0^(1-mu) + (mu-1) k / nu)^(1/(1-mu))``.
    """
    if not nu > 0:
        raise ValueError('nu must be positive')
    if mu < 0:
        raise ValueError('mu must be nonnegative')
    if mu == 0:
        return max(t0 - k / nu, 0.0)
    if mu <= 1:
        if nu <= 1:
            raise ValueError('invalid parameters: linear rate 1 - 1/nu needs nu > 1')
        if mu < 1 and t0 >= 1:
            log.warning('linear bound with mu < 1 only applies once t_k < 1')
        return t0 * (1.0 - 1.0 / nu) ** k
    if t0 == 0:
        return 0.0
    return (t0 ** (1 - mu) + (mu - 1) / nu * k) ** (1.0 / (1 - mu))


def admissible_sequence(mu, nu, t0, n, rng=None):
    """Random sequence satisfying the recursive bound at every index.

    Each step shrinks to a random fraction of the largest admissible value
    ``t_k - t_k^mu / nu``.  A value from which no admissible step exists
    (``t < t^mu / nu``, possible for ``mu < 1``) is replaced by zero, where the
    sequence stays; so the bound holds at every positive entry provided
    ``t0^mu <= nu t0``.  ``rng=None`` gives the extremal sequence.
    """
    t = np.zeros(n)
    t[0] = t0
    for k in range(n - 1):
        if t[k] == 0.0:
            break
        u = 1.0 if rng is None else rng.uniform(0.5, 1.0)
        nxt = u * max(t[k] - _pow(t[k], mu) / nu, 0.0)
        if nxt > 0 and nxt < _pow(nxt, mu) / nu:
            nxt = 0.0
        t[k + 1] = nxt
    return t


@dataclass
class RateReport:
    """Empirical rate classification of a decreasing sequence.

    ``value`` is the finite step index, the linear rate, or the sublinear
    exponent depending on ``classification``.
    """

    classification: str
    value: float
    fit_constants: dict = field(default_factory=dict)
    fit_residual: float = 0.0
    window: tuple = (0, 0)
    fstar: float = 0.0
    fstar_estimated: bool = False
    flags: list = field(default_factory=list)

    @property
    def rate(self):
        return self.value if self.classification == 'linear' else None

    @property
    def exponent(self):
        return self.value if self.classification == 'sublinear' else None

    def to_dict(self):
        d = dataclasses.asdict(self)
        d['window'] = list(self.window)
        return d


def _values_and_ks(trace, k):
    if isinstance(trace, Trace):
        f = trace.f_values
        ks = np.array([r.k for r in trace.records], dtype=float)
    else:
        f = np.asarray(trace, dtype=float)
        ks = np.arange(f.size, dtype=float)
    if k is not None:
        ks = np.asarray(k, dtype=float)
    return f, ks


def resolve_fstar(f, known=None):
    """``(fstar, estimated)``: known value, else the last value minus a guard."""
    if known is not None:
        return float(known), False
    last = float(np.asarray(f, dtype=float)[-1])
    return last - FLOOR_REL * (1.0 + abs(last)), True


def _fit(xs, ys):
    A = np.vstack([xs, np.ones_like(xs)]).T
    coef, *_ = np.linalg.lstsq(A, ys, rcond=None)
    resid = ys - A @ coef
    rms = float(np.sqrt(np.mean(resid ** 2)))
    ss = float(np.sum((ys - ys.mean()) ** 2))
    r2 = 1.0 - float(np.sum(resid ** 2)) / ss if ss > 0 else 1.0
    return float(coef[0]), float(coef[1]), rms, r2


def classify_rate(trace, fstar=None, k=None, min_points=MIN_TAIL):
    """Classify the decay of ``t_k = f_k - fstar`` as finite, linear or sublinear.

    ``trace`` is a :class:`Trace` or a sequence of values.  Values at or below
    the floor ``1e-14 (1 + |fstar|)`` are rounding noise and excluded from the
    fits; reaching the floor counts as finite termination only when the last
    value before it sits more than ``1e6`` floors higher.  The fits use the last
    half of the remaining points and need ``min_points`` of them.
    """
    f, ks = _values_and_ks(trace, k)
    if fstar is None and isinstance(trace, Trace):
        fstar = trace.config_snapshot.get('known_fstar')
    fstar, estimated = resolve_fstar(f, fstar)
    t = f - fstar
    floor = FLOOR_REL * (1.0 + abs(fstar))
    if np.any(t < -max(floor, 1e-9 * (1.0 + abs(fstar)))):
        raise ValueError('fstar exceeds the smallest recorded value')
    flags = ['fstar_estimated'] if estimated else []
    below = np.flatnonzero(t <= floor)
    n_fit = t.size
    if below.size:
        K = int(below[0])
        if K == 0 or t[K - 1] > FINITE_JUMP * floor:
            return RateReport('finite', float(ks[K]), {'step_index': int(ks[K])}, 0.0,
                              (int(ks[0]), int(ks[K])), fstar, estimated, flags)
        n_fit = K
    start = n_fit // 2
    if n_fit - start < min_points:
        raise TooFewPoints('only {} tail points above the floor (need {})'
                           .format(n_fit - start, min_points))
    kk, tt = ks[start:n_fit], t[start:n_fit]
    logt = np.log(tt)
    slope, icpt, rms_lin, r2_lin = _fit(kk, logt)
    pos = kk > 0
    p_slope, p_icpt, rms_sub, r2_sub = _fit(np.log(kk[pos]), logt[pos])
    consts = {'linear_rate': math.exp(slope), 'linear_log_intercept': icpt,
              'linear_rms': rms_lin, 'linear_r2': r2_lin,
              'sublinear_exponent': p_slope, 'sublinear_log_intercept': p_icpt,
              'sublinear_rms': rms_sub, 'sublinear_r2': r2_sub}
    window = (int(kk[0]), int(kk[-1]))
    if slope >= 0 and p_slope >= 0:
        raise ValueError('sequence does not decay on the tail window')
    linear = rms_lin <= rms_sub
    if linear and slope >= 0:
        linear = False
    elif not linear and p_slope >= 0:
        linear = True
    if linear:
        # nu from the fitted rate r = 1 - 1/nu
        consts['nu'] = 1.0 / (1.0 - math.exp(slope))
        return RateReport('linear', math.exp(slope), consts, rms_lin, window, fstar,
                          estimated, flags)
    consts['gamma'] = math.exp(p_icpt)
    return RateReport('sublinear', p_slope, consts, rms_sub, window, fstar, estimated, flags)


class KlEstimate(NamedTuple):
    kappa: float
    M: float


def estimate_kl_exponent(trace, fstar=None, grads=None, min_points=3):
    """Fit ``log |grad f| = kappa log(f - fstar) - log M`` on the tail window.

    ``trace`` is a :class:`Trace` with gradient residuals or a value sequence
    paired with ``grads``.  The slope is clamped to ``[0, 1)``; a clamp is
    logged as a non-KL window.
    """
    if isinstance(trace, Trace):
        f = trace.f_values
        g = trace.column('grad_residual') if grads is None else np.asarray(grads, float)
        if fstar is None:
            fstar = trace.config_snapshot.get('known_fstar')
    else:
        f = np.asarray(trace, dtype=float)
        if grads is None:
            raise ValueError('gradient norms are required')
        g = np.asarray(grads, dtype=float)
    fstar, _ = resolve_fstar(f, fstar)
    t = f - fstar
    floor = FLOOR_REL * (1.0 + abs(fstar))
    ok = np.flatnonzero((t > floor) & np.isfinite(g) & (g > 0))
    if ok.size == 0:
        raise TooFewPoints('degenerate window: every f_k - fstar is below the floor')
    ok = ok[ok.size // 2:]
    if ok.size < min_points:
        raise TooFewPoints('only {} usable tail points (need {})'.format(ok.size, min_points))
    slope, icpt, _, _ = _fit(np.log(t[ok]), np.log(g[ok]))
    kappa = slope
    if not 0.0 <= slope < 1.0:
        log.warning('fitted exponent %.4g outside [0, 1): window is not KL-like', slope)
        kappa = min(max(slope, 0.0), math.nextafter(1.0, 0.0))
    return KlEstimate(kappa, math.exp(-icpt))


class LojasiewiczResult(NamedTuple):
    holds: bool
    worst_ratio: float
    witness: Optional[np.ndarray]


def lojasiewicz_check(problem, xstar, kappa, M, eps, n_samples=1000, seed=0):
    """Sample the ball ``B(xstar, eps)`` and test ``|f - f*|^kappa <= M |grad f|``.

    ``worst_ratio`` is the largest ``|f - f*|^kappa / (M |grad f|)``; it is
    infinite where the gradient vanishes but the left side does not.  This is
    evidence, not proof.
    """
    if not 0.0 <= kappa < 1.0:
        raise ValueError('kappa must lie in [0, 1)')
    xstar = as_vector(xstar, problem.dim)
    rng = np.random.default_rng(seed)
    fstar = dc_value(problem, xstar)
    n = problem.dim
    dirs = rng.standard_normal((n_samples, n))
    dirs /= np.linalg.norm(dirs, axis=1, keepdims=True)
    radii = eps * rng.uniform(0.0, 1.0, n_samples) ** (1.0 / n)
    worst, witness = 0.0, None
    for u, r in zip(dirs, radii):
        x = xstar + r * u
        lhs = abs(dc_value(problem, x) - fstar) ** kappa
        rhs = M * float(np.linalg.norm(dc_gradient(problem, x)))
        if rhs > 0:
            ratio = lhs / rhs
        else:
            ratio = 0.0 if lhs == 0 else math.inf
        if ratio > worst:
            worst, witness = ratio, x
    holds = worst <= 1.0 + 1e-12
    return LojasiewiczResult(holds, worst, None if holds else witness)
