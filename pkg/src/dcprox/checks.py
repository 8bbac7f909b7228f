"""Offline re-verification of per-iteration inequalities on a stored trace.

The checks work from the trace columns alone plus the constants of the run
(``L1``, the proximal parameter, the Armijo constant, the inertial derived
constants), so they apply equally to in-memory traces and reloaded CSV files.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

__all__ = ['CheckResult', 'CheckContext', 'check_trace', 'CHECK_NAMES']

CHECK_NAMES = ('indices', 'monotone_f', 'prox_decrease', 'boosted_decrease',
               'summability', 'stationarity_bound', 'energy_lo_monotone',
               'energy_hi_monotone', 'lyapunov_decrease', 'delta_grid')


@dataclass
class CheckResult:
    name: str
    passed: bool
    n_checked: int = 0
    worst_excess: float = -math.inf
    first_failure: Optional[int] = None
    warning: bool = False
    detail: str = ''

    def to_dict(self):
        return {'name': self.name, 'passed': self.passed, 'n_checked': self.n_checked,
                'worst_excess': None if self.n_checked == 0 else self.worst_excess,
                'first_failure': self.first_failure, 'warning': self.warning,
                'detail': self.detail}


@dataclass
class CheckContext:
    """Constants a trace is checked against.

    ``lam`` is the proximal parameter; for adaptive runs pass the lower bound
    ``L1 + 2 lambda_hat``, which weakens the decrease bounds and keeps them valid.
    ``lam_upper`` bounds the parameter from above for the stationarity check,
    which is skipped when it is unknown or infinite.
    ``derived`` is the inertial :class:`~dcprox.inertial.DerivedConstants`
    and ``grid`` the energy ``delta`` values whose endpoints fill the
    ``energy_lo``/``energy_hi`` columns.
    """

    L1: Optional[float] = None
    lam: Optional[float] = None
    lam_upper: Optional[float] = None
    alpha: Optional[float] = None
    lambda_hat: Optional[float] = None
    L2: Optional[float] = None
    derived: object = None
    grid: Optional[tuple] = None
    slack: float = 1e-10
    slack_overrides: dict = field(default_factory=dict)
    enabled: Optional[tuple] = None

    def slack_for(self, name):
        return float(self.slack_overrides.get(name, self.slack))


def _tally(name, excesses, ks, tol):
    """Fold per-index excesses (bound violation amounts) into a result."""
    if not excesses:
        return CheckResult(name, True, 0, detail='no applicable rows')
    exc = np.asarray(excesses, dtype=float)
    tol = np.asarray(tol, dtype=float)
    bad = np.flatnonzero(~(exc <= tol))
    worst = float(np.max(exc))
    if bad.size:
        i = int(bad[0])
        return CheckResult(name, False, exc.size, worst, int(ks[i]),
                           detail='k={} exceeds bound by {:.3e}'.format(ks[i], exc[i]))
    return CheckResult(name, True, exc.size, worst)


def _rel(slack, ref):
    return slack * max(1.0, abs(ref))


def _check_indices(records):
    ks = [r.k for r in records]
    ok = ks == list(range(ks[0], ks[0] + len(ks)))
    return CheckResult('indices', ok, len(ks), 0.0,
                       detail='' if ok else 'iteration indices are not consecutive')


def _check_monotone(records, ctx):
    s = ctx.slack_for('monotone_f')
    exc, ks, tol = [], [], []
    for r, n in zip(records, records[1:]):
        exc.append(n.f_x - r.f_x)
        ks.append(r.k)
        tol.append(_rel(s, r.f_x))
    return _tally('monotone_f', exc, ks, tol)


def _check_decrease(records, ctx, name, boosted):
    s = ctx.slack_for(name)
    exc, ks, tol = [], [], []
    for r, n in zip(records, records[1:]):
        if r.d_norm is None:
            continue
        lam = r.lambda_k if r.lambda_k is not None else ctx.lam
        dd = r.d_norm ** 2
        if boosted:
            if r.eta_k is None:
                continue
            bound = (0.5 * (lam - ctx.L1) + ctx.alpha * r.eta_k) * dd
        else:
            bound = 0.5 * (lam - ctx.L1) * dd
        exc.append(n.f_x - (r.f_x - bound))
        ks.append(r.k)
        tol.append(_rel(s, r.f_x))
    return _tally(name, exc, ks, tol)


def _check_prox_value(records, ctx):
    # in-memory traces keep f(y^k), which the CSV does not
    s = ctx.slack_for('prox_decrease')
    exc, ks, tol = [], [], []
    for r in records:
        if r.f_y is None or r.d_norm is None or r.eta_k is None:
            continue
        lam = r.lambda_k if r.lambda_k is not None else ctx.lam
        exc.append(r.f_y - (r.f_x - 0.5 * (lam - ctx.L1) * r.d_norm ** 2))
        ks.append(r.k)
        tol.append(_rel(s, r.f_x))
    return _tally('prox_decrease', exc, ks, tol)


def _check_summability(records, ctx):
    # lambda_hat * sum_{i<=k} |d^i|^2 <= f_0 - f_{k+1}
    s = ctx.slack_for('summability')
    f0 = records[0].f_x
    exc, ks, tol = [], [], []
    for r, n in zip(records, records[1:]):
        if r.sum_d_sq is None:
            continue
        exc.append(ctx.lambda_hat * r.sum_d_sq - (f0 - n.f_x))
        ks.append(r.k)
        tol.append(_rel(s, f0))
    return _tally('summability', exc, ks, tol)


def _check_stationarity(records, ctx):
    s = ctx.slack_for('stationarity_bound')
    exc, ks, tol = [], [], []
    for r in records:
        if r.grad_residual is None or r.d_norm is None:
            continue
        lam = r.lambda_k if r.lambda_k is not None else ctx.lam_upper
        if lam is None or not math.isfinite(lam):
            continue
        bound = (ctx.L2 + lam) * r.d_norm
        exc.append(r.grad_residual - bound)
        ks.append(r.k)
        tol.append(s * max(1.0, bound) + 1e-12)
    return _tally('stationarity_bound', exc, ks, tol)


def _check_energy(records, ctx, idx, name):
    s = ctx.slack_for(name)
    exc, ks, tol = [], [], []
    for r, n in zip(records, records[1:]):
        if r.energies is None or n.energies is None:
            continue
        a, b = r.energies[idx], n.energies[idx]
        if a is None or b is None:
            continue
        exc.append(b - a)
        ks.append(r.k)
        tol.append(_rel(s, a))
    return _tally(name, exc, ks, tol)


def _check_lyapunov(records, ctx):
    s = ctx.slack_for('lyapunov_decrease')
    dc = ctx.derived
    exc, ks, tol = [], [], []
    for r, n in zip(records, records[1:]):
        if r.lyapunov is None or n.lyapunov is None or r.d_norm is None:
            continue
        if r.dx_norm is not None and r.dy_norm is not None and r.x is not None:
            dx, dy = n.x - r.x, n.y - r.y
            dm = float(np.linalg.norm(dx - dy)) ** 2
            drop = (0.5 * (2 * dc.a2 + dc.b2) * r.dx_norm ** 2 + 0.5 * dc.b2 * r.dy_norm ** 2
                    + 0.5 * dc.b2 * dm)
        else:
            drop = dc.abar * r.d_norm ** 2
        exc.append(n.lyapunov - (r.lyapunov - drop))
        ks.append(r.k)
        tol.append(_rel(s, r.lyapunov))
    return _tally('lyapunov_decrease', exc, ks, tol)


def _check_grid(records, ctx):
    """Compare the energy spread implied by the columns with the expected grid.

    ``E_hi - E_lo = (delta_hi - delta_lo) f`` and
    ``lyapunov - E_lo = (delta1 - delta_lo) f``; a mismatch means the trace was
    produced with different constants.  Reported as a warning only.
    """
    dc, grid = ctx.derived, ctx.grid
    want_span = grid[-1] - grid[0]
    want_lyap = dc.delta1 - grid[0]
    worst = 0.0
    n = 0
    for r in records:
        if r.energies is None or r.lyapunov is None or None in r.energies:
            continue
        if abs(r.f_x) < 1e-6:
            continue
        span = (r.energies[-1] - r.energies[0]) / r.f_x
        lyap = (r.lyapunov - r.energies[0]) / r.f_x
        dev = max(abs(span - want_span) / max(1.0, abs(want_span)),
                  abs(lyap - want_lyap) / max(1.0, abs(want_lyap)))
        worst = max(worst, dev)
        n += 1
    ok = worst <= 1e-6
    res = CheckResult('delta_grid', True, n, worst, warning=not ok)
    if not ok:
        res.detail = ('energy columns imply a different delta grid than the config '
                      '(relative deviation {:.3e})'.format(worst))
    return res


def check_trace(trace, kind, ctx):
    """Run every applicable check for solver ``kind`` and return the results.

    Warnings (``warning=True``) keep ``passed=True``; only failed inequalities
    make a result fail.
    """
    records = trace.records
    if not records:
        raise ValueError('empty trace')
    out = [_check_indices(records)]
    if kind in ('bppa', 'ppa'):
        out.append(_check_monotone(records, ctx))
        if kind == 'bppa':
            out.append(_check_prox_value(records, ctx))
            out.append(_check_decrease(records, ctx, 'boosted_decrease', boosted=True))
        else:
            out.append(_check_decrease(records, ctx, 'prox_decrease', boosted=False))
        if ctx.lambda_hat is not None:
            out.append(_check_summability(records, ctx))
        if ctx.L2 is not None:
            out.append(_check_stationarity(records, ctx))
    elif kind == 'inertial':
        out.append(_check_energy(records, ctx, 0, 'energy_lo_monotone'))
        out.append(_check_energy(records, ctx, -1, 'energy_hi_monotone'))
        out.append(_check_lyapunov(records, ctx))
        if ctx.grid is not None:
            out.append(_check_grid(records, ctx))
    else:
        raise ValueError('unknown solver kind {!r}'.format(kind))
    if ctx.enabled is not None:
        out = [r for r in out if r.name in ctx.enabled]
    return out
