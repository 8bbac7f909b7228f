"""Proximal operators and the strongly convex subproblems built on them.

``prox(spec, t, v)`` returns ``argmin_x g(x) + |x - v|^2 / (2t)``.  Catalog
kinds have closed forms; separable scalar kinds use a bracketed Newton solve;
``numeric`` falls back to fixed-step gradient descent on the smooth view.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .core import CapabilityError, DcError, SmoothOracle, as_vector

__all__ = [
    'ProxError', 'ScalarFunction', 'ProxSpec', 'ProxResult', 'prox',
    'prox_value', 'prox_subgradient', 'prox_optimality_residual',
    'numeric_prox', 'subproblem_solve', 'subproblem_objective',
    'convex_oracle_from_spec', 'quartic_scalar',
]

KINDS = ('zero', 'l1', 'l2_squared', 'box_indicator', 'ball_indicator',
         'quadratic', 'separable_scalar', 'numeric')


class ProxError(DcError):
    """Prox evaluation failed (inner solver cap, empty feasible set, ...)."""


@dataclass(frozen=True)
class ScalarFunction:
    """Convex scalar function with first and second derivatives.

    ``argmin`` is any minimizer; it anchors the Newton bracket.
    """

    value: Callable[[np.ndarray], np.ndarray]
    deriv: Callable[[np.ndarray], np.ndarray]
    second: Callable[[np.ndarray], np.ndarray]
    argmin: float = 0.0
    name: str = 'scalar'


def quartic_scalar(weight=1.0):
    """``s(u) = weight * u**4``."""
    return ScalarFunction(value=lambda u: weight * u ** 4,
                          deriv=lambda u: 4.0 * weight * u ** 3,
                          second=lambda u: 12.0 * weight * u ** 2,
                          argmin=0.0, name='quartic')


@dataclass(frozen=True, eq=False)
class ProxSpec:
    """A convex function together with how to evaluate its prox.

    Build instances through the classmethods; ``params`` holds kind-specific
    data and is never mutated after construction.
    """

    kind: str
    params: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ValueError('unknown prox kind {!r}'.format(self.kind))

    @classmethod
    def zero(cls):
        return cls('zero')

    @classmethod
    def l1(cls, weight=1.0):
        if weight < 0:
            raise ValueError('l1 weight must be nonnegative')
        return cls('l1', {'weight': float(weight)})

    @classmethod
    def l2_squared(cls, weight=0.5):
        """``g(x) = weight * |x|^2``."""
        if weight < 0:
            raise ValueError('l2_squared weight must be nonnegative')
        return cls('l2_squared', {'weight': float(weight)})

    @classmethod
    def box(cls, lo, hi):
        lo = np.asarray(lo, dtype=float)
        hi = np.asarray(hi, dtype=float)
        if np.any(lo > hi):
            raise ProxError('box indicator with empty feasible set (lo > hi)')
        return cls('box_indicator', {'lo': lo, 'hi': hi})

    @classmethod
    def ball(cls, radius):
        if not radius >= 0:
            raise ProxError('ball indicator needs a nonnegative radius')
        return cls('ball_indicator', {'radius': float(radius)})

    @classmethod
    def quadratic(cls, Q, c=None):
        """``g(x) = x'Qx/2 + c'x`` with ``Q`` symmetric positive semidefinite."""
        Q = np.atleast_2d(np.asarray(Q, dtype=float))
        if Q.shape[0] != Q.shape[1] or not np.allclose(Q, Q.T, atol=1e-12):
            raise ValueError('quadratic prox needs a symmetric square Q')
        shift = 1e-12 * (1.0 + np.abs(Q).max())
        try:
            np.linalg.cholesky(Q + shift * np.eye(Q.shape[0]))
        except np.linalg.LinAlgError:
            raise ValueError('quadratic prox needs Q positive semidefinite') from None
        c = np.zeros(Q.shape[0]) if c is None else np.asarray(c, dtype=float)
        return cls('quadratic', {'Q': Q, 'c': c})

    @classmethod
    def separable(cls, funcs):
        """``g(x) = sum_i s_i(x_i)``; a single function is broadcast."""
        if isinstance(funcs, ScalarFunction):
            funcs = (funcs,)
        return cls('separable_scalar', {'funcs': tuple(funcs)})

    @classmethod
    def numeric(cls, smooth, tol=None, max_iter=10_000):
        return cls('numeric', {'smooth': smooth, 'tol': tol, 'max_iter': max_iter})


@dataclass
class ProxResult:
    y: np.ndarray
    residual: float
    inner_iterations: int = 0


def _funcs_for(spec, n):
    funcs = spec.params['funcs']
    if len(funcs) == 1:
        return funcs * n
    if len(funcs) != n:
        raise ValueError('separable table has {} entries for dimension {}'.format(len(funcs), n))
    return funcs


def prox_value(spec, x):
    """Value of the convex function described by ``spec`` (``inf`` off-domain)."""
    x = np.asarray(x, dtype=float)
    kind, p = spec.kind, spec.params
    if kind == 'zero':
        return 0.0
    if kind == 'l1':
        return p['weight'] * float(np.abs(x).sum())
    if kind == 'l2_squared':
        return p['weight'] * float(x @ x)
    if kind == 'box_indicator':
        inside = np.all(x >= p['lo']) and np.all(x <= p['hi'])
        return 0.0 if inside else math.inf
    if kind == 'ball_indicator':
        return 0.0 if np.linalg.norm(x) <= p['radius'] * (1 + 1e-12) else math.inf
    if kind == 'quadratic':
        return 0.5 * float(x @ p['Q'] @ x) + float(p['c'] @ x)
    if kind == 'separable_scalar':
        return float(sum(f.value(xi) for f, xi in zip(_funcs_for(spec, x.size), x)))
    return float(p['smooth'].value(x))


def prox_subgradient(spec, x):
    """Deterministic subgradient selection (zero at kinks and in the interior)."""
    x = np.asarray(x, dtype=float)
    kind, p = spec.kind, spec.params
    if kind == 'zero':
        return np.zeros_like(x)
    if kind == 'l1':
        return p['weight'] * np.sign(x)
    if kind == 'l2_squared':
        return 2.0 * p['weight'] * x
    if kind in ('box_indicator', 'ball_indicator'):
        if prox_value(spec, x) == math.inf:
            raise CapabilityError('indicator has empty subdifferential outside its set')
        return np.zeros_like(x)
    if kind == 'quadratic':
        return p['Q'] @ x + p['c']
    if kind == 'separable_scalar':
        return np.array([f.deriv(xi) for f, xi in zip(_funcs_for(spec, x.size), x)])
    return p['smooth'].gradient(x)


def _newton_scalar(func, t, v, tol=1e-15, max_iter=200):
    """Root of ``s'(y) + (y - v)/t`` bracketed by ``[min(z, v), max(z, v)]``."""
    z = func.argmin
    lo, hi = min(z, v), max(z, v)
    if hi - lo == 0.0:
        return v, 0
    F = lambda u: func.deriv(u) + (u - v) / t
    y = v
    for it in range(1, max_iter + 1):
        fy = F(y)
        if fy == 0.0:
            return y, it
        if fy > 0:
            hi = y
        else:
            lo = y
        dF = func.second(y) + 1.0 / t
        y_new = y - fy / dF
        if not (lo < y_new < hi):
            y_new = 0.5 * (lo + hi)
        if abs(y_new - y) <= tol * (1.0 + abs(y)) or hi - lo <= tol * (1.0 + abs(y)):
            return y_new, it
        y = y_new
    raise ProxError('scalar Newton prox did not converge in {} iterations'.format(max_iter))


def numeric_prox(oracle, t, v, tol=None, max_iter=10_000):
    """Prox of a smooth convex function without a closed form.

    A :class:`ScalarFunction` oracle is applied coordinatewise with safeguarded
    Newton.  A :class:`SmoothOracle` runs gradient descent with step
    ``t / (1 + t L)``, which needs a declared gradient Lipschitz constant ``L``.
    """
    if t <= 0:
        raise ValueError('prox step t must be positive')
    v = as_vector(v)
    if tol is None:
        tol = 1e-10 * (1.0 + float(np.linalg.norm(v)))
    if isinstance(oracle, ScalarFunction):
        y = np.empty_like(v)
        total = 0
        for i, vi in enumerate(v):
            y[i], it = _newton_scalar(oracle, t, float(vi), max_iter=max_iter)
            total += it
        res = float(np.linalg.norm(oracle.deriv(y) + (y - v) / t))
        return ProxResult(y, res, total)
    L = oracle.lipschitz_grad
    if L is None:
        raise CapabilityError('numeric prox needs a declared gradient Lipschitz constant')
    step = t / (1.0 + t * L)
    y = v.copy()
    for it in range(max_iter + 1):
        grad = oracle.gradient(y) + (y - v) / t
        gnorm = float(np.linalg.norm(grad))
        if gnorm <= tol:
            return ProxResult(y, gnorm, it)
        y = y - step * grad
    raise ProxError('numeric prox exceeded {} inner iterations (|grad|={:.3e})'
                    .format(max_iter, gnorm))


def prox(spec, t, v):
    """``argmin_x g(x) + |x - v|^2 / (2t)`` for the function ``spec`` describes."""
    if not t > 0:
        raise ValueError('prox step t must be positive, got {}'.format(t))
    v = as_vector(v)
    kind, p = spec.kind, spec.params
    iters = 0
    if kind == 'zero':
        y = v.copy()
    elif kind == 'l1':
        y = np.sign(v) * np.maximum(np.abs(v) - t * p['weight'], 0.0)
    elif kind == 'l2_squared':
        y = v / (1.0 + 2.0 * t * p['weight'])
    elif kind == 'box_indicator':
        y = np.clip(v, p['lo'], p['hi'])
    elif kind == 'ball_indicator':
        nv = float(np.linalg.norm(v))
        y = v.copy() if nv <= p['radius'] else v * (p['radius'] / nv)
    elif kind == 'quadratic':
        n = v.size
        y = np.linalg.solve(np.eye(n) + t * p['Q'], v - t * p['c'])
    elif kind == 'separable_scalar':
        y = np.empty_like(v)
        for i, (f, vi) in enumerate(zip(_funcs_for(spec, v.size), v)):
            y[i], it = _newton_scalar(f, t, float(vi))
            iters += it
    else:
        return numeric_prox(p['smooth'], t, v, tol=p['tol'], max_iter=p['max_iter'])
    return ProxResult(y, prox_optimality_residual(spec, t, v, y), iters)


def prox_optimality_residual(spec, t, v, y):
    """``min |s + (y - v)/t|`` over the representable ``s`` in ``dg(y)``."""
    v = np.asarray(v, dtype=float)
    y = np.asarray(y, dtype=float)
    r = (y - v) / t
    kind, p = spec.kind, spec.params
    if kind == 'l1':
        w = p['weight']
        s = np.where(y > 0, w, np.where(y < 0, -w, np.clip(-r, -w, w)))
        return float(np.linalg.norm(s + r))
    if kind == 'box_indicator':
        lo = np.broadcast_to(p['lo'], y.shape)
        hi = np.broadcast_to(p['hi'], y.shape)
        if np.any(y < lo) or np.any(y > hi):
            return math.inf
        # normal cone: s <= 0 at lo, s >= 0 at hi, free when lo == hi
        s_min = np.where(y == lo, -np.inf, 0.0)
        s_max = np.where(y == hi, np.inf, 0.0)
        s = np.clip(-r, s_min, s_max)
        return float(np.linalg.norm(s + r))
    if kind == 'ball_indicator':
        R = p['radius']
        ny = float(np.linalg.norm(y))
        if ny > R * (1 + 1e-12):
            return math.inf
        if ny >= R * (1 - 1e-12) and ny > 0:
            c = max(0.0, -float(r @ y) / ny ** 2)
            return float(np.linalg.norm(c * y + r))
        return float(np.linalg.norm(r))
    if kind == 'numeric':
        return float(np.linalg.norm(p['smooth'].gradient(y) + r))
    return float(np.linalg.norm(prox_subgradient(spec, y) + r))


def convex_oracle_from_spec(spec, lipschitz_grad=None, lipschitz_grad_local=()):
    """Wrap a :class:`ProxSpec` as a :class:`ConvexOracle`.

    Differentiable kinds also get a smooth view carrying the given constants.
    """
    from .core import ConvexOracle

    value = lambda x: prox_value(spec, x)
    grad = lambda x: prox_subgradient(spec, x)
    smooth = None
    if spec.kind in ('zero', 'l2_squared', 'quadratic', 'separable_scalar', 'numeric'):
        if lipschitz_grad is None and spec.kind in ('zero', 'l2_squared', 'quadratic'):
            lipschitz_grad = _closed_form_lipschitz(spec)
        smooth = SmoothOracle(value, grad, lipschitz_grad, tuple(lipschitz_grad_local))
    finite = spec.kind not in ('box_indicator', 'ball_indicator')
    return ConvexOracle(value=value, subgradient=grad, prox=spec, smooth=smooth,
                        finite_valued=finite)


def _closed_form_lipschitz(spec):
    if spec.kind == 'zero':
        return 0.0
    if spec.kind == 'l2_squared':
        return 2.0 * spec.params['weight']
    return float(np.linalg.eigvalsh(spec.params['Q']).max(initial=0.0))


def _grad_h(problem, x):
    return problem.h.select_subgradient(x)


def subproblem_solve(problem, x, lambda_k):
    """Minimize ``g(u) - <grad h(x) - grad phi(x), u - x> + lambda_k/2 |u - x|^2``.

    Completing the square turns this into a prox of ``g`` with step
    ``1/lambda_k`` centered at ``x + (grad h(x) - grad phi(x)) / lambda_k``.
    """
    if not lambda_k > 0:
        raise ValueError('lambda_k must be positive')
    if problem.g.prox is None:
        raise CapabilityError('g has no prox capability')
    x = as_vector(x, problem.dim)
    v = x + (_grad_h(problem, x) - problem.phi.gradient(x)) / lambda_k
    return prox(problem.g.prox, 1.0 / lambda_k, v)


def subproblem_objective(problem, x, lambda_k, u):
    """Objective of :func:`subproblem_solve` evaluated at ``u``."""
    x = as_vector(x, problem.dim)
    u = np.asarray(u, dtype=float)
    lin = _grad_h(problem, x) - problem.phi.gradient(x)
    d = u - x
    return float(problem.g.value(u)) - float(lin @ d) + 0.5 * lambda_k * float(d @ d)
