"""Built-in DC test problems with exact decompositions and known constants."""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .core import ConvexOracle, DcProblem, SmoothOracle, zero_convex, zero_smooth
from .prox import ProxSpec, convex_oracle_from_spec, quartic_scalar

__all__ = ['ProblemFactory', 'PROBLEMS', 'build_problem', 'power_iteration',
           'make_quartic_well', 'make_degenerate_quartic', 'make_l1_minus_l2',
           'random_l1_minus_l2', 'make_boxed_indefinite_quadratic', 'box_qp_minimum']


def power_iteration(M, tol=1e-10, max_iter=100_000):
    """Largest eigenvalue of a symmetric PSD matrix by power iteration."""
    M = np.asarray(M, dtype=float)
    n = M.shape[0]
    v = np.ones(n) + np.arange(n) / (10.0 * n)
    v /= np.linalg.norm(v)
    lam = 0.0
    for _ in range(max_iter):
        w = M @ v
        nw = np.linalg.norm(w)
        if nw == 0.0:
            return 0.0
        v = w / nw
        lam_new = float(v @ M @ v)
        if abs(lam_new - lam) <= tol * max(1.0, abs(lam_new)):
            return lam_new
        lam = lam_new
    return lam


def _quartic_g(radius):
    return convex_oracle_from_spec(ProxSpec.separable(quartic_scalar()),
                                   lipschitz_grad_local=((radius, 12.0 * radius ** 2),))


def make_quartic_well(n=1, box_radius=2.0):
    """``f(x) = sum x_i^4 - x_i^2`` with ``phi = 0, g = sum x^4, h = |x|^2``.

    Minimizers are the sign patterns of ``+-1/sqrt(2)``, ``f* = -n/4``; each
    minimum is nondegenerate so the Lojasiewicz exponent is 1/2.
    """
    if n < 1:
        raise ValueError('n must be >= 1')
    h = convex_oracle_from_spec(ProxSpec.l2_squared(1.0))
    mins = None
    if n <= 10:
        s = 1.0 / math.sqrt(2.0)
        mins = [np.array(p) * s for p in itertools.product((1.0, -1.0), repeat=n)]
    return DcProblem(
        phi=zero_smooth(), g=_quartic_g(box_radius), h=h, dim=n,
        label='quartic_well(n={})'.format(n), known_fstar=-n / 4.0,
        known_minimizers=mins, known_kl_exponent=0.5,
        # |f - f*|^(1/2) = |u|, |grad f| >= 4 min|x_i| |u| with u_i = x_i^2 - 1/2
        kl_constant=0.5, kl_radius=0.2,
        box_radius=box_radius, L2=12.0 * box_radius ** 2,
        default_x0=np.ones(n),
        notes={'fstar': 'separable: min of u^4 - u^2 is -1/4 at u^2 = 1/2',
               'L2': '|d^2/du^2 u^4| = 12u^2 <= 12R^2 on the box of radius R'})


def make_degenerate_quartic(n=1, box_radius=2.0):
    """``f(x) = sum x_i^4`` (``h = 0``); minimizer 0 with exponent 3/4."""
    if n < 1:
        raise ValueError('n must be >= 1')
    return DcProblem(
        phi=zero_smooth(), g=_quartic_g(box_radius), h=zero_convex(), dim=n,
        label='degenerate_quartic(n={})'.format(n), known_fstar=0.0,
        known_minimizers=[np.zeros(n)], known_kl_exponent=0.75,
        # |x|_4^3 <= n^(1/4) |x^3|_2 by the power-mean inequality
        kl_constant=n ** 0.25 / 4.0, kl_radius=1.0,
        box_radius=box_radius, L2=12.0 * box_radius ** 2,
        default_x0=np.ones(n),
        notes={'kl': '|f|^(3/4) = |x|^3 = |grad f|/4 in one dimension'})


def make_l1_minus_l2(A, b, rho, x0=None, label=None):
    """``phi = |Ax - b|^2/2``, ``g = rho |x|_1``, ``h = rho |x|_2``."""
    A = np.atleast_2d(np.asarray(A, dtype=float))
    b = np.asarray(b, dtype=float).reshape(-1)
    if not rho > 0:
        raise ValueError('rho must be positive')
    if not np.any(A):
        raise ValueError('A must be nonzero')
    if b.shape[0] != A.shape[0]:
        raise ValueError('b has length {} but A has {} rows'.format(b.shape[0], A.shape[0]))
    L1 = power_iteration(A.T @ A)
    phi = SmoothOracle(value=lambda x: 0.5 * float(np.sum((A @ x - b) ** 2)),
                       gradient=lambda x: A.T @ (A @ x - b), lipschitz_grad=L1)
    g = convex_oracle_from_spec(ProxSpec.l1(rho))

    def h_sub(x):
        nx = np.linalg.norm(x)
        return rho * x / nx if nx > 0 else np.zeros_like(x)

    h = ConvexOracle(value=lambda x: rho * float(np.linalg.norm(x)), subgradient=h_sub)
    n = A.shape[1]
    fstar = None
    if n == 1:
        # l1 and l2 coincide in one dimension: f reduces to the least-squares term
        a = A[:, 0]
        fstar = 0.5 * float(b @ b - (a @ b) ** 2 / (a @ a))
    return DcProblem(phi=phi, g=g, h=h, dim=n,
                     label=label or 'l1_minus_l2({}x{}, rho={})'.format(A.shape[0], n, rho),
                     known_fstar=fstar, default_x0=None if x0 is None else np.asarray(x0, float),
                     notes={'A': A, 'b': b, 'rho': rho})


def random_l1_minus_l2(n=5, m=None, rho=0.1, seed=0, spectral_norm=1.0):
    """Seeded Gaussian instance with ``A`` rescaled to the given spectral norm."""
    m = n if m is None else m
    rng = np.random.default_rng(seed)
    A = rng.standard_normal((m, n))
    A *= spectral_norm / np.linalg.norm(A, 2)
    b = rng.standard_normal(m)
    x0 = rng.standard_normal(n)
    return make_l1_minus_l2(A, b, rho, x0=x0,
                            label='l1_minus_l2({}x{}, rho={}, seed={})'.format(m, n, rho, seed))


def box_qp_minimum(Q, c, lo, hi):
    """Global minimum of ``x'Qx/2 + c'x`` over a box by face enumeration.

    Every minimizer is stationary on the relative interior of some face; faces
    whose restricted system is inconsistent or whose stationary point leaves the
    box are covered by lower-dimensional faces.  Cost is ``3**n`` solves.
    """
    Q, c = np.asarray(Q, float), np.asarray(c, float)
    lo, hi = np.asarray(lo, float), np.asarray(hi, float)
    n = Q.shape[0]
    best, argbest = math.inf, []
    for pattern in itertools.product((0, 1, 2), repeat=n):
        x = np.where(np.array(pattern) == 0, lo, hi).astype(float)
        free = np.array([p == 2 for p in pattern])
        if free.any():
            Qff = Q[np.ix_(free, free)]
            rhs = -(c[free] + Q[np.ix_(free, ~free)] @ x[~free])
            sol, *_ = np.linalg.lstsq(Qff, rhs, rcond=None)
            if np.linalg.norm(Qff @ sol - rhs) > 1e-9 * (1 + np.linalg.norm(rhs)):
                continue
            if np.any(sol < lo[free] - 1e-12) or np.any(sol > hi[free] + 1e-12):
                continue
            x[free] = np.clip(sol, lo[free], hi[free])
        val = 0.5 * float(x @ Q @ x) + float(c @ x)
        if val < best - 1e-12:
            best, argbest = val, [x]
        elif abs(val - best) <= 1e-12:
            if not any(np.allclose(x, a) for a in argbest):
                argbest.append(x)
    return best, argbest


def make_boxed_indefinite_quadratic(Q, c, lo, hi, x0=None):
    """``phi = x'Qx/2 + c'x`` (``Q`` symmetric, maybe indefinite), ``g`` = box indicator."""
    Q = np.atleast_2d(np.asarray(Q, dtype=float))
    n = Q.shape[0]
    c = np.zeros(n) if c is None else np.asarray(c, dtype=float).reshape(-1)
    lo = np.broadcast_to(np.asarray(lo, dtype=float), (n,)).copy()
    hi = np.broadcast_to(np.asarray(hi, dtype=float), (n,)).copy()
    if Q.shape != (n, n) or not np.allclose(Q, Q.T, atol=1e-12):
        raise ValueError('Q must be symmetric')
    if np.any(lo > hi):
        raise ValueError('box needs lo <= hi')
    L1 = float(np.abs(np.linalg.eigvalsh(Q)).max())
    phi = SmoothOracle(value=lambda x: 0.5 * float(x @ Q @ x) + float(c @ x),
                       gradient=lambda x: Q @ x + c, lipschitz_grad=L1)
    g = convex_oracle_from_spec(ProxSpec.box(lo, hi))
    fstar, mins = (None, None)
    if n <= 8 and np.all(np.isfinite(lo)) and np.all(np.isfinite(hi)):
        fstar, mins = box_qp_minimum(Q, c, lo, hi)
    return DcProblem(phi=phi, g=g, h=zero_convex(), dim=n,
                     label='boxed_indefinite_quadratic(n={})'.format(n),
                     known_fstar=fstar, known_minimizers=mins,
                     default_x0=None if x0 is None else np.asarray(x0, float),
                     notes={'Q': Q, 'c': c, 'lo': lo, 'hi': hi})


@dataclass(frozen=True)
class ProblemFactory:
    name: str
    builder: Callable
    compat: frozenset
    references: dict = field(default_factory=dict)

    def build(self, parameters=None, seed=0):
        return self.builder(dict(parameters or {}), seed)


def _build_l1l2(p, seed):
    if 'A' in p:
        return make_l1_minus_l2(p['A'], p['b'], p.get('rho', 0.1), x0=p.get('x0'))
    return random_l1_minus_l2(n=p.get('n', 5), m=p.get('m'), rho=p.get('rho', 0.1),
                              seed=p.get('seed', seed),
                              spectral_norm=p.get('spectral_norm', 1.0))


def _build_boxed(p, seed):
    prob = make_boxed_indefinite_quadratic(p['Q'], p.get('c'), p['lo'], p['hi'],
                                           x0=p.get('x0'))
    if prob.default_x0 is None:
        rng = np.random.default_rng(seed)
        lo, hi = prob.notes['lo'], prob.notes['hi']
        prob = _with_x0(prob, rng.uniform(lo, hi))
    return prob


def _with_x0(problem, x0):
    import dataclasses
    return dataclasses.replace(problem, default_x0=np.asarray(x0, dtype=float))


PROBLEMS = {
    'quartic_well': ProblemFactory(
        'quartic_well',
        lambda p, seed: make_quartic_well(p.get('n', 1), p.get('box_radius', 2.0)),
        frozenset({'bppa', 'ppa', 'inertial'}),
        {'fstar': '-n/4', 'minimizers': '+-1/sqrt(2) per coordinate', 'kappa': 0.5}),
    'degenerate_quartic': ProblemFactory(
        'degenerate_quartic',
        lambda p, seed: make_degenerate_quartic(p.get('n', 1), p.get('box_radius', 2.0)),
        frozenset({'bppa', 'ppa', 'inertial'}),
        {'fstar': 0.0, 'minimizers': 'origin', 'kappa': 0.75}),
    'l1_minus_l2': ProblemFactory(
        'l1_minus_l2', _build_l1l2, frozenset({'inertial'}),
        {'L1': 'largest eigenvalue of A^T A'}),
    'boxed_indefinite_quadratic': ProblemFactory(
        'boxed_indefinite_quadratic', _build_boxed, frozenset({'ppa', 'inertial'}),
        {'fstar': 'face enumeration', 'L1': 'spectral norm of Q'}),
}


def build_problem(name, parameters=None, seed=0):
    try:
        factory = PROBLEMS[name]
    except KeyError:
        raise ValueError('unknown problem {!r}; choose from {}'
                         .format(name, sorted(PROBLEMS))) from None
    return factory.build(parameters, seed)
