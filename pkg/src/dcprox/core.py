"""Problem model for ``min f(x) = phi(x) + g(x) - h(x)``.

``phi`` is smooth (possibly nonconvex), ``g`` and ``h`` are convex and may be
extended-valued.  Oracles are plain callables bundled in small dataclasses so a
problem can be shared read-only between concurrent solver runs.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Any, Callable, Optional, Sequence

import numpy as np

__all__ = [
    'DcError', 'DimensionError', 'CapabilityError', 'InvalidProblemState',
    'HypothesisViolation',
    'SmoothOracle', 'ConvexOracle', 'DcProblem', 'IterateRecord', 'Trace',
    'as_vector', 'dc_value', 'dc_gradient', 'finite_diff_gradient',
    'descent_lemma_check', 'zero_smooth', 'zero_convex',
]

SOLVERS = ('bppa', 'ppa', 'inertial')
TERMINATIONS = ('converged', 'max_iter', 'armijo_fail', 'diverged')


class DcError(Exception):
    """Base class for all errors raised by this package."""


class DimensionError(DcError, ValueError):
    pass


class CapabilityError(DcError):
    """An oracle lacks the capability (gradient, prox, ...) an operation needs."""


class InvalidProblemState(DcError):
    pass


class HypothesisViolation(DcError):
    """A per-iteration inequality guaranteed under the solver hypotheses failed.

    ``check`` names the inequality, ``k`` the iteration and ``excess`` the
    amount by which the left-hand side exceeded the right-hand side.
    """

    def __init__(self, message, check=None, k=None, excess=None):
        super().__init__(message)
        self.check = check
        self.k = k
        self.excess = excess


def as_vector(x, dim=None):
    """Return ``x`` as a 1-D float array, checking finiteness and dimension."""
    v = np.atleast_1d(np.asarray(x, dtype=float))
    if v.ndim != 1:
        raise DimensionError('expected a 1-D vector, got shape {}'.format(v.shape))
    if dim is not None and v.shape[0] != dim:
        raise DimensionError('expected dimension {}, got {}'.format(dim, v.shape[0]))
    if not np.all(np.isfinite(v)):
        raise InvalidProblemState('vector has non-finite entries')
    return v


@dataclass(frozen=True)
class SmoothOracle:
    """Value and gradient of a continuously differentiable function.

    ``lipschitz_grad`` is a global constant for the gradient; polynomial terms
    that have none declare ``lipschitz_grad_local`` as ``(radius, constant)``
    pairs valid on the ball of that radius around the origin.
    """

    value: Callable[[np.ndarray], float]
    gradient: Callable[[np.ndarray], np.ndarray]
    lipschitz_grad: Optional[float] = None
    lipschitz_grad_local: tuple = ()

    def lipschitz_on(self, radius):
        """Smallest declared constant valid on the ball of ``radius``, or None."""
        if self.lipschitz_grad is not None:
            return self.lipschitz_grad
        valid = [c for r, c in self.lipschitz_grad_local if r >= radius]
        return min(valid) if valid else None


@dataclass(frozen=True)
class ConvexOracle:
    """A proper lsc convex function with optional capabilities.

    ``subgradient`` returns one deterministic element of the subdifferential.
    ``prox`` is a :class:`dcprox.prox.ProxSpec`; ``smooth`` is set when the
    function is differentiable everywhere.
    """

    value: Callable[[np.ndarray], float]
    subgradient: Optional[Callable[[np.ndarray], np.ndarray]] = None
    prox: Any = None
    smooth: Optional[SmoothOracle] = None
    finite_valued: bool = True

    def select_subgradient(self, x):
        if self.smooth is not None:
            return self.smooth.gradient(x)
        if self.subgradient is not None:
            return self.subgradient(x)
        raise CapabilityError('convex oracle exposes neither gradient nor subgradient')


def zero_smooth():
    return SmoothOracle(value=lambda x: 0.0,
                        gradient=lambda x: np.zeros_like(x),
                        lipschitz_grad=0.0)


def zero_convex():
    from .prox import ProxSpec
    sm = zero_smooth()
    return ConvexOracle(value=sm.value, subgradient=sm.gradient,
                        prox=ProxSpec.zero(), smooth=sm)


@dataclass(frozen=True)
class DcProblem:
    """Oracle bundle for ``f = phi + g - h`` plus analytic metadata.

    ``box_radius`` bounds the region on which local constants (``L2``, local
    Lipschitz constants of polynomial terms) are declared.  ``kl_constant`` and
    ``kl_radius`` are the Lojasiewicz ``M`` and ball radius matching
    ``known_kl_exponent``.
    """

    phi: SmoothOracle
    g: ConvexOracle
    h: ConvexOracle
    dim: int
    label: str = 'problem'
    known_fstar: Optional[float] = None
    known_minimizers: Optional[Sequence[np.ndarray]] = None
    known_kl_exponent: Optional[float] = None
    kl_constant: Optional[float] = None
    kl_radius: Optional[float] = None
    box_radius: Optional[float] = None
    L2: Optional[float] = None
    default_x0: Optional[np.ndarray] = None
    notes: dict = field(default_factory=dict)

    @property
    def L1(self):
        if self.phi.lipschitz_grad is None:
            return self.phi.lipschitz_on(self.box_radius or math.inf)
        return self.phi.lipschitz_grad

    @property
    def bppa_compatible(self):
        g, h = self.g, self.h
        return (g.smooth is not None and h.smooth is not None and g.prox is not None
                and g.finite_valued and self.L1 is not None)

    @property
    def ppa_compatible(self):
        h = self.h
        return (self.g.prox is not None and self.L1 is not None
                and (h.smooth is not None or h.subgradient is not None))

    @property
    def inertial_compatible(self):
        h = self.h
        return self.g.prox is not None and (h.subgradient is not None or h.smooth is not None)

    def compatibility(self):
        """Set of solver names this problem's capabilities admit."""
        flags = {'bppa': self.bppa_compatible, 'ppa': self.ppa_compatible,
                 'inertial': self.inertial_compatible}
        return {k for k, v in flags.items() if v}

    def value(self, x):
        return dc_value(self, x)

    def gradient(self, x):
        return dc_gradient(self, x)


def dc_value(problem, x):
    """``phi(x) + g(x) - h(x)``; ``+inf`` from ``g`` propagates."""
    x = as_vector(x, problem.dim)
    gv = float(problem.g.value(x))
    if gv == math.inf:
        return math.inf
    pv = float(problem.phi.value(x))
    hv = float(problem.h.value(x))
    if not (math.isfinite(pv) and math.isfinite(hv) and not math.isnan(gv)):
        raise InvalidProblemState(
            'non-finite oracle value at x (phi={}, g={}, h={})'.format(pv, gv, hv))
    return pv + gv - hv


def dc_gradient(problem, x):
    x = as_vector(x, problem.dim)
    if problem.g.smooth is None or problem.h.smooth is None:
        raise CapabilityError('dc_gradient needs smooth views of both g and h')
    return (problem.phi.gradient(x) + problem.g.smooth.gradient(x)
            - problem.h.smooth.gradient(x))


def finite_diff_gradient(value, x, step=None):
    """Central-difference gradient of ``value`` at ``x``.

    ``value`` is either a callable or an object with a ``value`` attribute
    (e.g. :class:`SmoothOracle`).  The default step is ``1e-5 * (1 + |x|_inf)``.
    """
    fn = getattr(value, 'value', value)
    x = as_vector(x)
    if step is None:
        step = 1e-5 * (1.0 + np.max(np.abs(x)))
    if step <= 0:
        raise ValueError('step must be positive')
    grad = np.empty_like(x)
    for i in range(x.shape[0]):
        e = np.zeros_like(x)
        e[i] = step
        fp, fm = float(fn(x + e)), float(fn(x - e))
        if not (math.isfinite(fp) and math.isfinite(fm)):
            raise InvalidProblemState('non-finite value at probe point {}'.format(i))
        grad[i] = (fp - fm) / (2.0 * step)
    return grad


def descent_lemma_check(oracle, L, x, y):
    """True iff ``g(y) <= g(x) + <grad g(x), y - x> + L/2 |y - x|^2`` (with slack)."""
    x, y = as_vector(x), as_vector(y)
    gx = float(oracle.value(x))
    d = y - x
    rhs = gx + float(np.dot(oracle.gradient(x), d)) + 0.5 * L * float(np.dot(d, d))
    return float(oracle.value(y)) <= rhs + 1e-12 * (1.0 + abs(gx))


@dataclass
class IterateRecord:
    """One row of a solver trace.

    For proximal-point runs ``d_norm`` is ``|y^k - x^k|``; for inertial runs it
    is the joint step ``|z^{k+1} - z^k|``.  Fields a solver does not produce
    stay ``None``.
    """

    k: int
    f_x: float
    d_norm: Optional[float] = None
    x: Optional[np.ndarray] = None
    eta_k: Optional[float] = None
    m_k: Optional[int] = None
    lambda_k: Optional[float] = None
    f_y: Optional[float] = None
    grad_residual: Optional[float] = None
    grad_bound: Optional[float] = None
    sum_d_sq: Optional[float] = None
    energies: Optional[tuple] = None
    lyapunov: Optional[float] = None
    coupling_norm: Optional[float] = None
    dx_norm: Optional[float] = None
    dy_norm: Optional[float] = None
    y: Optional[np.ndarray] = None
    wall_time_s: Optional[float] = None

    @property
    def energy_lo(self):
        return None if not self.energies else self.energies[0]

    @property
    def energy_hi(self):
        return None if not self.energies else self.energies[-1]


@dataclass
class Trace:
    problem_label: str
    solver: str
    config_snapshot: dict
    records: list = field(default_factory=list)
    termination: Optional[str] = None
    message: str = ''

    def __post_init__(self):
        if self.solver not in SOLVERS:
            raise ValueError('unknown solver {!r}'.format(self.solver))

    def __len__(self):
        return len(self.records)

    @property
    def f_values(self):
        return np.array([r.f_x for r in self.records])

    @property
    def x_final(self):
        return self.records[-1].x if self.records else None

    def column(self, name):
        """Array of a record attribute, ``nan`` where absent."""
        vals = [getattr(r, name) for r in self.records]
        return np.array([np.nan if v is None else v for v in vals], dtype=float)
