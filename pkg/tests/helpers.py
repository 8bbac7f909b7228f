import numpy as np

from dcprox.core import DcProblem, SmoothOracle, zero_convex


def grid_argmin(objective, lo=-10.0, hi=10.0, step=1e-4):
    """Brute-force 1-D minimizer over a uniform grid (vectorized objective)."""
    xs = np.arange(lo, hi + step / 2, step)
    return xs[np.argmin(objective(xs))]


def bisect(fn, lo, hi, tol=1e-14):
    """Root of a continuous scalar function with a sign change on [lo, hi]."""
    flo = fn(lo)
    assert flo * fn(hi) <= 0
    while hi - lo > tol:
        mid = 0.5 * (lo + hi)
        fm = fn(mid)
        if (fm < 0) == (flo < 0):
            lo, flo = mid, fm
        else:
            hi = mid
    return 0.5 * (lo + hi)


def quadratic_phi_problem(scale=1.0, declared=None, dim=1):
    """``f = scale/2 |x|^2`` carried entirely by the smooth term."""
    L = scale if declared is None else declared
    phi = SmoothOracle(value=lambda x: 0.5 * scale * float(x @ x),
                       gradient=lambda x: scale * x, lipschitz_grad=L)
    return DcProblem(phi=phi, g=zero_convex(), h=zero_convex(), dim=dim,
                     label='half_square', known_fstar=0.0)
