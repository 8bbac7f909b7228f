import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from dcprox.core import (CapabilityError, DimensionError, InvalidProblemState, IterateRecord,
                         SmoothOracle, Trace, as_vector, dc_gradient, dc_value,
                         descent_lemma_check, finite_diff_gradient)
from dcprox.problems import (make_boxed_indefinite_quadratic, make_degenerate_quartic,
                             make_quartic_well, random_l1_minus_l2)


def _square():
    return SmoothOracle(value=lambda x: float(x @ x), gradient=lambda x: 2 * x)


def _half_square():
    return SmoothOracle(value=lambda x: 0.5 * float(x @ x), gradient=lambda x: x,
                        lipschitz_grad=1.0)


def test_dc_value_quartic_well_points():
    p = make_quartic_well(1)
    assert dc_value(p, [0.0]) == 0.0
    assert dc_value(p, [1.0]) == 0.0
    s = 2 ** -0.5
    assert dc_value(p, [s]) == pytest.approx(s ** 4 - s ** 2, abs=1e-15)
    assert dc_value(p, [s]) == pytest.approx(-0.25, abs=1e-15)


def test_dc_gradient_quartic_well_points():
    p = make_quartic_well(1)
    assert dc_gradient(p, [1.0])[0] == pytest.approx(4 * 1 - 2 * 1)
    assert abs(dc_gradient(p, [2 ** -0.5])[0]) < 1e-15


def test_dc_gradient_matches_finite_differences_at_random_points(rng):
    for p in (make_quartic_well(3), make_degenerate_quartic(2)):
        for _ in range(10):
            x = rng.uniform(-1.5, 1.5, p.dim)
            fd = finite_diff_gradient(lambda u: dc_value(p, u), x)
            an = dc_gradient(p, x)
            assert np.linalg.norm(an - fd) <= 1e-5 * max(1.0, np.linalg.norm(an))


def test_gradient_consistency_on_builtin_problems(rng):
    # phi's gradient for the nonsmooth instances, full gradient for the smooth ones
    boxed = make_boxed_indefinite_quadratic(np.array([[1.0, 2.0], [2.0, -3.0]]),
                                            [0.5, -1.0], -1.0, 1.0)
    l1l2 = random_l1_minus_l2(n=4, seed=3)
    for _ in range(100):
        for p in (make_quartic_well(2), make_degenerate_quartic(3)):
            x = rng.uniform(-2, 2, p.dim)
            an = dc_gradient(p, x)
            fd = finite_diff_gradient(lambda u: dc_value(p, u), x)
            assert np.linalg.norm(an - fd) <= 1e-5 * max(1.0, np.linalg.norm(an))
        for p in (boxed, l1l2):
            x = rng.uniform(-2, 2, p.dim)
            an = p.phi.gradient(x)
            fd = finite_diff_gradient(p.phi, x)
            assert np.linalg.norm(an - fd) <= 1e-5 * max(1.0, np.linalg.norm(an))


def test_dc_gradient_needs_smooth_views():
    p = random_l1_minus_l2(n=3)
    with pytest.raises(CapabilityError):
        dc_gradient(p, np.ones(3))


def test_finite_diff_gradient_examples():
    sq = _square()
    assert finite_diff_gradient(sq, [3.0], step=1e-5)[0] == pytest.approx(6.0, abs=1e-8)
    quart = lambda x: float(np.sum(x ** 4))
    assert finite_diff_gradient(quart, [1.0], step=1e-4)[0] == pytest.approx(4.0, abs=1e-6)
    const = lambda x: 7.0
    np.testing.assert_array_equal(finite_diff_gradient(const, [1.0, -2.0, 3.0]), np.zeros(3))


def test_finite_diff_gradient_rejects_bad_step():
    with pytest.raises(ValueError):
        finite_diff_gradient(_square(), [1.0], step=0.0)


def test_descent_lemma_examples():
    f = _half_square()
    assert descent_lemma_check(f, 1.0, [0.0], [2.0])
    assert not descent_lemma_check(f, 0.5, [0.0], [2.0])
    assert descent_lemma_check(f, 0.0, [1.3], [1.3])


def _smooth_oracles():
    """Every built-in smooth oracle with the radius its constant is valid on."""
    R = 2.0
    qw = make_quartic_well(2, box_radius=R)
    boxed = make_boxed_indefinite_quadratic(np.diag([2.0, -1.0]), None, -1.0, 1.0)
    l1l2 = random_l1_minus_l2(n=3, seed=1)
    return [(qw.g.smooth, qw.g.smooth.lipschitz_on(R), R, 2),
            (qw.h.smooth, qw.h.smooth.lipschitz_grad, R, 2),
            (boxed.phi, boxed.L1, R, 2),
            (l1l2.phi, l1l2.L1, R, 3)]


def test_descent_lemma_holds_for_builtin_smooth_oracles(rng):
    for oracle, L, R, n in _smooth_oracles():
        assert L is not None
        for _ in range(1000):
            # sample inside the ball of radius R, where the declared constant applies
            x, y = (R * rng.uniform(-1, 1, n) / math.sqrt(n) for _ in range(2))
            assert descent_lemma_check(oracle, L, x, y)


def _convex_oracles():
    qw = make_quartic_well(2)
    boxed = make_boxed_indefinite_quadratic(np.eye(2), None, -1.0, 1.0)
    l1l2 = random_l1_minus_l2(n=2, seed=2)
    return [qw.g, qw.h, boxed.g, boxed.h, l1l2.g, l1l2.h]


def test_midpoint_convexity_of_builtin_convex_oracles(rng):
    for c in _convex_oracles():
        for _ in range(1000):
            x, y = rng.uniform(-1.5, 1.5, 2), rng.uniform(-1.5, 1.5, 2)
            fm = c.value(0.5 * (x + y))
            bound = 0.5 * (c.value(x) + c.value(y))
            assert fm <= bound + 1e-12 * (1 + abs(bound))


def test_dc_value_short_circuits_infinite_g():
    p = make_boxed_indefinite_quadratic(np.eye(1), None, -1.0, 1.0)
    assert dc_value(p, [2.0]) == math.inf
    assert dc_value(p, [0.5]) == pytest.approx(0.125)


def test_as_vector_rejects_wrong_dimension_and_nonfinite():
    with pytest.raises(DimensionError):
        as_vector([1.0, 2.0], 3)
    with pytest.raises(InvalidProblemState):
        as_vector([1.0, np.nan])
    with pytest.raises(DimensionError):
        dc_value(make_quartic_well(2), [1.0])


def test_compatibility_flags_of_builtin_problems():
    assert make_quartic_well(1).compatibility() == {'bppa', 'ppa', 'inertial'}
    l1l2 = random_l1_minus_l2(n=3)
    assert not l1l2.bppa_compatible and l1l2.inertial_compatible
    boxed = make_boxed_indefinite_quadratic(np.eye(2), None, -1.0, 1.0)
    # the indicator is not finite-valued, so the line search cannot run
    assert not boxed.bppa_compatible
    assert boxed.ppa_compatible and boxed.inertial_compatible


def test_local_lipschitz_lookup():
    o = SmoothOracle(value=lambda x: 0.0, gradient=lambda x: x,
                     lipschitz_grad_local=((1.0, 12.0), (2.0, 48.0)))
    assert o.lipschitz_on(0.5) == 12.0
    assert o.lipschitz_on(1.5) == 48.0
    assert o.lipschitz_on(3.0) is None


def test_trace_columns():
    t = Trace('p', 'bppa', {})
    t.records += [IterateRecord(k=0, f_x=1.0, d_norm=0.5), IterateRecord(k=1, f_x=0.5)]
    np.testing.assert_array_equal(t.f_values, [1.0, 0.5])
    col = t.column('d_norm')
    assert col[0] == 0.5 and math.isnan(col[1])
    with pytest.raises(ValueError):
        Trace('p', 'newton', {})


@given(st.lists(st.floats(-3, 3), min_size=2, max_size=2))
def test_quartic_well_is_difference_of_its_parts(x):
    p = make_quartic_well(2)
    x = np.array(x)
    assert dc_value(p, x) == pytest.approx(float(np.sum(x ** 4 - x ** 2)), abs=1e-12)
