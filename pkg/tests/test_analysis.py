import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from dcprox.analysis import (TooFewPoints, admissible_sequence, classify_rate,
                             estimate_kl_exponent, lojasiewicz_check, rate_bound_check,
                             rate_predict, resolve_fstar)
from dcprox.problems import make_degenerate_quartic, make_quartic_well

from .helpers import quadratic_phi_problem


def test_rate_bound_geometric_equality_case():
    nu = 4.0
    t = 3.0 * (1 - 1 / nu) ** np.arange(30)
    holds, first = rate_bound_check(t, 1.0, nu)
    assert holds.all() and first is None


def test_rate_bound_linear_decrease_until_zero():
    nu = 2.0
    t = np.maximum(1.0 - np.arange(6) / nu, 0.0)
    holds, first = rate_bound_check(t, 0.0, nu)
    assert holds[:2].all()
    # 0**0 == 1 cannot be bounded by a zero decrease
    assert first == 2 and not holds[2:].any()


def test_rate_bound_harmonic_fails_everywhere():
    nu = 3.0
    k = np.arange(1, 40, dtype=float)
    holds, first = rate_bound_check(nu / k, 2.0, nu)
    assert not holds.any() and first == 0


def test_rate_bound_errors():
    with pytest.raises(ValueError):
        rate_bound_check([1.0, 0.5], 1.0, 0.0)
    with pytest.raises(ValueError):
        rate_bound_check([1.0, -0.5], 1.0, 2.0)


def test_rate_predict_examples():
    assert rate_predict(1.0, 2.0, 1.0, 10) == 0.5 ** 10
    assert rate_predict(1.0, 2.0, 1.0, 10) == pytest.approx(9.77e-4, abs=1e-6)
    assert rate_predict(0.0, 2.0, 1.0, 2) == 0.0
    assert rate_predict(0.0, 2.0, 1.0, 1) == 0.5
    for k in range(20):
        assert rate_predict(2.0, 1.0, 1.0, k) == pytest.approx(1.0 / (1 + k), rel=1e-14)


def test_rate_predict_errors():
    with pytest.raises(ValueError, match='invalid parameters'):
        rate_predict(1.0, 1.0, 1.0, 3)
    with pytest.raises(ValueError):
        rate_predict(0.5, 0.5, 0.5, 3)
    with pytest.raises(ValueError):
        rate_predict(-1.0, 2.0, 1.0, 3)
    with pytest.raises(ValueError):
        rate_predict(1.0, 0.0, 1.0, 3)


@pytest.mark.parametrize('mu,nu,t0', [(0.0, 5.0, 2.0), (0.5, 3.0, 0.8), (1.0, 3.0, 2.0),
                                       (2.0, 4.0, 1.5)])
def test_prediction_dominates_admissible_sequences(mu, nu, t0):
    rng = np.random.default_rng(7)
    for _ in range(100):
        t = admissible_sequence(mu, nu, t0, 60, rng)
        holds, _ = rate_bound_check(t, mu, nu)
        # only the convention 0**0 == 1 can break the bound, at an exact zero
        assert holds[t[:-1] > 0].all()
        for k, tk in enumerate(t):
            assert tk <= rate_predict(mu, nu, t0, k) * (1 + 1e-12) + 1e-15


def test_extremal_geometric_sequence_meets_prediction_exactly():
    t = admissible_sequence(1.0, 2.0, 1.0, 30)
    for k, tk in enumerate(t):
        assert tk == rate_predict(1.0, 2.0, 1.0, k)


@given(st.floats(0.5, 0.99))
def test_geometric_sequences_classify_linear(r):
    n = max(60, int(math.log(1e-10) / math.log(r)))
    n = min(n, 2000)
    t = r ** np.arange(n)
    rep = classify_rate(t, fstar=0.0)
    assert rep.classification == 'linear'
    assert abs(rep.rate - r) <= 0.01


@given(st.floats(0.5, 4.0))
def test_power_law_sequences_classify_sublinear(p):
    k = np.arange(1, 400, dtype=float)
    rep = classify_rate(k ** -p, fstar=0.0, k=k)
    assert rep.classification == 'sublinear'
    assert abs(rep.exponent + p) <= 0.1


def test_classify_examples():
    rep = classify_rate(0.9 ** np.arange(200), fstar=0.0)
    assert rep.classification == 'linear' and rep.rate == pytest.approx(0.9, abs=0.01)
    k = np.arange(1, 200, dtype=float)
    rep = classify_rate(k ** -2.0, fstar=0.0, k=k)
    assert rep.classification == 'sublinear' and rep.exponent == pytest.approx(-2, abs=0.1)


def test_classify_finite_termination():
    rep = classify_rate([1.0, 0.5, 0.25, 0.0, 0.0], fstar=0.0)
    assert rep.classification == 'finite' and rep.value == 3


def test_classify_too_few_points_and_bad_fstar():
    with pytest.raises(TooFewPoints):
        classify_rate(0.9 ** np.arange(30), fstar=0.0)
    with pytest.raises(ValueError):
        classify_rate(0.9 ** np.arange(100), fstar=0.5)


def test_fstar_estimate_is_flagged():
    fstar, est = resolve_fstar([3.0, 2.0, 1.0])
    assert est and fstar < 1.0
    assert resolve_fstar([3.0], known=0.5) == (0.5, False)


@pytest.mark.parametrize('p', [2, 4, 6])
def test_kl_exponent_of_even_powers(p):
    x = 0.95 ** np.arange(1, 200)
    f = x ** p
    keep = f > 1e-12
    rep = estimate_kl_exponent(f[keep], fstar=0.0, grads=p * x[keep] ** (p - 1))
    assert rep.kappa == pytest.approx(1 - 1 / p, abs=0.05)
    # |grad| = p f^(1 - 1/p), so M = 1/p
    assert rep.M == pytest.approx(1 / p, rel=1e-6)


def test_kl_exponent_of_constant_gradient():
    f = 0.9 ** np.arange(50)
    rep = estimate_kl_exponent(f, fstar=0.0, grads=np.full(50, 3.0))
    assert rep.kappa == pytest.approx(0.0, abs=1e-12)


def test_kl_errors():
    with pytest.raises(TooFewPoints):
        estimate_kl_exponent(np.zeros(10), fstar=0.0, grads=np.ones(10))
    with pytest.raises(ValueError):
        estimate_kl_exponent([1.0, 0.5])


def test_lojasiewicz_examples():
    sq = quadratic_phi_problem(scale=2.0)
    ok = lojasiewicz_check(sq, [0.0], 0.5, 1.0, 1.0)
    assert ok.holds and ok.witness is None
    bad = lojasiewicz_check(sq, [0.0], 0.5, 0.4, 1.0)
    assert not bad.holds
    assert bad.worst_ratio == pytest.approx(1.25, rel=1e-12)
    assert bad.witness is not None
    zero = lojasiewicz_check(sq, [0.0], 0.0, 1.0, 0.1)
    assert not zero.holds
    with pytest.raises(ValueError):
        lojasiewicz_check(sq, [0.0], 1.0, 1.0, 1.0)


def test_declared_kl_data_of_quartic_problems():
    for p in (make_quartic_well(1), make_quartic_well(2), make_degenerate_quartic(1),
              make_degenerate_quartic(3)):
        for xstar in p.known_minimizers:
            res = lojasiewicz_check(p, xstar, p.known_kl_exponent, p.kl_constant,
                                    p.kl_radius, n_samples=10_000, seed=1)
            assert res.holds, (p.label, res.worst_ratio)
