import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from momentopf.polynomial import SparsePolynomial

coef = st.floats(-5, 5, allow_nan=False).filter(lambda c: abs(c) > 1e-3)


@st.composite
def polys(draw, nvars=3, max_deg=3):
    terms = draw(st.dictionaries(
        st.tuples(*[st.integers(0, max_deg)] * nvars).filter(lambda a: sum(a) <= max_deg),
        coef, max_size=6))
    return SparsePolynomial(nvars, terms)


points = st.lists(st.floats(-2, 2, allow_nan=False), min_size=3, max_size=3)


@settings(max_examples=100, deadline=None)
@given(polys(), polys(), points)
def test_arithmetic_agrees_with_evaluation(p, q, x):
    px, qx = p(x), q(x)
    assert (p + q)(x) == pytest.approx(px + qx, abs=1e-9)
    assert (p - q)(x) == pytest.approx(px - qx, abs=1e-9)
    assert (p * q)(x) == pytest.approx(px * qx, rel=1e-9, abs=1e-8)
    assert (2.5 * p - 1)(x) == pytest.approx(2.5 * px - 1, abs=1e-9)


@settings(max_examples=100, deadline=None)
@given(polys(), polys())
def test_degree_of_product(p, q):
    if not p.is_zero() and not q.is_zero():
        assert (p * q).degree <= p.degree + q.degree


def test_quadratic_form_matches_numpy():
    rng = np.random.default_rng(0)
    Q = rng.normal(size=(4, 4))
    f = SparsePolynomial.quadratic_form(Q, 0.7)
    for _ in range(10):
        x = rng.normal(size=4)
        assert f(x) == pytest.approx(x @ Q @ x + 0.7)
    assert f.degree == 2 and f.half_degree == 1


def test_batch_evaluation_and_substitution():
    x0, x1 = SparsePolynomial.variable(2, 0), SparsePolynomial.variable(2, 1)
    f = x0 * x0 * x1 + 3 * x1 - x0
    pts = np.array([[1.0, 2.0], [0.5, -1.0]])
    np.testing.assert_allclose(f(pts), [f(p) for p in pts])
    g = f.substitute_zero(1)
    assert g.nvars == 1 and g([2.0]) == pytest.approx(-2.0)


def test_dict_round_trip_and_validation():
    f = SparsePolynomial(2, {(1, 1): 2.0, (0, 0): -1.0})
    assert SparsePolynomial.from_dict(f.to_dict()) == f
    with pytest.raises(ValueError):
        SparsePolynomial(2, {(1,): 1.0})
    with pytest.raises(ValueError):
        f + SparsePolynomial.constant(3, 1.0)
