import math
import warnings

import numpy as np
import pytest
from hypothesis import assume, given, settings
from hypothesis import strategies as st

from poissonfam import expr as E
from poissonfam.errors import DomainError

x = E.var(0, "x")


def test_eval_examples():
    assert x(2.0) == 2.0
    assert E.power(x, -1)(4.0) == 0.25
    assert E.exp(E.add(E.mul(E.const(1.0), x), E.const(0.0)))(0.0) == 1.0


def test_derivative_examples():
    assert E.power(x, 2).diff(0)(3.0) == pytest.approx(6.0, rel=1e-15)
    assert E.log(x).diff(0)(2.0) == pytest.approx(0.5, rel=1e-15)
    assert E.exp(x).diff(0)(1.0) == pytest.approx(math.e, rel=1e-15)


def test_domain_violation_names_the_primitive():
    with pytest.raises(DomainError, match="pow"):
        E.power(x, 0.5)(-1.0)
    with pytest.raises(DomainError, match="log"):
        E.log(x)(0.0)
    with pytest.raises(DomainError):
        E.div(E.const(1.0), x)(0.0)


def test_noninteger_power_validity():
    assert E.power(x, 1.5).validity() == (0.0, math.inf)
    assert E.power(x, 3).validity() == (-math.inf, math.inf)


def test_multivariate_gradient():
    f = E.parse("(mul x1 (pow x2 2) (exp x3))")
    p = np.array([1.5, 2.0, 0.3])
    g = [f.diff(i).at(p) for i in range(3)]
    np.testing.assert_allclose(g, [4 * math.exp(0.3), 2 * 1.5 * 2 * math.exp(0.3), 1.5 * 4 * math.exp(0.3)])


def test_at_batches_points():
    f = E.parse("(add x1 x2)")
    np.testing.assert_array_equal(f.at(np.array([[1.0, 2.0], [3.0, 4.0]])), [3.0, 7.0])


@pytest.mark.parametrize(
    "text",
    ["(pow x 2)", "(exp (mul 2 x))", "(log (add x 0.1))", "(div (sub x1 x2) (neg x3))", "(pow x 0.3333333333333333)"],
)
def test_text_round_trip(text):
    e = E.parse(text)
    assert e.to_text() == text
    assert E.parse(e.to_text()) == e


@pytest.mark.parametrize("bad", ["", "(pow x)", "(add x)", "(foo x)", "(exp x", "x0", ")"])
def test_parse_rejects(bad):
    with pytest.raises((ValueError, IndexError)):
        E.parse(bad)


def test_callback_with_derivative_and_inverse():
    E.register_callback("cube", lambda t: t**3, derivative=lambda t: 3 * t**2, inverse=np.cbrt)
    f = E.parse("(call cube x)")
    assert f(2.0) == 8.0
    assert f.diff(0)(2.0) == 12.0
    assert E.closed_form_inverse(f, 27.0) == pytest.approx(3.0)
    with pytest.raises(KeyError):
        E.parse("(call nosuch x)")


def test_tabulated_primitive_matches_arctan():
    # integral of 1/(1 + t^2) from the midpoint 1.5 of (1, 2)
    p = E.Primitive(E.div(E.const(1.0), E.add(E.const(1.0), E.power(x, 2))), 1.0, 2.0, x)
    ts = np.linspace(1.01, 1.99, 37)
    np.testing.assert_allclose(p(ts), np.arctan(ts) - np.arctan(1.5), atol=1e-12)
    np.testing.assert_allclose(p.diff(0)(ts), 1 / (1 + ts**2), rtol=1e-14)


def test_tabulated_primitive_clamps_with_warning():
    p = E.Primitive(E.exp(E.neg(x)), 0.0, 1.0, x)
    with warnings.catch_warnings(record=True) as w:
        warnings.simplefilter("always")
        v = p(1.5)
    assert any(issubclass(i.category, E.ExtrapolationWarning) for i in w)
    assert v == pytest.approx(p(1.0))


def _positive_trees():
    leaves = st.one_of(
        st.floats(0.5, 2.0).map(E.const),
        st.just(x),
    )

    def extend(children):
        return st.one_of(
            st.tuples(children, children).map(lambda ab: E.add(*ab)),
            st.tuples(children, children).map(lambda ab: E.mul(*ab)),
            st.tuples(children, children).map(lambda ab: E.div(*ab)),
            st.tuples(children, st.floats(-2.0, 2.0)).map(lambda bp: E.power(bp[0], bp[1])),
            children.map(lambda c: E.exp(E.div(c, E.add(E.const(1.0), c)))),
            children.map(lambda c: E.log(E.add(E.const(1.0), c))),
        )

    return st.recursive(leaves, extend, max_leaves=6)


@settings(max_examples=150, deadline=None)
@given(_positive_trees(), st.floats(0.5, 3.0))
def test_symbolic_derivative_matches_central_difference(f, t):
    v = f(t)
    assume(abs(v) < 1e6)
    d = f.diff(0)(t)
    h = np.cbrt(np.finfo(float).eps) * max(1.0, abs(t))
    fd = (f(t + h) - f(t - h)) / (2 * h)
    assert abs(d - fd) <= 1e-6 * max(1.0, abs(d))


@settings(max_examples=150, deadline=None)
@given(_positive_trees(), st.floats(0.5, 3.0))
def test_round_trip_preserves_value(f, t):
    g = E.parse(f.to_text())
    assert g == f
    assert g(t) == f(t)
