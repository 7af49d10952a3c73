import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

import oracles as O
from poissonfam import expr as E
from poissonfam.catalog import make_circle_maps, make_lv3, make_nlv, make_qp_lv
from poissonfam.errors import DomainError
from poissonfam.verification import bracket, jacobi_residual, rank_at


def test_bracket_examples():
    s = make_lv3().spec
    p = [1.0, 2.0, 3.0]
    assert bracket(s, E.var(0), E.var(1), p) == -2.0
    f = E.parse("(mul x1 (exp x3))")
    assert abs(bracket(s, f, f, p)) <= 1e-10


def test_bracket_with_callables_uses_differences():
    s = make_lv3().spec
    v = bracket(s, lambda q: q[:, 0] * q[:, 1], lambda q: q[:, 2], [1.0, 2.0, 3.0])
    # grad f = (2, 1, 0), grad g = e3
    assert v == pytest.approx(2 * -6 + 1 * -6, rel=1e-8)


@settings(max_examples=40, deadline=None)
@given(st.integers(0, 1000))
def test_bracket_is_antisymmetric(seed):
    s = make_qp_lv((2, 1, 1)).spec
    p = s.sample(1, seed)[0]
    f = E.parse("(mul x1 (log x2))")
    g = E.parse("(add (pow x3 2) x1)")
    a, b = bracket(s, f, g, p), bracket(s, g, f, p)
    assert abs(a + b) <= 1e-10 * max(1.0, abs(a))


def test_jacobi_lv3_point():
    r = jacobi_residual(make_lv3().spec, [1.0, 2.0, 3.0])
    assert r.max_abs <= 1e-6 * r.scale
    assert not r.one_sided


def test_jacobi_circle_maps_100_points():
    s = make_circle_maps()
    r = jacobi_residual(s, s.sample(100))
    assert np.all(r.max_abs <= 1e-6 * r.scale)


def test_jacobi_residual_totally_antisymmetric():
    r = jacobi_residual(None, [1.0, 2.0, 3.0], structure=lambda p: np.stack([O.counterexample_J(q) for q in p]))
    R = r.R
    np.testing.assert_allclose(R, -np.transpose(R, (1, 0, 2)), atol=1e-8)
    np.testing.assert_allclose(R, -np.transpose(R, (0, 2, 1)), atol=1e-8)
    assert r.max_abs > 0.1


def test_jacobi_near_box_edge_falls_back_to_one_sided():
    s = make_lv3().spec
    r = jacobi_residual(s, [0.55 + 1e-9, 2.0, 3.0])
    assert r.one_sided
    assert r.max_abs <= 1e-6 * r.scale


def test_jacobi_rejects_outside_points():
    with pytest.raises(DomainError):
        jacobi_residual(make_lv3().spec, [5.0, 2.0, 3.0])


def test_rank_examples():
    assert rank_at(make_lv3().spec, [1.0, 2.0, 3.0]) == 2
    assert rank_at(make_nlv(5).spec, [1.0, 2, 3, 4, 5]) == 2
    s = make_nlv(3, a=[1.0, 2.0, 3.0], box=[(0.1, 10)] * 3, omega_sign=1).spec
    assert rank_at(s, [6.0, 3.0, 2.0], check=False) == 0


@pytest.mark.parametrize("n", [3, 4, 6, 9])
def test_rank_even_and_two(n):
    s = make_nlv(n, a=np.linspace(0.7, 1.8, n)).spec
    ranks = rank_at(s, s.sample(200))
    assert np.all(ranks == 2)
