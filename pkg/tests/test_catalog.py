import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

import oracles as O
from poissonfam.catalog import (
    QPTransform,
    build,
    circle_map_casimirs,
    make_circle_maps,
    make_lv3,
    make_nlv,
    make_qp_lv,
    nlv_alpha,
    qp_field,
    qp_pullback_check,
    random_nlv_coefficients,
)
from poissonfam.dynamics import vector_field
from poissonfam.family import structure_matrix


def test_lv3_examples():
    lv = make_lv3()
    x = [1.0, 2.0, 3.0]
    np.testing.assert_array_equal(structure_matrix(lv.spec, x).entries, O.lv3_J(x))
    assert lv.H(x) == pytest.approx(O.lv3_H(x), rel=1e-14)


def test_qp_identity_reproduces_lv3():
    lv, qp = make_lv3(), make_qp_lv((1, 1, 1))
    pts = lv.spec.sample(100, seed=9)
    np.testing.assert_allclose(structure_matrix(qp.spec, pts).entries, structure_matrix(lv.spec, pts).entries, rtol=1e-10, atol=1e-12)
    dH = qp.H(pts) - lv.H(pts)
    assert np.ptp(dH) <= 1e-10
    np.testing.assert_allclose(vector_field(qp, pts), vector_field(lv, pts), rtol=1e-10)


@pytest.mark.parametrize("c", [(2, 1, 1), (1, 2, 3), (0.5, -1, 2)])
def test_qp_matches_entrywise_oracle(c):
    qp = make_qp_lv(c)
    pts = qp.spec.sample(20, seed=1)
    for y in pts:
        np.testing.assert_allclose(structure_matrix(qp.spec, y).entries, O.qp_J(c, y), rtol=1e-12, atol=1e-14)
        np.testing.assert_allclose(qp_field(c, y), O.qp_rhs(c, y), rtol=1e-12)


def test_qp_pullback_examples():
    assert qp_pullback_check((2, 1, 1), [1.0, 2.0, 3.0]) <= 1e-12
    assert QPTransform((2, 1, 1)).time_factor([1.0, 2.0, 3.0]) == 2.0


@settings(max_examples=50, deadline=None)
@given(
    st.tuples(*[st.sampled_from([-2.0, -1.0, 0.5, 1.0, 1.5, 2.0, 3.0])] * 3),
    st.lists(st.floats(0.3, 3.0), min_size=3, max_size=3),
)
def test_qp_pullback_property(c, y):
    assert qp_pullback_check(c, y) <= 1e-12


def test_zero_exponent_rejected():
    with pytest.raises(ValueError):
        make_qp_lv((1, 0, 1))
    with pytest.raises(ValueError):
        make_nlv(3, a=[1.0, 0.0, 2.0])


def test_circle_maps_casimir_product():
    s = make_circle_maps()
    pts = s.sample(100, seed=5)
    cs = circle_map_casimirs(s)
    prod = cs["C1"](pts) * cs["C2"](pts) * cs["C3"](pts)
    np.testing.assert_allclose(prod, 1.0, rtol=1e-12)


def test_circle_maps_example():
    s = make_circle_maps(box=((0.5, 1.5), (1.6, 2.4), (2.6, 3.4)))
    x = [1.0, 2.0, 3.0]
    np.testing.assert_allclose(structure_matrix(s, x).entries, O.circle_J(x), rtol=1e-14)


def test_circle_maps_box_validation():
    with pytest.raises(ValueError):
        make_circle_maps(box=((0.0, 2.5), (2.0, 3.0), (4.0, 5.0)))
    with pytest.raises(ValueError):
        make_circle_maps(box=((-1.0, 1.0), (2.0, 3.0), (4.0, 5.0)))


def test_nlv_alpha():
    alpha = nlv_alpha([1.0, 2.0, 3.0], [1.0, 1.0, 1.0])
    np.testing.assert_array_equal(alpha, [[2, -2, -3], [-1, 4, -3], [-1, -2, 6]])


def test_random_coefficients_are_seeded():
    a1, b1 = random_nlv_coefficients(5, 12)
    a2, b2 = random_nlv_coefficients(5, 12)
    np.testing.assert_array_equal(a1, a2)
    assert np.all((0.5 <= a1) & (a1 <= 2)) and np.all(np.abs(b1) <= 1)


@pytest.mark.parametrize(
    "sys",
    [make_lv3(), make_lv3(k=0.3), make_qp_lv((2, 1, 1)), make_qp_lv((1, 2, 3), k=0.8),
     make_nlv(5, *random_nlv_coefficients(5, 3)), make_nlv(8, *random_nlv_coefficients(8, 4))],
    ids=lambda s: s.name,
)
def test_two_paths_agree(sys):
    assert sys.two_path_deviation(sys.spec.sample(100, seed=8)) <= 1e-6


def test_build_lookup():
    assert build("lv3").name == "lv3"
    assert build("nlv", n=4, a=None).spec.n == 4
    assert build("circle-maps").name == "circle-maps"
    with pytest.raises(KeyError):
        build("henon")
