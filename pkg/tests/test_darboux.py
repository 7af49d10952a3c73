import numpy as np
import pytest

import oracles as O
from poissonfam.catalog import make_circle_maps, make_lv3, make_nlv, make_qp_lv
from poissonfam.darboux import (
    CasimirSet,
    DarbouxChart,
    canonical_check,
    canonical_matrix,
    casimir_eval,
    casimir_gradient_check,
    darboux_forward,
    darboux_inverse,
    forward_jacobian,
    independence_check,
    inverse_jacobian,
    pushforward_structure,
    reparam_factor,
)
from poissonfam.errors import OutOfChartError, SingularChartError
from poissonfam.numdiff import fd_partials

SYSTEMS = {
    "lv3": lambda: make_lv3().spec,
    "qp211": lambda: make_qp_lv((2, 1, 1)).spec,
    "qp123": lambda: make_qp_lv((1, 2, 3)).spec,
    "circle": make_circle_maps,
    "circle-pair23": lambda: make_circle_maps(pair=(1, 2)),
    "nlv5": lambda: make_nlv(5, a=[1.3, 0.7, 2.0, 1.1, 0.6]).spec,
    "nlv5-pair35": lambda: make_nlv(5, a=[1.3, 0.7, 2.0, 1.1, 0.6], box=None).spec,
}


def test_casimir_examples():
    cs = CasimirSet(make_lv3().spec)
    assert cs.indices == (2,)
    assert casimir_eval(cs, 2, [1.0, 2.0, 3.0]) == pytest.approx(1 / 3, rel=1e-15)
    cs4 = CasimirSet(make_nlv(4, box=[(0.5, 5.0)] * 4, omega_sign=-1).spec)
    assert casimir_eval(cs4, 3, [1.0, 2.0, 2.0, 2.0]) == 0.0
    with pytest.raises(ValueError):
        casimir_eval(cs, 0, [1.0, 2.0, 3.0])


def test_casimir_singular_chart():
    cs = CasimirSet(make_nlv(3, box=[(0.5, 5.0)] * 3, omega_sign=-1).spec)
    with pytest.raises(SingularChartError):
        casimir_eval(cs, 2, [2.0, 2.0, 3.0], check=False)


@pytest.mark.parametrize("name", SYSTEMS)
def test_casimirs_annihilated(name):
    s = SYSTEMS[name]()
    cs = CasimirSet(s)
    pts = s.sample(300, seed=11)
    for k in cs.indices:
        assert np.all(casimir_gradient_check(cs, k, pts).relative <= 1e-6)
    ind = independence_check(cs, pts)
    assert ind.ok


def test_non_casimir_is_caught():
    cs = CasimirSet(make_lv3().spec)
    g = casimir_gradient_check(cs, None, [1.0, 2.0, 3.0], f=lambda p: p[:, 0])
    assert float(g) == pytest.approx(6.0, rel=1e-8)


def test_qp_casimir_gradient_at_example_point():
    cs = CasimirSet(make_qp_lv((2, 1, 1)).spec)
    assert casimir_gradient_check(cs, 2, [1.0, 2.0, 3.0]).relative <= 1e-6


def test_forward_inverse_examples():
    ch = DarbouxChart(make_lv3().spec)
    np.testing.assert_allclose(darboux_forward(ch, [1.0, 2.0, 3.0]), [1.0, 2.0, 1 / 3], rtol=1e-15)
    np.testing.assert_allclose(darboux_inverse(ch, [1.0, 2.0, 1 / 3]), [1.0, 2.0, 3.0], rtol=1e-15)


def test_inverse_with_zero_casimir_coordinate():
    s = make_nlv(3, box=[(0.5, 5.0)] * 3, omega_sign=-1).spec
    ch = DarbouxChart(s)
    x = darboux_inverse(ch, [1.0, 2.0, 0.0])
    assert x[2] == pytest.approx(2.0)


def test_inverse_out_of_chart():
    ch = DarbouxChart(make_lv3().spec)
    with pytest.raises(OutOfChartError):
        darboux_inverse(ch, [1.0, 2.0, 1.0])  # denominator y1 + (y1 - y2) y3 vanishes
    with pytest.raises(OutOfChartError):
        darboux_inverse(ch, [1.0, 2.0, 0.9])  # preimage far outside the box
    with pytest.raises(OutOfChartError):
        darboux_inverse(ch, [3.0, 2.0, 0.3])


def test_qp_round_trip_against_closed_form():
    s = make_qp_lv((2, 1, 1)).spec
    ch = DarbouxChart(s)
    x = np.array([1.0, 2.0, 3.0])
    z = darboux_forward(ch, x)
    x3 = (z[0] ** 2 * z[1] / (z[0] ** 2 + (z[0] ** 2 - z[1]) * z[2])) ** 1.0
    assert x3 == pytest.approx(3.0, rel=1e-12)
    np.testing.assert_allclose(darboux_inverse(ch, z), x, rtol=1e-9)


@pytest.mark.parametrize("name", SYSTEMS)
def test_chart_round_trip_500_points(name):
    s = SYSTEMS[name]()
    ch = DarbouxChart(s)
    pts = s.sample(500, seed=2)
    back = darboux_inverse(ch, darboux_forward(ch, pts))
    rel = np.max(np.abs(back - pts), axis=1) / np.maximum(1.0, np.max(np.abs(pts), axis=1))
    assert rel.max() <= 1e-9


@pytest.mark.parametrize("name", SYSTEMS)
def test_canonical_form_50_points(name):
    s = SYSTEMS[name]()
    ch = DarbouxChart(s)
    ys = darboux_forward(ch, s.sample(50, seed=4))
    assert np.max(canonical_check(s, ch, ys)) <= 1e-6
    Js = pushforward_structure(s, ch, ys).entries
    ks = list(ch.casimirs.indices)
    scale = np.max(np.abs(Js), axis=(1, 2))
    assert np.all(np.max(np.abs(Js[:, ks, :]), axis=(1, 2)) <= 1e-6 * scale)


def test_pushforward_and_reparam_lv3():
    s = make_lv3().spec
    ch = DarbouxChart(s)
    y = [1.0, 2.0, 1 / 3]
    Js = pushforward_structure(s, ch, y).entries
    np.testing.assert_allclose(Js, -2.0 * canonical_matrix(3, (0, 1)), atol=1e-6 * 2)
    assert reparam_factor(ch, y) == -2.0


def test_reparam_factor_never_vanishes_in_image():
    s = make_qp_lv((2, 1, 1)).spec
    ch = DarbouxChart(s)
    ys = darboux_forward(ch, s.sample(300))
    assert np.all(reparam_factor(ch, ys) != 0)


def test_exact_inverse_jacobian_matches_differences():
    s = make_qp_lv((1, 2, 3)).spec
    ch = DarbouxChart(s)
    ys = darboux_forward(ch, s.sample(10))
    exact = inverse_jacobian(ch, ys)
    fd, _ = fd_partials(lambda q: darboux_inverse(ch, q), ys)
    np.testing.assert_allclose(exact, np.swapaxes(fd, 1, 2), rtol=1e-6, atol=1e-8)


def test_reduced_gradient_matches_oracle():
    lv = make_lv3()
    ch = DarbouxChart(lv.spec, hamiltonian=lv.hamiltonian)
    y = np.array([1.0, 2.0, 1 / 3])

    def Hstar(v):
        x3 = v[0] * v[1] / (v[0] + (v[0] - v[1]) * v[2])
        return O.lv3_H([v[0], v[1], x3])

    np.testing.assert_allclose(ch.reduced_gradient(y), O.fd_gradient(Hstar, y), rtol=1e-8)


@pytest.mark.parametrize("name", ["qp123", "nlv5", "circle"])
def test_exact_forward_jacobian(name):
    s = SYSTEMS[name]()
    ch = DarbouxChart(s)
    pts = s.sample(10, seed=5)
    exact = forward_jacobian(ch, pts)
    fd, _ = fd_partials(lambda q: darboux_forward(ch, q, check=False), pts, s.box)
    np.testing.assert_allclose(exact, np.swapaxes(fd, 1, 2), rtol=1e-6, atol=1e-8)
    prod = exact @ inverse_jacobian(ch, darboux_forward(ch, pts), x=pts)
    np.testing.assert_allclose(prod, np.broadcast_to(np.eye(s.n), prod.shape), atol=1e-10)


def test_difference_jacobian_stays_near_tolerance():
    s = SYSTEMS["lv3"]()
    ch = DarbouxChart(s)
    ys = darboux_forward(ch, s.sample(50, seed=4))
    fd = canonical_check(s, ch, ys, jacobian="fd")
    assert np.max(fd) <= 1e-6
    assert np.max(canonical_check(s, ch, ys)) <= np.max(fd)
    with pytest.raises(ValueError):
        canonical_check(s, ch, ys, jacobian="spline")
