import numpy as np
import pytest
from scipy.integrate._ivp.rk import RK45

from poissonfam import dopri
from poissonfam.dopri import dopri5
from poissonfam.errors import DomainError


def test_tableau_matches_reference():
    np.testing.assert_allclose(dopri.C, RK45.C, rtol=1e-15)
    for s in range(1, 6):
        np.testing.assert_allclose(dopri.A[s], RK45.A[s, :s], rtol=1e-15)
    np.testing.assert_allclose(dopri.B, RK45.B, rtol=1e-15)
    np.testing.assert_allclose(dopri.E, RK45.E, rtol=1e-15)
    np.testing.assert_allclose(dopri.P, RK45.P, rtol=1e-15)


def oscillator(t, y):
    return np.array([y[1], -y[0]])


def test_harmonic_oscillator():
    res = dopri5(oscillator, 0.0, [1.0, 0.0], 10.0, rtol=1e-10, atol=1e-12)
    assert res.status == "completed"
    assert res.times[-1] == 10.0
    np.testing.assert_allclose(res.states[-1], [np.cos(10), -np.sin(10)], atol=1e-8)


def test_backward_integration():
    res = dopri5(oscillator, 0.0, [1.0, 0.0], -3.0, rtol=1e-10, atol=1e-12)
    np.testing.assert_allclose(res.states[-1], [np.cos(3), np.sin(3)], atol=1e-8)
    assert np.all(np.diff(res.times) < 0)


def test_dense_output_interpolates():
    res = dopri5(oscillator, 0.0, [1.0, 0.0], 6.0, rtol=1e-10, atol=1e-12, dense=True)
    ts = np.linspace(0, 6, 37)
    np.testing.assert_allclose(res.dense(ts)[:, 0], np.cos(ts), atol=1e-7)
    with pytest.raises(ValueError):
        res.dense(7.0)


def test_zero_length_run():
    res = dopri5(oscillator, 1.0, [1.0, 0.0], 1.0)
    assert res.status == "completed"
    assert len(res.times) == 1


def test_domain_exit_keeps_valid_prefix():
    # y' = 1 leaves y < 1 at t = 0.5
    res = dopri5(lambda t, y: np.ones(1), 0.0, [0.5], 2.0, inside=lambda y: bool(y[0] < 1.0))
    assert res.status == "domain_exit"
    assert np.all(res.states[:, 0] < 1.0)
    assert res.times[-1] == pytest.approx(0.5, abs=1e-6)


def test_domain_errors_from_the_field_reject_steps():
    def f(t, y):
        if y[0] >= 1.0:
            raise DomainError("outside")
        return np.ones(1)

    res = dopri5(f, 0.0, [0.0], 3.0)
    assert res.status == "domain_exit"
    assert res.states[-1, 0] < 1.0


def test_blow_up_underflows():
    # y' = y^2, y(0) = 1 blows up at t = 1
    res = dopri5(lambda t, y: y**2, 0.0, [1.0], 2.0)
    assert res.status in ("step_underflow", "domain_exit")
    assert res.times[-1] == pytest.approx(1.0, abs=1e-3)


def test_step_budget():
    res = dopri5(oscillator, 0.0, [1.0, 0.0], 100.0, max_steps=5)
    assert res.status == "max_steps"
