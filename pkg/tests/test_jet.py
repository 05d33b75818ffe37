"""
절단 테일러 제트 테스트 (닫힌 꼴 미분과 비교)
"""
import numpy as np
import pytest
from hypothesis import given, settings as hyp_settings
from hypothesis import strategies as st

from gerbecalc.core.jet import Jet
from gerbecalc.utils.exceptions import EvaluationDomainError, FormShapeError

coordinate = st.floats(min_value=-1.5, max_value=1.5, allow_nan=False)


def variables_at(x: float, y: float, order: int = 3):
    points = np.array([[x, y]])
    return Jet.variable(points, 0, order), Jet.variable(points, 1, order)


@hyp_settings(max_examples=60, deadline=None)
@given(coordinate, coordinate)
def test_sin_of_product_derivatives(x, y):
    u, v = variables_at(x, y)
    jet = (u * v).sin()
    c, s = np.cos(x * y), np.sin(x * y)
    assert jet.value[0] == pytest.approx(s, abs=1e-13)
    assert jet.grad[0] == pytest.approx([y * c, x * c], abs=1e-12)
    # ∂²/∂x∂y sin(xy) = cos(xy) - xy sin(xy)
    assert jet.hess[0, 0, 1] == pytest.approx(c - x * y * s, abs=1e-12)
    assert jet.hess[0, 1, 0] == pytest.approx(jet.hess[0, 0, 1], abs=1e-14)
    # ∂³/∂x³ sin(xy) = -y³ cos(xy)
    assert jet.derivs[3][0, 0, 0, 0] == pytest.approx(-y ** 3 * c, abs=1e-11)


@hyp_settings(max_examples=60, deadline=None)
@given(coordinate, st.floats(min_value=0.2, max_value=3.0))
def test_reciprocal_and_log(x, y):
    u, v = variables_at(x, y)
    inverse = (v + u * u).reciprocal()
    q = y + x * x
    assert inverse.value[0] == pytest.approx(1 / q, rel=1e-13)
    assert inverse.grad[0, 0] == pytest.approx(-2 * x / q ** 2, rel=1e-12, abs=1e-14)
    logged = v.log()
    assert logged.grad[0, 1] == pytest.approx(1 / y, rel=1e-13)
    assert logged.hess[0, 1, 1] == pytest.approx(-1 / y ** 2, rel=1e-12)


def test_exp_of_imaginary_phase_is_unit():
    u, _ = variables_at(0.3, 0.0)
    jet = (u * (2j * np.pi)).exp()
    assert abs(jet.value[0]) == pytest.approx(1.0, abs=1e-15)
    assert jet.grad[0, 0] == pytest.approx(2j * np.pi * np.exp(0.6j * np.pi), abs=1e-12)


def test_power_matches_repeated_product():
    u, v = variables_at(0.7, -0.4)
    base = u - v * 2.0
    assert np.allclose((base.power(3)).hess, (base * base * base).hess, atol=1e-12)
    assert np.allclose(base.power(-2).value, 1 / (0.7 + 0.8) ** 2)


def test_matmul_follows_leibniz():
    points = np.array([[0.2, 0.9], [0.5, 0.1]])
    x = Jet.variable(points, 0, 2)
    y = Jet.variable(points, 1, 2)
    zero = Jet.constant(0.0, 2, 2, 2)
    one = Jet.constant(1.0, 2, 2, 2)
    a = Jet.from_entries([[x, one], [zero, y]], 2, 2, 2)
    b = Jet.from_entries([[y, zero], [x, x * y]], 2, 2, 2)
    product = a @ b
    # (ab)_{00} = xy + x
    entry = product.entry(0, 0)
    assert np.allclose(entry.value, points[:, 0] * points[:, 1] + points[:, 0])
    assert np.allclose(entry.grad[:, 0], points[:, 1] + 1)
    assert np.allclose(entry.hess[:, 0, 1], 1)


def test_division_by_zero_is_a_domain_error():
    u, _ = variables_at(0.0, 1.0)
    with pytest.raises(EvaluationDomainError):
        u.reciprocal()
    with pytest.raises(EvaluationDomainError):
        u / 0


def test_truncate_cannot_raise_order():
    u, _ = variables_at(0.1, 0.2, order=1)
    assert u.truncate(0).order == 0
    with pytest.raises(FormShapeError):
        u.truncate(2)
    with pytest.raises(FormShapeError):
        u.truncate(0).grad
