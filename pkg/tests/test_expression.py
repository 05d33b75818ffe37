"""
식 파서 / 출력기 / 기호 미분 / 제트 평가 테스트
"""
import math

import numpy as np
import pytest
from hypothesis import given, settings as hyp_settings
from hypothesis import strategies as st

from gerbecalc.core.expression import differentiate, eval_jet, parse_expr, print_expr
from gerbecalc.utils.exceptions import ExpressionSyntaxError, UnknownIdentifierError

VARIABLES = ("x1", "x2")

SAMPLES = [
    "sin(2*pi*x1)*cos(x2) + 3",
    "exp(i*x1) - x2^3/2",
    "log(2 + cos(x1*x2))",
    "-(x1 - 0.25)*(x2 + 1)",
    "exp(2*pi*i*x1)",
]


def value_at(text: str, point) -> complex:
    return complex(eval_jet(parse_expr(text, VARIABLES), point, VARIABLES, order=0).value[0])


@pytest.mark.parametrize("text", SAMPLES)
def test_print_then_parse_gives_same_values(text):
    node = parse_expr(text, VARIABLES)
    again = parse_expr(print_expr(node), VARIABLES)
    for point in ([0.1, 0.7], [0.93, 0.02], [0.5, 0.5]):
        a = eval_jet(node, point, VARIABLES, order=0).value[0]
        b = eval_jet(again, point, VARIABLES, order=0).value[0]
        assert abs(a - b) <= 1e-14


def test_constants_and_precedence():
    assert value_at("1 + 2*3", [0, 0]) == pytest.approx(7)
    assert value_at("-x1^2", [3.0, 0]) == pytest.approx(-9)
    assert value_at("pi", [0, 0]) == pytest.approx(math.pi)
    assert value_at("i*i", [0, 0]) == pytest.approx(-1)


def test_unit_phase_has_modulus_one():
    for x in np.linspace(0, 1, 7):
        assert abs(value_at("exp(2*pi*i*x1)", [x, 0.0])) == pytest.approx(1.0, abs=1e-15)


@pytest.mark.parametrize("text", ["sin(x1", "x1 +", "2 ** x1", "x1^x2", "x1^1.5", ")"])
def test_syntax_errors_carry_offset(text):
    with pytest.raises(ExpressionSyntaxError) as info:
        parse_expr(text, VARIABLES)
    assert info.value.offset >= 0


def test_unknown_identifier():
    with pytest.raises(UnknownIdentifierError):
        parse_expr("x3 + 1", VARIABLES)
    with pytest.raises(UnknownIdentifierError):
        parse_expr("tan(x1)", VARIABLES)


@pytest.mark.parametrize("text", SAMPLES)
def test_jet_gradient_matches_symbolic_derivative(text):
    node = parse_expr(text, VARIABLES)
    point = np.array([[0.31, 0.77]])
    jet = eval_jet(node, point, VARIABLES, order=2)
    for index, name in enumerate(VARIABLES):
        symbolic = eval_jet(differentiate(node, name), point, VARIABLES, order=0).value[0]
        assert abs(jet.grad[0, index] - symbolic) <= 1e-12


@pytest.mark.parametrize("text", SAMPLES)
def test_hessian_is_symmetric_and_matches_second_derivative(text):
    node = parse_expr(text, VARIABLES)
    point = np.array([[0.2, 0.45]])
    hess = eval_jet(node, point, VARIABLES, order=2).hess[0]
    assert np.allclose(hess, hess.T, atol=1e-12)
    mixed = differentiate(differentiate(node, "x1"), "x2")
    assert abs(hess[0, 1] - eval_jet(mixed, point, VARIABLES, order=0).value[0]) <= 1e-11


@hyp_settings(max_examples=50, deadline=None)
@given(
    st.floats(min_value=-2.0, max_value=2.0),
    st.floats(min_value=-2.0, max_value=2.0),
    st.floats(min_value=0.0, max_value=1.0),
)
def test_product_rule_on_random_points(a, b, x):
    node = parse_expr(f"({a!r}*x1 + sin(x1))*({b!r} - cos(3*x1))", ("x1",))
    jet = eval_jet(node, [x], ("x1",), order=1)
    f = a * x + math.sin(x)
    g = b - math.cos(3 * x)
    expected = (a + math.cos(x)) * g + f * 3 * math.sin(3 * x)
    assert abs(jet.grad[0, 0] - expected) <= 1e-10 * max(1.0, abs(expected))
