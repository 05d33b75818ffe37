"""
Čech 코체인, Deligne 1-코체인, 접속을 가진 거브 테스트
"""
import numpy as np
import pytest

from gerbecalc.core.cover import SampleBank, refine, refinement_map, sub_seed, translation_map
from gerbecalc.core.deligne import (
    CechDeRham,
    apply_twist_morphism,
    canonical,
    curvature_H,
    delta_cochain,
    deligne_differential,
    make_coboundary_gerbe,
    pull_gerbe,
    random_cochain,
    random_deligne_one,
    random_xi,
    shift_by_xi,
    total_D,
    trivial_gerbe,
    validate_gerbe,
)
from gerbecalc.core.expression import parse_expr
from gerbecalc.core.fields import UnitaryField
from gerbecalc.core.forms import parse_form
from gerbecalc.utils.exceptions import FormShapeError, GluingError

POINTWISE = 1e-8


def assert_valid(report, tolerance=POINTWISE):
    failing = {name: value for name, (value, _) in report.items() if not value <= tolerance}
    assert not failing, failing


def test_canonical_sign():
    assert canonical((0, 1, 2)) == (1, (0, 1, 2))
    assert canonical((1, 0, 2)) == (-1, (0, 1, 2))
    assert canonical((2, 0, 1)) == (1, (0, 1, 2))
    assert canonical((1, 1)) == (0, None)


@pytest.mark.parametrize("degree", [0, 1])
def test_cech_delta_squares_to_zero(cover2, bank2, degree):
    cochain = random_cochain(cover2, degree, 1, sub_seed(0, "cochain", degree))
    twice = delta_cochain(delta_cochain(cochain))
    worst, points = twice.residual(bank2)
    assert points > 0
    assert worst <= 1e-12


def test_total_differential_squares_to_zero(cover2, bank2):
    rng = sub_seed(1, "total")
    element = CechDeRham(cover2, 1, {0: random_cochain(cover2, 0, 1, rng), 1: random_cochain(cover2, 1, 0, rng)})
    twice = total_D(total_D(element))
    for cochain in twice.components.values():
        worst, _ = cochain.residual(bank2)
        assert worst <= 1e-11


def test_trivial_gerbe_is_valid(flat_gerbe, bank2):
    report = validate_gerbe(flat_gerbe, bank2)
    assert set(report) == {"lambda_cocycle", "dlog_lambda", "unit_modulus", "normalization", "curving"}
    assert all(value == 0.0 for value, _ in report.values())


def test_normalization_compares_lambda_with_its_stored_inverse(cover2, bank2):
    gerbe = make_coboundary_gerbe(cover2, 3, name="mismatched_inverse")
    assert validate_gerbe(gerbe, bank2)["normalization"][0] <= POINTWISE
    key = sorted(gerbe._lam)[0]
    field = gerbe._lam[key]
    # λ⁻¹ 에만 상수 위상 e^{0.5i} 를 곱한다
    phase = UnitaryField.from_phase(parse_expr("0.5", cover2.variables), cover2.variables)
    gerbe._lam[key] = UnitaryField(field.matrix, field.inverse.wedge(phase.matrix))
    report = validate_gerbe(gerbe, bank2)
    assert report["normalization"][0] == pytest.approx(abs(np.exp(0.5j) - 1.0), rel=1e-6)


@pytest.mark.parametrize("seed", [1, 2, 3, 4, 5])
def test_coboundary_gerbes_satisfy_axioms_on_t2(cover2, bank2, seed):
    gerbe = make_coboundary_gerbe(cover2, seed)
    report = validate_gerbe(gerbe, bank2)
    assert_valid(report)
    assert report["dlog_lambda"][1] > 0


def test_coboundary_gerbe_satisfies_axioms_on_t3(gerbe3, bank3):
    report = validate_gerbe(gerbe3, bank3)
    assert_valid(report)
    assert report["lambda_cocycle"][1] > 0


def test_curvature_glues_and_is_closed(gerbe3, bank3):
    _, report = curvature_H(gerbe3, bank3)
    assert_valid(report)


def test_curvature_gluing_failure_raises(gerbe3, bank3, cover3):
    curvature_H(gerbe3, bank3, tolerance=POINTWISE)
    broken = trivial_gerbe(cover3, name="broken")
    broken._b[0] = parse_form("(x3) dx1^dx2", cover3.variables, 2)
    _, report = curvature_H(broken, bank3)
    assert report["gluing"][0] == pytest.approx(1.0)
    with pytest.raises(GluingError):
        curvature_H(broken, bank3, tolerance=POINTWISE)


def test_twist_morphism_preserves_axioms_and_curvature_class(gerbe2, bank2, cover2):
    alpha = random_deligne_one(cover2, 4)
    moved = apply_twist_morphism(gerbe2, alpha)
    assert_valid(validate_gerbe(moved, bank2))
    # 역 꼬임으로 원래 거브
    back = apply_twist_morphism(moved, alpha.inverse())
    samples = bank2.edges()[0]
    i, j = samples.simplex.charts
    original = gerbe2.a(j, i).evaluate(samples.coords[i], 0)
    restored = back.a(j, i).evaluate(samples.coords[i], 0)
    assert (original - restored).max_abs() <= 1e-12


def test_deligne_differential_is_a_flat_valid_gerbe(cover2, bank2):
    alpha = random_deligne_one(cover2, 6)
    gerbe = deligne_differential(alpha)
    assert_valid(validate_gerbe(gerbe, bank2))
    # α̂ - α̂ 의 미분은 자명 거브
    cancelled = deligne_differential(alpha.compose(alpha.inverse()))
    samples = bank2.by_dim(2)[0]
    i, j, k = samples.simplex.charts
    lam, _ = cancelled.lam(k, j, i).evaluate(samples.coords[i], 0)
    assert np.max(np.abs(lam.scalar_coefficient(()) - 1.0)) <= 1e-13


def test_shift_by_xi_moves_curving_only(gerbe2, bank2, cover2):
    xi = random_xi(cover2, 3)
    shifted = shift_by_xi(gerbe2, xi)
    assert_valid(validate_gerbe(shifted, bank2))
    samples = bank2.charts()[4]
    chart = samples.simplex.anchor
    difference = shifted.b(chart).evaluate(samples.coords[chart], 0) - gerbe2.b(chart).evaluate(samples.coords[chart], 0)
    expected = xi.evaluate(samples.coords[chart], 0)
    assert (difference - expected).max_abs() <= 1e-13
    with pytest.raises(FormShapeError):
        shift_by_xi(gerbe2, parse_form("(x1) dx1", cover2.variables, 1))


def test_refined_and_translated_gerbes_are_valid(gerbe2, cover2):
    refinement = refine(cover2, 2)
    fine = pull_gerbe(gerbe2, refinement_map(refinement))
    assert_valid(validate_gerbe(fine, SampleBank(refinement.fine, 4, 0)))
    moved = pull_gerbe(gerbe2, translation_map(cover2, (2, 1)))
    assert_valid(validate_gerbe(moved, SampleBank(cover2, 10, 0)))


def test_injected_curving_defect_is_reported(cover2, bank2):
    gerbe = trivial_gerbe(cover2)
    gerbe._b[0] = gerbe.b(0) + parse_form("(0.1) dx1^dx2", cover2.variables, 2)
    report = validate_gerbe(gerbe, bank2)
    assert report["curving"][0] >= 0.09
    assert report["lambda_cocycle"][0] == 0.0
