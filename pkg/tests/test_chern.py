"""
꼬인 Chern 지표, Chern-Simons 형식, 홀수 Chern 지표 테스트
"""
import math

import numpy as np
import pytest

from gerbecalc.config import settings
from gerbecalc.core.bundle import (
    affine_path,
    central_automorphism,
    gauge_path,
    loop_path,
    make_line_bundle,
    make_trivial_bundle,
    perturb,
    pull_bundle,
    pull_connection,
    random_automorphism,
    reparametrize,
)
from gerbecalc.core.chern import (
    bigon_residual,
    ch_additive_residual,
    ch_closed_residuals,
    ch_glue_residuals,
    ch_rescale_residual,
    chern_number,
    cs,
    cs_gauge_residuals,
    evaluate_in_chunks,
    loop_residual,
    odd_chern_closed_residual,
    odd_chern_shift_residual,
    pullback_residuals,
    stokes_fiber_residual,
    transgression_residuals,
    triangle_primitive,
    triangle_residual,
    twist_invariance_residuals,
    winding_number,
)
from gerbecalc.core.cover import SampleBank, refine, refinement_map, sub_seed, translation_map
from gerbecalc.core.deligne import pull_gerbe, random_deligne_one
from gerbecalc.core.expression import parse_expr
from gerbecalc.core.forms import JetForm, parse_form
from gerbecalc.core.global_forms import pointwise_residual
from gerbecalc.core.jet import Jet
from gerbecalc.utils.exceptions import CompatibilityError, FormShapeError


def worst(report) -> float:
    return max(value for value, _ in report.values())


def pulled(conn, chart_map):
    gerbe = pull_gerbe(conn.gerbe, chart_map)
    bundle = pull_bundle(conn.bundle, chart_map, gerbe)
    return pull_connection(conn, chart_map, bundle)


@pytest.fixture(scope="module")
def small_bank(cover2):
    return SampleBank(cover2, 6, 1)


@pytest.fixture(scope="module")
def rank_two(gerbe2):
    bundle, conn = make_trivial_bundle(gerbe2, 2)
    return conn, perturb(conn, 1), perturb(conn, 2, amplitude=0.4)


# ========== 짝수 Chern 지표 ==========

def test_ch_is_twisted_closed_and_glues(rank_two, bank2):
    _, conn, _ = rank_two
    closed = ch_closed_residuals(conn, bank2)
    assert set(closed) == {"twisted_closed", "graded_1"}
    assert worst(closed) <= 1e-7
    glued = ch_glue_residuals(conn, bank2)
    assert set(glued) == {"ch_0", "ch_1", "H"}
    assert worst(glued) <= 1e-8


def test_ch_is_additive(gerbe2, small_bank):
    _, line = make_line_bundle(gerbe2, 1)
    _, trivial = make_trivial_bundle(gerbe2, 2)
    assert worst(ch_additive_residual(perturb(line, 3), perturb(trivial, 4), small_bank)) <= 1e-8


def test_ch_additive_rejects_mixed_gerbes(gerbe2, flat_gerbe, small_bank):
    _, a = make_line_bundle(gerbe2, 1)
    _, b = make_line_bundle(flat_gerbe, 1)
    with pytest.raises(CompatibilityError):
        ch_additive_residual(a, b, small_bank)


def test_ch_rescales_under_curving_shift(rank_two, cover2, small_bank):
    _, conn, _ = rank_two
    xi = parse_form("(0.3*sin(2*pi*x2)) dx1^dx2", cover2.variables, 2)
    assert worst(ch_rescale_residual(conn, xi, small_bank)) <= 1e-8


def test_twisted_identities_with_nonzero_H_on_t3(twisted_gerbe3, cover3, bank3):
    h_size, _ = pointwise_residual(twisted_gerbe3.h_form(), bank3.charts())
    assert 1.0 < h_size <= 2 * math.pi + 1e-9
    _, conn = make_trivial_bundle(twisted_gerbe3, 2)
    conn = perturb(conn, 4)
    closed = ch_closed_residuals(conn, bank3)
    assert set(closed) == {"twisted_closed", "graded_1"}
    assert worst(closed) <= 1e-7
    xi = parse_form("(0.3*sin(2*pi*x2)) dx1^dx3", cover3.variables, 2)
    assert worst(ch_rescale_residual(conn, xi, bank3)) <= 1e-8


@pytest.mark.parametrize("k", [-2, -1, 0, 1, 2])
def test_chern_number_of_line_bundles(flat_gerbe, gerbe2, cover2, k):
    for gerbe in (flat_gerbe, gerbe2):
        _, conn = make_line_bundle(gerbe, k)
        assert abs(chern_number(conn) - k) <= 1e-8


def test_chern_number_survives_refinement_and_translation(gerbe2, cover2):
    _, conn = make_line_bundle(gerbe2, 2)
    conn = perturb(conn, 9)
    refined = pulled(conn, refinement_map(refine(cover2, 2)))
    moved = pulled(conn, translation_map(cover2, (1, 2)))
    for candidate in (conn, refined, moved):
        assert abs(chern_number(candidate) - 2) <= 1e-8


# ========== Chern-Simons ==========

def test_transgression_on_affine_paths(rank_two, bank2):
    start, middle, end = rank_two
    for path in (affine_path(start, middle), affine_path(middle, end)):
        report = transgression_residuals(path, bank2, 16)
        assert set(report) == {"transgression", "cs_gluing"}
        assert worst(report) <= 1e-6


def test_transgression_of_line_bundle_path(gerbe2, bank2):
    _, conn = make_line_bundle(gerbe2, 1)
    path = affine_path(conn, perturb(conn, 3))
    assert worst(transgression_residuals(path, bank2, 16)) <= 1e-6


def test_loop_path_has_vanishing_cs(rank_two, bank2):
    start, middle, _ = rank_two
    path = affine_path(start, middle)
    assert worst(loop_residual(path, bank2, 16)) <= 1e-6
    # 고리 자체의 전이 항등식 (끝점이 같음)
    assert worst(transgression_residuals(loop_path(path), bank2, 16)) <= 1e-6


def test_bigon_with_shared_endpoints(rank_two, cover2):
    start, middle, _ = rank_two
    bank = SampleBank(cover2, 3, 2)
    alpha = affine_path(start, middle)
    phi = random_automorphism(middle.bundle, sub_seed(0, "bigon"))
    detour = reparametrize(alpha, parse_expr("t^2*(3 - 2*t)", ("t",)))
    assert worst(bigon_residual(alpha, detour, bank, 8)) <= 1e-5
    with pytest.raises(CompatibilityError):
        bigon_residual(alpha, gauge_path(middle, phi), bank, 8)


def test_transgression_converges_with_nodes_on_a_stiff_path(rank_two, small_bank):
    start, middle, _ = rank_two
    stiff = reparametrize(affine_path(start, middle), parse_expr("(exp(3*t) - 1)/(exp(3) - 1)", ("t",)))
    coarse = transgression_residuals(stiff, small_bank, 4)["transgression"][0]
    fine = transgression_residuals(stiff, small_bank, 16)["transgression"][0]
    assert coarse > 1e-8
    assert fine <= 1e-9
    assert fine * 1e3 <= coarse


def test_primitives_evaluated_in_chunks_match_single_batch(rank_two, cover2, monkeypatch):
    start, middle, end = rank_two
    chart = cover2.charts[0]
    coords = np.random.default_rng(5).uniform(chart.lower, chart.upper, size=(5, 2))
    forms = (triangle_primitive(start, middle, end, 4), cs(affine_path(start, middle), 4))
    whole = [form.evaluate(chart.index, coords, 1) for form in forms]
    # 조각 하나에 기저점 하나씩 (triangle 은 (점, s) 쌍 하나씩)
    monkeypatch.setattr(settings, "EVAL_CHUNK_POINTS", 4)
    for form, expected in zip(forms, whole):
        chunked = form.evaluate(chart.index, coords, 1)
        assert chunked.npoints == expected.npoints == 5
        assert (chunked - expected).max_abs() <= 1e-12


def test_chunked_evaluation_fills_missing_coefficients():
    coords = np.linspace(0.0, 1.0, 7)[:, None]
    calls = []

    def evaluate(block):
        calls.append(len(block))
        form = JetForm.constant(1.0, 1, len(block), 1)
        if block[0, 0] > 0.4:
            # 뒤쪽 조각에만 dx 계수가 있다
            form.coefficients[(0,)] = Jet.constant(2.0, len(block), 1, 1, (1, 1))
        return form

    result = evaluate_in_chunks(evaluate, coords, per_point=2, budget=6)
    assert calls == [3, 3, 1]
    assert result.npoints == 7
    assert np.allclose(result.scalar_coefficient(()), 1.0)
    assert np.allclose(result.scalar_coefficient((0,)), [0, 0, 0, 2, 2, 2, 2])
    single = evaluate_in_chunks(evaluate, coords, per_point=2, budget=100)
    assert single.npoints == 7 and calls[-1] == 7


def test_cs_is_additive_up_to_triangle_primitive(rank_two, cover2):
    start, middle, end = rank_two
    bank = SampleBank(cover2, 3, 2)
    report = triangle_residual(start, middle, end, bank, 8)
    assert set(report) == {"triangle"}
    assert worst(report) <= 1e-5


def test_cs_is_gauge_invariant(rank_two, small_bank):
    start, middle, _ = rank_two
    path = affine_path(start, middle)
    phi = random_automorphism(path.bundle, sub_seed(0, "cs_gauge", 1))
    report = cs_gauge_residuals(path, phi, small_bank, 16)
    assert set(report) == {"cs", "ch"}
    assert worst(report) <= 1e-7


def test_stokes_for_fiber_integration(cover2, bank2):
    variables = cover2.variables + ("t",)
    omega = parse_form(
        "(t^2) dx1^dt + (t*sin(2*pi*x2)) dx2^dt + (cos(2*pi*x1)*t) dx1^dx2 + (t^3*sin(2*pi*x1))",
        variables
    )
    assert worst(stokes_fiber_residual(omega, bank2, 16)) <= 1e-10
    with pytest.raises(FormShapeError):
        stokes_fiber_residual(parse_form("(x1) dx2", cover2.variables, 1), bank2)


# ========== 홀수 Chern 지표 ==========

@pytest.mark.parametrize("phase, axis, expected", [
    ("exp(2*pi*i*x1)", 1, 1),
    ("exp(-4*pi*i*x2)", 2, -2),
    ("exp(2*pi*i*(x1 + 3*x2))", 2, 3),
])
def test_winding_of_central_automorphisms(flat_gerbe, phase, axis, expected):
    bundle, conn = make_trivial_bundle(flat_gerbe, 1)
    phi = central_automorphism(bundle, parse_expr(phase, flat_gerbe.variables))
    assert abs(winding_number(conn, phi, axis) - expected) <= 1e-8


def test_winding_scales_with_rank(gerbe2, small_bank):
    bundle, conn = make_trivial_bundle(gerbe2, 2)
    conn = perturb(conn, 6)
    phi = central_automorphism(bundle, parse_expr("exp(2*pi*i*x2)", gerbe2.variables))
    assert abs(winding_number(conn, phi, 2) - 2) <= 1e-8
    assert worst(odd_chern_closed_residual(conn, phi, small_bank)) <= 1e-7


def test_odd_chern_naturality(gerbe2, cover2, small_bank):
    bundle, conn = make_trivial_bundle(gerbe2, 2)
    conn = perturb(conn, 6)
    phi = central_automorphism(bundle, parse_expr("exp(2*pi*i*x1)", gerbe2.variables))
    xi = parse_form("(0.3*sin(2*pi*x2)) dx1^dx2", cover2.variables, 2)
    assert worst(odd_chern_shift_residual(conn, phi, xi, small_bank)) <= 1e-8
    twisted = twist_invariance_residuals(conn, random_deligne_one(cover2, 2), small_bank, phi)
    assert set(twisted) == {"ch", "odd_chern"}
    assert worst(twisted) <= 1e-7
    pulled_report = pullback_residuals(conn, translation_map(cover2, (1, 0)), small_bank, phi)
    assert worst(pulled_report) <= 1e-7
