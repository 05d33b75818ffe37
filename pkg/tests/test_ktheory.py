"""
생성원, 인증서, 육각형 도식, 꼬임 변경 호환 테스트
"""
import pytest

from gerbecalc.core.bundle import affine_path, make_line_bundle, make_trivial_bundle, perturb
from gerbecalc.core.cover import SampleBank, refine, refinement_map, translation_map
from gerbecalc.core.deligne import random_deligne_one
from gerbecalc.core.forms import parse_form
from gerbecalc.core.global_forms import PulledForm, ZeroForm, pointwise_residual
from gerbecalc.core.ktheory import (
    FormalDifference,
    Generator,
    certificate_suite,
    difference,
    hexagon_suite,
    make_generator,
    map_R,
    map_a,
    pullback_difference,
    random_odd_form,
    refine_difference,
    twist_compat_suite,
)
from gerbecalc.utils.exceptions import CertificateError, CompatibilityError

CERTIFICATE_TOLERANCE = 1e-5


def worst(report) -> float:
    return max(value for value, _ in report.values())


@pytest.fixture(scope="module")
def small_bank(cover2):
    return SampleBank(cover2, 4, 3)


@pytest.fixture(scope="module")
def connections(gerbe2):
    _, trivial = make_trivial_bundle(gerbe2, 2)
    _, line = make_line_bundle(gerbe2, 1)
    return trivial, line


# ========== 생성원 ==========

def test_generator_rejects_families_and_even_forms(connections, cover2):
    trivial, _ = connections
    with pytest.raises(CompatibilityError):
        Generator(trivial.bundle, trivial, ZeroForm(cover2, 2), "even")
    with pytest.raises(CompatibilityError):
        make_generator(affine_path(trivial, perturb(trivial, 1)))


def test_formal_difference_needs_one_gerbe(connections, flat_gerbe):
    trivial, _ = connections
    _, other = make_trivial_bundle(flat_gerbe, 1)
    with pytest.raises(CompatibilityError):
        FormalDifference(make_generator(trivial), make_generator(other))


def test_a_of_theta_has_zero_bundle(gerbe2, cover2, small_bank):
    theta = random_odd_form(cover2, 4)
    generator = map_a(theta, gerbe2)
    assert generator.bundle.rank == 0
    x = difference(generator)
    expected = theta.twisted_d(gerbe2.h_form())
    assert pointwise_residual(map_R(x) - expected, small_bank.charts())[0] <= 1e-8


# ========== 인증서 ==========

@pytest.mark.parametrize("kind", ["reflexive", "gauge", "chain", "a_map"])
def test_certificates_verify(connections, small_bank, kind):
    trivial, _ = connections
    report = certificate_suite(perturb(trivial, 2), kind, small_bank, seed=5, nodes=12)
    assert set(report) == {"certificate", "R_invariance"}
    assert worst(report) <= CERTIFICATE_TOLERANCE


def test_line_bundle_gauge_certificate(connections, small_bank):
    _, line = connections
    assert worst(certificate_suite(line, "gauge", small_bank, seed=1, nodes=12)) <= CERTIFICATE_TOLERANCE


def test_certificate_defect_is_detected(connections, small_bank):
    trivial, _ = connections
    report = certificate_suite(trivial, "gauge", small_bank, seed=5, defect=0.1, nodes=12)
    assert report["certificate"][0] > 1e-3


def test_unknown_certificate_kind(connections, small_bank):
    trivial, _ = connections
    with pytest.raises(CertificateError):
        certificate_suite(trivial, "transitive", small_bank)


# ========== 육각형 ==========

HEXAGON_KEYS = {"ch_I_R", "R_closed", "R_a", "kerI_certificate", "kerI_R", "kerR_R", "kerR_theta_closed"}


def test_hexagon_identities(connections, small_bank):
    trivial, line = connections
    for conn in (trivial, line):
        report = hexagon_suite(conn, small_bank, seed=3, nodes=12)
        assert set(report) == HEXAGON_KEYS
        assert worst(report) <= CERTIFICATE_TOLERANCE


def test_hexagon_with_explicit_second_connection(connections, small_bank):
    trivial, _ = connections
    report = hexagon_suite(trivial, small_bank, perturb(trivial, 8), seed=1, nodes=12)
    assert worst(report) <= CERTIFICATE_TOLERANCE


def test_hexagon_defect_breaks_kernel_replay(connections, small_bank):
    trivial, _ = connections
    report = hexagon_suite(trivial, small_bank, seed=3, defect=0.1, nodes=12)
    assert report["kerI_certificate"][0] > 1e-3
    assert report["R_a"][0] <= 1e-8


# ========== 꼬임 변경 ==========

def test_twist_change_compatibility(connections, cover2, small_bank):
    trivial, line = connections
    alpha = random_deligne_one(cover2, 3)
    xi = parse_form("(0.2*cos(2*pi*x1)) dx1^dx2", cover2.variables, 2)
    for a, b in ((trivial, perturb(trivial, 8)), (line, line)):
        report = twist_compat_suite(a, b, alpha, xi, small_bank, seed=5)
        assert {"I_xi", "R_xi", "xi_a", "I_phi", "R_phi", "roundtrip", "roundtrip_omega"} <= set(report)
        assert worst(report) <= 1e-7


# ========== 세분 / 평행이동 ==========

def test_R_commutes_with_refinement_and_translation(connections, cover2, cover3):
    trivial, line = connections
    x = FormalDifference(
        make_generator(perturb(trivial, 2), random_odd_form(cover2, 1)),
        make_generator(line, random_odd_form(cover2, 2))
    )
    refinement = refine(cover2, 2)
    refined = refine_difference(x, refinement)
    fine_bank = SampleBank(refinement.fine, 3, 1)
    expected = PulledForm(map_R(x), refinement_map(refinement))
    assert pointwise_residual(map_R(refined) - expected, fine_bank.charts())[0] <= 1e-8

    moved = pullback_difference(x, (1, 2))
    expected = PulledForm(map_R(x), translation_map(cover2, (1, 2)))
    assert pointwise_residual(map_R(moved) - expected, SampleBank(cover2, 4, 2).charts())[0] <= 1e-8

    with pytest.raises(CompatibilityError):
        refine_difference(x, refine(cover3, 2))


# ========== H ≠ 0 (T³) ==========

def test_hexagon_and_twist_change_with_nonzero_H(twisted_gerbe3, cover3):
    bank = SampleBank(cover3, 2, 4)
    h_size, _ = pointwise_residual(twisted_gerbe3.h_form(), bank.charts())
    assert h_size > 1.0
    _, trivial = make_trivial_bundle(twisted_gerbe3, 1)
    conn = perturb(trivial, 3)

    report = hexagon_suite(conn, bank, seed=2, nodes=12)
    assert set(report) == HEXAGON_KEYS
    assert report["R_closed"][0] <= 1e-8
    assert report["R_a"][0] <= 1e-8
    assert worst(report) <= CERTIFICATE_TOLERANCE

    alpha = random_deligne_one(cover3, 3)
    xi = parse_form("(0.2*cos(2*pi*x3)) dx1^dx2", cover3.variables, 2)
    report = twist_compat_suite(conn, perturb(conn, 8), alpha, xi, bank, seed=5)
    assert worst(report) <= 1e-7
