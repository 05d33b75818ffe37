"""
꼬인 번들 / 호환 접속 / 자기동형 테스트
"""
import numpy as np
import pytest

from gerbecalc.core.bundle import (
    affine_path,
    apply_morphism,
    central_automorphism,
    curvature,
    curvature_jet,
    direct_sum,
    direct_sum_conn,
    gauge_bundle,
    gauge_transform,
    make_line_bundle,
    make_trivial_bundle,
    perturb,
    pull_bundle,
    pull_connection,
    pullback_translation,
    random_automorphism,
    restrict_refine,
    transport_twist,
    validate_bundle,
    validate_connection,
    validate_morphism,
    zero_bundle,
)
from gerbecalc.core.cover import SampleBank, refine, refinement_map, sub_seed, translation_map
from gerbecalc.core.deligne import pull_gerbe, random_deligne_one, validate_gerbe
from gerbecalc.core.expression import parse_expr
from gerbecalc.utils.exceptions import CompatibilityError, CoverError, MorphismError

POINTWISE = 1e-8


def assert_valid(report, tolerance=POINTWISE):
    failing = {name: value for name, (value, _) in report.items() if not value <= tolerance}
    assert not failing, failing


@pytest.mark.parametrize("k", [-2, -1, 0, 1, 2])
def test_line_bundles_over_trivial_gerbe(flat_gerbe, bank2, k):
    bundle, conn = make_line_bundle(flat_gerbe, k)
    assert bundle.rank == 1
    assert_valid(validate_bundle(bundle, bank2))
    assert_valid(validate_connection(conn, bank2))


@pytest.mark.parametrize("k", [-1, 2])
def test_line_bundles_over_coboundary_gerbe(gerbe2, bank2, k):
    bundle, conn = make_line_bundle(gerbe2, k)
    assert_valid(validate_bundle(bundle, bank2))
    assert_valid(validate_connection(conn, bank2))


def test_line_bundle_needs_two_dimensions():
    from gerbecalc.core.cover import build_torus_cover
    from gerbecalc.core.deligne import trivial_gerbe

    with pytest.raises(CoverError):
        make_line_bundle(trivial_gerbe(build_torus_cover(1, 3, 0.05)), 1)


def test_direct_sum_and_perturbation(gerbe2, bank2):
    line, line_conn = make_line_bundle(gerbe2, 1)
    trivial, trivial_conn = make_trivial_bundle(gerbe2, 2)
    total = direct_sum(line, trivial)
    assert total.rank == 3
    conn = perturb(direct_sum_conn(line_conn, trivial_conn, total), seed=3)
    assert_valid(validate_bundle(total, bank2))
    assert_valid(validate_connection(conn, bank2))


def test_direct_sum_requires_same_gerbe(gerbe2, flat_gerbe):
    with pytest.raises(CompatibilityError):
        direct_sum(make_line_bundle(gerbe2, 1)[0], make_line_bundle(flat_gerbe, 1)[0])


def test_gauge_bundle_carries_a_compatible_standard_connection(gerbe2, bank2):
    base, _ = make_trivial_bundle(gerbe2, 2)
    moved, morphism = gauge_bundle(base, seed=5)
    assert moved.structure == "gauge"
    assert_valid(validate_bundle(moved, bank2))
    assert_valid(validate_connection(moved.standard, bank2))
    assert_valid(validate_morphism(morphism, bank2))


def test_random_automorphism_and_gauge_transform(gerbe2, bank2):
    bundle, conn = make_trivial_bundle(gerbe2, 2)
    phi = random_automorphism(bundle, sub_seed(0, "test", "phi"))
    assert_valid(validate_morphism(phi, bank2))
    assert_valid(validate_connection(gauge_transform(perturb(conn, 2), phi), bank2))
    # 다른 번들 위 접속
    _, foreign = make_trivial_bundle(gerbe2, 2)
    with pytest.raises(MorphismError):
        gauge_transform(foreign, phi)


def test_central_automorphism_is_a_morphism(flat_gerbe, bank2):
    bundle, _ = make_trivial_bundle(flat_gerbe, 1)
    phi = central_automorphism(bundle, parse_expr("exp(2*pi*i*x1)", flat_gerbe.variables))
    assert_valid(validate_morphism(phi, bank2))


def test_apply_morphism_moves_transitions(gerbe2, bank2):
    bundle, _ = make_line_bundle(gerbe2, 1)
    rng = sub_seed(3, "apply")
    phi = random_automorphism(bundle, rng).phi
    target, morphism = apply_morphism(bundle, phi)
    assert morphism.source is bundle and morphism.target is target
    assert_valid(validate_bundle(target, bank2))


def test_twist_transport(gerbe2, bank2, cover2):
    bundle, conn = make_trivial_bundle(gerbe2, 2)
    alpha = random_deligne_one(cover2, 8)
    moved, moved_conn = transport_twist(bundle, perturb(conn, 1), alpha)
    assert moved.structure == "transport"
    assert_valid(validate_gerbe(moved.gerbe, bank2))
    assert_valid(validate_bundle(moved, bank2))
    assert_valid(validate_connection(moved_conn, bank2))


def test_zero_bundle_is_trivially_valid(gerbe2, bank2):
    bundle, conn = zero_bundle(gerbe2)
    assert bundle.rank == 0
    assert all(value == 0.0 for value, _ in validate_bundle(bundle, bank2).values())
    assert all(value == 0.0 for value, _ in validate_connection(conn, bank2).values())


def test_affine_path_is_compatible_at_every_parameter(gerbe2, bank2):
    _, conn = make_line_bundle(gerbe2, 1)
    path = affine_path(conn, perturb(conn, 4))
    assert path.parameters == ("t",)
    assert_valid(validate_connection(path, bank2))
    assert np.allclose(
        path.at("t", 0.0).evaluate(0, np.array([[0.1, 0.2]]), 0).scalar_coefficient((0,)),
        conn.evaluate(0, np.array([[0.1, 0.2]]), 0).scalar_coefficient((0,)),
    )
    with pytest.raises(CompatibilityError):
        affine_path(path, conn)


@pytest.mark.parametrize("chart_map_factory", [
    lambda cover: refinement_map(refine(cover, 2)),
    lambda cover: translation_map(cover, (1, 1)),
])
def test_pulled_bundles_stay_valid(gerbe2, cover2, chart_map_factory):
    chart_map = chart_map_factory(cover2)
    bundle, conn = make_line_bundle(gerbe2, 1)
    gerbe = pull_gerbe(gerbe2, chart_map)
    pulled = pull_bundle(bundle, chart_map, gerbe)
    bank = SampleBank(chart_map.target, 4, 1)
    assert_valid(validate_bundle(pulled, bank))
    assert_valid(validate_connection(pull_connection(perturb(conn, 5), chart_map, pulled), bank))


def test_symbolic_curvature_matches_pointwise_curvature(gerbe2, bank2):
    _, conn = make_line_bundle(gerbe2, 2)
    conn = perturb(conn, 8)
    symbolic = curvature(conn)
    for samples in bank2.charts():
        chart = samples.simplex.anchor
        coords = samples.coords[chart]
        expected = curvature_jet(conn, chart, coords, 0)
        actual = symbolic[chart].evaluate(coords, 0, conn.variables)
        assert (actual - expected).max_abs() <= POINTWISE


def test_restrict_refine_and_translation_pullback(gerbe2, cover2):
    bundle, conn = make_line_bundle(gerbe2, 1)
    conn = perturb(conn, 6)
    for chart_map, pull in [
        (refinement_map(refine(cover2, 2)), restrict_refine),
        (translation_map(cover2, (2, 1)), pullback_translation),
    ]:
        gerbe = pull_gerbe(gerbe2, chart_map)
        pulled, pulled_conn = pull(bundle, conn, chart_map, gerbe)
        bank = SampleBank(chart_map.target, 4, 2)
        assert_valid(validate_bundle(pulled, bank))
        assert_valid(validate_connection(pulled_conn, bank))
    with pytest.raises(CoverError):
        chart_map = refinement_map(refine(cover2, 2))
        pullback_translation(bundle, conn, chart_map, pull_gerbe(gerbe2, chart_map))
