"""
정수 코호몰로지, Smith 표준형, Dixmier-Douady 코사이클 테스트
"""
import math

import numpy as np
import pytest
from hypothesis import given, settings as hyp_settings
from hypothesis import strategies as st

from gerbecalc.core.deligne import apply_twist_morphism, random_deligne_one
from gerbecalc.core.nerve import (
    INFINITE_ORDER,
    AbstractComplex,
    IntCochain,
    apply_coboundary,
    builtin_complex,
    cohomologous,
    cohomology,
    coordinate_cocycle,
    coboundary_matrix,
    cup_product,
    dd_cocycle,
    is_coboundary,
    load_complex,
    nerve_complex,
    parse_complex,
    smith_normal_form,
    torsion_order,
)
from gerbecalc.utils.exceptions import CohomologyError

small_matrices = st.integers(min_value=1, max_value=5).flatmap(
    lambda rows: st.integers(min_value=1, max_value=5).flatmap(
        lambda cols: st.lists(
            st.lists(st.integers(min_value=-6, max_value=6), min_size=cols, max_size=cols),
            min_size=rows, max_size=rows,
        )
    )
)


def object_matmul(a, b):
    return np.dot(np.asarray(a, dtype=object), np.asarray(b, dtype=object))


# ========== Smith 표준형 ==========

@hyp_settings(max_examples=100, deadline=None)
@given(small_matrices)
def test_smith_normal_form_factorizes(rows):
    matrix = np.array(rows, dtype=object)
    u, d, v = smith_normal_form(matrix)
    assert (object_matmul(object_matmul(u, d), v) == matrix).all()
    diagonal = [int(d[k, k]) for k in range(min(d.shape))]
    off_diagonal = d.copy()
    for k in range(min(d.shape)):
        off_diagonal[k, k] = 0
    assert not off_diagonal.any()
    nonzero = [x for x in diagonal if x]
    assert all(x > 0 for x in nonzero)
    assert diagonal[: len(nonzero)] == nonzero
    for a, b in zip(nonzero, nonzero[1:]):
        assert b % a == 0
    # 유니모듈러
    assert abs(round(float(np.linalg.det(u.astype(float))))) == 1
    assert abs(round(float(np.linalg.det(v.astype(float))))) == 1


def test_smith_normal_form_known_example():
    _, d, _ = smith_normal_form([[2, 4, 4], [-6, 6, 12], [10, -4, -16]])
    assert [int(d[k, k]) for k in range(3)] == [2, 6, 12]


def test_smith_rejects_non_integer_entries():
    with pytest.raises(CohomologyError):
        smith_normal_form([[1.5, 0], [0, 1]])


def test_coboundary_matrices_compose_to_zero(cover2):
    complex_ = nerve_complex(cover2)
    for q in range(2):
        first = coboundary_matrix(complex_, q)
        second = coboundary_matrix(complex_, q + 1)
        assert first.shape == (complex_.count(q + 1), complex_.count(q))
        assert not (second @ first).any()
    with pytest.raises(CohomologyError):
        coboundary_matrix(complex_, 4)


def test_rp2_coboundary_has_a_single_factor_of_two():
    matrix = coboundary_matrix(builtin_complex("rp2"), 1)
    assert matrix.shape == (10, 15)
    _, d, _ = smith_normal_form(matrix)
    diagonal = [int(d[k, k]) for k in range(min(d.shape)) if d[k, k]]
    assert diagonal == [1] * 9 + [2]


def test_circle_vertex_coboundary_is_an_incidence_matrix():
    matrix = coboundary_matrix(builtin_complex("circle"), 0)
    assert matrix.shape == (3, 3)
    assert np.linalg.matrix_rank(matrix.astype(float)) == 2
    assert sorted(np.abs(matrix).sum(axis=1).tolist()) == [2, 2, 2]
    assert coboundary_matrix(AbstractComplex([]), 0).shape == (0, 0)


# ========== 코호몰로지 ==========

@pytest.mark.parametrize("name, q, expected", [
    ("circle", 0, (1, [])),
    ("circle", 1, (1, [])),
    ("torus1", 1, (1, [])),
    ("torus2", 1, (2, [])),
    ("torus2", 2, (1, [])),
    ("rp2", 1, (0, [])),
    ("rp2", 2, (0, [2])),
])
def test_builtin_cohomology(name, q, expected):
    assert cohomology(builtin_complex(name), q) == expected


def test_torus3_nerve_top_cohomology(cover3):
    complex_ = nerve_complex(cover3)
    assert cohomology(complex_, 3) == (1, [])
    assert cohomology(complex_, 1) == (3, [])


def test_cohomology_degree_range():
    with pytest.raises(CohomologyError):
        cohomology(builtin_complex("circle"), 4)
    with pytest.raises(CohomologyError):
        builtin_complex("klein")


def test_rp2_triangle_indicator_has_order_two():
    complex_ = builtin_complex("rp2")
    z = IntCochain(2, {(0, 1, 2): 1})
    assert torsion_order(complex_, z) == 2
    assert torsion_order(complex_, z.scale(2)) == 1
    assert torsion_order(complex_, z.scale(3)) == 2


def test_coboundaries_have_order_one(cover2):
    complex_ = nerve_complex(cover2)
    g = IntCochain.from_vector(complex_, 0, [3, -1, 0, 2, 0, 0, 5, 0, 1])
    boundary = apply_coboundary(complex_, g)
    assert not boundary.is_zero()
    assert is_coboundary(complex_, boundary)
    assert cohomologous(complex_, coordinate_cocycle(cover2, 0) + boundary, coordinate_cocycle(cover2, 0))
    edge = IntCochain(1, {complex_.simplices[1][0]: 1})
    with pytest.raises(CohomologyError):
        torsion_order(complex_, edge)


def test_cup_of_coordinate_classes_generates_top_cohomology(cover2, cover3):
    plane = nerve_complex(cover2)
    first, second = coordinate_cocycle(cover2, 0), coordinate_cocycle(cover2, 1)
    assert torsion_order(plane, first) == INFINITE_ORDER
    assert not cohomologous(plane, first, second)
    assert torsion_order(plane, cup_product(plane, first, second)) == INFINITE_ORDER

    space = nerve_complex(cover3)
    x, y, z = (coordinate_cocycle(cover3, axis) for axis in range(3))
    volume = cup_product(space, cup_product(space, x, y), z)
    assert apply_coboundary(space, volume).is_zero()
    assert torsion_order(space, volume) == math.inf


def test_parse_complex_fills_faces_and_reports_lines(tmp_path):
    complex_ = parse_complex("# triangle\n0 1 2\n\n2 3\n", name="tri")
    assert [complex_.count(q) for q in range(3)] == [4, 4, 1]
    with pytest.raises(CohomologyError, match="line 2"):
        parse_complex("0 1\n0 x\n")
    with pytest.raises(CohomologyError):
        parse_complex("1 1")
    with pytest.raises(CohomologyError):
        parse_complex("0 1 2 3 4 5")
    path = tmp_path / "square.complex"
    path.write_text("0 1\n1 2\n2 3\n0 3\n", encoding="utf-8")
    loaded = load_complex(path)
    assert loaded.name == "square"
    assert cohomology(loaded, 1) == (1, [])


def test_scenario_complex_files(scenario_dir):
    assert cohomology(load_complex(scenario_dir / "complexes" / "rp2.complex"), 2) == (0, [2])
    assert cohomology(load_complex(scenario_dir / "complexes" / "circle.complex"), 1) == (1, [])


# ========== Dixmier-Douady ==========

def test_dd_cocycle_of_trivial_gerbe_vanishes(cover3):
    from gerbecalc.core.deligne import trivial_gerbe

    cocycle = dd_cocycle(trivial_gerbe(cover3), nodes=8)
    assert cocycle.is_zero()
    assert cocycle.deviation == 0.0


def test_dd_cocycle_of_coboundary_gerbe_is_integral_torsion_free(gerbe3, cover3):
    complex_ = nerve_complex(cover3)
    cocycle = dd_cocycle(gerbe3, extra_points=2, nodes=12)
    assert cocycle.deviation <= 1e-6
    assert torsion_order(complex_, cocycle) == 1
    moved = apply_twist_morphism(gerbe3, random_deligne_one(cover3, 4))
    other = dd_cocycle(moved, extra_points=2, nodes=12)
    assert cohomologous(complex_, cocycle, other)
