"""
격자 덮개, 신경, 표본점, 세분 / 평행이동 사상 테스트
"""
import numpy as np
import pytest

from gerbecalc.core.cover import (
    SampleBank,
    build_torus_cover,
    compose_refinements,
    refine,
    refinement_map,
    sample_points,
    sub_seed,
    translation_map,
)
from gerbecalc.utils.exceptions import CoverError


def test_torus2_nerve_counts(cover2):
    counts = [len(cover2.simplices[k]) for k in range(4)]
    assert counts == [9, 36, 36, 9]
    # 오일러 지표 0
    assert sum((-1) ** k * c for k, c in enumerate(counts)) == 0


def test_circle_nerve_is_a_triangle():
    cover = build_torus_cover(1, 3, 0.05)
    assert [len(cover.simplices[k]) for k in range(2)] == [3, 3]
    assert cover.simplices[2] == []


def test_nerve_above_registered_dimension(cover3):
    nerve = cover3.nerve(4)
    counts = [len(nerve[k]) for k in range(5)]
    assert counts[0] == 27
    assert counts[3] == len(cover3.simplices[3])
    assert counts[4] > 0
    for simplex in nerve[4]:
        assert all(simplex[:i] + simplex[i + 1:] in nerve[3] for i in range(5))


@pytest.mark.parametrize("dim, grid, margin", [(0, 3, 0.05), (4, 3, 0.05), (2, 2, 0.05), (2, 3, 0.2), (2, 3, 0.0)])
def test_invalid_cover_parameters(dim, grid, margin):
    with pytest.raises(CoverError):
        build_torus_cover(dim, grid, margin)


def test_shift_is_antisymmetric_integer(cover2):
    for simplex in cover2.simplices[1]:
        i, j = simplex.charts
        assert np.array_equal(cover2.shift(i, j), -cover2.shift(j, i))
        assert set(np.abs(cover2.shift(i, j)).tolist()) <= {0, 1}


def test_sample_points_lie_in_every_chart(cover2):
    for simplex in cover2.simplices[2]:
        samples = sample_points(cover2, simplex, 25, seed=4)
        assert samples.count == 25
        for chart in simplex.charts:
            box = cover2.charts[chart]
            assert np.all(samples.coords[chart] > box.lower)
            assert np.all(samples.coords[chart] < box.upper)
        a, b = simplex.charts[:2]
        assert np.allclose(samples.coords[a] - samples.coords[b], cover2.shift(a, b))


def test_sample_bank_is_deterministic(cover2):
    first = SampleBank(cover2, 5, 9).edges()
    second = SampleBank(cover2, 5, 9).edges()
    for x, y in zip(first, second):
        anchor = x.simplex.anchor
        assert np.array_equal(x.coords[anchor], y.coords[anchor])
    other = SampleBank(cover2, 5, 10).edges()[0]
    assert not np.array_equal(other.coords[other.simplex.anchor], first[0].coords[first[0].simplex.anchor])


def test_sub_seed_separates_names():
    a = sub_seed(1, "x", 2).random(3)
    b = sub_seed(1, "x", 3).random(3)
    c = sub_seed(1, "x", 2).random(3)
    assert not np.allclose(a, b)
    assert np.array_equal(a, c)


def test_refinement_tau_is_floor_division(cover2):
    refinement = refine(cover2, 2)
    assert refinement.fine.grid == 6
    for chart in refinement.fine.charts:
        coarse = cover2.charts[refinement(chart.index)]
        assert coarse.multi_index == tuple(a // 2 for a in chart.multi_index)
    chart_map = refinement_map(refinement)
    assert np.all(chart_map.offsets == 0)
    with pytest.raises(CoverError):
        refine(cover2, 1)


def test_refinements_compose(cover2):
    first = refine(cover2, 2)
    second = refine(first.fine, 2)
    composed = compose_refinements(first, second)
    assert composed.fine is second.fine and composed.coarse is cover2
    assert composed.factor == 4
    for r in range(len(second.fine.charts)):
        assert composed(r) == first(second(r))
        fine = second.fine.charts[r]
        assert cover2.charts[composed(r)].multi_index == tuple(a // 4 for a in fine.multi_index)
    with pytest.raises(CoverError):
        compose_refinements(second, first)


def test_translation_map_permutes_charts(cover2):
    chart_map = translation_map(cover2, (1, 2))
    assert sorted(chart_map.rho) == list(range(len(cover2.charts)))
    for chart in cover2.charts:
        moved = cover2.charts[chart_map.rho[chart.index]]
        # 차트 좌표 x 는 원천 차트 좌표 x + offset
        assert np.allclose(chart.lower + chart_map.offsets[chart.index], moved.lower)
    with pytest.raises(CoverError):
        translation_map(cover2, (1,))
