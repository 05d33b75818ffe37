"""
전역 스칼라 형식
차트별 대표로 주어진 형식 족, 접합 잔차, 토러스 사이클 적분
"""
from abc import ABC, abstractmethod
from typing import Callable, Dict, Iterable, List, Optional, Sequence, Tuple, Union

import numpy as np

from gerbecalc.config import settings
from gerbecalc.core.cover import ChartMap, Cover, SampleSet
from gerbecalc.core.forms import JetForm, MatrixForm
from gerbecalc.core.jet import Jet
from gerbecalc.core.quadrature import periodic_trapezoid
from gerbecalc.utils.exceptions import FormShapeError
from gerbecalc.utils.logger import setup_logger

logger = setup_logger(__name__)

Number = Union[int, float, complex]


class GlobalForm(ABC):
    """
    토러스 위 전역 스칼라 형식 (차트별 평가)

    evaluate(chart, coords, order) 는 차트 좌표 (P, d) 에서 크기 1
    JetForm 을 돌려준다. degree 가 None 이면 차수가 섞인 합.
    """

    def __init__(self, cover: Cover, degree: Optional[int] = None):
        self.cover = cover
        self.degree = degree

    @abstractmethod
    def evaluate(self, chart: int, coords: np.ndarray, order: int) -> JetForm:
        ...

    # ---------- 조합 ----------

    def __add__(self, other: "GlobalForm") -> "GlobalForm":
        return LinearCombination([(1.0, self), (1.0, other)])

    def __sub__(self, other: "GlobalForm") -> "GlobalForm":
        return LinearCombination([(1.0, self), (-1.0, other)])

    def __neg__(self) -> "GlobalForm":
        return LinearCombination([(-1.0, self)])

    def scale(self, factor: Number) -> "GlobalForm":
        return LinearCombination([(factor, self)])

    def wedge(self, other: "GlobalForm") -> "GlobalForm":
        return WedgeForm(self, other)

    def wedge_exp(self, xi: "GlobalForm", sign: int = 1) -> "GlobalForm":
        """self ∧ exp(sign·ξ)"""
        return ExpWedgeForm(self, xi, sign)

    def part(self, degree: int) -> "GlobalForm":
        return PartForm(self, degree)

    def twisted_d(self, h: "GlobalForm") -> "GlobalForm":
        """(d + H∧) self"""
        return TwistedDifferential(self, h)

    def d(self) -> "GlobalForm":
        return TwistedDifferential(self, ZeroForm(self.cover))

    # ---------- 평가 도우미 ----------

    def on_samples(self, samples: SampleSet, order: int = 0, chart: Optional[int] = None) -> JetForm:
        """표본 집합에서 평가 (기본: 기준 차트 좌표)"""
        chart = samples.simplex.anchor if chart is None else chart
        return self.evaluate(chart, samples.coords[chart], order)


class ExpressionForm(GlobalForm):
    """모든 차트에서 같은 주기 식으로 주어진 형식"""

    def __init__(self, cover: Cover, form: MatrixForm):
        if form.size != 1:
            raise FormShapeError("global forms are scalar")
        if form.variables != cover.variables:
            raise FormShapeError(f"form ambient {form.variables} does not match cover {cover.variables}")
        super().__init__(cover, form._degree)
        self.form = form

    def evaluate(self, chart: int, coords: np.ndarray, order: int) -> JetForm:
        if order > settings.JET_ORDER:
            raise FormShapeError(f"jet order {order} exceeds JET_ORDER={settings.JET_ORDER}")
        return self.form.evaluate(coords, order)


class ChartwiseForm(GlobalForm):
    """차트마다 다른 기호 대표"""

    def __init__(self, cover: Cover, forms: Dict[int, MatrixForm], degree: Optional[int] = None):
        super().__init__(cover, degree)
        self.forms = forms

    def evaluate(self, chart: int, coords: np.ndarray, order: int) -> JetForm:
        if order > settings.JET_ORDER:
            raise FormShapeError(f"jet order {order} exceeds JET_ORDER={settings.JET_ORDER}")
        return self.forms[chart].evaluate(coords, order)


class ZeroForm(GlobalForm):

    def __init__(self, cover: Cover, degree: Optional[int] = None):
        super().__init__(cover, degree)

    def evaluate(self, chart: int, coords: np.ndarray, order: int) -> JetForm:
        return JetForm.zero(1, self.cover.dim, len(coords), order)


class FunctionForm(GlobalForm):
    """평가 함수로 정의된 형식 (ch, cs 등)"""

    def __init__(
        self,
        cover: Cover,
        func: Callable[[int, np.ndarray, int], JetForm],
        degree: Optional[int] = None,
        label: str = ""
    ):
        super().__init__(cover, degree)
        self.func = func
        self.label = label

    def evaluate(self, chart: int, coords: np.ndarray, order: int) -> JetForm:
        return self.func(chart, coords, order)

    def __repr__(self) -> str:
        return f"FunctionForm({self.label})"


class LinearCombination(GlobalForm):

    def __init__(self, terms: Sequence[Tuple[Number, GlobalForm]]):
        if not terms:
            raise FormShapeError("empty linear combination")
        degrees = {form.degree for _, form in terms}
        super().__init__(terms[0][1].cover, degrees.pop() if len(degrees) == 1 else None)
        self.terms = list(terms)

    def evaluate(self, chart: int, coords: np.ndarray, order: int) -> JetForm:
        total = None
        for factor, form in self.terms:
            value = form.evaluate(chart, coords, order)
            if factor != 1:
                value = value.scale(factor)
            total = value if total is None else total + value
        return total


class WedgeForm(GlobalForm):

    def __init__(self, left: GlobalForm, right: GlobalForm):
        degree = None
        if left.degree is not None and right.degree is not None:
            degree = left.degree + right.degree
        super().__init__(left.cover, degree)
        self.left = left
        self.right = right

    def evaluate(self, chart: int, coords: np.ndarray, order: int) -> JetForm:
        return self.left.evaluate(chart, coords, order).wedge(self.right.evaluate(chart, coords, order))


class ExpWedgeForm(GlobalForm):

    def __init__(self, form: GlobalForm, xi: GlobalForm, sign: int):
        super().__init__(form.cover, None)
        self.form = form
        self.xi = xi
        self.sign = sign

    def evaluate(self, chart: int, coords: np.ndarray, order: int) -> JetForm:
        xi = self.xi.evaluate(chart, coords, order)
        if self.sign < 0:
            xi = -xi
        return self.form.evaluate(chart, coords, order).wedge(xi.exp_even(self.cover.dim))


class PartForm(GlobalForm):

    def __init__(self, form: GlobalForm, degree: int):
        super().__init__(form.cover, degree)
        self.form = form

    def evaluate(self, chart: int, coords: np.ndarray, order: int) -> JetForm:
        return self.form.evaluate(chart, coords, order).part(self.degree)


class TwistedDifferential(GlobalForm):
    """(d+H)ω, ω 는 한 차수 높은 제트가 필요"""

    def __init__(self, form: GlobalForm, h: GlobalForm):
        super().__init__(form.cover, None)
        self.form = form
        self.h = h

    def evaluate(self, chart: int, coords: np.ndarray, order: int) -> JetForm:
        value = self.form.evaluate(chart, coords, order + 1)
        result = value.exterior_d()
        h = self.h.evaluate(chart, coords, order)
        if h.coefficients:
            result = result + h.wedge(value.truncate(order))
        return result


class PulledForm(GlobalForm):
    """
    차트 대응을 따른 당김 f*ω

    대상 차트 r 의 값은 원천 차트 ρ(r) 에서 x + offsets[r] 로 평가한다.
    """

    def __init__(self, form: GlobalForm, chart_map: ChartMap):
        if form.cover is not chart_map.source:
            raise FormShapeError("form does not live on the source cover of the chart map")
        super().__init__(chart_map.target, form.degree)
        self.form = form
        self.chart_map = chart_map

    def evaluate(self, chart: int, coords: np.ndarray, order: int) -> JetForm:
        shifted = coords + self.chart_map.offsets[chart]
        return self.form.evaluate(self.chart_map.rho[chart], shifted, order)


# ========== 잔차 / 적분 ==========

def pointwise_residual(form: GlobalForm, sample_sets: Iterable[SampleSet], order: int = 0) -> Tuple[float, int]:
    """
    표본점에서 형식 값의 최대 절댓값

    Returns:
        (최대 잔차, 평가 점 수)
    """
    worst, points = 0.0, 0
    for samples in sample_sets:
        if samples.count == 0:
            continue
        worst = max(worst, form.on_samples(samples, order).max_abs())
        points += samples.count
    return worst, points


def gluing_residual(form: GlobalForm, edge_samples: Iterable[SampleSet]) -> Tuple[float, int]:
    """
    1-단체 (i, j) 표본에서 차트 i 대표와 차트 j 대표의 차

    좌표가 격자 평행이동으로만 다르므로 dx 기저는 공통이다.
    """
    worst, points = 0.0, 0
    for samples in edge_samples:
        if samples.count == 0:
            continue
        i, j = samples.simplex.charts
        a = form.evaluate(i, samples.coords[i], 0)
        b = form.evaluate(j, samples.coords[j], 0)
        worst = max(worst, (a - b).max_abs())
        points += samples.count
    return worst, points


def evaluate_global(form: GlobalForm, points: np.ndarray, order: int = 0) -> JetForm:
    """[0,1)^d 점들에서 평가 (점마다 위치한 차트 사용, 입력 순서 유지)"""
    points = np.atleast_2d(np.asarray(points, dtype=float))
    cover = form.cover
    charts = cover.locate(points)
    pieces: List[Tuple[np.ndarray, JetForm]] = []
    for chart in np.unique(charts):
        indices = np.nonzero(charts == chart)[0]
        pieces.append((indices, form.evaluate(int(chart), points[indices], order)))
    order_back = np.argsort(np.concatenate([indices for indices, _ in pieces]))
    keys = set()
    for _, value in pieces:
        keys |= set(value.coefficients)
    coefficients = {}
    for key in keys:
        values = [value.scalar_coefficient(key) for _, value in pieces]
        coefficients[key] = np.concatenate(values)[order_back]
    return JetForm(
        {key: Jet([values[:, None, None]], cover.dim) for key, values in coefficients.items()},
        1, cover.dim, len(points), 0
    )


def integrate_cycle(
    form: GlobalForm,
    axes: Sequence[int],
    grid: Optional[int] = None,
    base: Optional[Sequence[float]] = None
) -> complex:
    """
    좌표 부분토러스 위 적분 (주기 사다리꼴)

    Args:
        form: 전역 형식 (차수는 len(axes) 성분을 사용)
        axes: 1부터 시작하는 좌표 번호 (예: (1, 2) 는 x1-x2 토러스)
        grid: 축당 노드 수 (기본 settings.CYCLE_GRID)
        base: 나머지 좌표 값 (기본 0)

    Returns:
        복소 적분값
    """
    cover = form.cover
    axes = tuple(int(a) - 1 for a in axes)
    if not axes or len(set(axes)) != len(axes) or min(axes) < 0 or max(axes) >= cover.dim:
        raise FormShapeError(f"invalid cycle axes {tuple(a + 1 for a in axes)} for dimension {cover.dim}")
    if form.degree is not None and form.degree != len(axes):
        raise FormShapeError(f"cannot integrate a {form.degree}-form over a {len(axes)}-cycle")
    grid = settings.CYCLE_GRID if grid is None else grid
    nodes, weights = periodic_trapezoid(grid)
    base = np.zeros(cover.dim) if base is None else np.asarray(base, dtype=float) % 1.0
    mesh = np.meshgrid(*([nodes] * len(axes)), indexing="ij")
    points = np.tile(base, (grid ** len(axes), 1))
    for k, axis in enumerate(axes):
        points[:, axis] = mesh[k].ravel()
    weight = np.prod(np.meshgrid(*([weights] * len(axes)), indexing="ij"), axis=0).ravel()
    values = evaluate_global(form, points).scalar_coefficient(tuple(sorted(axes)))
    return complex(np.sum(weight * values))
