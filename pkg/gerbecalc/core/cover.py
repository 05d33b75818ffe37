"""
평탄 토러스의 좋은 덮개
격자 차트, 신경(nerve), 차트 간 격자 평행이동, 표본점
"""
import hashlib
from dataclasses import dataclass, field
from itertools import product
from typing import Dict, Iterable, List, Optional, Tuple

import numpy as np

from gerbecalc.config import settings
from gerbecalc.core.expression import coordinate_names
from gerbecalc.utils.exceptions import CoverError
from gerbecalc.utils.logger import setup_logger

logger = setup_logger(__name__)

MAX_SIMPLEX_DIM = 3


def sub_seed(seed: int, *names: object) -> np.random.Generator:
    """(시드, 이름) 해시로 분기한 독립 난수 생성기"""
    digest = hashlib.sha256("/".join(str(n) for n in names).encode("utf-8")).digest()
    return np.random.default_rng([int(seed) & 0xFFFFFFFF, int.from_bytes(digest[:8], "little")])


@dataclass(frozen=True)
class Chart:
    """차트 상자 (들어올린 기본영역 좌표)"""
    index: int
    multi_index: Tuple[int, ...]
    lower: np.ndarray
    upper: np.ndarray


@dataclass(frozen=True)
class Simplex:
    """
    신경의 단체

    Note:
        - charts 는 정렬된 차트 번호, 기준(anchor) 차트는 charts[0]
        - lower/upper 는 기준 차트 좌표에서의 교집합 상자
        - offsets[c] = (기준 좌표) - (차트 c 좌표), 정수 격자 벡터
    """
    charts: Tuple[int, ...]
    lower: np.ndarray
    upper: np.ndarray
    offsets: Dict[int, np.ndarray] = field(hash=False, compare=False)

    @property
    def anchor(self) -> int:
        return self.charts[0]

    @property
    def dim(self) -> int:
        return len(self.charts) - 1

    def centroid(self) -> np.ndarray:
        return (self.lower + self.upper) / 2.0


@dataclass
class SampleSet:
    """
    단체 위의 표본점 (모든 구성 차트 좌표로 표현)

    coords[c] 의 shape 은 (P, D) 이며 앞 d 열은 차트 좌표,
    뒤 열은 t, s 같은 매개변수 (variables 에 이름이 있음).
    """
    simplex: Simplex
    coords: Dict[int, np.ndarray]
    variables: Tuple[str, ...]

    @property
    def count(self) -> int:
        return next(iter(self.coords.values())).shape[0]

    def with_parameter(self, name: str, values: np.ndarray) -> "SampleSet":
        """각 점을 매개변수 값마다 복제 (점 우선, 노드 다음 순서)"""
        values = np.asarray(values, dtype=float)
        coords = {}
        for chart, array in self.coords.items():
            repeated = np.repeat(array, len(values), axis=0)
            column = np.tile(values, array.shape[0])[:, None]
            coords[chart] = np.hstack([repeated, column])
        return SampleSet(self.simplex, coords, self.variables + (name,))


class Cover:
    """
    T^d 의 격자 덮개 U_a = (a/N - m, (a+1)/N + m)

    Note:
        - 차트 번호는 다중지표의 C-순서 평탄화
        - 신경은 3-단체(4중 교집합)까지
    """

    def __init__(self, dim: int, grid: int, margin: float):
        if not 1 <= dim <= 3:
            raise CoverError(f"torus dimension must be 1..3, got {dim}")
        if grid < 3:
            raise CoverError(f"grid must be at least 3, got {grid}")
        bound = (0.5 - 1.0 / grid) / 2.0
        if not 0 < margin < bound:
            raise CoverError(f"margin {margin} outside (0, {bound:.6g}) for grid {grid}")
        self.dim = dim
        self.grid = grid
        self.margin = margin
        self.shape = (grid,) * dim
        self.charts: List[Chart] = []
        for multi in product(range(grid), repeat=dim):
            a = np.array(multi, dtype=float)
            self.charts.append(Chart(
                index=int(np.ravel_multi_index(multi, self.shape)),
                multi_index=tuple(multi),
                lower=a / grid - margin,
                upper=(a + 1) / grid + margin
            ))
        self.simplices: Dict[int, List[Simplex]] = {k: [] for k in range(MAX_SIMPLEX_DIM + 1)}
        self._by_key: Dict[Tuple[int, ...], Simplex] = {}
        self._build_nerve()
        logger.debug(
            f"🔄 덮개 생성: d={dim}, N={grid}, m={margin}, "
            + ", ".join(f"{k}-단체 {len(v)}개" for k, v in self.simplices.items())
        )

    @property
    def variables(self) -> Tuple[str, ...]:
        return coordinate_names(self.dim)

    # ========== 신경 ==========

    def _lattice_offset(self, anchor: Chart, chart: Chart) -> Optional[np.ndarray]:
        """anchor 상자와 겹치는 chart 상자의 유일한 격자 평행이동"""
        offset = np.zeros(self.dim, dtype=int)
        for axis in range(self.dim):
            found = None
            for v in (-1, 0, 1):
                lo = max(anchor.lower[axis], chart.lower[axis] + v)
                hi = min(anchor.upper[axis], chart.upper[axis] + v)
                if lo < hi:
                    found = v
                    break
            if found is None:
                return None
            offset[axis] = found
        return offset

    def _make_simplex(self, charts: Tuple[int, ...]) -> Optional[Simplex]:
        anchor = self.charts[charts[0]]
        lower, upper = anchor.lower.copy(), anchor.upper.copy()
        offsets = {charts[0]: np.zeros(self.dim, dtype=int)}
        for index in charts[1:]:
            chart = self.charts[index]
            offset = self._lattice_offset(anchor, chart)
            if offset is None:
                return None
            lower = np.maximum(lower, chart.lower + offset)
            upper = np.minimum(upper, chart.upper + offset)
            if np.any(lower >= upper):
                return None
            offsets[index] = offset
        return Simplex(charts, lower, upper, offsets)

    def _build_nerve(self) -> None:
        for chart in self.charts:
            self._register(self._make_simplex((chart.index,)))
        for k in range(1, MAX_SIMPLEX_DIM + 1):
            for base in self.simplices[k - 1]:
                for index in range(base.charts[-1] + 1, len(self.charts)):
                    candidate = base.charts + (index,)
                    # 모든 면이 이미 신경에 있어야 함
                    if any(candidate[:i] + candidate[i + 1:] not in self._by_key for i in range(len(candidate))):
                        continue
                    simplex = self._make_simplex(candidate)
                    if simplex is not None:
                        self._register(simplex)

    def _register(self, simplex: Simplex) -> None:
        self.simplices[simplex.dim].append(simplex)
        self._by_key[simplex.charts] = simplex

    def simplex(self, charts: Iterable[int]) -> Simplex:
        """차트 집합의 단체 (순서 무관)"""
        key = tuple(sorted(charts))
        if len(set(key)) != len(key):
            raise CoverError(f"repeated chart in simplex {key}")
        if not key:
            raise CoverError("empty simplex")
        try:
            return self._by_key[key]
        except KeyError:
            raise CoverError(f"charts {key} have empty common intersection") from None

    def nerve(self, max_dim: int) -> Dict[int, List[Tuple[int, ...]]]:
        """
        신경의 단체 (정렬된 차트 튜플), max_dim 차원까지

        MAX_SIMPLEX_DIM 을 넘는 차원은 등록하지 않고 이 자리에서 계산한다.
        """
        out = {k: [s.charts for s in self.simplices[k]] for k in range(min(max_dim, MAX_SIMPLEX_DIM) + 1)}
        known = set(self._by_key)
        for k in range(MAX_SIMPLEX_DIM + 1, max_dim + 1):
            out[k] = []
            for base in out[k - 1]:
                for index in range(base[-1] + 1, len(self.charts)):
                    candidate = base + (index,)
                    if any(candidate[:i] + candidate[i + 1:] not in known for i in range(len(candidate))):
                        continue
                    if self._make_simplex(candidate) is not None:
                        out[k].append(candidate)
                        known.add(candidate)
        return out

    def shift(self, i: int, j: int) -> np.ndarray:
        """shift(i, j) = (차트 i 좌표) - (차트 j 좌표), 겹침 위에서"""
        if i == j:
            return np.zeros(self.dim, dtype=int)
        simplex = self.simplex((i, j))
        return simplex.offsets[j] - simplex.offsets[i]

    # ========== 위치 찾기 ==========

    def locate(self, points: np.ndarray) -> np.ndarray:
        """[0,1)^d 점을 포함하는 차트 (점 좌표가 곧 차트 좌표)"""
        points = np.atleast_2d(points)
        multi = np.clip(np.floor(points * self.grid).astype(int), 0, self.grid - 1)
        return np.ravel_multi_index(tuple(multi.T), self.shape)

    def __repr__(self) -> str:
        return f"Cover(dim={self.dim}, grid={self.grid}, margin={self.margin})"


def build_torus_cover(dim: int, grid: int, margin: float) -> Cover:
    """
    T^d 의 좋은 덮개 생성

    Args:
        dim: 토러스 차원 (1..3)
        grid: 축당 차트 수 N (>= 3)
        margin: 여유 m, 0 < m < (1/2 - 1/N)/2

    Returns:
        Cover
    """
    return Cover(dim, grid, margin)


def sample_points(
    cover: Cover,
    simplex: Simplex,
    count: int,
    seed: int,
    shrink: Optional[float] = None
) -> SampleSet:
    """
    단체 내부의 균등 표본점

    Args:
        cover: 덮개
        simplex: 신경의 단체
        count: 점 개수 (0 허용)
        seed: 시드 (단체별로 분기)
        shrink: 변마다 축소 비율 (기본 settings.SAMPLE_SHRINK)

    Returns:
        SampleSet, coords[c] - coords[c'] = shift(c, c')
    """
    if not simplex.charts:
        raise CoverError("empty simplex")
    shrink = settings.SAMPLE_SHRINK if shrink is None else shrink
    width = simplex.upper - simplex.lower
    lower = simplex.lower + shrink * width
    upper = simplex.upper - shrink * width
    rng = sub_seed(seed, "samples", *simplex.charts)
    anchor_points = lower + (upper - lower) * rng.random((count, cover.dim))
    coords = {
        chart: anchor_points - simplex.offsets[chart]
        for chart in simplex.charts
    }
    return SampleSet(simplex, coords, cover.variables)


@dataclass(frozen=True)
class Refinement:
    """
    세분 덮개와 지표 사상 τ (세분 차트 -> 원래 차트)

    V_r ⊂ U_τ(r) 이며 두 차트의 좌표는 같은 들어올림이다.
    """
    fine: Cover
    coarse: Cover
    factor: int
    tau: Tuple[int, ...]

    def __call__(self, index: int) -> int:
        return self.tau[index]


def refine(cover: Cover, factor: int) -> Refinement:
    """
    축마다 factor 배 세분한 덮개와 τ

    Args:
        cover: 원래 덮개
        factor: 세분 배수 (>= 2)
    """
    if factor < 2:
        raise CoverError(f"refinement factor must be >= 2, got {factor}")
    fine = Cover(cover.dim, cover.grid * factor, cover.margin / factor)
    tau = []
    for chart in fine.charts:
        coarse_multi = tuple(a // factor for a in chart.multi_index)
        coarse = cover.charts[int(np.ravel_multi_index(coarse_multi, cover.shape))]
        if np.any(chart.lower < coarse.lower) or np.any(chart.upper > coarse.upper):
            raise CoverError(f"fine chart {chart.index} is not contained in coarse chart {coarse.index}")
        tau.append(coarse.index)
    logger.debug(f"🔄 세분: N={cover.grid} -> {fine.grid}")
    return Refinement(fine, cover, factor, tuple(tau))


def compose_refinements(first: Refinement, second: Refinement) -> Refinement:
    """τ1∘τ2 (second 는 first.fine 의 세분)"""
    if second.coarse is not first.fine:
        raise CoverError("refinements do not compose")
    tau = tuple(first.tau[second.tau[r]] for r in range(len(second.fine.charts)))
    return Refinement(second.fine, first.coarse, first.factor * second.factor, tau)


class SampleBank:
    """덮개의 단체별 표본 캐시 (같은 시드면 같은 점)"""

    def __init__(self, cover: Cover, count: int, seed: int):
        self.cover = cover
        self.count = count
        self.seed = seed
        self._cache: Dict[Tuple[int, ...], SampleSet] = {}

    def for_simplex(self, simplex: Simplex) -> SampleSet:
        if simplex.charts not in self._cache:
            self._cache[simplex.charts] = sample_points(self.cover, simplex, self.count, self.seed)
        return self._cache[simplex.charts]

    def by_dim(self, dim: int) -> List[SampleSet]:
        return [self.for_simplex(s) for s in self.cover.simplices[dim]]

    def charts(self) -> List[SampleSet]:
        return self.by_dim(0)

    def edges(self) -> List[SampleSet]:
        return self.by_dim(1)


@dataclass(frozen=True)
class ChartMap:
    """
    차트 대응 ρ: 대상 덮개 차트 r -> 원천 덮개 차트 ρ(r)

    대상 차트 r 의 좌표 x 는 원천 차트 ρ(r) 의 좌표 x + offsets[r] 로
    보내진다. 세분(offsets = 0)과 격자 평행이동 당김이 모두 이 꼴이다.
    """
    source: Cover
    target: Cover
    rho: Tuple[int, ...]
    offsets: np.ndarray

    def image(self, charts: Iterable[int]) -> Tuple[int, ...]:
        return tuple(self.rho[r] for r in charts)

    def offset_from(self, source_chart: int, target_chart: int) -> np.ndarray:
        """원천 차트 source_chart 좌표로 쓴 식을 대상 차트 좌표로 옮기는 평행이동"""
        return self.offsets[target_chart] + self.source.shift(source_chart, self.rho[target_chart])


def refinement_map(refinement: Refinement) -> ChartMap:
    fine = refinement.fine
    return ChartMap(refinement.coarse, fine, refinement.tau, np.zeros((len(fine.charts), fine.dim)))


def translation_map(cover: Cover, steps: Iterable[int]) -> ChartMap:
    """
    격자 평행이동 f(x) = x + s/N 의 당김

    Args:
        steps: 축별 정수 격자 칸 수 s
    """
    steps = np.asarray(list(steps))
    if steps.shape != (cover.dim,) or not np.issubdtype(steps.dtype, np.integer):
        raise CoverError(f"translation must be {cover.dim} integer grid steps, got {steps.tolist()}")
    rho, offsets = [], []
    for chart in cover.charts:
        moved = np.asarray(chart.multi_index) + steps
        wrap = np.floor_divide(moved, cover.grid)
        rho.append(int(np.ravel_multi_index(tuple(moved % cover.grid), cover.shape)))
        offsets.append(steps / cover.grid - wrap)
    return ChartMap(cover, cover, tuple(rho), np.asarray(offsets, dtype=float))
