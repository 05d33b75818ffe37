"""
정수 코체인 복합체와 코호몰로지
추상 단체 복합체, Smith 표준형, 꼬임(torsion) 차수, Dixmier-Douady 정수 3-코사이클
"""
import math
from dataclasses import dataclass, field
from functools import lru_cache
from itertools import combinations
from pathlib import Path
from typing import Dict, Iterable, List, Optional, Sequence, Tuple, Union

import numpy as np

from gerbecalc.config import settings
from gerbecalc.core.cover import Cover, build_torus_cover, sample_points
from gerbecalc.core.deligne import GerbeConn, canonical
from gerbecalc.core.fields import zero_form_jet
from gerbecalc.core.quadrature import gauss_legendre_unit
from gerbecalc.schemas.complexes import STATIC_COMPLEXES, TORUS_COMPLEXES, TORUS_GRID, TORUS_MARGIN
from gerbecalc.utils.exceptions import CohomologyError
from gerbecalc.utils.logger import setup_logger

logger = setup_logger(__name__)

MAX_COMPLEX_DIM = 4
INFINITE_ORDER = math.inf

Key = Tuple[int, ...]
SparseRows = Dict[int, Dict[int, int]]


# ========== 추상 단체 복합체 ==========

class AbstractComplex:
    """
    면(face)으로 닫힌 추상 단체 복합체

    Note:
        - simplices[q] 는 정렬된 꼭짓점 튜플의 정렬 리스트 (q = 0..MAX_COMPLEX_DIM)
        - H^q 계산에는 (q+1)-단체까지 필요하므로 4차원까지 보관
    """

    def __init__(self, simplices: Iterable[Sequence[int]], name: str = "", vertex_count: Optional[int] = None):
        closure: Dict[int, set] = {q: set() for q in range(MAX_COMPLEX_DIM + 1)}
        if vertex_count is not None:
            closure[0].update((v,) for v in range(vertex_count))
        for raw in simplices:
            simplex = tuple(sorted(int(v) for v in raw))
            if not simplex:
                continue
            if len(set(simplex)) != len(simplex):
                raise CohomologyError(f"repeated vertex in simplex {tuple(raw)}")
            if simplex[0] < 0:
                raise CohomologyError(f"negative vertex index in simplex {tuple(raw)}")
            if len(simplex) - 1 > MAX_COMPLEX_DIM:
                raise CohomologyError(f"simplex {simplex} exceeds dimension {MAX_COMPLEX_DIM}")
            for size in range(1, len(simplex) + 1):
                closure[size - 1].update(combinations(simplex, size))
        self.name = name
        self.simplices: Dict[int, List[Key]] = {q: sorted(items) for q, items in closure.items()}
        self.vertex_count = max((s[0] for s in self.simplices[0]), default=-1) + 1
        self._index = {q: {s: n for n, s in enumerate(items)} for q, items in self.simplices.items()}

    @property
    def dim(self) -> int:
        """최고 차원 (빈 복합체는 -1)"""
        return max((q for q, items in self.simplices.items() if items), default=-1)

    def count(self, q: int) -> int:
        return len(self.simplices.get(q, ()))

    def index(self, simplex: Key) -> int:
        return self._index[len(simplex) - 1][simplex]

    def __repr__(self) -> str:
        counts = ", ".join(str(self.count(q)) for q in range(MAX_COMPLEX_DIM + 1))
        return f"AbstractComplex({self.name or 'anonymous'}: {counts})"


@dataclass
class IntCochain:
    """
    정수 q-코체인 (정렬된 단체 키에 저장, 치환에 대해 교대)

    deviation 은 반올림 전 정수에서 벗어난 최대 크기 (추출된 코사이클에만 의미)
    """
    dim: int
    values: Dict[Key, int] = field(default_factory=dict)
    deviation: float = 0.0

    def value(self, simplex: Sequence[int]) -> int:
        sign, key = canonical(simplex)
        if key is None:
            return 0
        return sign * self.values.get(key, 0)

    def vector(self, complex_: AbstractComplex) -> List[int]:
        return [self.values.get(s, 0) for s in complex_.simplices.get(self.dim, [])]

    @classmethod
    def from_vector(cls, complex_: AbstractComplex, dim: int, vector: Sequence[int]) -> "IntCochain":
        return cls(dim, {s: int(v) for s, v in zip(complex_.simplices[dim], vector) if v})

    def _combine(self, other: "IntCochain", factor: int) -> "IntCochain":
        if other.dim != self.dim:
            raise CohomologyError(f"cochain degrees differ: {self.dim} vs {other.dim}")
        values = dict(self.values)
        for key, v in other.values.items():
            values[key] = values.get(key, 0) + factor * v
        return IntCochain(self.dim, {k: v for k, v in values.items() if v})

    def __add__(self, other: "IntCochain") -> "IntCochain":
        return self._combine(other, 1)

    def __sub__(self, other: "IntCochain") -> "IntCochain":
        return self._combine(other, -1)

    def scale(self, factor: int) -> "IntCochain":
        return IntCochain(self.dim, {k: factor * v for k, v in self.values.items() if factor * v})

    def is_zero(self) -> bool:
        return not any(self.values.values())


# ========== 복합체 생성 ==========

@lru_cache(maxsize=16)
def nerve_complex(cover: Cover, max_dim: int = MAX_COMPLEX_DIM) -> AbstractComplex:
    """덮개의 신경 (꼭짓점 = 차트 번호)"""
    simplices = cover.nerve(max_dim)
    items = [s for q in range(max_dim + 1) for s in simplices[q]]
    logger.debug(f"🔄 신경 구성: {cover}, 단체 수 {[len(simplices[q]) for q in range(max_dim + 1)]}")
    return AbstractComplex(items, name=f"nerve(T^{cover.dim}, N={cover.grid})", vertex_count=len(cover.charts))


def builtin_complex(name: str) -> AbstractComplex:
    """
    내장 복합체

    Args:
        name: circle | rp2 | torus1 | torus2 | torus3

    Raises:
        CohomologyError: 알 수 없는 이름
    """
    if name in STATIC_COMPLEXES:
        return AbstractComplex(STATIC_COMPLEXES[name], name=name)
    if name in TORUS_COMPLEXES:
        cover = build_torus_cover(TORUS_COMPLEXES[name], TORUS_GRID, TORUS_MARGIN)
        return nerve_complex(cover)
    known = sorted(list(STATIC_COMPLEXES) + list(TORUS_COMPLEXES))
    raise CohomologyError(f"unknown built-in complex '{name}' (known: {', '.join(known)})")


def parse_complex(text: str, name: str = "") -> AbstractComplex:
    """
    단체 목록 텍스트 파싱 (한 줄에 꼭짓점 번호들, '#' 으로 시작하는 줄은 무시)

    면은 자동으로 채운다.

    Raises:
        CohomologyError: 정수가 아닌 토큰 (줄 번호 포함)
    """
    simplices = []
    for number, raw in enumerate(text.splitlines(), start=1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        try:
            simplices.append(tuple(int(token) for token in line.split()))
        except ValueError:
            raise CohomologyError(f"line {number}: expected vertex indices, got '{line}'") from None
    return AbstractComplex(simplices, name=name)


def load_complex(path: Union[str, Path]) -> AbstractComplex:
    path = Path(path)
    return parse_complex(path.read_text(encoding="utf-8"), name=path.stem)


# ========== 쌍대경계 행렬 ==========

def _coboundary_rows(complex_: AbstractComplex, q: int) -> SparseRows:
    """δ_q 의 희소 행 (행 = (q+1)-단체 번호, 열 = q-단체 번호)"""
    rows: SparseRows = {}
    for r, simplex in enumerate(complex_.simplices.get(q + 1, [])):
        rows[r] = {
            complex_.index(simplex[:i] + simplex[i + 1:]): (-1) ** i
            for i in range(len(simplex))
        }
    return rows


def coboundary_matrix(complex_: AbstractComplex, q: int) -> np.ndarray:
    """
    δ_q : C^q → C^{q+1} 정수 행렬

    (δc)(v0..v_{q+1}) = Σ (-1)^i c(v0..v̂i..v_{q+1})
    """
    if not 0 <= q < MAX_COMPLEX_DIM:
        raise CohomologyError(f"coboundary degree must be in 0..{MAX_COMPLEX_DIM - 1}, got {q}")
    matrix = np.zeros((complex_.count(q + 1), complex_.count(q)), dtype=np.int64)
    for r, row in _coboundary_rows(complex_, q).items():
        for c, v in row.items():
            matrix[r, c] = v
    return matrix


def apply_coboundary(complex_: AbstractComplex, z: IntCochain) -> IntCochain:
    """δz"""
    if not 0 <= z.dim < MAX_COMPLEX_DIM:
        raise CohomologyError(f"cannot take coboundary of a degree {z.dim} cochain")
    vector = z.vector(complex_)
    rows = _coboundary_rows(complex_, z.dim)
    out = [sum(v * vector[c] for c, v in rows[r].items()) for r in range(len(rows))]
    return IntCochain.from_vector(complex_, z.dim + 1, out)


# ========== Smith 표준형 ==========

def _to_object(matrix) -> np.ndarray:
    source = np.asarray(matrix)
    if source.ndim != 2:
        raise CohomologyError(f"expected a 2-D integer matrix, got shape {source.shape}")
    out = np.zeros(source.shape, dtype=object)
    for i, row in enumerate(source.tolist()):
        for j, v in enumerate(row):
            if int(v) != v:
                raise CohomologyError(f"non-integer entry {v} at ({i}, {j})")
            out[i, j] = int(v)
    return out


def _identity(size: int) -> np.ndarray:
    out = np.zeros((size, size), dtype=object)
    for k in range(size):
        out[k, k] = 1
    return out


def _smith(
    matrix,
    rhs: Optional[List[int]] = None,
    track: bool = False
) -> Tuple[List[int], Optional[np.ndarray], Optional[np.ndarray], Optional[np.ndarray], Optional[List[int]]]:
    """
    정수 Smith 소거 (임의 정밀도)

    D = L·M·R 로 대각화하고, track 이면 U = L⁻¹, V = R⁻¹ 을 같이 갱신한다.
    rhs 가 주어지면 L·rhs 를 돌려준다.

    Returns:
        (0 이 아닌 대각 성분, D, U, V, L·rhs)
    """
    a = _to_object(matrix)
    m, n = a.shape
    w = None if rhs is None else [int(v) for v in rhs]
    u = _identity(m) if track else None
    v = _identity(n) if track else None

    def row_add(target: int, source: int, factor: int) -> None:
        # row_target += factor * row_source
        a[target, :] = a[target, :] + factor * a[source, :]
        if w is not None:
            w[target] += factor * w[source]
        if u is not None:
            u[:, source] = u[:, source] - factor * u[:, target]

    def col_add(target: int, source: int, factor: int) -> None:
        a[:, target] = a[:, target] + factor * a[:, source]
        if v is not None:
            v[source, :] = v[source, :] - factor * v[target, :]

    def swap_rows(i: int, j: int) -> None:
        if i == j:
            return
        a[[i, j], :] = a[[j, i], :]
        if w is not None:
            w[i], w[j] = w[j], w[i]
        if u is not None:
            u[:, [i, j]] = u[:, [j, i]]

    def swap_cols(i: int, j: int) -> None:
        if i == j:
            return
        a[:, [i, j]] = a[:, [j, i]]
        if v is not None:
            v[[i, j], :] = v[[j, i], :]

    diagonal: List[int] = []
    for t in range(min(m, n)):
        while True:
            block = a[t:, t:]
            nonzero = np.argwhere(block != 0)
            if len(nonzero) == 0:
                break
            i, j = min(nonzero.tolist(), key=lambda ij: abs(block[ij[0], ij[1]]))
            swap_rows(t, t + i)
            swap_cols(t, t + j)
            pivot = a[t, t]
            clean = True
            for i in range(t + 1, m):
                if a[i, t] != 0:
                    row_add(i, t, -(a[i, t] // pivot))
                    clean = clean and a[i, t] == 0
            for j in range(t + 1, n):
                if a[t, j] != 0:
                    col_add(j, t, -(a[t, j] // pivot))
                    clean = clean and a[t, j] == 0
            if not clean:
                continue
            # d_t | d_{t+1} 보장
            bad = np.argwhere(a[t + 1:, t + 1:] % pivot != 0)
            if len(bad) > 0:
                row_add(t, t + 1 + int(bad[0][0]), 1)
                continue
            break
        if a[t, t] == 0:
            break
        if a[t, t] < 0:
            a[t, :] = -a[t, :]
            if w is not None:
                w[t] = -w[t]
            if u is not None:
                u[:, t] = -u[:, t]
        diagonal.append(a[t, t])
    return diagonal, a, u, v, w


def smith_normal_form(matrix) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
    """
    M = U·D·V, U/V 는 유니모듈러, D 는 d1 | d2 | ... 인 대각 행렬

    Args:
        matrix: 정수 행렬 (m, n)

    Returns:
        (U, D, V): Python int 를 담은 object 배열
    """
    _, d, u, v, _ = _smith(matrix, track=True)
    return u, d, v


@dataclass
class _Reduction:
    """소거 결과: 불변 인자와 (오른쪽 변이 있으면) 변환된 오른쪽 변"""
    factors: List[int]
    pairs: List[Tuple[int, int]]
    tail: List[int]


def _unit_eliminate(rows: SparseRows, rhs: Optional[Dict[int, int]]) -> int:
    """±1 피벗을 Markowitz 비용 순으로 소거, 소거한 피벗 수 (rows, rhs 는 제자리 갱신)"""
    columns: Dict[int, set] = {}
    for r, row in rows.items():
        for c in row:
            columns.setdefault(c, set()).add(r)
    units = 0
    while True:
        best = None
        for r, row in rows.items():
            for c, value in row.items():
                if value in (1, -1):
                    cost = (len(row) - 1) * (len(columns[c]) - 1)
                    if best is None or cost < best[0]:
                        best = (cost, r, c)
                        if cost == 0:
                            break
            if best is not None and best[0] == 0:
                break
        if best is None:
            return units
        _, r, c = best
        pivot_row = rows.pop(r)
        pivot = pivot_row[c]
        for col in pivot_row:
            columns[col].discard(r)
        for i in list(columns[c]):
            row = rows[i]
            factor = row[c] * pivot
            for col, value in pivot_row.items():
                updated = row.get(col, 0) - factor * value
                if updated:
                    if col not in row:
                        columns[col].add(i)
                    row[col] = updated
                elif col in row:
                    del row[col]
                    columns[col].discard(i)
            if rhs is not None:
                rhs[i] = rhs.get(i, 0) - factor * rhs.get(r, 0)
        if rhs is not None:
            rhs.pop(r, None)
        units += 1


def _reduce(rows: SparseRows, rhs: Optional[Dict[int, int]] = None) -> _Reduction:
    """희소 ±1 소거 후 남은 블록을 조밀 Smith 소거"""
    rows = {r: dict(row) for r, row in rows.items()}
    rhs = None if rhs is None else dict(rhs)
    units = _unit_eliminate(rows, rhs)
    live = [r for r, row in rows.items() if row]
    empty = [r for r, row in rows.items() if not row]
    columns = sorted({c for r in live for c in rows[r]})
    position = {c: k for k, c in enumerate(columns)}
    dense = np.zeros((len(live), len(columns)), dtype=object)
    for k, r in enumerate(live):
        for c, value in rows[r].items():
            dense[k, position[c]] = value
    w = None if rhs is None else [rhs.get(r, 0) for r in live]
    diagonal, _, _, _, w = _smith(dense, w)
    if len(live):
        logger.debug(f"🔄 ±1 피벗 {units}개 소거 후 조밀 블록 {dense.shape}")
    if rhs is None:
        return _Reduction([1] * units + diagonal, [], [])
    pairs = list(zip(diagonal, w[:len(diagonal)]))
    tail = list(w[len(diagonal):]) + [rhs.get(r, 0) for r in empty]
    return _Reduction([1] * units + diagonal, pairs, tail)


# ========== 코호몰로지 ==========

def cohomology(complex_: AbstractComplex, q: int) -> Tuple[int, List[int]]:
    """
    H^q(K; ℤ) = ker δ_q / im δ_{q-1}

    Returns:
        (Betti 수, 1 보다 큰 불변 인자 목록)
    """
    if not 0 <= q < MAX_COMPLEX_DIM:
        raise CohomologyError(f"cohomology degree must be in 0..{MAX_COMPLEX_DIM - 1}, got {q}")
    rank_q = len(_reduce(_coboundary_rows(complex_, q)).factors)
    lower = _reduce(_coboundary_rows(complex_, q - 1)).factors if q > 0 else []
    betti = complex_.count(q) - rank_q - len(lower)
    torsion = [int(d) for d in lower if d > 1]
    logger.info(f"✅ H^{q}({complex_.name}) = Z^{betti}" + "".join(f" + Z/{d}" for d in torsion))
    return betti, torsion


def torsion_order(complex_: AbstractComplex, z: IntCochain) -> Union[int, float]:
    """
    n·z ∈ im δ 인 가장 작은 n ≥ 1 (없으면 INFINITE_ORDER)

    Raises:
        CohomologyError: z 가 코사이클이 아님
    """
    if z.dim < MAX_COMPLEX_DIM:
        if not apply_coboundary(complex_, z).is_zero():
            raise CohomologyError(f"degree {z.dim} cochain is not a cocycle")
    vector = z.vector(complex_)
    if not any(vector):
        return 1
    if z.dim == 0:
        return INFINITE_ORDER
    reduction = _reduce(
        _coboundary_rows(complex_, z.dim - 1),
        {r: v for r, v in enumerate(vector) if v}
    )
    if any(reduction.tail):
        return INFINITE_ORDER
    order = 1
    for d, w in reduction.pairs:
        order = math.lcm(order, d // math.gcd(d, w))
    return order


def is_coboundary(complex_: AbstractComplex, z: IntCochain) -> bool:
    return torsion_order(complex_, z) == 1


def cohomologous(complex_: AbstractComplex, first: IntCochain, second: IntCochain) -> bool:
    """두 정수 코사이클의 차가 정수 코체인의 δ 인지 (정확히 풂)"""
    return is_coboundary(complex_, first - second)


# ========== 코사이클 생성 ==========

def coordinate_cocycle(cover: Cover, axis: int) -> IntCochain:
    """
    좌표 axis 의 정수 1-코사이클 c(i,j) = x^(j) - x^(i) (H¹ 생성원)

    x^(i) 는 차트 i 의 들어올린 좌표, axis 는 0 부터 센다 (x1 -> 0)
    """
    values = {}
    for simplex in cover.simplices[1]:
        i, j = simplex.charts
        jump = -int(cover.shift(i, j)[axis])
        if jump:
            values[(i, j)] = jump
    return IntCochain(1, values)


def cup_product(complex_: AbstractComplex, left: IntCochain, right: IntCochain) -> IntCochain:
    """(a ∪ b)(v0..v_{p+q}) = a(v0..vp) · b(vp..v_{p+q})"""
    p, q = left.dim, right.dim
    values = {}
    for simplex in complex_.simplices.get(p + q, []):
        product = left.value(simplex[:p + 1]) * right.value(simplex[p:])
        if product:
            values[simplex] = product
    return IntCochain(p + q, values)


# ========== Dixmier-Douady 코사이클 ==========

def _branch_log(g: GerbeConn, face: Key, points: np.ndarray, nodes: int) -> np.ndarray:
    """
    log λ_kji 의 연속 가지

    교집합 상자의 중심에서 주값 로그를 고르고, 중심에서 각 점까지의
    선분을 따라 λ⁻¹dλ 를 적분해 이어 붙인다.
    """
    i, j, k = face
    simplex = g.cover.simplex(face)
    center = simplex.centroid()
    field_ = g.lam(k, j, i)
    base = zero_form_jet(field_.matrix.evaluate(center[None, :], 0)).value[0, 0, 0]
    if base == 0:
        raise CohomologyError(f"lambda vanishes at the center of {face}")
    s, weights = gauss_legendre_unit(nodes)
    steps = points - center
    count, dim = steps.shape
    path = center + s[None, :, None] * steps[:, None, :]
    jet = zero_form_jet(field_.matrix.evaluate(path.reshape(-1, dim), 1))
    rate = np.einsum("pd,pd->p", jet.grad[:, 0, 0, :], np.repeat(steps, len(s), axis=0)) / jet.value[:, 0, 0]
    return np.log(base) + rate.reshape(count, len(s)) @ weights


def dd_cocycle(
    g: GerbeConn,
    extra_points: int = 5,
    seed: Optional[int] = None,
    nodes: Optional[int] = None
) -> IntCochain:
    """
    거브의 Dixmier-Douady 정수 3-코사이클 (1/2πi)·δ(log λ)

    Args:
        g: 접속을 가진 거브
        extra_points: 3-단체마다 중심 외에 추가로 확인할 점 개수
        seed: 추가 점 시드 (기본 settings.SAMPLE_SEED)
        nodes: 로그 가지 연장 구적 노드 수 (기본 settings.QUAD_NODES)

    Returns:
        IntCochain (deviation = 반올림 전 최대 편차)

    Raises:
        CohomologyError: 정수에서 TOL_INTEGRALITY 이상 벗어나거나 점마다 값이 다름
    """
    cover = g.cover
    seed = settings.SAMPLE_SEED if seed is None else seed
    nodes = settings.QUAD_NODES if nodes is None else nodes
    values: Dict[Key, int] = {}
    deviation = 0.0
    for simplex in cover.simplices[3]:
        a, b, c, d = simplex.charts
        samples = sample_points(cover, simplex, extra_points, seed)
        anchor_points = np.vstack([simplex.centroid()[None, :], samples.coords[a]])
        total = np.zeros(len(anchor_points), dtype=complex)
        for face, sign in (((b, c, d), 1), ((a, c, d), -1), ((a, b, d), 1), ((a, b, c), -1)):
            coords = anchor_points - simplex.offsets[face[0]]
            total += sign * _branch_log(g, face, coords, nodes)
        ratio = total / (2j * np.pi)
        value = int(round(ratio[0].real))
        error = float(np.max(np.abs(ratio - value)))
        deviation = max(deviation, error)
        if error > settings.TOL_INTEGRALITY:
            logger.error(f"❌ DD 값이 정수가 아님: {simplex.charts}, 편차 {error:.3e}")
            raise CohomologyError(f"non-integral Dixmier-Douady value on {simplex.charts}: deviation {error:.3e}")
        if value:
            values[simplex.charts] = value
    logger.info(f"✅ DD 코사이클 추출: {g.name or 'gerbe'}, 0 아닌 값 {len(values)}개, 최대 편차 {deviation:.2e}")
    return IntCochain(3, values, deviation)
