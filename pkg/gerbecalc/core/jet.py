"""
절단 테일러 제트 (전진 모드 자동미분)
값, 기울기, 헤시안 및 고차 편미분을 점 단위 벡터 연산으로 전파
"""
from functools import lru_cache
from itertools import combinations
from math import factorial
from typing import Callable, List, Sequence, Tuple, Union

import numpy as np

from gerbecalc.utils.exceptions import EvaluationDomainError, FormShapeError

Number = Union[int, float, complex]

# 미분 축 문자 (행렬 축 i, j, k 및 점 축 p와 겹치지 않음)
_DERIV_LETTERS = "abcdefgh"


@lru_cache(maxsize=None)
def _subsets(r: int) -> Tuple[Tuple[int, ...], ...]:
    """{0..r-1}의 모든 부분집합"""
    result = []
    for size in range(r + 1):
        result.extend(combinations(range(r), size))
    return tuple(result)


@lru_cache(maxsize=None)
def _set_partitions(r: int) -> Tuple[Tuple[Tuple[int, ...], ...], ...]:
    """{0..r-1}의 모든 집합 분할 (Faà di Bruno 공식용)"""
    if r == 0:
        return ((),)
    result = []
    for partition in _set_partitions(r - 1):
        # 새 원소 r-1을 기존 블록에 넣거나 단독 블록으로
        for index in range(len(partition)):
            blocks = list(partition)
            blocks[index] = blocks[index] + (r - 1,)
            result.append(tuple(blocks))
        result.append(partition + ((r - 1,),))
    return tuple(result)


class Jet:
    """
    점 P개에서의 절단 테일러 제트

    derivs[r]의 shape은 (P, *S, D, ..., D) (D가 r번) 이며
    r차 편미분 텐서를 담는다. S는 값의 모양 (스칼라는 (), 행렬은 (n, n)).

    Note:
        - 미분 텐서는 항상 대칭이다
        - 연산 결과의 차수는 피연산자 차수의 최솟값
    """

    __slots__ = ("derivs", "dim")

    def __init__(self, derivs: Sequence[np.ndarray], dim: int):
        self.derivs: List[np.ndarray] = [np.asarray(d, dtype=complex) for d in derivs]
        self.dim = dim

    # ========== 생성 ==========

    @classmethod
    def constant(
        cls,
        value: Union[Number, np.ndarray],
        npoints: int,
        dim: int,
        order: int,
        shape: Tuple[int, ...] = ()
    ) -> "Jet":
        """상수 제트 (모든 미분이 0)"""
        base = np.broadcast_to(np.asarray(value, dtype=complex), shape)
        value_array = np.broadcast_to(base, (npoints,) + shape).copy()
        derivs = [value_array]
        for r in range(1, order + 1):
            derivs.append(np.zeros((npoints,) + shape + (dim,) * r, dtype=complex))
        return cls(derivs, dim)

    @classmethod
    def variable(cls, points: np.ndarray, index: int, order: int) -> "Jet":
        """좌표 함수 x_index의 제트"""
        points = np.atleast_2d(np.asarray(points, dtype=float))
        npoints, dim = points.shape
        derivs = [points[:, index].astype(complex)]
        if order >= 1:
            grad = np.zeros((npoints, dim), dtype=complex)
            grad[:, index] = 1.0
            derivs.append(grad)
        for r in range(2, order + 1):
            derivs.append(np.zeros((npoints,) + (dim,) * r, dtype=complex))
        return cls(derivs, dim)

    # ========== 속성 ==========

    @property
    def order(self) -> int:
        return len(self.derivs) - 1

    @property
    def npoints(self) -> int:
        return self.derivs[0].shape[0]

    @property
    def shape(self) -> Tuple[int, ...]:
        return self.derivs[0].shape[1:]

    @property
    def value(self) -> np.ndarray:
        return self.derivs[0]

    @property
    def grad(self) -> np.ndarray:
        if self.order < 1:
            raise FormShapeError("jet has no first derivatives")
        return self.derivs[1]

    @property
    def hess(self) -> np.ndarray:
        if self.order < 2:
            raise FormShapeError("jet has no second derivatives")
        return self.derivs[2]

    def truncate(self, order: int) -> "Jet":
        if order > self.order:
            raise FormShapeError(f"cannot raise jet order {self.order} to {order}")
        return Jet(self.derivs[: order + 1], self.dim)

    def max_abs(self) -> float:
        """값의 최대 절댓값 (빈 제트는 0)"""
        if self.derivs[0].size == 0:
            return 0.0
        return float(np.max(np.abs(self.derivs[0])))

    # ========== 내부 도우미 ==========

    def _expand_to(self, shape: Tuple[int, ...]) -> "Jet":
        """스칼라 제트를 행렬 모양으로 브로드캐스트 가능하게 축 삽입"""
        if self.shape == shape or self.shape != ():
            return self
        extra = (1,) * len(shape)
        derivs = []
        for r, d in enumerate(self.derivs):
            npoints = d.shape[0]
            derivs.append(d.reshape((npoints,) + extra + (self.dim,) * r))
        return Jet(derivs, self.dim)

    @staticmethod
    def _coerce(other: Union["Jet", Number], like: "Jet") -> "Jet":
        if isinstance(other, Jet):
            return other
        return Jet.constant(other, like.npoints, like.dim, like.order)

    @staticmethod
    def _common(a: "Jet", b: "Jet") -> Tuple["Jet", "Jet", int]:
        if a.dim != b.dim:
            raise FormShapeError(f"jet dimension mismatch: {a.dim} vs {b.dim}")
        order = min(a.order, b.order)
        if a.shape == () and b.shape != ():
            a = a._expand_to(b.shape)
        elif b.shape == () and a.shape != ():
            b = b._expand_to(a.shape)
        return a, b, order

    def _leibniz(self, other: "Jet", subscripts: Callable[[str, str, str], str]) -> "Jet":
        """
        일반화된 라이프니츠 규칙

        Args:
            other: 오른쪽 피연산자
            subscripts: (왼쪽 미분 문자, 오른쪽 미분 문자, 결과 미분 문자) -> einsum 첨자
        """
        a, b, order = Jet._common(self, other)
        derivs = []
        for r in range(order + 1):
            letters = _DERIV_LETTERS[:r]
            total = None
            for subset in _subsets(r):
                rest = tuple(i for i in range(r) if i not in subset)
                left = "".join(letters[i] for i in subset)
                right = "".join(letters[i] for i in rest)
                term = np.einsum(
                    subscripts(left, right, letters),
                    a.derivs[len(subset)],
                    b.derivs[len(rest)]
                )
                total = term if total is None else total + term
            derivs.append(total)
        return Jet(derivs, a.dim)

    def _compose(self, derivatives: Sequence[np.ndarray]) -> "Jet":
        """
        Faà di Bruno 공식으로 phi(self) 계산

        Args:
            derivatives: phi^(k)(value), k = 0..order (value와 같은 모양)
        """
        derivs = [derivatives[0]]
        for r in range(1, self.order + 1):
            letters = _DERIV_LETTERS[:r]
            total = None
            for partition in _set_partitions(r):
                operands = [derivatives[len(partition)]]
                terms = ["..."]
                for block in partition:
                    operands.append(self.derivs[len(block)])
                    terms.append("..." + "".join(letters[i] for i in block))
                term = np.einsum(",".join(terms) + "->..." + letters, *operands)
                total = term if total is None else total + term
            derivs.append(total)
        return Jet(derivs, self.dim)

    # ========== 산술 ==========

    def __add__(self, other):
        other = Jet._coerce(other, self)
        a, b, order = Jet._common(self, other)
        return Jet([a.derivs[r] + b.derivs[r] for r in range(order + 1)], a.dim)

    __radd__ = __add__

    def __neg__(self):
        return Jet([-d for d in self.derivs], self.dim)

    def __sub__(self, other):
        return self + (-Jet._coerce(other, self))

    def __rsub__(self, other):
        return (-self) + other

    def __mul__(self, other):
        if not isinstance(other, Jet):
            return Jet([d * other for d in self.derivs], self.dim)
        return self._leibniz(other, lambda l, r, out: f"...{l},...{r}->...{out}")

    __rmul__ = __mul__

    def __truediv__(self, other):
        if not isinstance(other, Jet):
            if other == 0:
                raise EvaluationDomainError("division by zero")
            return self * (1.0 / other)
        return self * other.reciprocal()

    def __rtruediv__(self, other):
        return self.reciprocal() * other

    def matmul(self, other: "Jet") -> "Jet":
        """행렬 곱 (라이프니츠 규칙)"""
        if len(self.shape) != 2 or len(other.shape) != 2:
            raise FormShapeError("matmul requires matrix-valued jets")
        if self.shape[1] != other.shape[0]:
            raise FormShapeError(f"matrix size mismatch: {self.shape} @ {other.shape}")
        return self._leibniz(other, lambda l, r, out: f"pij{l},pjk{r}->pik{out}")

    __matmul__ = matmul

    # ========== 원소별 함수 ==========

    def reciprocal(self) -> "Jet":
        u = self.value
        if np.any(u == 0):
            raise EvaluationDomainError("division by zero")
        inv = 1.0 / u
        derivatives = [((-1) ** k) * factorial(k) * inv ** (k + 1) for k in range(self.order + 1)]
        return self._compose(derivatives)

    def power(self, exponent: int) -> "Jet":
        """정수 거듭제곱 (exponent >= 0)"""
        if exponent < 0:
            return self.power(-exponent).reciprocal()
        u = self.value
        derivatives = []
        for k in range(self.order + 1):
            if k > exponent:
                derivatives.append(np.zeros_like(u))
                continue
            coefficient = factorial(exponent) // factorial(exponent - k)
            derivatives.append(coefficient * u ** (exponent - k))
        return self._compose(derivatives)

    def sin(self) -> "Jet":
        s, c = np.sin(self.value), np.cos(self.value)
        cycle = [s, c, -s, -c]
        return self._compose([cycle[k % 4] for k in range(self.order + 1)])

    def cos(self) -> "Jet":
        s, c = np.sin(self.value), np.cos(self.value)
        cycle = [c, -s, -c, s]
        return self._compose([cycle[k % 4] for k in range(self.order + 1)])

    def exp(self) -> "Jet":
        e = np.exp(self.value)
        return self._compose([e] * (self.order + 1))

    def log(self) -> "Jet":
        """주 가지(principal branch) 로그"""
        u = self.value
        if np.any(u == 0):
            raise EvaluationDomainError("log of zero")
        derivatives = [np.log(u)]
        for k in range(1, self.order + 1):
            derivatives.append(((-1) ** (k - 1)) * factorial(k - 1) / u ** k)
        return self._compose(derivatives)

    # ========== 행렬 연산 ==========

    def conj(self) -> "Jet":
        """켤레 (실좌표에 대한 미분과 교환)"""
        return Jet([np.conj(d) for d in self.derivs], self.dim)

    def trace(self) -> "Jet":
        if len(self.shape) != 2:
            raise FormShapeError("trace requires a matrix-valued jet")
        return Jet([np.trace(d, axis1=1, axis2=2) for d in self.derivs], self.dim)

    def entry(self, row: int, col: int) -> "Jet":
        return Jet([d[:, row, col] for d in self.derivs], self.dim)

    @classmethod
    def from_entries(cls, rows: Sequence[Sequence["Jet"]], npoints: int, dim: int, order: int) -> "Jet":
        """스칼라 제트 격자로부터 행렬 제트 조립 (빈 행렬 허용)"""
        size = len(rows)
        if size == 0:
            return cls.constant(0.0, npoints, dim, order, (0, 0))
        order = min(min(e.order for e in row) for row in rows)
        derivs = []
        for r in range(order + 1):
            derivs.append(np.stack(
                [np.stack([rows[i][j].derivs[r] for j in range(size)], axis=1) for i in range(size)],
                axis=1
            ))
        return cls(derivs, dim)

    def block_sum(self, other: "Jet") -> "Jet":
        """블록 대각합"""
        if self.dim != other.dim:
            raise FormShapeError("jet dimension mismatch in block sum")
        n, m = self.shape[0], other.shape[0]
        order = min(self.order, other.order)
        derivs = []
        for r in range(order + 1):
            tail = self.derivs[r].shape[3:]
            out = np.zeros((self.npoints, n + m, n + m) + tail, dtype=complex)
            out[:, :n, :n] = self.derivs[r]
            out[:, n:, n:] = other.derivs[r]
            derivs.append(out)
        return Jet(derivs, self.dim)

    # ========== 미분 / 좌표 조작 ==========

    def partial(self, index: int) -> "Jet":
        """편미분 (차수 1 감소)"""
        if self.order < 1:
            raise FormShapeError("cannot differentiate an order-0 jet")
        return Jet([d[..., index] for d in self.derivs[1:]], self.dim)

    def restrict_coordinates(self, keep: Sequence[int]) -> "Jet":
        """미분 방향을 일부 좌표로 제한 (섬유 적분 후 t 방향 제거)"""
        keep = np.asarray(list(keep), dtype=int)
        derivs = [self.derivs[0]]
        for r, d in enumerate(self.derivs[1:], start=1):
            for axis in range(r):
                d = np.take(d, keep, axis=d.ndim - r + axis)
            derivs.append(d)
        return Jet(derivs, len(keep))

    def embed_coordinates(self, dim: int, positions: Sequence[int]) -> "Jet":
        """새 좌표계(차원 dim)로 확장, 기존 좌표는 positions 위치"""
        positions = list(positions)
        derivs = [self.derivs[0]]
        for r, d in enumerate(self.derivs[1:], start=1):
            out = np.zeros(d.shape[: d.ndim - r] + (dim,) * r, dtype=complex)
            out[(Ellipsis,) + np.ix_(*([positions] * r))] = d
            derivs.append(out)
        return Jet(derivs, dim)

    def weighted_group_sum(self, weights: np.ndarray) -> "Jet":
        """
        점 축을 (P0, Q)로 나누어 가중합 (구적 노드 축 축약)

        Args:
            weights: 길이 Q 가중치
        """
        weights = np.asarray(weights, dtype=float)
        nodes = len(weights)
        derivs = []
        for d in self.derivs:
            grouped = d.reshape((d.shape[0] // nodes, nodes) + d.shape[1:])
            derivs.append(np.tensordot(weights, grouped, axes=([0], [1])))
        return Jet(derivs, self.dim)

    def take_points(self, indices: np.ndarray) -> "Jet":
        return Jet([d[indices] for d in self.derivs], self.dim)

    @staticmethod
    def concat_points(parts: Sequence["Jet"]) -> "Jet":
        """점 축으로 이어 붙임 (차수는 최솟값)"""
        order = min(part.order for part in parts)
        derivs = [np.concatenate([part.derivs[r] for part in parts], axis=0) for r in range(order + 1)]
        return Jet(derivs, parts[0].dim)

    def __repr__(self) -> str:
        return f"Jet(points={self.npoints}, shape={self.shape}, dim={self.dim}, order={self.order})"
