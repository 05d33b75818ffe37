"""
행렬값 미분형식
기호 형식(MatrixForm)과 점 단위 수치 형식(JetForm)의 대수
"""
import re
from itertools import product
from typing import Dict, List, Optional, Sequence, Tuple, Union

import numpy as np

from gerbecalc.core.expression import (
    ONE, ZERO, Const, Expr, add, as_expr, evaluate_jet, mul, neg, parse_expr
)
from gerbecalc.core.jet import Jet
from gerbecalc.core.quadrature import gauss_legendre_unit
from gerbecalc.utils.exceptions import ExpressionSyntaxError, FormShapeError

Key = Tuple[int, ...]
Number = Union[int, float, complex]


def merge_keys(left: Key, right: Key) -> Tuple[int, Optional[Key]]:
    """
    dx_I ∧ dx_J 를 정렬된 다중지표로

    Returns:
        (부호, 정렬된 키), 중복 지표가 있으면 (0, None)
    """
    combined = list(left) + list(right)
    if len(set(combined)) != len(combined):
        return 0, None
    sign = 1
    # 버블 정렬로 전치 횟수 계산
    for i in range(len(combined)):
        for j in range(len(combined) - 1 - i):
            if combined[j] > combined[j + 1]:
                combined[j], combined[j + 1] = combined[j + 1], combined[j]
                sign = -sign
    return sign, tuple(combined)


def insert_index(key: Key, index: int) -> Tuple[int, Optional[Key]]:
    """dx_index ∧ dx_key"""
    return merge_keys((index,), key)


# ========== 기호 형식 ==========

def _zero_matrix(size: int) -> np.ndarray:
    matrix = np.empty((size, size), dtype=object)
    for i in range(size):
        for j in range(size):
            matrix[i, j] = ZERO
    return matrix


def _identity_matrix(size: int) -> np.ndarray:
    matrix = _zero_matrix(size)
    for i in range(size):
        matrix[i, i] = ONE
    return matrix


def _matmul(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    rows, inner = a.shape
    cols = b.shape[1]
    out = np.empty((rows, cols), dtype=object)
    for i in range(rows):
        for k in range(cols):
            total = ZERO
            for j in range(inner):
                total = add(total, mul(a[i, j], b[j, k]))
            out[i, k] = total
    return out


def _map_entries(matrix: np.ndarray, func) -> np.ndarray:
    out = np.empty(matrix.shape, dtype=object)
    for index in np.ndindex(*matrix.shape):
        out[index] = func(matrix[index])
    return out


def _add_matrices(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    out = np.empty(a.shape, dtype=object)
    for index in np.ndindex(*a.shape):
        out[index] = add(a[index], b[index])
    return out


def _is_zero_matrix(matrix: np.ndarray) -> bool:
    return all(entry.is_zero() for entry in matrix.flat)


class MatrixForm:
    """
    n×n 행렬값 미분형식 (기호 계수)

    계수는 순증가 지표 튜플 -> ScalarExpr 행렬. 변수 튜플의 k번째
    이름이 dx 지표 k에 대응한다.

    Note:
        - 차수가 섞인 합(비균질 형식)도 담을 수 있다 (exp 급수 등)
        - 0차 형식은 항상 빈 튜플 계수를 가진다
        - n = 0 (영 번들) 형식도 합법
    """

    __slots__ = ("coefficients", "size", "variables", "_degree")

    def __init__(
        self,
        coefficients: Dict[Key, np.ndarray],
        size: int,
        variables: Sequence[str],
        degree: Optional[int] = None
    ):
        self.size = size
        self.variables = tuple(variables)
        cleaned: Dict[Key, np.ndarray] = {}
        for key, matrix in coefficients.items():
            key = tuple(key)
            if list(key) != sorted(set(key)):
                raise FormShapeError(f"coefficient key {key} is not strictly increasing")
            if key and key[-1] >= len(self.variables):
                raise FormShapeError(f"index {key[-1]} exceeds ambient dimension {len(self.variables)}")
            matrix = np.asarray(matrix, dtype=object)
            if matrix.shape != (size, size):
                raise FormShapeError(f"coefficient shape {matrix.shape} does not match size {size}")
            if not _is_zero_matrix(matrix) or (key == () and degree == 0):
                cleaned[key] = matrix
        if degree is None:
            degrees = {len(key) for key in cleaned}
            degree = degrees.pop() if len(degrees) == 1 else (None if degrees else 0)
        if degree == 0 and () not in cleaned:
            cleaned[()] = _zero_matrix(size)
        self.coefficients = cleaned
        self._degree = degree

    # ---------- 생성 ----------

    @classmethod
    def zero(cls, degree: int, size: int, variables: Sequence[str]) -> "MatrixForm":
        return cls({}, size, variables, degree)

    @classmethod
    def identity(cls, size: int, variables: Sequence[str]) -> "MatrixForm":
        return cls({(): _identity_matrix(size)}, size, variables, 0)

    @classmethod
    def scalar(cls, expr: Union[Expr, Number], variables: Sequence[str], key: Key = ()) -> "MatrixForm":
        matrix = np.empty((1, 1), dtype=object)
        matrix[0, 0] = as_expr(expr)
        return cls({tuple(key): matrix}, 1, variables, len(key))

    @classmethod
    def from_matrix(cls, entries: Sequence[Sequence[Expr]], variables: Sequence[str], key: Key = ()) -> "MatrixForm":
        size = len(entries)
        matrix = np.empty((size, size), dtype=object)
        for i in range(size):
            for j in range(size):
                matrix[i, j] = as_expr(entries[i][j])
        return cls({tuple(key): matrix}, size, variables, len(key))

    @classmethod
    def diagonal(cls, entries: Sequence[Expr], variables: Sequence[str], key: Key = ()) -> "MatrixForm":
        size = len(entries)
        matrix = _zero_matrix(size)
        for i, entry in enumerate(entries):
            matrix[i, i] = as_expr(entry)
        return cls({tuple(key): matrix}, size, variables, len(key))

    # ---------- 속성 ----------

    @property
    def dim(self) -> int:
        return len(self.variables)

    @property
    def degree(self) -> int:
        if self._degree is None:
            raise FormShapeError("form is a sum of several degrees")
        return self._degree

    def degrees(self) -> List[int]:
        return sorted({len(key) for key in self.coefficients})

    def is_zero(self) -> bool:
        return all(_is_zero_matrix(matrix) for matrix in self.coefficients.values())

    def coefficient(self, key: Key) -> np.ndarray:
        return self.coefficients.get(tuple(key), _zero_matrix(self.size))

    def part(self, degree: int) -> "MatrixForm":
        return MatrixForm(
            {k: v for k, v in self.coefficients.items() if len(k) == degree},
            self.size, self.variables, degree
        )

    # ---------- 대수 ----------

    def _check_compatible(self, other: "MatrixForm") -> None:
        if self.variables != other.variables:
            raise FormShapeError(f"ambient mismatch: {self.variables} vs {other.variables}")
        if self.size != other.size:
            raise FormShapeError(f"size mismatch: {self.size} vs {other.size}")

    def _degree_of_sum(self, other: "MatrixForm") -> Optional[int]:
        return self._degree if self._degree == other._degree else None

    def __add__(self, other: "MatrixForm") -> "MatrixForm":
        self._check_compatible(other)
        coefficients = dict(self.coefficients)
        for key, matrix in other.coefficients.items():
            coefficients[key] = _add_matrices(coefficients[key], matrix) if key in coefficients else matrix
        return MatrixForm(coefficients, self.size, self.variables, self._degree_of_sum(other))

    def __neg__(self) -> "MatrixForm":
        return MatrixForm(
            {k: _map_entries(v, neg) for k, v in self.coefficients.items()},
            self.size, self.variables, self._degree
        )

    def __sub__(self, other: "MatrixForm") -> "MatrixForm":
        return self + (-other)

    def scale(self, factor: Union[Expr, Number]) -> "MatrixForm":
        """스칼라 함수 배"""
        factor = as_expr(factor)
        return MatrixForm(
            {k: _map_entries(v, lambda e: mul(factor, e)) for k, v in self.coefficients.items()},
            self.size, self.variables, self._degree
        )

    def times_identity(self, size: int) -> "MatrixForm":
        """스칼라 형식 a 를 a·1 (size×size) 로"""
        if self.size != 1:
            raise FormShapeError("times_identity needs a scalar form")
        coefficients = {}
        for key, matrix in self.coefficients.items():
            out = _zero_matrix(size)
            for i in range(size):
                out[i, i] = matrix[0, 0]
            coefficients[key] = out
        return MatrixForm(coefficients, size, self.variables, self._degree)

    def wedge(self, other: "MatrixForm") -> "MatrixForm":
        """행렬곱을 내장한 쐐기곱 (크기 1 형식은 스칼라로 작용)"""
        if self.variables != other.variables:
            raise FormShapeError(f"ambient mismatch: {self.variables} vs {other.variables}")
        left, right = self, other
        if left.size != right.size:
            if left.size == 1:
                left = left.times_identity(right.size)
            elif right.size == 1:
                right = right.times_identity(left.size)
            else:
                raise FormShapeError(f"size mismatch: {left.size} vs {right.size}")
        coefficients: Dict[Key, np.ndarray] = {}
        for (key_a, mat_a), (key_b, mat_b) in product(left.coefficients.items(), right.coefficients.items()):
            sign, key = merge_keys(key_a, key_b)
            if key is None:
                continue
            term = _matmul(mat_a, mat_b)
            if sign < 0:
                term = _map_entries(term, neg)
            coefficients[key] = _add_matrices(coefficients[key], term) if key in coefficients else term
        degree = None
        if left._degree is not None and right._degree is not None:
            degree = left._degree + right._degree
        return MatrixForm(coefficients, left.size, self.variables, degree)

    def exterior_d(self) -> "MatrixForm":
        """기호 외미분 d"""
        coefficients: Dict[Key, np.ndarray] = {}
        for key, matrix in self.coefficients.items():
            for index, name in enumerate(self.variables):
                if index in key:
                    continue
                sign, new_key = insert_index(key, index)
                derivative = _map_entries(matrix, lambda e: e.diff(name))
                if _is_zero_matrix(derivative):
                    continue
                if sign < 0:
                    derivative = _map_entries(derivative, neg)
                coefficients[new_key] = (
                    _add_matrices(coefficients[new_key], derivative) if new_key in coefficients else derivative
                )
        degree = None if self._degree is None else self._degree + 1
        return MatrixForm(coefficients, self.size, self.variables, degree)

    def trace(self) -> "MatrixForm":
        coefficients = {}
        for key, matrix in self.coefficients.items():
            total = ZERO
            for i in range(self.size):
                total = add(total, matrix[i, i])
            out = np.empty((1, 1), dtype=object)
            out[0, 0] = total
            coefficients[key] = out
        return MatrixForm(coefficients, 1, self.variables, self._degree)

    def block_sum(self, other: "MatrixForm") -> "MatrixForm":
        if self.variables != other.variables:
            raise FormShapeError("ambient mismatch in block sum")
        n, m = self.size, other.size
        coefficients = {}
        for key in set(self.coefficients) | set(other.coefficients):
            out = _zero_matrix(n + m)
            out[:n, :n] = self.coefficient(key)
            out[n:, n:] = other.coefficient(key)
            coefficients[key] = out
        return MatrixForm(coefficients, n + m, self.variables, self._degree_of_sum(other))

    # ---------- 좌표 조작 ----------

    def substitute(self, mapping: Dict[str, Expr]) -> "MatrixForm":
        return MatrixForm(
            {k: _map_entries(v, lambda e: e.substitute(mapping)) for k, v in self.coefficients.items()},
            self.size, self.variables, self._degree
        )

    def fix_variable(self, name: str, value: float) -> "MatrixForm":
        """변수 하나를 상수로 고정하고 주변 공간에서 제거 (그 방향 성분은 버림)"""
        index = self.variables.index(name)
        mapping = {name: Const(float(value))}
        coefficients = {}
        for key, matrix in self.coefficients.items():
            if index in key:
                continue
            new_key = tuple(k if k < index else k - 1 for k in key)
            coefficients[new_key] = _map_entries(matrix, lambda e: e.substitute(mapping))
        variables = self.variables[:index] + self.variables[index + 1:]
        return MatrixForm(coefficients, self.size, variables, self._degree)

    def translate(self, offset: Sequence[float]) -> "MatrixForm":
        """f(x) -> f(x + offset) (dx 는 불변, offset 은 x1.. 좌표 순)"""
        offsets = {self.variables[k]: float(c) for k, c in enumerate(offset) if c != 0}
        if not offsets:
            return self
        return MatrixForm(
            {k: _map_entries(v, lambda e: e.translate(offsets)) for k, v in self.coefficients.items()},
            self.size, self.variables, self._degree
        )

    def with_variables(self, variables: Sequence[str]) -> "MatrixForm":
        """주변 공간 확장 (기존 변수 튜플이 접두사여야 함)"""
        variables = tuple(variables)
        if variables[: self.dim] != self.variables:
            raise FormShapeError(f"cannot embed {self.variables} into {variables}")
        return MatrixForm(self.coefficients, self.size, variables, self._degree)

    # ---------- 평가 ----------

    def evaluate(
        self,
        points: np.ndarray,
        order: int,
        variables: Optional[Sequence[str]] = None,
        memo: Optional[dict] = None
    ) -> "JetForm":
        """
        점 배열에서 JetForm 으로 평가

        Args:
            points: (P, D) 좌표
            order: 계수 제트 차수
            variables: 열 이름 (기본: 형식의 변수, 형식 변수가 접두사여야 함)
            memo: 여러 형식이 공유하는 평가 캐시
        """
        variables = self.variables if variables is None else tuple(variables)
        if variables[: self.dim] != self.variables:
            raise FormShapeError(f"cannot evaluate {self.variables} on ambient {variables}")
        points = np.atleast_2d(np.asarray(points, dtype=float))
        npoints = points.shape[0]
        dim = len(variables)
        memo = {} if memo is None else memo
        coefficients = {}
        for key, matrix in self.coefficients.items():
            rows = [
                [evaluate_jet(matrix[i, j], points, variables, order, memo) for j in range(self.size)]
                for i in range(self.size)
            ]
            coefficients[key] = Jet.from_entries(rows, npoints, dim, order)
        return JetForm(coefficients, self.size, dim, npoints, order)

    # ---------- 텍스트 ----------

    def to_text(self) -> str:
        """스칼라 형식을 매니페스트 텍스트로"""
        if self.size != 1:
            raise FormShapeError("only scalar forms have a text form")
        terms = []
        for key in sorted(self.coefficients):
            coefficient = self.coefficients[key][0, 0]
            if coefficient.is_zero() and key:
                continue
            wedge = "^".join(f"d{self.variables[k]}" for k in key)
            terms.append(f"({coefficient.to_text()}) {wedge}".strip())
        return " + ".join(terms) if terms else "(0.0)"

    def __repr__(self) -> str:
        return f"MatrixForm(size={self.size}, degrees={self.degrees()}, variables={self.variables})"


_FORM_TERM = re.compile(r"\s*([+-])?\s*")
_DX = re.compile(r"\s*d(x[1-9]|t)")


def parse_form(text: str, variables: Sequence[str], degree: Optional[int] = None) -> MatrixForm:
    """
    "(coef) dx1^dx2 + (coef) dx3^dx1" 형태의 스칼라 형식 파싱

    Args:
        text: 형식 텍스트 (계수는 괄호로 감싼 식, 0차 항은 괄호 식만)
        variables: 주변 좌표 이름
        degree: 기대 차수 (None 이면 검사 안 함)
    """
    variables = tuple(variables)
    terms: List[MatrixForm] = []
    index = 0
    first = True
    while index < len(text):
        if text[index:].strip() == "":
            break
        match = _FORM_TERM.match(text, index)
        sign = match.group(1)
        if sign is None and not first:
            raise ExpressionSyntaxError("expected '+' or '-' between form terms", index)
        index = match.end()
        if index >= len(text) or text[index] != "(":
            raise ExpressionSyntaxError("form coefficient must be parenthesized", index)
        depth, end = 0, index
        for end in range(index, len(text)):
            if text[end] == "(":
                depth += 1
            elif text[end] == ")":
                depth -= 1
                if depth == 0:
                    break
        if depth != 0:
            raise ExpressionSyntaxError("unbalanced parenthesis in form", index)
        coefficient = parse_expr(text[index + 1:end], allowed=variables)
        index = end + 1
        indices: List[int] = []
        match = _DX.match(text, index)
        while match:
            name = match.group(1)
            if name not in variables:
                raise ExpressionSyntaxError(f"d{name} is not a coordinate of this ambient space", match.start())
            indices.append(variables.index(name))
            index = match.end()
            hat = re.match(r"\s*\^", text[index:])
            if not hat:
                break
            index += hat.end()
            match = _DX.match(text, index)
            if not match:
                raise ExpressionSyntaxError("expected dx after '^'", index)
        key_sign, key = merge_keys((), tuple(indices))
        if key is None:
            continue
        if degree is not None and len(key) != degree:
            raise ExpressionSyntaxError(f"term of degree {len(key)} in a {degree}-form", index)
        if (sign == "-") != (key_sign < 0):
            coefficient = neg(coefficient)
        term = MatrixForm.scalar(coefficient, variables, key)
        terms.append(term)
        first = False
    if not terms:
        return MatrixForm.zero(degree or 0, 1, variables)
    result = terms[0]
    for term in terms[1:]:
        result = result + term
    return MatrixForm(result.coefficients, 1, variables, degree)


# ========== 수치 형식 ==========

class JetForm:
    """
    점별 수치 형식: 지표 튜플 -> 행렬 제트 (P, n, n, D^r)

    차수가 섞인 합을 허용한다. 연산 결과의 제트 차수는 입력의 최솟값이며
    외미분은 제트 차수를 하나 줄인다.
    """

    __slots__ = ("coefficients", "size", "dim", "npoints", "order")

    def __init__(self, coefficients: Dict[Key, Jet], size: int, dim: int, npoints: int, order: int):
        self.coefficients = coefficients
        self.size = size
        self.dim = dim
        self.npoints = npoints
        self.order = order

    @classmethod
    def zero(cls, size: int, dim: int, npoints: int, order: int) -> "JetForm":
        return cls({}, size, dim, npoints, order)

    @classmethod
    def constant(cls, value: Number, dim: int, npoints: int, order: int, size: int = 1) -> "JetForm":
        jet = Jet.constant(np.eye(size) * value if size else np.zeros((0, 0)), npoints, dim, order, (size, size))
        return cls({(): jet}, size, dim, npoints, order)

    # ---------- 대수 ----------

    def _like(self, coefficients: Dict[Key, Jet], size: Optional[int] = None, order: Optional[int] = None) -> "JetForm":
        return JetForm(
            coefficients, self.size if size is None else size, self.dim, self.npoints,
            self.order if order is None else order
        )

    def __add__(self, other: "JetForm") -> "JetForm":
        if self.dim != other.dim or self.size != other.size:
            raise FormShapeError(f"form mismatch: size {self.size}/{other.size}, dim {self.dim}/{other.dim}")
        order = min(self.order, other.order)
        coefficients = {k: v.truncate(order) for k, v in self.coefficients.items()}
        for key, jet in other.coefficients.items():
            jet = jet.truncate(order)
            coefficients[key] = coefficients[key] + jet if key in coefficients else jet
        return self._like(coefficients, order=order)

    def __neg__(self) -> "JetForm":
        return self._like({k: -v for k, v in self.coefficients.items()})

    def __sub__(self, other: "JetForm") -> "JetForm":
        return self + (-other)

    def scale(self, factor: Number) -> "JetForm":
        return self._like({k: v * factor for k, v in self.coefficients.items()})

    def truncate(self, order: int) -> "JetForm":
        return self._like({k: v.truncate(order) for k, v in self.coefficients.items()}, order=order)

    def wedge(self, other: "JetForm") -> "JetForm":
        if self.dim != other.dim:
            raise FormShapeError(f"ambient mismatch: {self.dim} vs {other.dim}")
        size = self.size
        scalar_left = self.size == 1 and other.size != 1
        scalar_right = other.size == 1 and self.size != 1
        if not (scalar_left or scalar_right) and self.size != other.size:
            raise FormShapeError(f"size mismatch: {self.size} vs {other.size}")
        if scalar_left:
            size = other.size
        order = min(self.order, other.order)
        coefficients: Dict[Key, Jet] = {}
        for (key_a, jet_a), (key_b, jet_b) in product(self.coefficients.items(), other.coefficients.items()):
            sign, key = merge_keys(key_a, key_b)
            if key is None:
                continue
            if scalar_left:
                term = jet_a.entry(0, 0) * jet_b
            elif scalar_right:
                term = jet_a * jet_b.entry(0, 0)
            else:
                term = jet_a.matmul(jet_b)
            if sign < 0:
                term = -term
            coefficients[key] = coefficients[key] + term if key in coefficients else term
        return self._like(coefficients, size=size, order=order)

    def matmul_function(self, left: Optional[Jet] = None, right: Optional[Jet] = None) -> "JetForm":
        """0차 행렬 함수를 좌/우에서 곱함"""
        coefficients = {}
        order = self.order
        for key, jet in self.coefficients.items():
            if left is not None:
                jet = left.matmul(jet)
            if right is not None:
                jet = jet.matmul(right)
            coefficients[key] = jet
            order = min(order, jet.order)
        return self._like(coefficients, order=order)

    def exterior_d(self) -> "JetForm":
        if self.order < 1:
            raise FormShapeError("exterior derivative needs a jet of order >= 1")
        coefficients: Dict[Key, Jet] = {}
        for key, jet in self.coefficients.items():
            for index in range(self.dim):
                if index in key:
                    continue
                sign, new_key = insert_index(key, index)
                term = jet.partial(index)
                if sign < 0:
                    term = -term
                coefficients[new_key] = coefficients[new_key] + term if new_key in coefficients else term
        return self._like(coefficients, order=self.order - 1)

    def trace(self) -> "JetForm":
        coefficients = {}
        for key, jet in self.coefficients.items():
            traced = jet.trace()
            coefficients[key] = Jet([d[:, None, None] for d in traced.derivs], traced.dim)
        return self._like(coefficients, size=1)

    def block_sum(self, other: "JetForm") -> "JetForm":
        order = min(self.order, other.order)
        n, m = self.size, other.size
        coefficients = {}
        for key in set(self.coefficients) | set(other.coefficients):
            a = self.coefficients.get(key)
            b = other.coefficients.get(key)
            if a is None:
                a = Jet.constant(np.zeros((n, n)), self.npoints, self.dim, order, (n, n))
            if b is None:
                b = Jet.constant(np.zeros((m, m)), self.npoints, self.dim, order, (m, m))
            coefficients[key] = a.truncate(order).block_sum(b.truncate(order))
        return JetForm(coefficients, n + m, self.dim, self.npoints, order)

    def part(self, degree: int) -> "JetForm":
        return self._like({k: v for k, v in self.coefficients.items() if len(k) == degree})

    def top_truncate(self, top: int) -> "JetForm":
        return self._like({k: v for k, v in self.coefficients.items() if len(k) <= top})

    def power(self, exponent: int) -> "JetForm":
        """쐐기 거듭제곱 (exponent >= 1)"""
        result = self
        for _ in range(exponent - 1):
            result = result.wedge(self)
        return result

    def exp_even(self, top: Optional[int] = None) -> "JetForm":
        """짝수 차수 (>= 2) 스칼라 형식의 exp (차원에서 절단)"""
        top = self.dim if top is None else top
        if self.size != 1:
            raise FormShapeError("exp_even_form needs a scalar form")
        for key, jet in self.coefficients.items():
            if len(key) % 2 or (len(key) == 0 and any(np.any(d) for d in jet.derivs)):
                raise FormShapeError("exp_even_form needs an even-degree form of degree >= 2")
        result = JetForm.constant(1.0, self.dim, self.npoints, self.order)
        term = result
        for r in range(1, top // 2 + 1):
            term = term.wedge(self).scale(1.0 / r).top_truncate(top)
            if not term.coefficients:
                break
            result = result + term
        return result

    # ---------- 섬유 / 좌표 조작 ----------

    def integrate_last(self, weights: np.ndarray) -> "JetForm":
        """
        마지막 좌표(섬유 I)를 따라 적분

        점 배열은 (기저점, 노드) 순서로 펼쳐져 있어야 한다.
        ω = ω0 + ω1 ∧ dt 에서 ω1 의 가중합을 돌려준다.
        """
        fiber = self.dim - 1
        keep = list(range(fiber))
        coefficients: Dict[Key, Jet] = {}
        for key, jet in self.coefficients.items():
            if not key or key[-1] != fiber:
                continue
            coefficients[key[:-1]] = jet.restrict_coordinates(keep).weighted_group_sum(weights)
        return JetForm(coefficients, self.size, fiber, self.npoints // len(weights), self.order)

    def drop_last(self) -> "JetForm":
        """마지막 좌표를 고정한 경계로 제한"""
        fiber = self.dim - 1
        keep = list(range(fiber))
        coefficients = {
            key: jet.restrict_coordinates(keep)
            for key, jet in self.coefficients.items() if fiber not in key
        }
        return JetForm(coefficients, self.size, fiber, self.npoints, self.order)

    def embed(self, dim: int, positions: Sequence[int]) -> "JetForm":
        """새 주변 공간으로 당김 (좌표 k -> positions[k])"""
        positions = list(positions)
        coefficients: Dict[Key, Jet] = {}
        for key, jet in self.coefficients.items():
            sign, new_key = merge_keys((), tuple(positions[k] for k in key))
            term = jet.embed_coordinates(dim, positions)
            coefficients[new_key] = -term if sign < 0 else term
        return JetForm(coefficients, self.size, dim, self.npoints, self.order)

    def take_points(self, indices: np.ndarray) -> "JetForm":
        indices = np.asarray(indices)
        return JetForm(
            {k: v.take_points(indices) for k, v in self.coefficients.items()},
            self.size, self.dim, len(indices), self.order
        )

    @classmethod
    def concat_points(cls, parts: Sequence["JetForm"]) -> "JetForm":
        """
        같은 모양의 형식들을 점 축으로 이어 붙임 (조각별 평가 결과 합치기)

        어느 조각에만 있는 계수는 나머지 조각에서 0 으로 채운다.
        """
        first = parts[0]
        if any(part.size != first.size or part.dim != first.dim for part in parts):
            raise FormShapeError("cannot concatenate forms of different size or dimension")
        order = min(part.order for part in parts)
        shape = (first.size, first.size)
        coefficients: Dict[Key, Jet] = {}
        for key in set().union(*(part.coefficients for part in parts)):
            pieces = []
            for part in parts:
                jet = part.coefficients.get(key)
                if jet is None:
                    jet = Jet.constant(np.zeros(shape), part.npoints, part.dim, order, shape)
                pieces.append(jet)
            coefficients[key] = Jet.concat_points(pieces)
        return cls(coefficients, first.size, first.dim, sum(part.npoints for part in parts), order)

    # ---------- 잔차 ----------

    def max_abs(self) -> float:
        """모든 계수 값의 최대 절댓값"""
        return max((jet.max_abs() for jet in self.coefficients.values()), default=0.0)

    def scalar_coefficient(self, key: Key) -> np.ndarray:
        """스칼라 형식의 계수 값 (P,)"""
        jet = self.coefficients.get(tuple(key))
        if jet is None:
            return np.zeros(self.npoints, dtype=complex)
        return jet.value[:, 0, 0]

    def __repr__(self) -> str:
        return (f"JetForm(size={self.size}, dim={self.dim}, points={self.npoints}, "
                f"order={self.order}, keys={sorted(self.coefficients)})")


# ========== 모듈 수준 연산 ==========

FormLike = Union[MatrixForm, JetForm]


def wedge(a: FormLike, b: FormLike) -> FormLike:
    return a.wedge(b)


def exterior_d(a: FormLike) -> FormLike:
    return a.exterior_d()


def trace_form(a: FormLike) -> FormLike:
    return a.trace()


def exp_even_form(xi: FormLike, top_dim: int) -> FormLike:
    """
    Σ ξ^r / r! (top_dim 에서 절단)

    Args:
        xi: 짝수 차수 스칼라 형식 (차수 >= 2)
        top_dim: 주변 차원
    """
    if isinstance(xi, JetForm):
        return xi.exp_even(top_dim)
    if xi.size != 1:
        raise FormShapeError("exp_even_form needs a scalar form")
    for key in xi.coefficients:
        if len(key) % 2 or (len(key) == 0 and not xi.coefficients[key][0, 0].is_zero()):
            raise FormShapeError("exp_even_form needs an even-degree form of degree >= 2")
    result = MatrixForm.identity(1, xi.variables)
    term = result
    for r in range(1, top_dim // 2 + 1):
        term = term.wedge(xi).scale(Const(1.0 / r))
        term = MatrixForm({k: v for k, v in term.coefficients.items() if len(k) <= top_dim}, 1, xi.variables)
        if term.is_zero():
            break
        result = result + term
    return MatrixForm(result.coefficients, 1, xi.variables)


def fiber_integrate_I(a: MatrixForm, quad_nodes: int) -> MatrixForm:
    """
    X×I 위 형식의 섬유 적분 (t 는 마지막 변수)

    ω = ω0 + ω1∧dt 의 ω1 을 Gauss-Legendre 로 적분한 기호 형식.
    dt 성분이 없으면 영 형식.
    """
    if not a.variables or a.variables[-1] != "t":
        raise FormShapeError("fiber integration needs t as the last ambient variable")
    fiber = a.dim - 1
    base_variables = a.variables[:-1]
    nodes, weights = gauss_legendre_unit(quad_nodes)
    coefficients: Dict[Key, np.ndarray] = {}
    for key, matrix in a.coefficients.items():
        if not key or key[-1] != fiber:
            continue
        out = _zero_matrix(a.size)
        for node, weight in zip(nodes, weights):
            value = {"t": Const(float(node))}
            for index in np.ndindex(*matrix.shape):
                out[index] = add(out[index], mul(Const(float(weight)), matrix[index].substitute(value)))
        coefficients[key[:-1]] = out
    degree = None if a._degree is None else max(a._degree - 1, 0)
    return MatrixForm(coefficients, a.size, base_variables, degree)
