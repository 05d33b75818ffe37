"""
U(n)-값 함수와 무작위 매끄러운 장
기호 쌍 (g, g⁻¹) 및 삼각다항식 기반 생성기
"""
from dataclasses import dataclass
from itertools import combinations
from typing import Sequence, Tuple

import numpy as np
from scipy.linalg import expm

from gerbecalc.config import settings
from gerbecalc.core.expression import I_UNIT, ZERO, Const, Expr, Var, add, cos, exp, mul, neg, sin
from gerbecalc.core.forms import JetForm, MatrixForm
from gerbecalc.core.jet import Jet


@dataclass(frozen=True)
class UnitaryField:
    """
    U(n)-값 0-형식과 그 역행렬의 기호 쌍

    역행렬을 기호로 함께 들고 다니므로 g⁻¹dg 계산에 수치 역행렬이
    필요 없다. 두 성분이 실제로 서로 역인지는 검증에서 확인한다.
    """
    matrix: MatrixForm
    inverse: MatrixForm

    @property
    def size(self) -> int:
        return self.matrix.size

    @property
    def variables(self) -> Tuple[str, ...]:
        return self.matrix.variables

    @classmethod
    def identity(cls, size: int, variables: Sequence[str]) -> "UnitaryField":
        one = MatrixForm.identity(size, variables)
        return cls(one, one)

    @classmethod
    def from_phase(cls, phase: Expr, variables: Sequence[str]) -> "UnitaryField":
        """exp(i·phase) (phase 는 실수값 식)"""
        return cls(
            MatrixForm.scalar(exp(mul(I_UNIT, phase)), variables),
            MatrixForm.scalar(exp(neg(mul(I_UNIT, phase))), variables)
        )

    @classmethod
    def diagonal_phases(cls, phases: Sequence[Expr], variables: Sequence[str]) -> "UnitaryField":
        return cls(
            MatrixForm.diagonal([exp(mul(I_UNIT, p)) for p in phases], variables),
            MatrixForm.diagonal([exp(neg(mul(I_UNIT, p))) for p in phases], variables)
        )

    def product(self, other: "UnitaryField") -> "UnitaryField":
        """self · other (크기 1 인자는 스칼라로 작용)"""
        return UnitaryField(self.matrix.wedge(other.matrix), other.inverse.wedge(self.inverse))

    def inverted(self) -> "UnitaryField":
        return UnitaryField(self.inverse, self.matrix)

    def block_sum(self, other: "UnitaryField") -> "UnitaryField":
        return UnitaryField(self.matrix.block_sum(other.matrix), self.inverse.block_sum(other.inverse))

    def translate(self, offset: Sequence[float]) -> "UnitaryField":
        return UnitaryField(self.matrix.translate(offset), self.inverse.translate(offset))

    def with_variables(self, variables: Sequence[str]) -> "UnitaryField":
        return UnitaryField(self.matrix.with_variables(variables), self.inverse.with_variables(variables))

    def dlog(self) -> MatrixForm:
        """g⁻¹dg (분기 없는 로그 미분)"""
        return self.inverse.wedge(self.matrix.exterior_d())

    def conjugate(self, form: MatrixForm) -> MatrixForm:
        """g · form · g⁻¹"""
        return self.matrix.wedge(form).wedge(self.inverse)

    def evaluate(self, coords: np.ndarray, order: int, variables: Sequence[str] = None) -> Tuple[JetForm, JetForm]:
        """(g, g⁻¹) 의 0-형식 제트"""
        memo: dict = {}
        return (
            self.matrix.evaluate(coords, order, variables, memo),
            self.inverse.evaluate(coords, order, variables, memo)
        )

    def jets(self, coords: np.ndarray, order: int, variables: Sequence[str] = None) -> Tuple[Jet, Jet]:
        """행렬 제트 (P, n, n) 쌍"""
        matrix, inverse = self.evaluate(coords, order, variables)
        return zero_form_jet(matrix), zero_form_jet(inverse)


def zero_form_jet(form: JetForm) -> Jet:
    """0-형식 JetForm 의 행렬 제트"""
    jet = form.coefficients.get(())
    if jet is None:
        n = form.size
        return Jet.constant(np.zeros((n, n)), form.npoints, form.dim, form.order, (n, n))
    return jet


# ========== 무작위 생성기 ==========

def random_trig(
    rng: np.random.Generator,
    variables: Sequence[str],
    amplitude: float = 1.0,
    modes: int = 3,
    degree: int = None
) -> Expr:
    """
    상수항 없는 실수 삼각다항식 Σ a cos(2π k·x) + b sin(2π k·x)

    Args:
        rng: 난수 생성기
        variables: 좌표 이름 (t 제외)
        amplitude: 계수 크기 상한
        modes: 모드 수
        degree: 최대 진동수 (기본 settings.RANDOM_TRIG_DEGREE)
    """
    degree = settings.RANDOM_TRIG_DEGREE if degree is None else degree
    dim = len(variables)
    total = ZERO
    for _ in range(modes):
        k = np.zeros(dim, dtype=int)
        while not k.any():
            k = rng.integers(-degree, degree + 1, size=dim)
        phase = ZERO
        for name, kk in zip(variables, k):
            if kk:
                phase = add(phase, mul(Const(2.0 * np.pi * float(kk)), Var(name)))
        a, b = amplitude * rng.uniform(-1.0, 1.0, size=2) / modes
        total = add(total, add(mul(Const(float(a)), cos(phase)), mul(Const(float(b)), sin(phase))))
    return total


def random_imaginary_form(
    rng: np.random.Generator,
    variables: Sequence[str],
    degree: int,
    amplitude: float = 1.0,
    coordinates: Sequence[str] = None
) -> MatrixForm:
    """iℝ-값 주기 스칼라 p-형식 (계수는 i·삼각다항식)"""
    coordinates = variables if coordinates is None else coordinates
    coefficients = {}
    for key in combinations(range(len(variables)), degree):
        coefficient = mul(I_UNIT, random_trig(rng, coordinates, amplitude))
        coefficients[key] = np.array([[coefficient]], dtype=object)
    return MatrixForm(coefficients, 1, variables, degree)


def random_anti_hermitian_form(
    rng: np.random.Generator,
    size: int,
    variables: Sequence[str],
    degree: int = 1,
    amplitude: float = 1.0
) -> MatrixForm:
    """u(n)-값 주기 p-형식 (M_ji = -conj(M_ij))"""
    coefficients = {}
    for key in combinations(range(len(variables)), degree):
        matrix = np.empty((size, size), dtype=object)
        for i in range(size):
            matrix[i, i] = mul(I_UNIT, random_trig(rng, variables, amplitude))
            for j in range(i + 1, size):
                re_part = random_trig(rng, variables, amplitude)
                im_part = random_trig(rng, variables, amplitude)
                matrix[i, j] = add(re_part, mul(I_UNIT, im_part))
                matrix[j, i] = add(neg(re_part), mul(I_UNIT, im_part))
        coefficients[key] = matrix
    return MatrixForm(coefficients, size, variables, degree)


def random_constant_unitary(rng: np.random.Generator, size: int) -> np.ndarray:
    """상수 유니터리 expm(K), K 는 무작위 반에르미트 행렬"""
    raw = rng.normal(size=(size, size)) + 1j * rng.normal(size=(size, size))
    return expm((raw - raw.conj().T) / 2.0)


def random_unitary_field(
    rng: np.random.Generator,
    size: int,
    variables: Sequence[str],
    amplitude: float = 1.0,
    diagonal: bool = False
) -> UnitaryField:
    """
    주기적 U(n)-값 장 U0·diag(exp(i f_a))·U0†

    Args:
        diagonal: True 이면 U0 = 1 (대각 위상만)
    """
    phases = [random_trig(rng, variables, amplitude) for _ in range(size)]
    if diagonal or size <= 1:
        return UnitaryField.diagonal_phases(phases, variables)
    u0 = random_constant_unitary(rng, size)
    forward = np.empty((size, size), dtype=object)
    backward = np.empty((size, size), dtype=object)
    for i in range(size):
        for j in range(size):
            f_sum, b_sum = ZERO, ZERO
            for a, phase in enumerate(phases):
                c = complex(u0[i, a] * np.conj(u0[j, a]))
                f_sum = add(f_sum, mul(Const(c), exp(mul(I_UNIT, phase))))
                b_sum = add(b_sum, mul(Const(c), exp(neg(mul(I_UNIT, phase)))))
            forward[i, j] = f_sum
            backward[i, j] = b_sum
    return UnitaryField(
        MatrixForm({(): forward}, size, variables, 0),
        MatrixForm({(): backward}, size, variables, 0)
    )


def unitarity_residual(field: UnitaryField, coords: np.ndarray, variables: Sequence[str] = None) -> float:
    """max(‖g g† − 1‖_F, ‖g g⁻¹ − 1‖_F)"""
    matrix, inverse = field.jets(coords, 0, variables)
    if field.size == 0 or matrix.npoints == 0:
        return 0.0
    eye = np.eye(field.size)
    g = matrix.value
    unitary = np.linalg.norm(g @ np.conj(np.swapaxes(g, 1, 2)) - eye, axis=(1, 2))
    inverse_error = np.linalg.norm(g @ inverse.value - eye, axis=(1, 2))
    return float(max(unitary.max(), inverse_error.max()))


def anti_hermitian_residual(form: JetForm) -> float:
    """‖Γ + Γ†‖ 최대값"""
    worst = 0.0
    for jet in form.coefficients.values():
        if jet.npoints == 0 or jet.shape[0] == 0:
            continue
        value = jet.value
        worst = max(worst, float(np.max(np.abs(value + np.conj(np.swapaxes(value, 1, 2))))))
    return worst
