"""
Čech / Deligne 복합체와 접속을 가진 U(1)-거브
코사이클 조건 검증, 곡률 H, 꼬임 사상, 거브 생성기
"""
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np

from gerbecalc.core.cover import MAX_SIMPLEX_DIM, ChartMap, Cover, SampleBank, sub_seed
from gerbecalc.core.fields import UnitaryField, random_imaginary_form, random_trig, zero_form_jet
from gerbecalc.core.forms import MatrixForm, merge_keys
from gerbecalc.core.global_forms import ChartwiseForm, FunctionForm, GlobalForm, gluing_residual, pointwise_residual
from gerbecalc.utils.exceptions import CoverError, FormShapeError, GluingError
from gerbecalc.utils.logger import setup_logger

logger = setup_logger(__name__)

Key = Tuple[int, ...]
Residuals = Dict[str, Tuple[float, int]]


def canonical(indices: Sequence[int]) -> Tuple[int, Optional[Key]]:
    """
    아래첨자 X_{..kji} 를 (i, j, k, ..) 순서로 받아 정렬 키와 치환 부호

    Returns:
        (부호, 정렬 키), 반복 지표면 (0, None)
    """
    return merge_keys((), tuple(indices))


def reexpress(form, cover: Cover, source_chart: int, target_chart: int):
    """차트 source_chart 좌표로 쓴 식을 target_chart 좌표로 (translate 를 가진 객체)"""
    if source_chart == target_chart:
        return form
    return form.translate(cover.shift(source_chart, target_chart))


# ========== Čech 코체인 ==========

@dataclass
class CechCochain:
    """
    스칼라 p-형식 값 Čech q-코체인

    values[(i0<..<iq)] 는 표준 순서 c(i0..iq) 이며 i0 좌표로 쓴다.
    치환에 대해 교대(alternating)로 확장된다.
    """
    cover: Cover
    degree: int
    form_degree: int
    values: Dict[Key, MatrixForm] = field(default_factory=dict)

    def value(self, charts: Sequence[int]) -> MatrixForm:
        """임의 순서 차트열의 값 (min 차트 좌표)"""
        sign, key = canonical(charts)
        if key is None:
            return MatrixForm.zero(self.form_degree, 1, self.cover.variables)
        try:
            form = self.values[key]
        except KeyError:
            raise CoverError(f"missing cochain data on simplex {key}") from None
        return form if sign > 0 else -form

    def _combine(self, other: "CechCochain", factor: float) -> "CechCochain":
        if (self.degree, self.form_degree) != (other.degree, other.form_degree):
            raise FormShapeError("cochain bidegree mismatch")
        values = dict(self.values)
        for key, form in other.values.items():
            term = form if factor == 1 else form.scale(factor)
            values[key] = values[key] + term if key in values else term
        return CechCochain(self.cover, self.degree, self.form_degree, values)

    def __add__(self, other: "CechCochain") -> "CechCochain":
        return self._combine(other, 1.0)

    def __sub__(self, other: "CechCochain") -> "CechCochain":
        return self._combine(other, -1.0)

    def scale(self, factor) -> "CechCochain":
        return CechCochain(
            self.cover, self.degree, self.form_degree,
            {k: v.scale(factor) for k, v in self.values.items()}
        )

    def exterior_d(self) -> "CechCochain":
        return CechCochain(
            self.cover, self.degree, self.form_degree + 1,
            {k: v.exterior_d() for k, v in self.values.items()}
        )

    def residual(self, bank: SampleBank, order: int = 0) -> Tuple[float, int]:
        """표본점에서 최대 절댓값"""
        worst, points = 0.0, 0
        for samples in bank.by_dim(self.degree):
            key = samples.simplex.charts
            if key not in self.values or samples.count == 0:
                continue
            value = self.values[key].evaluate(samples.coords[key[0]], order)
            worst = max(worst, value.max_abs())
            points += samples.count
        return worst, points


def delta_cochain(c: CechCochain) -> CechCochain:
    """
    Čech 코경계 (δc)(i0..i{q+1}) = Σ (-1)^k c(.. î_k ..)

    면 값은 격자 평행이동으로 i0 좌표에 다시 쓴다.
    """
    if c.degree + 1 > MAX_SIMPLEX_DIM:
        raise CoverError(f"nerve stops at {MAX_SIMPLEX_DIM}-simplices")
    values = {}
    for simplex in c.cover.simplices[c.degree + 1]:
        charts = simplex.charts
        total = MatrixForm.zero(c.form_degree, 1, c.cover.variables)
        for k in range(len(charts)):
            face = charts[:k] + charts[k + 1:]
            term = reexpress(c.value(face), c.cover, face[0], charts[0])
            total = total + term if k % 2 == 0 else total - term
        values[charts] = total
    return CechCochain(c.cover, c.degree + 1, c.form_degree, values)


@dataclass
class CechDeRham:
    """Čech-de Rham 이중 복합체 원소 (Čech 차수 -> 코체인)"""
    cover: Cover
    total_degree: int
    components: Dict[int, CechCochain]


def total_D(element: CechDeRham) -> CechDeRham:
    """
    D = d + (-1)^p δ (p 는 형식 차수)

    nerve 의 최고 차수를 넘는 δ 성분은 버린다.
    """
    cover = element.cover
    out: Dict[int, CechCochain] = {}

    def accumulate(cochain: CechCochain) -> None:
        q = cochain.degree
        out[q] = out[q] + cochain if q in out else cochain

    for q, cochain in element.components.items():
        if cochain.form_degree + 1 <= cover.dim:
            accumulate(cochain.exterior_d())
        if q + 1 <= MAX_SIMPLEX_DIM:
            delta = delta_cochain(cochain)
            accumulate(delta if cochain.form_degree % 2 == 0 else delta.scale(-1.0))
    return CechDeRham(cover, element.total_degree + 1, out)


def random_cochain(cover: Cover, degree: int, form_degree: int, rng: np.random.Generator) -> CechCochain:
    values = {
        s.charts: random_imaginary_form(rng, cover.variables, form_degree, amplitude=0.5)
        for s in cover.simplices[degree]
    }
    return CechCochain(cover, degree, form_degree, values)


# ========== Deligne 1-코체인 (꼬임 사상) ==========

@dataclass
class DeligneOne:
    """
    α̂ = ({χ_ji}, {Π_i})

    chi[(i<j)] = χ_ji (i 좌표), pi[i] = Π_i (iℝ-값 1-형식)
    """
    cover: Cover
    chi: Dict[Key, UnitaryField]
    pi: Dict[int, MatrixForm]
    name: str = ""

    @classmethod
    def identity(cls, cover: Cover) -> "DeligneOne":
        variables = cover.variables
        return cls(
            cover,
            {s.charts: UnitaryField.identity(1, variables) for s in cover.simplices[1]},
            {c.index: MatrixForm.zero(1, 1, variables) for c in cover.charts},
            "identity"
        )

    def chi_between(self, j: int, i: int) -> UnitaryField:
        """χ_ji (min(i, j) 좌표)"""
        sign, key = canonical((i, j))
        if key is None:
            return UnitaryField.identity(1, self.cover.variables)
        chi = self.chi[key]
        return chi if sign > 0 else chi.inverted()

    def inverse(self) -> "DeligneOne":
        return DeligneOne(
            self.cover,
            {k: v.inverted() for k, v in self.chi.items()},
            {k: -v for k, v in self.pi.items()},
            f"{self.name}^-1"
        )

    def compose(self, other: "DeligneOne") -> "DeligneOne":
        """Dα̂ + Dα̂' = D(α̂ + α̂') 인 곱"""
        return DeligneOne(
            self.cover,
            {k: self.chi[k].product(other.chi[k]) for k in self.chi},
            {k: self.pi[k] + other.pi[k] for k in self.pi},
            f"{self.name}+{other.name}"
        )

    def pull(self, chart_map: ChartMap) -> "DeligneOne":
        target = chart_map.target
        chi = {}
        for simplex in target.simplices[1]:
            r0, r1 = simplex.charts
            c0, c1 = chart_map.image((r0, r1))
            value = self.chi_between(c1, c0)
            chi[simplex.charts] = value.translate(chart_map.offset_from(min(c0, c1), r0))
        pi = {
            c.index: self.pi[chart_map.rho[c.index]].translate(chart_map.offsets[c.index])
            for c in target.charts
        }
        return DeligneOne(target, chi, pi, self.name)


def random_deligne_one(cover: Cover, seed: int, amplitude: float = 0.5, name: str = "") -> DeligneOne:
    """무작위 매끄러운 χ (단위 절댓값), Π (삼각다항식)"""
    rng = sub_seed(seed, "twist1", name)
    variables = cover.variables
    chi = {
        s.charts: UnitaryField.from_phase(random_trig(rng, variables, amplitude), variables)
        for s in cover.simplices[1]
    }
    pi = {c.index: random_imaginary_form(rng, variables, 1, amplitude) for c in cover.charts}
    return DeligneOne(cover, chi, pi, name or f"random{seed}")


# ========== 거브 ==========

class GerbeConn:
    """
    접속을 가진 U(1)-거브 (λ_kji, A_ji, B_i)

    Note:
        - 정렬된 단체 하나당 한 방향만 저장 (완전 정규화는 접근자에서)
        - lam[(i<j<k)] = λ_kji, a[(i<j)] = A_ji, 모두 최소 차트 좌표
        - trivialization/beta 가 있으면 λ̂ = Dα̂ + β (번들 생성에 사용)
    """

    def __init__(
        self,
        cover: Cover,
        lam: Dict[Key, UnitaryField],
        a: Dict[Key, MatrixForm],
        b: Dict[int, MatrixForm],
        name: str = "",
        trivialization: Optional[DeligneOne] = None,
        beta: Optional[MatrixForm] = None
    ):
        self.cover = cover
        self._lam = lam
        self._a = a
        self._b = b
        self.name = name
        self.trivialization = trivialization
        self.beta = beta

    @property
    def variables(self) -> Tuple[str, ...]:
        return self.cover.variables

    # ---------- 접근자 ----------

    def lam(self, k: int, j: int, i: int) -> UnitaryField:
        """λ_kji (반복 지표는 1, 홀치환은 역)"""
        sign, key = canonical((i, j, k))
        if key is None:
            return UnitaryField.identity(1, self.variables)
        value = self._lam[key]
        return value if sign > 0 else value.inverted()

    def a(self, j: int, i: int) -> MatrixForm:
        """A_ji (A_ij = -A_ji)"""
        sign, key = canonical((i, j))
        if key is None:
            return MatrixForm.zero(1, 1, self.variables)
        value = self._a[key]
        return value if sign > 0 else -value

    def b(self, i: int) -> MatrixForm:
        return self._b[i]

    # ---------- 전역 형식 ----------

    def h_form(self) -> GlobalForm:
        """H = {dB_i}"""
        return ChartwiseForm(self.cover, {i: b.exterior_d() for i, b in self._b.items()}, 3)

    def __repr__(self) -> str:
        return f"GerbeConn({self.name}, {self.cover})"


def trivial_gerbe(cover: Cover, name: str = "trivial") -> GerbeConn:
    variables = cover.variables
    return GerbeConn(
        cover,
        {s.charts: UnitaryField.identity(1, variables) for s in cover.simplices[2]},
        {s.charts: MatrixForm.zero(1, 1, variables) for s in cover.simplices[1]},
        {c.index: MatrixForm.zero(2, 1, variables) for c in cover.charts},
        name,
        trivialization=DeligneOne.identity(cover),
        beta=MatrixForm.zero(2, 1, variables)
    )


def apply_twist_morphism(g: GerbeConn, alpha: DeligneOne, name: str = "") -> GerbeConn:
    """
    λ̂' = λ̂ + Dα̂

    λ' = λ·δχ, A'_ji = A_ji + χ⁻¹dχ + Π_j - Π_i, B'_i = B_i + dΠ_i
    """
    cover = g.cover
    lam = {}
    for simplex in cover.simplices[2]:
        i, j, k = simplex.charts
        # (δχ)(i,j,k) = χ(j,k) χ(i,k)⁻¹ χ(i,j)
        chi_kj = reexpress(alpha.chi_between(k, j), cover, j, i)
        delta = chi_kj.product(alpha.chi_between(k, i).inverted()).product(alpha.chi_between(j, i))
        lam[simplex.charts] = g.lam(k, j, i).product(delta)
    a = {}
    for simplex in cover.simplices[1]:
        i, j = simplex.charts
        pi_j = reexpress(alpha.pi[j], cover, j, i)
        a[simplex.charts] = g.a(j, i) + alpha.chi_between(j, i).dlog() + pi_j - alpha.pi[i]
    b = {c.index: g.b(c.index) + alpha.pi[c.index].exterior_d() for c in cover.charts}
    trivialization = None
    if g.trivialization is not None:
        trivialization = g.trivialization.compose(alpha)
    logger.debug(f"🔄 꼬임 사상 적용: {g.name} + D({alpha.name})")
    return GerbeConn(cover, lam, a, b, name or f"{g.name}+D{alpha.name}", trivialization, g.beta)


def deligne_differential(alpha: DeligneOne) -> GerbeConn:
    """Dα̂ (자명 거브에 α̂ 적용)"""
    return apply_twist_morphism(trivial_gerbe(alpha.cover), alpha, f"D{alpha.name}")


def shift_by_xi(g: GerbeConn, xi: MatrixForm, name: str = "") -> GerbeConn:
    """λ̂_ξ: B_i <- B_i + ξ"""
    if xi.size != 1 or xi.degree != 2:
        raise FormShapeError("xi must be a scalar 2-form")
    b = {i: form + xi for i, form in g._b.items()}
    beta = None if g.beta is None else g.beta + xi
    return GerbeConn(g.cover, dict(g._lam), dict(g._a), b, name or f"{g.name}_xi", g.trivialization, beta)


def make_coboundary_gerbe(cover: Cover, seed: int, beta: Optional[MatrixForm] = None, name: str = "") -> GerbeConn:
    """
    λ = δχ, A = χ⁻¹dχ + Π_j - Π_i, B = dΠ + β 인 거브

    Args:
        cover: 덮개
        seed: χ, Π 생성 시드
        beta: 전역 주기 2-형식 (기본 0)
    """
    name = name or f"coboundary{seed}"
    alpha = random_deligne_one(cover, seed, name=name)
    gerbe = apply_twist_morphism(trivial_gerbe(cover), alpha, name)
    if beta is not None and not beta.is_zero():
        gerbe = shift_by_xi(gerbe, beta, name)
    logger.debug(f"✅ 경계 거브 생성: {name}")
    return gerbe


def pull_gerbe(g: GerbeConn, chart_map: ChartMap, name: str = "") -> GerbeConn:
    """세분 제한 또는 평행이동 당김"""
    target = chart_map.target
    lam = {}
    for simplex in target.simplices[2]:
        r0, r1, r2 = simplex.charts
        c0, c1, c2 = chart_map.image(simplex.charts)
        value = g.lam(c2, c1, c0)
        lam[simplex.charts] = value.translate(chart_map.offset_from(min(c0, c1, c2), r0))
    a = {}
    for simplex in target.simplices[1]:
        r0, r1 = simplex.charts
        c0, c1 = chart_map.image(simplex.charts)
        a[simplex.charts] = g.a(c1, c0).translate(chart_map.offset_from(min(c0, c1), r0))
    b = {
        c.index: g.b(chart_map.rho[c.index]).translate(chart_map.offsets[c.index])
        for c in target.charts
    }
    trivialization = None if g.trivialization is None else g.trivialization.pull(chart_map)
    beta = None
    if g.beta is not None:
        # β 는 주기 형식이므로 평행이동량만 반영
        shift = chart_map.offsets[0] if len(chart_map.offsets) else np.zeros(target.dim)
        beta = g.beta.translate(shift)
    return GerbeConn(target, lam, a, b, name or f"{g.name}*", trivialization, beta)


# ========== 검증 ==========

def validate_gerbe(g: GerbeConn, bank: SampleBank) -> Residuals:
    """
    λ 코사이클, λ⁻¹dλ = δA, B_j - B_i = dA, 정규화, 단위 절댓값 잔차

    Returns:
        {조건: (최대 잔차, 점 수)}

    Note:
        - 정렬된 지표의 λ, A 만 저장하므로 λ_jki = λ_kji⁻¹, A_ij = -A_ji 와
          반복 지표의 λ = 1 은 구조적으로 성립한다
        - "normalization" 은 따로 저장된 역 식 λ⁻¹ 과 λ 의 곱이 1 인지를 잰다
    """
    cover = g.cover
    report: Residuals = {}

    def record(name: str, value: float, points: int) -> None:
        old_value, old_points = report.get(name, (0.0, 0))
        report[name] = (max(old_value, value), old_points + points)

    # (δλ)(i,j,k,l) = λ(j,k,l) λ(i,k,l)⁻¹ λ(i,j,l) λ(i,j,k)⁻¹ = 1
    for samples in bank.by_dim(3):
        if samples.count == 0:
            continue
        i, j, k, l = samples.simplex.charts
        product = np.ones(samples.count, dtype=complex)
        for face, power in (((j, k, l), 1), ((i, k, l), -1), ((i, j, l), 1), ((i, j, k), -1)):
            value = zero_form_jet(g.lam(face[2], face[1], face[0]).matrix.evaluate(samples.coords[face[0]], 0))
            product *= value.value[:, 0, 0] ** power
        record("lambda_cocycle", float(np.max(np.abs(product - 1.0))), samples.count)
    report.setdefault("lambda_cocycle", (0.0, 0))

    # λ⁻¹dλ = A_ji + A_ik + A_kj, 단위 절댓값
    for samples in bank.by_dim(2):
        if samples.count == 0:
            continue
        i, j, k = samples.simplex.charts
        coords = samples.coords
        lam, lam_inv = g.lam(k, j, i).evaluate(coords[i], 1)
        dlog = lam_inv.truncate(0).wedge(lam.exterior_d())
        rhs = g.a(j, i).evaluate(coords[i], 0) - g.a(k, i).evaluate(coords[i], 0) + g.a(k, j).evaluate(coords[j], 0)
        record("dlog_lambda", (dlog - rhs).max_abs(), samples.count)
        modulus = np.abs(lam.coefficients[()].value[:, 0, 0]) if () in lam.coefficients else np.zeros(samples.count)
        record("unit_modulus", float(np.max(np.abs(modulus - 1.0))), samples.count)
        # 정규화 λ_kji λ_jki = 1: λ_jki 는 저장된 역 식이므로 (λ, λ⁻¹) 두 식의 일치를 본다
        swapped = zero_form_jet(lam_inv.truncate(0)).value[:, 0, 0]
        record("normalization", float(np.max(np.abs(lam.coefficients[()].value[:, 0, 0] * swapped - 1.0))), samples.count)
    for name in ("dlog_lambda", "unit_modulus", "normalization"):
        report.setdefault(name, (0.0, 0))

    # B_j - B_i = dA_ji
    for samples in bank.by_dim(1):
        if samples.count == 0:
            continue
        i, j = samples.simplex.charts
        coords = samples.coords
        d_a = g.a(j, i).evaluate(coords[i], 1).exterior_d()
        difference = g.b(j).evaluate(coords[j], 0) - g.b(i).evaluate(coords[i], 0)
        record("curving", (difference - d_a).max_abs(), samples.count)
    report.setdefault("curving", (0.0, 0))
    return report


def curvature_H(g: GerbeConn, bank: SampleBank, tolerance: Optional[float] = None) -> Tuple[GlobalForm, Residuals]:
    """
    H = {dB_i} 와 접합 / 닫힘 잔차

    Args:
        g: 거브
        bank: 표본
        tolerance: 주면 접합 잔차가 이 값을 넘을 때 예외

    Returns:
        (H, {"gluing": .., "closed": ..})

    Raises:
        GluingError: tolerance 를 넘는 접합 잔차
    """
    h = g.h_form()
    report = {
        "gluing": gluing_residual(h, bank.edges()),
        "closed": pointwise_residual(
            FunctionForm(g.cover, lambda chart, coords, order: h.evaluate(chart, coords, order + 1).exterior_d(), 4),
            bank.charts()
        )
    }
    if tolerance is not None and not report["gluing"][0] <= tolerance:
        raise GluingError(f"{g.name}: H does not glue (residual {report['gluing'][0]:.3g})")
    return h, report


def random_xi(cover: Cover, seed: int, amplitude: float = 0.5) -> MatrixForm:
    """무작위 전역 iℝ-값 2-형식"""
    rng = sub_seed(seed, "xi")
    return random_imaginary_form(rng, cover.variables, 2, amplitude)

