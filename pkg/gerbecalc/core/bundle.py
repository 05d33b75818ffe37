"""
λ-꼬인 벡터 번들과 호환 접속
검증, 곡률, 직합, 게이지 변환, 꼬임 수송, 세분/평행이동 당김, 경로와 2-매개변수 족
"""
from dataclasses import dataclass
from typing import Callable, Dict, List, Optional, Sequence, Tuple

import numpy as np

from gerbecalc.core.cover import ChartMap, Cover, SampleBank, SampleSet, sub_seed
from gerbecalc.core.deligne import DeligneOne, GerbeConn, Residuals, apply_twist_morphism, canonical, reexpress
from gerbecalc.core.expression import I_UNIT, ONE, PI, Const, Expr, Var, div, mul, power, sin, sub
from gerbecalc.core.fields import (
    UnitaryField, anti_hermitian_residual, random_anti_hermitian_form,
    random_unitary_field, unitarity_residual, zero_form_jet
)
from gerbecalc.core.forms import JetForm, MatrixForm
from gerbecalc.utils.exceptions import CompatibilityError, CoverError, MorphismError
from gerbecalc.utils.logger import setup_logger

logger = setup_logger(__name__)

Key = Tuple[int, ...]


class TwistedBundle:
    """
    λ-꼬인 벡터 번들 (U, g_ji, λ)

    Note:
        - g[(i<j)] = g_ji (i 좌표), g_ij = g_ji⁻¹, g_ii = 1 은 접근자에서
        - rank 0 은 영 번들 𝒪
        - structure 는 자기동형/섭동 생성에 쓰는 계보
          ("scalar" | "sum" | "gauge" | "transport" | "pulled")
    """

    def __init__(
        self,
        gerbe: GerbeConn,
        rank: int,
        g: Dict[Key, UnitaryField],
        name: str = "",
        structure: str = "scalar",
        parts: tuple = ()
    ):
        self.gerbe = gerbe
        self.rank = rank
        self._g = g
        self.name = name
        self.structure = structure
        self.parts = parts
        self.standard: Optional["TwistedConnection"] = None

    @property
    def cover(self) -> Cover:
        return self.gerbe.cover

    @property
    def variables(self) -> Tuple[str, ...]:
        return self.cover.variables

    def transition(self, j: int, i: int) -> UnitaryField:
        """g_ji (min(i, j) 좌표)"""
        sign, key = canonical((i, j))
        if key is None:
            return UnitaryField.identity(self.rank, self.variables)
        value = self._g[key]
        return value if sign > 0 else value.inverted()

    def transitions(self) -> List[Tuple[Key, UnitaryField]]:
        return sorted(self._g.items())

    def __repr__(self) -> str:
        return f"TwistedBundle({self.name}, rank={self.rank}, gerbe={self.gerbe.name})"


class TwistedConnection:
    """
    호환 접속 {Γ_i} (u(n)-값 1-형식)

    매개변수 좌표(t 또는 s, t)를 가진 족도 같은 클래스로 표현한다.
    각 매개변수 값에서 호환 조건 Γ_i - g⁻¹Γ_j g - g⁻¹dg = -A_ji·1 을 만족해야 한다.
    """

    def __init__(self, bundle: TwistedBundle, gamma: Dict[int, MatrixForm], name: str = ""):
        self.bundle = bundle
        self.gamma = gamma
        self.name = name
        first = next(iter(gamma.values()))
        self.variables = first.variables
        if self.variables[: bundle.cover.dim] != bundle.variables:
            raise CompatibilityError(f"connection ambient {self.variables} does not extend {bundle.variables}")

    @property
    def gerbe(self) -> GerbeConn:
        return self.bundle.gerbe

    @property
    def cover(self) -> Cover:
        return self.bundle.cover

    @property
    def parameters(self) -> Tuple[str, ...]:
        return self.variables[self.cover.dim:]

    def at(self, name: str, value: float) -> "TwistedConnection":
        """매개변수 하나를 상수로 고정"""
        if name not in self.parameters:
            raise CompatibilityError(f"connection has no parameter {name}")
        gamma = {chart: form.fix_variable(name, value) for chart, form in self.gamma.items()}
        return TwistedConnection(self.bundle, gamma, f"{self.name}|{name}={value:g}")

    def evaluate(self, chart: int, coords: np.ndarray, order: int, memo: Optional[dict] = None) -> JetForm:
        return self.gamma[chart].evaluate(coords, order, self.variables, memo)

    def __repr__(self) -> str:
        return f"TwistedConnection({self.name}, bundle={self.bundle.name}, parameters={self.parameters})"


@dataclass
class BundleMorphism:
    """차트별 U(n)-값 φ_i: E -> F (f_j g_ji = h_ji f_i)"""
    source: TwistedBundle
    target: TwistedBundle
    phi: Dict[int, UnitaryField]
    name: str = ""

    def inverse(self) -> "BundleMorphism":
        return BundleMorphism(self.target, self.source, {k: v.inverted() for k, v in self.phi.items()}, f"{self.name}^-1")

    def compose(self, other: "BundleMorphism") -> "BundleMorphism":
        """self ∘ other"""
        if other.target is not self.source:
            raise MorphismError("morphisms do not compose")
        return BundleMorphism(
            other.source, self.target,
            {k: self.phi[k].product(other.phi[k]) for k in self.phi},
            f"{self.name}∘{other.name}"
        )


def identity_morphism(bundle: TwistedBundle) -> BundleMorphism:
    return BundleMorphism(
        bundle, bundle,
        {c.index: UnitaryField.identity(bundle.rank, bundle.variables) for c in bundle.cover.charts},
        "id"
    )


def central_automorphism(bundle: TwistedBundle, value: Expr, name: str = "") -> BundleMorphism:
    """
    전역 스칼라 장 φ_i = f·1 (모든 전이함수와 교환)

    Args:
        value: |f| = 1 인 주기 식 (예: exp(2*pi*i*x1))
    """
    n = bundle.rank
    variables = bundle.variables
    field_ = UnitaryField(
        MatrixForm.scalar(value, variables).times_identity(n),
        MatrixForm.scalar(div(ONE, value), variables).times_identity(n)
    )
    return BundleMorphism(bundle, bundle, {c.index: field_ for c in bundle.cover.charts}, name or "phi")


def pull_morphism(phi: BundleMorphism, chart_map: ChartMap, source: TwistedBundle, target: TwistedBundle) -> BundleMorphism:
    """f*φ (source, target 은 이미 당긴 번들)"""
    fields = {
        c.index: phi.phi[chart_map.rho[c.index]].translate(chart_map.offsets[c.index])
        for c in chart_map.target.charts
    }
    return BundleMorphism(source, target, fields, f"{phi.name}*")

# ========== 검증 ==========

def _matrix(field_: UnitaryField, coords: np.ndarray) -> np.ndarray:
    return zero_form_jet(field_.matrix.evaluate(coords, 0)).value


def validate_bundle(bundle: TwistedBundle, bank: SampleBank) -> Residuals:
    """
    꼬인 코사이클 g_kj g_ji = g_ki λ_kji 와 유니터리성

    Returns:
        {"cocycle": .., "unitarity": ..}
    """
    report: Residuals = {"cocycle": (0.0, 0), "unitarity": (0.0, 0)}
    if bundle.rank == 0:
        return report
    gerbe = bundle.gerbe
    worst, points = 0.0, 0
    for samples in bank.by_dim(2):
        if samples.count == 0:
            continue
        i, j, k = samples.simplex.charts
        coords = samples.coords
        g_kj = _matrix(bundle.transition(k, j), coords[j])
        g_ji = _matrix(bundle.transition(j, i), coords[i])
        g_ki = _matrix(bundle.transition(k, i), coords[i])
        lam = _matrix(gerbe.lam(k, j, i), coords[i])
        residual = np.linalg.norm(g_kj @ g_ji - g_ki * lam, axis=(1, 2))
        worst = max(worst, float(residual.max()))
        points += samples.count
    report["cocycle"] = (worst, points)
    worst, points = 0.0, 0
    for samples in bank.edges():
        if samples.count == 0:
            continue
        i, j = samples.simplex.charts
        worst = max(worst, unitarity_residual(bundle.transition(j, i), samples.coords[i]))
        points += samples.count
    report["unitarity"] = (worst, points)
    return report


def _param_samples(conn: TwistedConnection, samples: SampleSet) -> SampleSet:
    """매개변수 좌표에 결정적 값 (0, 1/2, 1 및 내부점) 을 붙임"""
    values = np.array([0.0, 0.5, 1.0, 0.3141592653589793])
    for name in conn.parameters:
        samples = samples.with_parameter(name, values)
    return samples


def validate_connection(conn: TwistedConnection, bank: SampleBank) -> Residuals:
    """
    반에르미트성, 호환 조건, 비대각 항 항등식, 곡률 접합

    매개변수 족이면 여러 매개변수 값에서 검사한다.
    """
    bundle, gerbe = conn.bundle, conn.gerbe
    report: Residuals = {
        "anti_hermitian": (0.0, 0), "compatibility": (0.0, 0),
        "off_terms": (0.0, 0), "curvature_gluing": (0.0, 0)
    }
    if bundle.rank == 0:
        return report
    variables = conn.variables
    n = bundle.rank

    def update(name: str, value: float, points: int) -> None:
        old_value, old_points = report[name]
        report[name] = (max(old_value, value), old_points + points)

    for base in bank.charts():
        samples = _param_samples(conn, base)
        if samples.count == 0:
            continue
        chart = samples.simplex.anchor
        update("anti_hermitian", anti_hermitian_residual(conn.evaluate(chart, samples.coords[chart], 0)), samples.count)

    for base in bank.edges():
        samples = _param_samples(conn, base)
        if samples.count == 0:
            continue
        i, j = samples.simplex.charts
        coords = samples.coords
        g, g_inv = bundle.transition(j, i).with_variables(variables).evaluate(coords[i], 2, variables)
        gamma_i = conn.evaluate(i, coords[i], 1)
        gamma_j = conn.evaluate(j, coords[j], 1)
        a_ji = gerbe.a(j, i).with_variables(variables).evaluate(coords[i], 1, variables)
        g1, g1_inv = g.truncate(1), g_inv.truncate(1)
        g_jet, g_inv_jet = zero_form_jet(g1), zero_form_jet(g1_inv)
        conjugated = gamma_j.matmul_function(g_inv_jet, g_jet)
        dlog = g1_inv.truncate(0).wedge(g1.exterior_d())
        lhs = gamma_i.truncate(0) - conjugated.truncate(0) - dlog + a_ji.truncate(0).wedge(JetForm.constant(1.0, len(variables), samples.count, 0, n))
        update("compatibility", lhs.max_abs(), samples.count)

        # R_i = g⁻¹ R_j g - dA_ji·1
        r_i = curvature_jet(conn, i, coords[i], 0)
        r_j = curvature_jet(conn, j, coords[j], 0)
        d_a = a_ji.exterior_d()
        rhs = r_j.matmul_function(zero_form_jet(g_inv.truncate(0)), zero_form_jet(g.truncate(0)))
        rhs = rhs - d_a.wedge(JetForm.constant(1.0, len(variables), samples.count, 0, n))
        update("curvature_gluing", (r_i - rhs).max_abs(), samples.count)

    for base in bank.by_dim(2):
        samples = _param_samples(conn, base)
        if samples.count == 0:
            continue
        i, j, k = samples.simplex.charts
        coords = samples.coords
        dlogs = {}
        for (b, a_) in ((j, i), (k, j), (k, i)):
            field_ = bundle.transition(b, a_).with_variables(variables)
            m, m_inv = field_.evaluate(coords[min(a_, b)], 1, variables)
            dlogs[(b, a_)] = (m_inv.truncate(0).wedge(m.exterior_d()), zero_form_jet(m.truncate(0)), zero_form_jet(m_inv.truncate(0)))
        dlog_ji, g_ji, g_ji_inv = dlogs[(j, i)]
        dlog_kj = dlogs[(k, j)][0]
        dlog_ki = dlogs[(k, i)][0]
        lhs = dlog_kj.matmul_function(g_ji_inv, g_ji) + dlog_ji - dlog_ki
        a_sum = (
            gerbe.a(j, i).with_variables(variables).evaluate(coords[i], 0, variables)
            - gerbe.a(k, i).with_variables(variables).evaluate(coords[i], 0, variables)
            + gerbe.a(k, j).with_variables(variables).evaluate(coords[j], 0, variables)
        )
        rhs = a_sum.wedge(JetForm.constant(1.0, len(variables), samples.count, 0, n))
        update("off_terms", (lhs - rhs).max_abs(), samples.count)
    return report


def validate_morphism(phi: BundleMorphism, bank: SampleBank) -> Residuals:
    """얽힘 f_j g_ji = h_ji f_i 과 유니터리성"""
    report: Residuals = {"intertwining": (0.0, 0), "unitarity": (0.0, 0)}
    if phi.source.rank != phi.target.rank:
        raise MorphismError(f"rank mismatch {phi.source.rank} -> {phi.target.rank}")
    if phi.source.rank == 0:
        return report
    worst, points = 0.0, 0
    for samples in bank.edges():
        if samples.count == 0:
            continue
        i, j = samples.simplex.charts
        coords = samples.coords
        lhs = _matrix(phi.phi[j], coords[j]) @ _matrix(phi.source.transition(j, i), coords[i])
        rhs = _matrix(phi.target.transition(j, i), coords[i]) @ _matrix(phi.phi[i], coords[i])
        worst = max(worst, float(np.max(np.linalg.norm(lhs - rhs, axis=(1, 2)))))
        points += samples.count
    report["intertwining"] = (worst, points)
    worst, points = 0.0, 0
    for samples in bank.charts():
        chart = samples.simplex.anchor
        worst = max(worst, unitarity_residual(phi.phi[chart], samples.coords[chart]))
        points += samples.count
    report["unitarity"] = (worst, points)
    return report


def check_morphism(phi: BundleMorphism, bank: SampleBank, tolerance: float) -> None:
    """φ 가 유니터리 번들 사상이 아니면 MorphismError"""
    report = validate_morphism(phi, bank)
    if report["unitarity"][0] > tolerance:
        raise MorphismError(f"phi {phi.name} is not unitary (residual {report['unitarity'][0]:.3g})")
    if report["intertwining"][0] > tolerance:
        raise MorphismError(f"phi {phi.name} does not intertwine transitions (residual {report['intertwining'][0]:.3g})")


# ========== 곡률 ==========

def curvature(conn: TwistedConnection) -> Dict[int, MatrixForm]:
    """기호 곡률 R_i = dΓ_i + Γ_i∧Γ_i"""
    return {i: gamma.exterior_d() + gamma.wedge(gamma) for i, gamma in conn.gamma.items()}


def curvature_jet(conn: TwistedConnection, chart: int, coords: np.ndarray, order: int) -> JetForm:
    """점별 곡률 (Γ 는 order+1 제트로 평가)"""
    gamma = conn.evaluate(chart, coords, order + 1)
    low = gamma.truncate(order)
    return gamma.exterior_d() + low.wedge(low)


# ========== 생성 / 구성 ==========

def _require_trivialization(gerbe: GerbeConn) -> DeligneOne:
    if gerbe.trivialization is None:
        raise CompatibilityError(f"gerbe {gerbe.name} carries no trivialization to build bundles on")
    return gerbe.trivialization


def _over_trivialization(
    gerbe: GerbeConn,
    rank: int,
    base_transition: Callable[[int, int], UnitaryField],
    base_gamma: Callable[[int], MatrixForm],
    name: str,
    structure: str
) -> Tuple[TwistedBundle, TwistedConnection]:
    """자명 거브 위 데이터 (g0, Γ0) 를 λ̂ = Dα̂ + β 위로 옮김: g = χ g0, Γ = Γ0 + Π·1"""
    alpha = _require_trivialization(gerbe)
    cover = gerbe.cover
    g = {}
    for simplex in cover.simplices[1]:
        i, j = simplex.charts
        g[simplex.charts] = alpha.chi_between(j, i).product(base_transition(i, j))
    bundle = TwistedBundle(gerbe, rank, g, name, structure)
    gamma = {c.index: base_gamma(c.index) + alpha.pi[c.index].times_identity(rank) for c in cover.charts}
    connection = TwistedConnection(bundle, gamma, f"{name}.standard")
    bundle.standard = connection
    return bundle, connection


def make_trivial_bundle(gerbe: GerbeConn, rank: int, name: str = "") -> Tuple[TwistedBundle, TwistedConnection]:
    """g = χ·1, Γ = Π·1 (자명 거브 위에서는 g = 1, Γ = 0)"""
    variables = gerbe.variables
    return _over_trivialization(
        gerbe, rank,
        lambda i, j: UnitaryField.identity(rank, variables),
        lambda i: MatrixForm.zero(1, rank, variables),
        name or f"trivial{rank}", "scalar"
    )


def make_line_bundle(gerbe: GerbeConn, k: int, name: str = "") -> Tuple[TwistedBundle, TwistedConnection]:
    """
    첫 천 수 k 인 선다발 (x1-x2 평면)

    Γ_i = -2πik x2 dx1, g_ji = exp(-2πik s2(i,j) x1), s = shift(i, j).
    곡률은 모든 차트에서 2πik dx1∧dx2.
    """
    cover = gerbe.cover
    if cover.dim < 2:
        raise CoverError("line bundles need a torus of dimension >= 2")
    variables = cover.variables
    x1, x2 = Var(variables[0]), Var(variables[1])
    two_pi_ik = mul(I_UNIT, Const(2.0 * np.pi * k))

    def transition(i: int, j: int) -> UnitaryField:
        s2 = float(cover.shift(i, j)[1])
        if k == 0 or s2 == 0:
            return UnitaryField.identity(1, variables)
        phase = mul(Const(-2.0 * np.pi * k * s2), x1)
        return UnitaryField.from_phase(phase, variables)

    def gamma(i: int) -> MatrixForm:
        if k == 0:
            return MatrixForm.zero(1, 1, variables)
        return MatrixForm.scalar(mul(Const(-1.0), mul(two_pi_ik, x2)), variables, (0,))

    logger.debug(f"🔄 선다발 생성: k={k}, 거브 {gerbe.name}")
    return _over_trivialization(gerbe, 1, transition, gamma, name or f"line{k}", "scalar")


def direct_sum(e: TwistedBundle, f: TwistedBundle, name: str = "") -> TwistedBundle:
    """블록 합 E ⊕ F"""
    if e.gerbe is not f.gerbe:
        raise CompatibilityError(f"bundles {e.name} and {f.name} live over different gerbes")
    g = {key: e._g[key].block_sum(f._g[key]) for key in e._g}
    return TwistedBundle(e.gerbe, e.rank + f.rank, g, name or f"{e.name}+{f.name}", "sum", (e, f))


def direct_sum_conn(a: TwistedConnection, b: TwistedConnection, bundle: Optional[TwistedBundle] = None) -> TwistedConnection:
    """Γ_E ⊕ Γ_F (bundle 을 주면 그 합 번들 위 접속으로)"""
    if a.variables != b.variables:
        raise CompatibilityError("connections have different parameter spaces")
    bundle = bundle or direct_sum(a.bundle, b.bundle)
    gamma = {i: a.gamma[i].block_sum(b.gamma[i]) for i in a.gamma}
    return TwistedConnection(bundle, gamma, f"{a.name}+{b.name}")


def zero_bundle(gerbe: GerbeConn) -> Tuple[TwistedBundle, TwistedConnection]:
    """영 번들 𝒪 (어떤 거브 위에서도 존재)"""
    variables = gerbe.variables
    cover = gerbe.cover
    g = {s.charts: UnitaryField.identity(0, variables) for s in cover.simplices[1]}
    bundle = TwistedBundle(gerbe, 0, g, "O", "scalar")
    gamma = {c.index: MatrixForm.zero(1, 0, variables) for c in cover.charts}
    bundle.standard = TwistedConnection(bundle, gamma, "O.standard")
    return bundle, bundle.standard


def apply_morphism(bundle: TwistedBundle, phi: Dict[int, UnitaryField], name: str = "") -> Tuple[TwistedBundle, BundleMorphism]:
    """
    F = φ(E): h_ji = φ_j g_ji φ_i⁻¹

    Returns:
        (F, 사상 E -> F)
    """
    cover = bundle.cover
    g = {}
    for simplex in cover.simplices[1]:
        i, j = simplex.charts
        phi_j = reexpress(phi[j], cover, j, i)
        g[simplex.charts] = phi_j.product(bundle.transition(j, i)).product(phi[i].inverted())
    target = TwistedBundle(bundle.gerbe, bundle.rank, g, name or f"{bundle.name}^phi", "gauge", (bundle,))
    morphism = BundleMorphism(bundle, target, dict(phi), f"phi:{bundle.name}->{target.name}")
    target.parts = (bundle, morphism)
    return target, morphism


def gauge_transform(conn: TwistedConnection, phi: BundleMorphism) -> TwistedConnection:
    """
    φ*Γ = φ⁻¹Γφ + φ⁻¹dφ (Γ 는 φ 의 도착 번들 위)

    Returns:
        φ 의 출발 번들 위 접속
    """
    if conn.bundle is not phi.target:
        raise MorphismError(f"connection {conn.name} is not on the target of {phi.name}")
    variables = conn.variables
    gamma = {}
    for chart, form in conn.gamma.items():
        field_ = phi.phi[chart].with_variables(variables)
        gamma[chart] = field_.inverse.wedge(form).wedge(field_.matrix) + field_.dlog()
    return TwistedConnection(phi.source, gamma, f"{phi.name}*{conn.name}")


def gauge_bundle(bundle: TwistedBundle, seed: int, name: str = "") -> Tuple[TwistedBundle, BundleMorphism]:
    """차트별 무작위 유니터리 φ_i 로 옮긴 동형 번들"""
    rng = sub_seed(seed, "gauge", bundle.name)
    phi = {
        c.index: random_unitary_field(rng, bundle.rank, bundle.variables, amplitude=0.8)
        for c in bundle.cover.charts
    }
    target, morphism = apply_morphism(bundle, phi, name)
    if bundle.standard is not None:
        target.standard = gauge_transform(bundle.standard, morphism.inverse())
    return target, morphism


def transport_twist(
    bundle: TwistedBundle,
    conn: Optional[TwistedConnection],
    alpha: DeligneOne,
    gerbe: Optional[GerbeConn] = None,
    name: str = ""
) -> Tuple[TwistedBundle, Optional[TwistedConnection]]:
    """
    꼬임 수송 E' = (U, χ_ji g_ji, λ'), Γ'_i = Γ_i + Π_i·1

    Args:
        gerbe: λ̂' (생략하면 apply_twist_morphism 으로 만듦)
    """
    target_gerbe = gerbe or apply_twist_morphism(bundle.gerbe, alpha)
    cover = bundle.cover
    g = {}
    for simplex in cover.simplices[1]:
        i, j = simplex.charts
        g[simplex.charts] = alpha.chi_between(j, i).product(bundle.transition(j, i))
    moved = TwistedBundle(target_gerbe, bundle.rank, g, name or f"{bundle.name}'", "transport", (bundle,))
    if bundle.standard is not None:
        moved.standard = transport_connection(bundle.standard, alpha, moved)
    moved_conn = None if conn is None else transport_connection(conn, alpha, moved)
    return moved, moved_conn


def transport_connection(conn: TwistedConnection, alpha: DeligneOne, bundle: TwistedBundle) -> TwistedConnection:
    rank = conn.bundle.rank
    gamma = {
        i: form + alpha.pi[i].times_identity(rank).with_variables(conn.variables)
        for i, form in conn.gamma.items()
    }
    return TwistedConnection(bundle, gamma, f"{conn.name}'")


def retag_connection(conn: TwistedConnection, bundle: TwistedBundle, name: str = "") -> TwistedConnection:
    """같은 Γ 를 다른 (같은 전이함수의) 번들 위 접속으로"""
    return TwistedConnection(bundle, dict(conn.gamma), name or conn.name)


def shift_bundle(bundle: TwistedBundle, gerbe: GerbeConn) -> TwistedBundle:
    """λ̂_ξ 위의 같은 번들 (λ, A 가 같으므로 g 그대로)"""
    if gerbe.cover is not bundle.cover:
        raise CompatibilityError("shifted gerbe lives on another cover")
    moved = TwistedBundle(gerbe, bundle.rank, dict(bundle._g), f"{bundle.name}_xi", "transport", (bundle,))
    if bundle.standard is not None:
        moved.standard = retag_connection(bundle.standard, moved)
    return moved


# ========== 당김 ==========

def pull_bundle(bundle: TwistedBundle, chart_map: ChartMap, gerbe: GerbeConn, name: str = "") -> TwistedBundle:
    """세분 제한 / 평행이동 당김 (gerbe 는 이미 당긴 λ̂)"""
    if gerbe.cover is not chart_map.target:
        raise CompatibilityError("pulled gerbe does not live on the target cover")
    g = {}
    for simplex in chart_map.target.simplices[1]:
        r0, r1 = simplex.charts
        c0, c1 = chart_map.image(simplex.charts)
        g[simplex.charts] = bundle.transition(c1, c0).translate(chart_map.offset_from(min(c0, c1), r0))
    pulled = TwistedBundle(gerbe, bundle.rank, g, name or f"{bundle.name}*", "pulled", (bundle, chart_map))
    if bundle.standard is not None:
        pulled.standard = pull_connection(bundle.standard, chart_map, pulled)
    return pulled


def pull_connection(conn: TwistedConnection, chart_map: ChartMap, bundle: TwistedBundle) -> TwistedConnection:
    gamma = {
        c.index: conn.gamma[chart_map.rho[c.index]].translate(chart_map.offsets[c.index])
        for c in chart_map.target.charts
    }
    return TwistedConnection(bundle, gamma, f"{conn.name}*")


def restrict_refine(bundle: TwistedBundle, conn: Optional[TwistedConnection], chart_map: ChartMap, gerbe: GerbeConn):
    """세분 덮개로 제한한 (E, Γ)"""
    pulled = pull_bundle(bundle, chart_map, gerbe)
    return pulled, (None if conn is None else pull_connection(conn, chart_map, pulled))


def pullback_translation(bundle: TwistedBundle, conn: Optional[TwistedConnection], chart_map: ChartMap, gerbe: GerbeConn):
    """
    격자 평행이동 f 의 당김 (f*E, f*Γ)

    Raises:
        CoverError: chart_map 이 덮개 자신으로 가는 평행이동이 아닐 때
    """
    if chart_map.source is not chart_map.target or chart_map.source is not bundle.cover:
        raise CoverError(f"{bundle.name}: chart map is not a translation of its own cover")
    return restrict_refine(bundle, conn, chart_map, gerbe)


# ========== 무작위 자기동형 / 섭동 ==========

def random_automorphism(bundle: TwistedBundle, rng: np.random.Generator, amplitude: float = 0.8) -> BundleMorphism:
    """번들 계보에 맞는 무작위 자기동형 φ ∈ Aut(E)"""
    return BundleMorphism(bundle, bundle, _automorphism_fields(bundle, rng, amplitude), "phi")


def _automorphism_fields(bundle: TwistedBundle, rng: np.random.Generator, amplitude: float) -> Dict[int, UnitaryField]:
    cover = bundle.cover
    if bundle.structure == "scalar":
        field_ = random_unitary_field(rng, bundle.rank, bundle.variables, amplitude)
        return {c.index: field_ for c in cover.charts}
    if bundle.structure == "sum":
        left = _automorphism_fields(bundle.parts[0], rng, amplitude)
        right = _automorphism_fields(bundle.parts[1], rng, amplitude)
        return {i: left[i].block_sum(right[i]) for i in left}
    if bundle.structure == "gauge":
        base, morphism = bundle.parts
        inner = _automorphism_fields(base, rng, amplitude)
        return {i: morphism.phi[i].product(inner[i]).product(morphism.phi[i].inverted()) for i in inner}
    if bundle.structure == "transport":
        return _automorphism_fields(bundle.parts[0], rng, amplitude)
    if bundle.structure == "pulled":
        base, chart_map = bundle.parts
        inner = _automorphism_fields(base, rng, amplitude)
        return {c.index: inner[chart_map.rho[c.index]].translate(chart_map.offsets[c.index]) for c in cover.charts}
    raise MorphismError(f"no automorphism generator for structure {bundle.structure}")


def random_endomorphism_form(bundle: TwistedBundle, rng: np.random.Generator, amplitude: float = 0.3) -> Dict[int, MatrixForm]:
    """g-켤레로 접합하는 u(n)-값 1-형식 η_i (η_i = g_ji⁻¹ η_j g_ji)"""
    cover = bundle.cover
    if bundle.structure == "scalar":
        eta = random_anti_hermitian_form(rng, bundle.rank, bundle.variables, 1, amplitude)
        return {c.index: eta for c in cover.charts}
    if bundle.structure == "sum":
        left = random_endomorphism_form(bundle.parts[0], rng, amplitude)
        right = random_endomorphism_form(bundle.parts[1], rng, amplitude)
        return {i: left[i].block_sum(right[i]) for i in left}
    if bundle.structure == "gauge":
        base, morphism = bundle.parts
        inner = random_endomorphism_form(base, rng, amplitude)
        return {i: morphism.phi[i].conjugate(inner[i]) for i in inner}
    if bundle.structure == "transport":
        return random_endomorphism_form(bundle.parts[0], rng, amplitude)
    if bundle.structure == "pulled":
        base, chart_map = bundle.parts
        inner = random_endomorphism_form(base, rng, amplitude)
        return {c.index: inner[chart_map.rho[c.index]].translate(chart_map.offsets[c.index]) for c in cover.charts}
    raise MorphismError(f"no endomorphism generator for structure {bundle.structure}")


def perturb(conn: TwistedConnection, seed: int, amplitude: float = 0.3, name: str = "") -> TwistedConnection:
    """Γ + η (η 는 End(E)-값 전역 1-형식)"""
    bundle = conn.bundle
    if bundle.rank == 0:
        return conn
    rng = sub_seed(seed, "perturb", bundle.name)
    eta = random_endomorphism_form(bundle, rng, amplitude)
    gamma = {i: form + eta[i].with_variables(conn.variables) for i, form in conn.gamma.items()}
    return TwistedConnection(bundle, gamma, name or f"{conn.name}~{seed}")


# ========== 경로 / 2-매개변수 족 ==========

def affine_path(gamma0: TwistedConnection, gamma1: TwistedConnection, name: str = "") -> TwistedConnection:
    """Γ_t = (1-t)Γ0 + tΓ1"""
    if gamma0.bundle is not gamma1.bundle:
        raise CompatibilityError(f"path endpoints {gamma0.name}, {gamma1.name} live on different bundles")
    if gamma0.parameters or gamma1.parameters:
        raise CompatibilityError("path endpoints must be plain connections")
    variables = gamma0.variables + ("t",)
    t = Var("t")
    gamma = {}
    for chart in gamma0.gamma:
        start = gamma0.gamma[chart].with_variables(variables)
        end = gamma1.gamma[chart].with_variables(variables)
        gamma[chart] = start + (end - start).scale(t)
    return TwistedConnection(gamma0.bundle, gamma, name or f"path({gamma0.name}->{gamma1.name})")


def reparametrize(path: TwistedConnection, profile: Expr, name: str = "") -> TwistedConnection:
    """t -> profile(t) 치환 (profile 은 t 의 식, 예: sin(pi*t)^2 는 왕복 고리)"""
    gamma = {i: form.substitute({"t": profile}) for i, form in path.gamma.items()}
    return TwistedConnection(path.bundle, gamma, name or f"{path.name}∘p")


def loop_path(path: TwistedConnection, name: str = "") -> TwistedConnection:
    """t -> sin(πt)² 로 갔다가 돌아오는 고리"""
    return reparametrize(path, power(sin(mul(PI, Var("t"))), 2), name or f"loop({path.name})")


def gauge_path(conn: TwistedConnection, phi: BundleMorphism, name: str = "") -> TwistedConnection:
    """Γ 에서 φ*Γ 로 가는 아핀 경로"""
    return affine_path(conn, gauge_transform(conn, phi), name or f"gaugepath({conn.name})")


@dataclass
class TwoParameterFamily:
    """
    Σ c_k(s,t) Γ^(k)_t 꼴의 (s, t) 족, Σ c_k = 1

    connection 은 변수 (x.., s, t) 를 가진 TwistedConnection.
    """
    connection: TwistedConnection
    kind: str


def _family(terms: Sequence[Tuple[Expr, MatrixForm]], variables: Tuple[str, ...]) -> MatrixForm:
    total = None
    for coefficient, form in terms:
        term = form.with_variables(variables).scale(coefficient)
        total = term if total is None else total + term
    return total


def _insert_s(path: TwistedConnection, variables: Tuple[str, ...]) -> Dict[int, MatrixForm]:
    """(x, t) 경로를 (x, s, t) 공간으로 (t 지표 한 칸 이동)"""
    base = path.cover.dim
    out = {}
    for chart, form in path.gamma.items():
        coefficients = {key: matrix for key, matrix in form.coefficients.items()}
        for key in coefficients:
            if base in key:
                raise CompatibilityError("path connections must not have dt components")
        out[chart] = MatrixForm(coefficients, form.size, variables, form._degree)
    return out


def bigon(alpha: TwistedConnection, gamma: TwistedConnection) -> TwoParameterFamily:
    """B(s,t) = (1-s)α_t + sγ_t"""
    if alpha.bundle is not gamma.bundle:
        raise CompatibilityError("bigon paths live on different bundles")
    if alpha.parameters != ("t",) or gamma.parameters != ("t",):
        raise CompatibilityError("bigon needs two paths in t")
    variables = alpha.cover.variables + ("s", "t")
    s = Var("s")
    a, c = _insert_s(alpha, variables), _insert_s(gamma, variables)
    forms = {i: _family([(sub(ONE, s), a[i]), (s, c[i])], variables) for i in a}
    return TwoParameterFamily(TwistedConnection(alpha.bundle, forms, f"bigon({alpha.name},{gamma.name})"), "bigon")


def triangle(gamma0: TwistedConnection, gamma1: TwistedConnection, gamma2: TwistedConnection) -> TwoParameterFamily:
    """(1-t)Γ0 + t((1-s)Γ1 + sΓ2)"""
    if not (gamma0.bundle is gamma1.bundle is gamma2.bundle):
        raise CompatibilityError("triangle vertices live on different bundles")
    variables = gamma0.cover.variables + ("s", "t")
    s, t = Var("s"), Var("t")
    forms = {}
    for i in gamma0.gamma:
        forms[i] = _family([
            (sub(ONE, t), gamma0.gamma[i]),
            (mul(t, sub(ONE, s)), gamma1.gamma[i]),
            (mul(t, s), gamma2.gamma[i]),
        ], variables)
    return TwoParameterFamily(TwistedConnection(gamma0.bundle, forms, "triangle"), "triangle")
