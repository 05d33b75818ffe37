"""
꼬인 Chern 지표 형식
ch_(m), 전체 ch, Chern-Simons 전이(transgression), 두 경로 원시형식, 홀수 Chern 지표
"""
from typing import Callable, Optional

import numpy as np

from gerbecalc.config import settings
from gerbecalc.core.bundle import (
    BundleMorphism, TwistedConnection, TwoParameterFamily, affine_path, bigon, direct_sum_conn,
    gauge_transform, loop_path, pull_bundle, pull_connection, pull_morphism, retag_connection,
    shift_bundle, transport_twist, triangle
)
from gerbecalc.core.cover import ChartMap, SampleBank
from gerbecalc.core.deligne import DeligneOne, Residuals, pull_gerbe, shift_by_xi
from gerbecalc.core.forms import JetForm, MatrixForm
from gerbecalc.core.global_forms import (
    ExpressionForm, GlobalForm, PulledForm, gluing_residual, integrate_cycle, pointwise_residual
)
from gerbecalc.core.quadrature import gauss_legendre_unit
from gerbecalc.utils.exceptions import CompatibilityError, FormShapeError, MorphismError
from gerbecalc.utils.logger import setup_logger

logger = setup_logger(__name__)


# ========== 점별 계산 ==========

def fold_fiber(coords: np.ndarray, nodes: np.ndarray) -> np.ndarray:
    """(P, D) 점과 Q 개 노드를 (P·Q, D+1) 로 (점 우선, 노드 다음)"""
    q = len(nodes)
    return np.hstack([np.repeat(coords, q, axis=0), np.tile(nodes, len(coords))[:, None]])


def evaluate_in_chunks(
    evaluate: Callable[[np.ndarray], JetForm],
    coords: np.ndarray,
    per_point: int,
    budget: Optional[int] = None
) -> JetForm:
    """
    점을 조각으로 나눠 평가한 뒤 점 축으로 이어 붙임

    Args:
        evaluate: 좌표 조각 -> JetForm
        coords: (P, D) 좌표
        per_point: 기저점 하나가 내부에서 펼쳐지는 점 개수 (구적 노드 수)
        budget: 한 번에 평가할 펼친 점 개수 상한 (None 이면 settings.EVAL_CHUNK_POINTS)
    """
    budget = settings.EVAL_CHUNK_POINTS if budget is None else budget
    size = max(1, budget // max(1, per_point))
    if len(coords) <= size:
        return evaluate(coords)
    return JetForm.concat_points([evaluate(coords[start:start + size]) for start in range(0, len(coords), size)])


def field_strength(conn: TwistedConnection, chart: int, coords: np.ndarray, order: int) -> JetForm:
    """F_i = R_i - B_i·1 (접속의 주변 공간에서)"""
    variables = conn.variables
    n = conn.bundle.rank
    gamma = conn.evaluate(chart, coords, order + 1)
    low = gamma.truncate(order)
    r = gamma.exterior_d() + low.wedge(low)
    b = conn.gerbe.b(chart).evaluate(coords, order, variables)
    return r - b.wedge(JetForm.constant(1.0, len(variables), len(coords), order, n))


def chern_jet(
    conn: TwistedConnection,
    chart: int,
    coords: np.ndarray,
    order: int,
    m: Optional[int] = None
) -> JetForm:
    """
    ch_(m)(Γ) 또는 전체 ch(Γ) 의 점별 값

    Args:
        conn: 접속 (매개변수 족이면 그 주변 공간 전체에서 계산)
        chart: 차트 번호
        coords: (P, D) 좌표, D = len(conn.variables)
        order: 결과 제트 차수 (Γ 는 order+1 로 평가)
        m: None 이면 rank + Σ ch_(m)/m!

    Note:
        급수는 주변 차원에서 끊는다 (2m > D 인 항은 항등적으로 0).
    """
    dim = len(conn.variables)
    npoints = len(coords)
    rank = conn.bundle.rank
    if m is not None and m < 0:
        raise FormShapeError(f"Chern degree must be non-negative, got {m}")
    if m == 0:
        return JetForm.constant(float(rank), dim, npoints, order)
    if rank == 0:
        return JetForm.zero(1, dim, npoints, order)
    f = field_strength(conn, chart, coords, order)
    if m is not None:
        return f.power(m).trace()
    total = JetForm.constant(float(rank), dim, npoints, order)
    term = None
    factorial = 1.0
    for k in range(1, dim // 2 + 1):
        term = f if term is None else term.wedge(f)
        factorial *= k
        total = total + term.trace().scale(1.0 / factorial)
    return total


# ========== 전역 형식 ==========

class ChernCharacter(GlobalForm):
    """ch_(m)(Γ) (m=None 이면 전체 ch)"""

    def __init__(self, conn: TwistedConnection, m: Optional[int] = None):
        if conn.parameters:
            raise CompatibilityError(f"{conn.name} is a family; evaluate its Chern form on X×I instead")
        super().__init__(conn.cover, None if m is None else 2 * m)
        self.conn = conn
        self.m = m

    def evaluate(self, chart: int, coords: np.ndarray, order: int) -> JetForm:
        return chern_jet(self.conn, chart, coords, order, self.m)

    def __repr__(self) -> str:
        return f"ch_{'' if self.m is None else self.m}({self.conn.name})"


class ChernSimonsForm(GlobalForm):
    """
    cs(γ) = ∫_I ch(Γ̃)

    Γ̃(x,t) 의 곡률은 t-제트에서 R_t + dt∧∂_tΓ_t 로 저절로 나온다.
    """

    def __init__(self, path: TwistedConnection, nodes: Optional[int] = None):
        if path.parameters != ("t",):
            raise CompatibilityError(f"{path.name} is not a path in t")
        super().__init__(path.cover, None)
        self.path = path
        self.nodes = settings.QUAD_NODES if nodes is None else nodes

    def evaluate(self, chart: int, coords: np.ndarray, order: int) -> JetForm:
        nodes, weights = gauss_legendre_unit(self.nodes)

        def integrate_t(block: np.ndarray) -> JetForm:
            return chern_jet(self.path, chart, fold_fiber(block, nodes), order).integrate_last(weights)

        return evaluate_in_chunks(integrate_t, coords, len(nodes))

    def __repr__(self) -> str:
        return f"cs({self.path.name}, nodes={self.nodes})"


class FamilyPrimitive(GlobalForm):
    """P = ∫_s ∫_t ch(B(s,t)) (t 먼저 적분, 텐서곱 구적)"""

    def __init__(self, family: TwoParameterFamily, nodes: Optional[int] = None):
        if family.connection.parameters != ("s", "t"):
            raise CompatibilityError("two-parameter family must have parameters (s, t)")
        super().__init__(family.connection.cover, None)
        self.family = family
        self.nodes = settings.QUAD_NODES if nodes is None else nodes

    def evaluate(self, chart: int, coords: np.ndarray, order: int) -> JetForm:
        nodes, weights = gauss_legendre_unit(self.nodes)

        def integrate_t(block: np.ndarray) -> JetForm:
            return chern_jet(self.family.connection, chart, fold_fiber(block, nodes), order).integrate_last(weights)

        # (점, s) 쌍을 조각으로 나눠 t 적분 후 s 적분 (메모리는 조각 크기에만 비례)
        inner = evaluate_in_chunks(integrate_t, fold_fiber(coords, nodes), len(nodes))
        return inner.integrate_last(weights)


def ch_m(conn: TwistedConnection, m: int) -> GlobalForm:
    if m < 0:
        raise FormShapeError(f"Chern degree must be non-negative, got {m}")
    return ChernCharacter(conn, m)


def ch_total(conn: TwistedConnection) -> GlobalForm:
    return ChernCharacter(conn)


def cs(path: TwistedConnection, nodes: Optional[int] = None) -> GlobalForm:
    return ChernSimonsForm(path, nodes)


def odd_chern(conn: TwistedConnection, phi: BundleMorphism, nodes: Optional[int] = None) -> GlobalForm:
    """
    홀수 Chern 지표 Ch(E, φ, Γ) = cs(t -> (1-t)Γ + tφ*Γ)

    Raises:
        MorphismError: φ 가 E 의 자기동형이 아닐 때
    """
    if phi.source is not conn.bundle or phi.target is not conn.bundle:
        raise MorphismError(f"{phi.name} is not an automorphism of {conn.bundle.name}")
    return cs(affine_path(conn, gauge_transform(conn, phi)), nodes)


def bigon_primitive(alpha: TwistedConnection, gamma: TwistedConnection, nodes: Optional[int] = None) -> GlobalForm:
    """cs(γ) - cs(α) = (d+H)P 인 짝수 형식 P"""
    _require_shared_endpoints(alpha, gamma)
    return FamilyPrimitive(bigon(alpha, gamma), nodes)


def triangle_primitive(
    gamma0: TwistedConnection,
    gamma1: TwistedConnection,
    gamma2: TwistedConnection,
    nodes: Optional[int] = None
) -> GlobalForm:
    """cs(0→2) - cs(0→1) - cs(1→2) = (d+H)P 인 P (아핀 경로)"""
    return FamilyPrimitive(triangle(gamma0, gamma1, gamma2), nodes)


def _require_shared_endpoints(alpha: TwistedConnection, gamma: TwistedConnection, probes: int = 3) -> None:
    """차트마다 몇 점에서 두 경로의 끝점을 비교"""
    if alpha.bundle is not gamma.bundle:
        raise CompatibilityError("paths live on different bundles")
    fractions = (np.arange(probes) + 0.5) / probes
    ends = {value: (alpha.at("t", value), gamma.at("t", value)) for value in (0.0, 1.0)}
    for chart in alpha.cover.charts:
        points = chart.lower + np.outer(fractions, chart.upper - chart.lower)
        for value, (a_end, c_end) in ends.items():
            a = a_end.evaluate(chart.index, points, 0)
            c = c_end.evaluate(chart.index, points, 0)
            gap = (a - c).max_abs()
            if gap > settings.TOL_POINTWISE:
                raise CompatibilityError(f"paths disagree at t={value:g} on chart {chart.index} (gap {gap:.3g})")


# ========== 항등식 검사 ==========

def ch_glue_residuals(conn: TwistedConnection, bank: SampleBank) -> Residuals:
    """각 ch_(m) 과 H 의 겹침 잔차"""
    report: Residuals = {}
    for m in range(conn.cover.dim // 2 + 1):
        report[f"ch_{m}"] = gluing_residual(ch_m(conn, m), bank.edges())
    report["H"] = gluing_residual(conn.gerbe.h_form(), bank.edges())
    return report


def ch_closed_residuals(conn: TwistedConnection, bank: SampleBank) -> Residuals:
    """
    (d+H)ch = 0 과 차수별 항등식 d ch_(m) + m ch_(m-1)∧H = 0

    Returns:
        {"twisted_closed": .., "graded_1": .., ...}
    """
    h = conn.gerbe.h_form()
    report: Residuals = {"twisted_closed": pointwise_residual(ch_total(conn).twisted_d(h), bank.charts())}
    for m in range(1, conn.cover.dim // 2 + 1):
        graded = ch_m(conn, m).d() + ch_m(conn, m - 1).wedge(h).scale(float(m))
        report[f"graded_{m}"] = pointwise_residual(graded, bank.charts())
    return report


def ch_additive_residual(a: TwistedConnection, b: TwistedConnection, bank: SampleBank) -> Residuals:
    """ch(Γ_E ⊕ Γ_F) - ch(Γ_E) - ch(Γ_F)"""
    if a.gerbe is not b.gerbe:
        raise CompatibilityError(f"{a.name} and {b.name} live over different gerbes")
    total = ch_total(direct_sum_conn(a, b))
    return {"additivity": pointwise_residual(total - ch_total(a) - ch_total(b), bank.charts())}


def ch_rescale_residual(conn: TwistedConnection, xi: MatrixForm, bank: SampleBank) -> Residuals:
    """λ̂_{-ξ} 위의 ch(Γ) 와 ch(Γ)∧exp(ξ) 의 차"""
    gerbe_minus = shift_by_xi(conn.gerbe, -xi)
    bundle_minus = shift_bundle(conn.bundle, gerbe_minus)
    rescaled = ch_total(retag_connection(conn, bundle_minus))
    expected = ch_total(conn).wedge_exp(ExpressionForm(conn.cover, xi), 1)
    return {"rescale": pointwise_residual(rescaled - expected, bank.charts())}


def transgression_residuals(path: TwistedConnection, bank: SampleBank, nodes: Optional[int] = None) -> Residuals:
    """
    ch(Γ0) - ch(Γ1) - (d+H)cs(γ) 와 cs 의 겹침 잔차

    d cs 는 구적 합 안에서 미분한다 (제트).
    """
    form = cs(path, nodes)
    h = path.gerbe.h_form()
    identity = ch_total(path.at("t", 0.0)) - ch_total(path.at("t", 1.0)) - form.twisted_d(h)
    return {
        "transgression": pointwise_residual(identity, bank.charts()),
        "cs_gluing": gluing_residual(form, bank.edges()),
    }


def bigon_residual(
    alpha: TwistedConnection,
    gamma: TwistedConnection,
    bank: SampleBank,
    nodes: Optional[int] = None
) -> Residuals:
    """cs(γ) - cs(α) - (d+H)P"""
    primitive = bigon_primitive(alpha, gamma, nodes)
    identity = cs(gamma, nodes) - cs(alpha, nodes) - primitive.twisted_d(alpha.gerbe.h_form())
    return {"bigon": pointwise_residual(identity, bank.charts())}


def triangle_residual(
    gamma0: TwistedConnection,
    gamma1: TwistedConnection,
    gamma2: TwistedConnection,
    bank: SampleBank,
    nodes: Optional[int] = None
) -> Residuals:
    """cs(0→2) - cs(0→1) - cs(1→2) - (d+H)P"""
    primitive = triangle_primitive(gamma0, gamma1, gamma2, nodes)
    identity = (
        cs(affine_path(gamma0, gamma2), nodes)
        - cs(affine_path(gamma0, gamma1), nodes)
        - cs(affine_path(gamma1, gamma2), nodes)
        - primitive.twisted_d(gamma0.gerbe.h_form())
    )
    return {"triangle": pointwise_residual(identity, bank.charts())}


def cs_gauge_residuals(
    path: TwistedConnection,
    phi: BundleMorphism,
    bank: SampleBank,
    nodes: Optional[int] = None
) -> Residuals:
    """cs(φ*γ) - cs(γ) 와 ch(φ*Γ0) - ch(Γ0)"""
    moved = gauge_transform(path, phi)
    start = path.at("t", 0.0)
    return {
        "cs": pointwise_residual(cs(moved, nodes) - cs(path, nodes), bank.charts()),
        "ch": pointwise_residual(ch_total(gauge_transform(start, phi)) - ch_total(start), bank.charts()),
    }


def loop_residual(path: TwistedConnection, bank: SampleBank, nodes: Optional[int] = None) -> Residuals:
    """왕복 고리의 cs"""
    return {"loop": pointwise_residual(cs(loop_path(path), nodes), bank.charts())}


def stokes_fiber_residual(omega: MatrixForm, bank: SampleBank, nodes: Optional[int] = None) -> Residuals:
    """
    d∫ω - ∫dω - (-1)^{n-1}(ω|₁ - ω|₀)

    Args:
        omega: (x.., t) 위 스칼라 형식 (차수가 섞이면 차수별 부호)
    """
    cover = bank.cover
    if omega.size != 1 or omega.variables != cover.variables + ("t",):
        raise FormShapeError(f"stokes check needs a scalar form on {cover.variables + ('t',)}")
    quad_nodes, weights = gauss_legendre_unit(settings.QUAD_NODES if nodes is None else nodes)
    worst, points = 0.0, 0
    for samples in bank.charts():
        if samples.count == 0:
            continue
        coords = samples.coords[samples.simplex.anchor]
        lifted = omega.evaluate(fold_fiber(coords, quad_nodes), 1)
        d_of_integral = lifted.integrate_last(weights).exterior_d()
        integral_of_d = lifted.exterior_d().integrate_last(weights)
        ends = [
            omega.evaluate(np.hstack([coords, np.full((len(coords), 1), value)]), 0).drop_last()
            for value in (0.0, 1.0)
        ]
        jump = ends[1] - ends[0]
        boundary = None
        for degree in sorted({len(key) for key in jump.coefficients}):
            piece = jump.part(degree).scale((-1.0) ** (degree - 1))
            boundary = piece if boundary is None else boundary + piece
        residual = d_of_integral - integral_of_d
        if boundary is not None:
            residual = residual - boundary
        worst = max(worst, residual.max_abs())
        points += samples.count
    return {"stokes": (worst, points)}


# ========== 홀수 Chern 지표 ==========

def winding_number(
    conn: TwistedConnection,
    phi: BundleMorphism,
    axis: int,
    nodes: Optional[int] = None,
    grid: Optional[int] = None
) -> complex:
    """-(1/2πi)∫_{S¹} Ch_(1) (좌표축 axis 방향 원)"""
    form = odd_chern(conn, phi, nodes).part(1)
    return -integrate_cycle(form, (axis,), grid) / (2j * np.pi)


def odd_chern_closed_residual(conn: TwistedConnection, phi: BundleMorphism, bank: SampleBank) -> Residuals:
    form = odd_chern(conn, phi)
    return {"odd_closed": pointwise_residual(form.twisted_d(conn.gerbe.h_form()), bank.charts())}


def odd_chern_shift_residual(
    conn: TwistedConnection,
    phi: BundleMorphism,
    xi: MatrixForm,
    bank: SampleBank
) -> Residuals:
    """Ch(E, φ, Γ_ξ) - Ch(E, φ, Γ)∧exp(-ξ)"""
    gerbe_xi = shift_by_xi(conn.gerbe, xi)
    bundle_xi = shift_bundle(conn.bundle, gerbe_xi)
    phi_xi = BundleMorphism(bundle_xi, bundle_xi, phi.phi, f"{phi.name}_xi")
    shifted = odd_chern(retag_connection(conn, bundle_xi), phi_xi)
    expected = odd_chern(conn, phi).wedge_exp(ExpressionForm(conn.cover, xi), -1)
    return {"odd_shift": pointwise_residual(shifted - expected, bank.charts())}


# ========== 자연성 ==========

def twist_invariance_residuals(
    conn: TwistedConnection,
    alpha: DeligneOne,
    bank: SampleBank,
    phi: Optional[BundleMorphism] = None
) -> Residuals:
    """꼬임 수송 뒤 ch(Γ') = ch(Γ), φ 가 있으면 Ch(E', φ, Γ') = Ch(E, φ, Γ)"""
    moved_bundle, moved = transport_twist(conn.bundle, conn, alpha)
    report: Residuals = {"ch": pointwise_residual(ch_total(moved) - ch_total(conn), bank.charts())}
    if phi is not None:
        phi_moved = BundleMorphism(moved_bundle, moved_bundle, phi.phi, f"{phi.name}'")
        difference = odd_chern(moved, phi_moved) - odd_chern(conn, phi)
        report["odd_chern"] = pointwise_residual(difference, bank.charts())
    return report


def pullback_residuals(
    conn: TwistedConnection,
    chart_map: ChartMap,
    bank: SampleBank,
    phi: Optional[BundleMorphism] = None
) -> Residuals:
    """
    f*ch(Γ) = ch(f*Γ) (그리고 φ 가 있으면 f*Ch(E,φ,Γ) = Ch(f*E, f*φ, f*Γ))

    Args:
        chart_map: 세분 또는 격자 평행이동 (bank 는 대상 덮개 위)
    """
    gerbe = pull_gerbe(conn.gerbe, chart_map)
    bundle = pull_bundle(conn.bundle, chart_map, gerbe)
    pulled = pull_connection(conn, chart_map, bundle)
    report: Residuals = {
        "ch": pointwise_residual(PulledForm(ch_total(conn), chart_map) - ch_total(pulled), bank.charts())
    }
    if phi is not None:
        pulled_phi = pull_morphism(phi, chart_map, bundle, bundle)
        difference = PulledForm(odd_chern(conn, phi), chart_map) - odd_chern(pulled, pulled_phi)
        report["odd_chern"] = pointwise_residual(difference, bank.charts())
    return report


def chern_number(conn: TwistedConnection, axes=(1, 2), grid: Optional[int] = None) -> complex:
    """(1/2πi)∫ ch_(1)(Γ) (좌표 2-부분토러스)"""
    return integrate_cycle(ch_m(conn, 1), axes, grid) / (2j * np.pi)

