"""
꼬인 미분 K-이론의 생성원과 사상
(E, Γ, ω) 생성원, 형식적 차, CS 동치 인증서, I / R / a, 꼬임 변경 동형, 육각형 검사
"""
from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence, Tuple

import numpy as np

from gerbecalc.core.bundle import (
    BundleMorphism, TwistedBundle, TwistedConnection, affine_path, direct_sum_conn,
    gauge_transform, identity_morphism, perturb, pull_bundle, pull_connection,
    random_automorphism, retag_connection, shift_bundle, transport_twist, zero_bundle
)
from gerbecalc.core.chern import ch_total, cs, odd_chern, triangle_primitive
from gerbecalc.core.cover import ChartMap, Cover, Refinement, SampleBank, refinement_map, sub_seed, translation_map
from gerbecalc.core.deligne import (
    DeligneOne, GerbeConn, Residuals, apply_twist_morphism, pull_gerbe, shift_by_xi
)
from gerbecalc.core.fields import random_imaginary_form, zero_form_jet
from gerbecalc.core.forms import MatrixForm
from gerbecalc.core.global_forms import (
    ExpressionForm, GlobalForm, PulledForm, ZeroForm, pointwise_residual
)
from gerbecalc.utils.exceptions import CertificateError, CompatibilityError
from gerbecalc.utils.logger import setup_logger

logger = setup_logger(__name__)

PathBuilder = Callable[[TwistedConnection, TwistedConnection], TwistedConnection]


# ========== 자료형 ==========

@dataclass
class Generator:
    """
    K̂⁰ 생성원 (E, Γ, ω)

    Note:
        - ω 는 홀수 차수 전역 형식 (Im(d+H) 로 나눈 대표)
        - 같은 λ̂ 위의 E, Γ 여야 한다
    """
    bundle: TwistedBundle
    connection: TwistedConnection
    omega: GlobalForm
    name: str = ""

    def __post_init__(self):
        if self.connection.bundle is not self.bundle:
            raise CompatibilityError(f"connection {self.connection.name} is not on bundle {self.bundle.name}")
        if self.connection.parameters:
            raise CompatibilityError("generators need a plain connection, not a family")
        if self.omega.cover is not self.bundle.cover:
            raise CompatibilityError("odd form lives on another cover")
        if self.omega.degree is not None and self.omega.degree % 2 == 0:
            raise CompatibilityError(f"odd form of generator {self.name} has even degree {self.omega.degree}")

    @property
    def gerbe(self) -> GerbeConn:
        return self.bundle.gerbe

    @property
    def cover(self) -> Cover:
        return self.bundle.cover


@dataclass
class FormalDifference:
    """[plus] - [minus]"""
    plus: Generator
    minus: Generator

    def __post_init__(self):
        if self.plus.gerbe is not self.minus.gerbe:
            raise CompatibilityError("formal difference mixes generators over different gerbes")

    @property
    def gerbe(self) -> GerbeConn:
        return self.plus.gerbe


@dataclass
class EquivalenceCertificate:
    """
    (E, Γ, ω) ~ (E', Γ', ω') 의 증인

    cs(Γ⊕Γ^F → φ*(Γ'⊕Γ^F)) = (ω' - ω) + (d+H)μ

    Note:
        - phi: E⊕F -> E'⊕F (계수 0 인 성분은 생략한 합 번들)
        - stabilizer 가 None 이면 F = 𝒪
    """
    phi: BundleMorphism
    mu: GlobalForm
    stabilizer: Optional[Tuple[TwistedBundle, TwistedConnection]] = None
    path: PathBuilder = field(default=affine_path)
    name: str = ""


def make_generator(conn: TwistedConnection, omega: Optional[GlobalForm] = None, name: str = "") -> Generator:
    omega = ZeroForm(conn.cover, None) if omega is None else omega
    return Generator(conn.bundle, conn, omega, name or conn.name)


def random_odd_form(cover: Cover, seed: int, amplitude: float = 0.3) -> GlobalForm:
    """차수 1 (와 3) 성분을 가진 무작위 iℝ-값 전역 홀수 형식"""
    rng = sub_seed(seed, "odd")
    variables = cover.variables
    form = random_imaginary_form(rng, variables, 1, amplitude)
    if cover.dim >= 3:
        form = form + random_imaginary_form(rng, variables, 3, amplitude)
    return ExpressionForm(cover, form)


# ========== 사상 I, R, a ==========

def map_I(x: FormalDifference) -> Tuple[TwistedBundle, TwistedBundle]:
    """[E] - [F] (Γ, ω 를 잊음)"""
    return x.plus.bundle, x.minus.bundle


def generator_R(g: Generator) -> GlobalForm:
    """ch(Γ) + (d+H)ω"""
    return ch_total(g.connection) + g.omega.twisted_d(g.gerbe.h_form())


def map_R(x: FormalDifference) -> GlobalForm:
    """ch(Γ^E) + (d+H)ω - ch(Γ^F) - (d+H)η"""
    return generator_R(x.plus) - generator_R(x.minus)


def map_a(theta: GlobalForm, gerbe: GerbeConn) -> Generator:
    """θ -> (𝒪, 0, θ)"""
    if theta.cover is not gerbe.cover:
        raise CompatibilityError("odd form lives on another cover")
    bundle, conn = zero_bundle(gerbe)
    return Generator(bundle, conn, theta, "a(theta)")


def difference(plus: Generator, minus: Optional[Generator] = None) -> FormalDifference:
    """minus 생략 시 [plus] - [(𝒪, 0, 0)]"""
    if minus is None:
        minus = map_a(ZeroForm(plus.cover, None), plus.gerbe)
    return FormalDifference(plus, minus)


# ========== 인증서 ==========

def _stabilized_connection(
    g: Generator,
    stabilizer: Optional[Tuple[TwistedBundle, TwistedConnection]],
    bundle: TwistedBundle
) -> TwistedConnection:
    """인증서 사상의 끝 번들 위 Γ⊕Γ^F"""
    pieces = [g.connection]
    if stabilizer is not None:
        pieces.append(stabilizer[1])
    pieces = [piece for piece in pieces if piece.bundle.rank > 0]
    if sum(piece.bundle.rank for piece in pieces) != bundle.rank:
        raise CertificateError(f"certificate bundle {bundle.name} has rank {bundle.rank}, generator side does not match")
    if not pieces:
        return g.connection
    if len(pieces) == 1:
        if pieces[0].bundle is not bundle:
            raise CertificateError(f"certificate map does not start/end at bundle {pieces[0].bundle.name}")
        return pieces[0]
    if bundle.structure != "sum" or bundle.parts != (pieces[0].bundle, pieces[1].bundle):
        raise CertificateError(f"certificate bundle {bundle.name} is not {pieces[0].bundle.name}⊕{pieces[1].bundle.name}")
    return direct_sum_conn(pieces[0], pieces[1], bundle)


def certificate_path(g1: Generator, g2: Generator, certificate: EquivalenceCertificate) -> Optional[TwistedConnection]:
    """Γ⊕Γ^F 에서 φ*(Γ'⊕Γ^F) 로 가는 경로 (계수 0 이면 None)"""
    source = _stabilized_connection(g1, certificate.stabilizer, certificate.phi.source)
    target = _stabilized_connection(g2, certificate.stabilizer, certificate.phi.target)
    if source.bundle.rank == 0:
        return None
    return certificate.path(source, gauge_transform(target, certificate.phi))


def verify_certificate(
    g1: Generator,
    g2: Generator,
    certificate: EquivalenceCertificate,
    bank: SampleBank,
    nodes: Optional[int] = None
) -> Residuals:
    """
    인증서 방정식과 R 의 불변성

    Returns:
        {"certificate": cs - (ω'-ω) - (d+H)μ, "R_invariance": R(g1) - R(g2)}
    """
    if g1.gerbe is not g2.gerbe:
        raise CertificateError("certificate compares generators over different gerbes")
    path = certificate_path(g1, g2, certificate)
    h = g1.gerbe.h_form()
    transgression = ZeroForm(g1.cover, None) if path is None else cs(path, nodes)
    identity = transgression - (g2.omega - g1.omega) - certificate.mu.twisted_d(h)
    return {
        "certificate": pointwise_residual(identity, bank.charts()),
        "R_invariance": pointwise_residual(generator_R(g1) - generator_R(g2), bank.charts()),
    }


def identity_certificate(g: Generator) -> EquivalenceCertificate:
    """반사성: (𝒪, id, μ=0)"""
    return EquivalenceCertificate(identity_morphism(g.bundle), ZeroForm(g.cover, None), name="reflexive")


def gauge_certificate(g: Generator, seed: int, nodes: Optional[int] = None) -> Tuple[Generator, EquivalenceCertificate]:
    """
    같은 번들 위 무작위 자기동형 φ 와 섭동으로 만든 동치 생성원

    Γ2 = Γ + η, Γ' = (φ⁻¹)*Γ2, ω' = ω + cs(Γ → Γ2), μ = 0
    """
    if g.bundle.rank == 0:
        return g, identity_certificate(g)
    rng = sub_seed(seed, "certificate", g.bundle.name)
    phi = random_automorphism(g.bundle, rng)
    moved = perturb(g.connection, seed)
    target_conn = gauge_transform(moved, phi.inverse())
    omega = g.omega + cs(affine_path(g.connection, moved), nodes)
    g2 = Generator(g.bundle, target_conn, omega, f"{g.name}~{seed}")
    return g2, EquivalenceCertificate(phi, ZeroForm(g.cover, None), name=f"gauge{seed}")


def compose_certificates(
    g1: Generator,
    g2: Generator,
    g3: Generator,
    first: EquivalenceCertificate,
    second: EquivalenceCertificate,
    nodes: Optional[int] = None
) -> EquivalenceCertificate:
    """
    g1 ~ g2 ~ g3 의 합성: ψ = φ2∘φ1, μ = μ1 + μ2 + P

    P 는 (Γ1, φ1*Γ2, ψ*Γ3) 삼각형 족의 원시형식 (CS 가법성의 교차항).

    Raises:
        CertificateError: 안정화 번들이 있거나 사상이 이어지지 않을 때
    """
    if first.stabilizer is not None or second.stabilizer is not None:
        raise CertificateError("only certificates without stabilizer compose")
    if first.phi.target is not second.phi.source:
        raise CertificateError(f"{first.name} and {second.name} do not compose")
    psi = second.phi.compose(first.phi)
    mu = first.mu + second.mu
    if g1.bundle.rank:
        vertices = (
            g1.connection,
            gauge_transform(g2.connection, first.phi),
            gauge_transform(g3.connection, psi),
        )
        mu = mu + triangle_primitive(*vertices, nodes=nodes)
    return EquivalenceCertificate(psi, mu, name=f"{second.name}∘{first.name}")


def a_map_certificate(
    conn: TwistedConnection,
    phi: BundleMorphism,
    theta: GlobalForm,
    nodes: Optional[int] = None
) -> Tuple[Generator, Generator, EquivalenceCertificate]:
    """
    a(θ + Ch(E,φ,Γ)) ~ a(θ): 안정화 (E, Γ), 사상 φ⁻¹, μ = 0

    cs(Γ → (φ⁻¹)*Γ) = -Ch(E,φ,Γ) 가 인증서 방정식이 된다.
    """
    gerbe = conn.gerbe
    g1 = map_a(theta + odd_chern(conn, phi, nodes), gerbe)
    g2 = map_a(theta, gerbe)
    certificate = EquivalenceCertificate(
        phi.inverse(), ZeroForm(conn.cover, None), (conn.bundle, conn), name="a_map"
    )
    return g1, g2, certificate


def certificate_suite(
    conn: TwistedConnection,
    kind: str,
    bank: SampleBank,
    seed: int = 0,
    defect: float = 0.0,
    nodes: Optional[int] = None
) -> Residuals:
    """
    kind 별 인증서를 만들고 검증 (defect 는 ω' 에 인증서 갱신 없이 더함)

    Args:
        kind: "reflexive" | "gauge" | "chain" | "a_map"
    """
    g1 = make_generator(conn, random_odd_form(conn.cover, seed), "g1")
    if kind == "reflexive":
        g2, certificate = g1, identity_certificate(g1)
    elif kind == "gauge":
        g2, certificate = gauge_certificate(g1, seed, nodes)
    elif kind == "chain":
        mid, first = gauge_certificate(g1, seed, nodes)
        g2, second = gauge_certificate(mid, seed + 1, nodes)
        certificate = compose_certificates(g1, mid, g2, first, second, nodes)
    elif kind == "a_map":
        rng = sub_seed(seed, "a_map", conn.bundle.name)
        phi = random_automorphism(conn.bundle, rng)
        g1, g2, certificate = a_map_certificate(conn, phi, random_odd_form(conn.cover, seed + 1), nodes)
    else:
        raise CertificateError(f"unknown certificate kind {kind}")
    if defect:
        g2 = Generator(g2.bundle, g2.connection, g2.omega + random_odd_form(conn.cover, seed + 7).scale(defect), g2.name)
    logger.debug(f"🔄 인증서 검증: kind={kind}, seed={seed}, defect={defect:g}")
    return verify_certificate(g1, g2, certificate, bank, nodes)


# ========== 꼬임 변경 / 세분 / 당김 ==========

def _transport_generator(g: Generator, alpha: DeligneOne, gerbe: GerbeConn) -> Generator:
    bundle, conn = transport_twist(g.bundle, g.connection, alpha, gerbe)
    return Generator(bundle, conn, g.omega, f"{g.name}'")


def twist_iso_phi(x: FormalDifference, alpha: DeligneOne, gerbe: Optional[GerbeConn] = None) -> FormalDifference:
    """φ_α̂: λ̂ 위 차를 λ̂' = λ̂ + Dα̂ 위로 (ω 는 그대로)"""
    target = gerbe or apply_twist_morphism(x.gerbe, alpha)
    return FormalDifference(_transport_generator(x.plus, alpha, target), _transport_generator(x.minus, alpha, target))


def _shift_generator(g: Generator, gerbe: GerbeConn, xi: GlobalForm) -> Generator:
    bundle = shift_bundle(g.bundle, gerbe)
    return Generator(bundle, retag_connection(g.connection, bundle), g.omega.wedge_exp(xi, -1), f"{g.name}_xi")


def twist_iso_xi(x: FormalDifference, xi: MatrixForm) -> FormalDifference:
    """Ξ: [(E, Γ, ω)] -> [(E, Γ_ξ, ω∧exp(-ξ))] (λ̂_ξ 위)"""
    gerbe = shift_by_xi(x.gerbe, xi)
    xi_form = ExpressionForm(x.gerbe.cover, xi)
    return FormalDifference(_shift_generator(x.plus, gerbe, xi_form), _shift_generator(x.minus, gerbe, xi_form))


def _pull_generator(g: Generator, chart_map: ChartMap, gerbe: GerbeConn) -> Generator:
    bundle = pull_bundle(g.bundle, chart_map, gerbe)
    conn = pull_connection(g.connection, chart_map, bundle)
    return Generator(bundle, conn, PulledForm(g.omega, chart_map), f"{g.name}*")


def pull_difference(x: FormalDifference, chart_map: ChartMap) -> FormalDifference:
    gerbe = pull_gerbe(x.gerbe, chart_map)
    return FormalDifference(_pull_generator(x.plus, chart_map, gerbe), _pull_generator(x.minus, chart_map, gerbe))


def refine_difference(x: FormalDifference, refinement: Refinement) -> FormalDifference:
    """τ 로 유도된 제한 사상"""
    if refinement.coarse is not x.gerbe.cover:
        raise CompatibilityError("refinement does not start at the cover of the difference")
    return pull_difference(x, refinement_map(refinement))


def pullback_difference(x: FormalDifference, steps: Sequence[int]) -> FormalDifference:
    """격자 평행이동 f 의 당김 f*x"""
    return pull_difference(x, translation_map(x.gerbe.cover, steps))


# ========== 검사 묶음 ==========

def _transition_residual(a: TwistedBundle, b: TwistedBundle, bank: SampleBank) -> Tuple[float, int]:
    """두 번들 전이함수의 최대 차"""
    if a.rank != b.rank:
        return float("inf"), 0
    worst, points = 0.0, 0
    if a.rank == 0:
        return worst, points
    for samples in bank.edges():
        i, j = samples.simplex.charts
        coords = samples.coords[i]
        left = zero_form_jet(a.transition(j, i).matrix.evaluate(coords, 0)).value
        right = zero_form_jet(b.transition(j, i).matrix.evaluate(coords, 0)).value
        worst = max(worst, float(np.max(np.abs(left - right))))
        points += samples.count
    return worst, points


def _connection_residual(a: TwistedConnection, b: TwistedConnection, bank: SampleBank) -> Tuple[float, int]:
    worst, points = 0.0, 0
    if a.bundle.rank == 0:
        return worst, points
    for samples in bank.charts():
        chart = samples.simplex.anchor
        coords = samples.coords[chart]
        worst = max(worst, (a.evaluate(chart, coords, 0) - b.evaluate(chart, coords, 0)).max_abs())
        points += samples.count
    return worst, points


def _merge(report: Residuals, name: str, value: Tuple[float, int]) -> None:
    old_value, old_points = report.get(name, (0.0, 0))
    report[name] = (max(old_value, value[0]), old_points + value[1])


def hexagon_suite(
    conn_e: TwistedConnection,
    bank: SampleBank,
    conn_f: Optional[TwistedConnection] = None,
    seed: int = 0,
    defect: float = 0.0,
    nodes: Optional[int] = None
) -> Residuals:
    """
    육각형 도식의 표현 수준 검사

    - ch∘I = Pr∘R: ch(Γ^E) - ch(Γ^F) - R(x) + (d+H)(ω-η) 와 (d+H)R(x)
    - R∘a = d+H
    - ker I = Im a: x = (E,Γ,ω) - (E,Γ',ω') 를 θ = ω - ω' + cs(Γ→Γ') 로 다시 씀
    - ker R: R(x) = 0 인 x 와 자기동형 φ 에서 θ = ω - η + cs(Γ→φ*Γ') 는 (d+H)-닫힘

    Args:
        defect: ker I 재현에서 ω' 에 인증서 갱신 없이 더하는 섭동 크기
    """
    cover = conn_e.cover
    gerbe = conn_e.gerbe
    h = gerbe.h_form()
    charts = bank.charts()
    if conn_f is None:
        conn_f = perturb(conn_e, seed + 11)
    omega = random_odd_form(cover, seed)
    eta = random_odd_form(cover, seed + 1)
    x = FormalDifference(make_generator(conn_e, omega, "E"), make_generator(conn_f, eta, "F"))
    report: Residuals = {}

    # ch∘I = Pr∘R
    r = map_R(x)
    triangle = ch_total(conn_e) - ch_total(conn_f) - r + (omega - eta).twisted_d(h)
    report["ch_I_R"] = pointwise_residual(triangle, charts)
    report["R_closed"] = pointwise_residual(r.twisted_d(h), charts)

    # R∘a = d+H
    theta = random_odd_form(cover, seed + 2)
    report["R_a"] = pointwise_residual(generator_R(map_a(theta, gerbe)) - theta.twisted_d(h), charts)

    # ker I = Im a
    if conn_e.bundle.rank:
        moved = perturb(conn_e, seed + 3)
        omega_moved = random_odd_form(cover, seed + 4)
        theta = omega - omega_moved + cs(affine_path(conn_e, moved), nodes)
        kernel = FormalDifference(make_generator(conn_e, omega, "E"), make_generator(moved, omega_moved, "E'"))
        replaced = omega_moved + theta
        if defect:
            replaced = replaced + random_odd_form(cover, seed + 7).scale(defect)
        certificate = identity_certificate(kernel.plus)
        replay = verify_certificate(kernel.plus, Generator(conn_e.bundle, moved, replaced, "E'+a"), certificate, bank, nodes)
        report["kerI_certificate"] = replay["certificate"]
        report["kerI_R"] = pointwise_residual(map_R(kernel) - generator_R(map_a(theta, gerbe)), charts)

        # ker R
        rng = sub_seed(seed, "hexagon", conn_e.bundle.name)
        phi = random_automorphism(conn_e.bundle, rng)
        middle = perturb(conn_e, seed + 5)
        target = perturb(conn_e, seed + 6)
        eta_kernel = omega + cs(affine_path(conn_e, middle), nodes) + cs(affine_path(middle, target), nodes)
        in_kernel = FormalDifference(make_generator(conn_e, omega, "E"), make_generator(target, eta_kernel, "E''"))
        report["kerR_R"] = pointwise_residual(map_R(in_kernel), charts)
        closing = omega - eta_kernel + cs(affine_path(conn_e, gauge_transform(target, phi)), nodes)
        report["kerR_theta_closed"] = pointwise_residual(closing.twisted_d(h), charts)
    logger.debug(f"🔄 육각형 검사 완료: {conn_e.name}, {conn_f.name}")
    return report


def twist_compat_suite(
    conn_a: TwistedConnection,
    conn_b: TwistedConnection,
    alpha: DeligneOne,
    xi: MatrixForm,
    bank: SampleBank,
    seed: int = 0
) -> Residuals:
    """
    꼬임 변경 호환 항등식

    I∘Ξ = I, R∘Ξ = exp(-ξ)R, Ξ∘a = a∘exp(-ξ), I∘φ_α̂ = Φ∘I, R∘φ_α̂ = R
    와 φ_α̂, Ξ 의 역 적용 왕복
    """
    cover = conn_a.cover
    charts = bank.charts()
    x = FormalDifference(
        make_generator(conn_a, random_odd_form(cover, seed), "a"),
        make_generator(conn_b, random_odd_form(cover, seed + 1), "b")
    )
    xi_form = ExpressionForm(cover, xi)
    report: Residuals = {}

    shifted = twist_iso_xi(x, xi)
    for before, after in zip(map_I(x), map_I(shifted)):
        _merge(report, "I_xi", _transition_residual(before, after, bank))
    report["R_xi"] = pointwise_residual(map_R(shifted) - map_R(x).wedge_exp(xi_form, -1), charts)
    theta = random_odd_form(cover, seed + 2)
    a_shifted = twist_iso_xi(difference(map_a(theta, x.gerbe)), xi).plus
    report["xi_a"] = pointwise_residual(a_shifted.omega - theta.wedge_exp(xi_form, -1), charts)

    target = apply_twist_morphism(x.gerbe, alpha)
    moved = twist_iso_phi(x, alpha, target)
    for before, after in zip(map_I(x), map_I(moved)):
        expected, _ = transport_twist(before, None, alpha, target)
        _merge(report, "I_phi", _transition_residual(expected, after, bank))
    report["R_phi"] = pointwise_residual(map_R(moved) - map_R(x), charts)

    back = twist_iso_phi(moved, alpha.inverse(), x.gerbe)
    unshifted = twist_iso_xi(shifted, -xi)
    for original, restored in ((x, back), (x, unshifted)):
        for before, after in ((original.plus, restored.plus), (original.minus, restored.minus)):
            _merge(report, "roundtrip", _transition_residual(before.bundle, after.bundle, bank))
            _merge(report, "roundtrip", _connection_residual(before.connection, after.connection, bank))
    report["roundtrip_omega"] = pointwise_residual(unshifted.plus.omega - x.plus.omega, charts)
    return report

