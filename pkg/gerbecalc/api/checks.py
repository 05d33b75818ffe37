"""
검사 구현
검사 이름 -> 함수 레지스트리, 각 함수는 항목별 (잔차, 점 수, 허용 오차) 를 돌려준다
"""
import math
from typing import Callable, Dict, Tuple

from gerbecalc.api.scenario import Scenario, ScenarioForm, float_param, int_list_param, int_param
from gerbecalc.core.bundle import (
    central_automorphism,
    check_morphism,
    pullback_translation,
    random_automorphism,
    restrict_refine,
    validate_bundle,
    validate_connection,
)
from gerbecalc.core.chern import (
    bigon_residual,
    ch_additive_residual,
    ch_closed_residuals,
    ch_glue_residuals,
    ch_rescale_residual,
    chern_number,
    cs_gauge_residuals,
    loop_residual,
    odd_chern_closed_residual,
    odd_chern_shift_residual,
    pullback_residuals,
    stokes_fiber_residual,
    transgression_residuals,
    twist_invariance_residuals,
    winding_number,
)
from gerbecalc.core.cover import ChartMap, refine, refinement_map, sub_seed, translation_map
from gerbecalc.core.deligne import Residuals, apply_twist_morphism, curvature_H, pull_gerbe, validate_gerbe
from gerbecalc.core.expression import parse_expr
from gerbecalc.core.ktheory import certificate_suite, hexagon_suite, twist_compat_suite
from gerbecalc.core.nerve import (
    INFINITE_ORDER,
    builtin_complex,
    cohomologous,
    cohomology,
    dd_cocycle,
    load_complex,
    nerve_complex,
    torsion_order,
)
from gerbecalc.models.manifest import CheckSpec
from gerbecalc.schemas.checks import CERTIFICATE_KINDS, CHECKS
from gerbecalc.utils.exceptions import CohomologyError, ManifestError
from gerbecalc.utils.logger import setup_logger

logger = setup_logger(__name__)

# 항목 이름 -> (잔차, 점 수, 허용 오차)
Entries = Dict[str, Tuple[float, int, float]]
CheckFunction = Callable[[Scenario, CheckSpec], Entries]

_REGISTRY: Dict[str, CheckFunction] = {}


def register(name: str):
    """검사 함수 등록 데코레이터 (이름은 schemas.checks.CHECKS 에 있어야 함)"""
    if name not in CHECKS:
        raise ValueError(f"check '{name}' has no signature in the grammar table")

    def decorator(func: CheckFunction) -> CheckFunction:
        _REGISTRY[name] = func
        return func
    return decorator


def get_check(name: str) -> CheckFunction:
    try:
        return _REGISTRY[name]
    except KeyError:
        raise ManifestError(f"unknown check '{name}'") from None


def _tolerance(scenario: Scenario, spec: CheckSpec) -> float:
    return scenario.options.tolerance(CHECKS[spec.name].tolerance)


def _entries(report: Residuals, tolerance: float) -> Entries:
    return {name: (value, points, tolerance) for name, (value, points) in report.items()}


def _nodes(scenario: Scenario, spec: CheckSpec) -> int:
    return int_param(spec.params, "nodes", spec.line, scenario.options.quad_nodes)


def _pull(conn, chart_map: ChartMap, pull=restrict_refine):
    """접속을 세분 (restrict_refine) 또는 평행이동 (pullback_translation) 사상으로 당김"""
    return pull(conn.bundle, conn, chart_map, pull_gerbe(conn.gerbe, chart_map))[1]


# ========== 거브 / 번들 / 접속 ==========

@register("validate_gerbe")
def check_validate_gerbe(scenario: Scenario, spec: CheckSpec) -> Entries:
    gerbe = scenario.get(spec.refs[0], "gerbe")
    report = validate_gerbe(gerbe, scenario.bank)
    _, h_report = curvature_H(gerbe, scenario.bank)
    report.update({f"H_{name}": value for name, value in h_report.items()})
    return _entries(report, _tolerance(scenario, spec))


@register("validate_bundle")
def check_validate_bundle(scenario: Scenario, spec: CheckSpec) -> Entries:
    return _entries(validate_bundle(scenario.get(spec.refs[0], "bundle"), scenario.bank), _tolerance(scenario, spec))


@register("validate_connection")
def check_validate_connection(scenario: Scenario, spec: CheckSpec) -> Entries:
    conn = scenario.get(spec.refs[0], "connection")
    return _entries(validate_connection(conn, scenario.bank), _tolerance(scenario, spec))


# ========== 짝수 Chern 지표 ==========

@register("ch_closed")
def check_ch_closed(scenario: Scenario, spec: CheckSpec) -> Entries:
    conn = scenario.get(spec.refs[0], "connection")
    return _entries(ch_closed_residuals(conn, scenario.bank), _tolerance(scenario, spec))


@register("ch_glue")
def check_ch_glue(scenario: Scenario, spec: CheckSpec) -> Entries:
    conn = scenario.get(spec.refs[0], "connection")
    return _entries(ch_glue_residuals(conn, scenario.bank), _tolerance(scenario, spec))


@register("ch_additive")
def check_ch_additive(scenario: Scenario, spec: CheckSpec) -> Entries:
    a = scenario.get(spec.refs[0], "connection")
    b = scenario.get(spec.refs[1], "connection")
    return _entries(ch_additive_residual(a, b, scenario.bank), _tolerance(scenario, spec))


@register("ch_rescale")
def check_ch_rescale(scenario: Scenario, spec: CheckSpec) -> Entries:
    conn = scenario.get(spec.refs[0], "connection")
    xi = scenario.two_form(spec.params["xi"])
    return _entries(ch_rescale_residual(conn, xi, scenario.bank), _tolerance(scenario, spec))


@register("chern_number")
def check_chern_number(scenario: Scenario, spec: CheckSpec) -> Entries:
    """
    (1/2πi)∫ ch_(1) = expect, 세분(refine=f) / 평행이동(translate=..) 뒤에도 같음
    """
    conn = scenario.get(spec.refs[0], "connection")
    expect = int_param(spec.params, "expect", spec.line)
    axes = int_list_param(spec.params, "axes", spec.line) or (1, 2)
    grid = scenario.options.cycle_grid
    tolerance = _tolerance(scenario, spec)
    points = grid ** len(axes)
    entries: Entries = {"chern": (abs(chern_number(conn, axes, grid) - expect), points, tolerance)}
    if "refine" in spec.params:
        refinement = refine(scenario.cover, int_param(spec.params, "refine", spec.line))
        refined = _pull(conn, refinement_map(refinement))
        entries["refined"] = (abs(chern_number(refined, axes, grid) - expect), points, tolerance)
    steps = int_list_param(spec.params, "translate", spec.line)
    if steps is not None:
        moved = _pull(conn, translation_map(scenario.cover, steps), pullback_translation)
        entries["translated"] = (abs(chern_number(moved, axes, grid) - expect), points, tolerance)
    return entries


# ========== Chern-Simons ==========

@register("transgression")
def check_transgression(scenario: Scenario, spec: CheckSpec) -> Entries:
    path = scenario.get(spec.refs[0], "path")
    nodes = _nodes(scenario, spec)
    report = transgression_residuals(path, scenario.bank, nodes)
    report.update(loop_residual(path, scenario.bank, nodes))
    return _entries(report, _tolerance(scenario, spec))


@register("bigon")
def check_bigon(scenario: Scenario, spec: CheckSpec) -> Entries:
    alpha = scenario.get(spec.refs[0], "path")
    gamma = scenario.get(spec.refs[1], "path")
    report = bigon_residual(alpha, gamma, scenario.bigon_bank, _nodes(scenario, spec))
    return _entries(report, _tolerance(scenario, spec))


@register("cs_gauge")
def check_cs_gauge(scenario: Scenario, spec: CheckSpec) -> Entries:
    path = scenario.get(spec.refs[0], "path")
    phi_seed = int_param(spec.params, "phi_seed", spec.line)
    phi = random_automorphism(path.bundle, sub_seed(scenario.options.seed, "cs_gauge", phi_seed, path.bundle.name))
    report = cs_gauge_residuals(path, phi, scenario.bank, scenario.options.quad_nodes)
    return _entries(report, _tolerance(scenario, spec))


@register("stokes_fiber")
def check_stokes_fiber(scenario: Scenario, spec: CheckSpec) -> Entries:
    item: ScenarioForm = scenario.get(spec.refs[0], "form")
    if not item.fiber:
        raise ManifestError(f"form '{spec.refs[0]}' needs fiber=true for the Stokes check", spec.line)
    report = stokes_fiber_residual(item.form, scenario.bank, _nodes(scenario, spec))
    return _entries(report, _tolerance(scenario, spec))


# ========== 홀수 Chern 지표 ==========

@register("odd_chern_winding")
def check_odd_chern_winding(scenario: Scenario, spec: CheckSpec) -> Entries:
    """
    전역 스칼라 자기동형 φ 의 감김수와 Ch 의 자연성

    Note:
        - winding: -(1/2πi)∫ Ch_(1) 이 expect 와 같은지 (axis 방향 원)
        - xi=: Ch(E, φ, Γ_ξ) = Ch(E, φ, Γ)∧exp(-ξ)
        - twist=: 꼬임 수송 뒤 Ch 불변, translate=: 평행이동 당김과 교환
    """
    conn = scenario.get(spec.refs[0], "connection")
    params = spec.params
    options = scenario.options
    phi = central_automorphism(conn.bundle, parse_expr(params["phi"], allowed=scenario.cover.variables))
    check_morphism(phi, scenario.bank, options.tol_unit)
    axis = int_param(params, "axis", spec.line)
    expect = int_param(params, "expect", spec.line)
    tolerance = _tolerance(scenario, spec)
    winding = winding_number(conn, phi, axis, options.quad_nodes, options.cycle_grid)
    entries: Entries = {"winding": (abs(winding - expect), options.cycle_grid, tolerance)}
    entries.update(_entries(odd_chern_closed_residual(conn, phi, scenario.bank), options.tol_closed))
    if "xi" in params:
        report = odd_chern_shift_residual(conn, phi, scenario.two_form(params["xi"]), scenario.bank)
        entries.update(_entries(report, tolerance))
    if "twist" in params:
        report = twist_invariance_residuals(conn, scenario.get(params["twist"], "twist1"), scenario.bank, phi)
        entries.update(_entries({f"twist_{k}": v for k, v in report.items()}, options.tol_closed))
    steps = int_list_param(params, "translate", spec.line)
    if steps is not None:
        report = pullback_residuals(conn, translation_map(scenario.cover, steps), scenario.bank, phi)
        entries.update(_entries({f"pullback_{k}": v for k, v in report.items()}, options.tol_closed))
    return entries


# ========== 미분 K-이론 ==========

@register("hexagon")
def check_hexagon(scenario: Scenario, spec: CheckSpec) -> Entries:
    conn_e = scenario.get(spec.refs[0], "connection")
    conn_f = scenario.get(spec.refs[1], "connection") if len(spec.refs) > 1 else None
    seed = int_param(spec.params, "seed", spec.line, scenario.derive_seed("hexagon", spec.line))
    defect = float_param(spec.params, "defect", spec.line, 0.0)
    report = hexagon_suite(conn_e, scenario.bank, conn_f, seed, defect, scenario.options.quad_nodes)
    return _entries(report, _tolerance(scenario, spec))


@register("certificate")
def check_certificate(scenario: Scenario, spec: CheckSpec) -> Entries:
    conn = scenario.get(spec.refs[0], "connection")
    kind = spec.params["kind"]
    if kind not in CERTIFICATE_KINDS:
        raise ManifestError(f"certificate kind must be one of {', '.join(CERTIFICATE_KINDS)}", spec.line)
    phi_seed = int_param(spec.params, "phi_seed", spec.line, 0)
    defect = float_param(spec.params, "defect", spec.line, 0.0)
    seed = scenario.derive_seed("certificate", kind, phi_seed)
    report = certificate_suite(conn, kind, scenario.bigon_bank, seed, defect, scenario.options.quad_nodes)
    return _entries(report, _tolerance(scenario, spec))


@register("twist_compat")
def check_twist_compat(scenario: Scenario, spec: CheckSpec) -> Entries:
    conn_a = scenario.get(spec.refs[0], "connection")
    conn_b = scenario.get(spec.refs[1], "connection")
    alpha = scenario.get(spec.params["twist"], "twist1")
    xi = scenario.two_form(spec.params["xi"])
    seed = int_param(spec.params, "seed", spec.line, scenario.derive_seed("twist_compat", spec.line))
    report = twist_compat_suite(conn_a, conn_b, alpha, xi, scenario.bank, seed)
    return _entries(report, _tolerance(scenario, spec))


# ========== 정수 코호몰로지 ==========

def _parse_order(text: str, line: int):
    if text.lower() in ("inf", "infinity", "∞"):
        return INFINITE_ORDER
    try:
        value = int(text)
    except ValueError:
        raise ManifestError(f"expect must be a positive integer or 'inf', got '{text}'", line) from None
    if value < 1:
        raise ManifestError(f"torsion order must be >= 1, got {value}", line)
    return value


@register("dd_class")
def check_dd_class(scenario: Scenario, spec: CheckSpec) -> Entries:
    """
    Dixmier-Douady 정수 3-코사이클의 정수성과 꼬임 차수 (twist= 면 꼬임 사상 불변성)
    """
    gerbe = scenario.get(spec.refs[0], "gerbe")
    expect = _parse_order(spec.params["expect"], spec.line)
    options = scenario.options
    complex_ = nerve_complex(scenario.cover)
    cocycle = dd_cocycle(gerbe, seed=options.seed, nodes=options.quad_nodes)
    points = 6 * complex_.count(3)
    order = torsion_order(complex_, cocycle)
    entries: Entries = {
        "integrality": (cocycle.deviation, points, options.tol_integrality),
        "torsion_order": (0.0 if order == expect else 1.0, complex_.count(3), 0.0),
    }
    if "twist" in spec.params:
        moved = apply_twist_morphism(gerbe, scenario.get(spec.params["twist"], "twist1"))
        other = dd_cocycle(moved, seed=options.seed, nodes=options.quad_nodes)
        entries["twisted_integrality"] = (other.deviation, points, options.tol_integrality)
        entries["cohomologous"] = (0.0 if cohomologous(complex_, cocycle, other) else 1.0, complex_.count(3), 0.0)
    logger.info(f"🔄 DD 꼬임 차수: {gerbe.name} -> {order} (기대 {expect})")
    return entries


@register("cohomology")
def check_cohomology(scenario: Scenario, spec: CheckSpec) -> Entries:
    """H^q 의 Betti 수와 꼬임 불변 인자 (정확히 일치해야 PASS)"""
    params = spec.params
    name = params["complex"]
    if name == "nerve":
        complex_ = nerve_complex(scenario.cover)
    elif name == "file":
        if "file" not in params:
            raise ManifestError("complex=file needs file=<path>", spec.line)
        try:
            complex_ = load_complex(params["file"])
        except (OSError, CohomologyError) as e:
            raise ManifestError(f"cannot load complex file: {e}", spec.line) from None
    else:
        try:
            complex_ = builtin_complex(name)
        except CohomologyError as e:
            raise ManifestError(str(e), spec.line) from None
    q = int_param(params, "q", spec.line)
    betti, torsion = cohomology(complex_, q)
    expected_betti = int_param(params, "betti", spec.line)
    expected_torsion = sorted(int_list_param(params, "torsion", spec.line) or ())
    residual = abs(betti - expected_betti) + (0.0 if sorted(torsion) == expected_torsion else 1.0)
    return {"cohomology": (float(residual), complex_.count(q), 0.0)}


def evaluate_entries(entries: Entries) -> Tuple[bool, float, int]:
    """(PASS 여부, 최대 잔차, 점 수), NaN 잔차는 FAIL"""
    if not entries:
        return True, 0.0, 0
    passed = all(value <= tolerance for value, _, tolerance in entries.values())
    worst = max(value for value, _, _ in entries.values())
    if any(math.isnan(value) for value, _, _ in entries.values()):
        passed, worst = False, math.nan
    points = max(points for _, points, _ in entries.values())
    return passed, float(worst), int(points)
