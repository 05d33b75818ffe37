"""
시나리오 구성
매니페스트 정의를 순서대로 엔진 객체(거브, 번들, 접속, 경로, 형식)로 만든다
"""
from dataclasses import dataclass
from typing import Any, Dict, Optional

from gerbecalc.core.bundle import (
    affine_path,
    direct_sum,
    direct_sum_conn,
    gauge_bundle,
    gauge_path,
    loop_path,
    make_line_bundle,
    make_trivial_bundle,
    perturb,
    random_automorphism,
    reparametrize,
    retag_connection,
    shift_bundle,
    transport_connection,
    transport_twist,
)
from gerbecalc.core.cover import Cover, SampleBank, build_torus_cover, sub_seed
from gerbecalc.core.deligne import (
    DeligneOne,
    apply_twist_morphism,
    make_coboundary_gerbe,
    random_deligne_one,
    shift_by_xi,
    trivial_gerbe,
)
from gerbecalc.core.expression import parse_expr
from gerbecalc.core.forms import MatrixForm, parse_form
from gerbecalc.models.manifest import Definition, Manifest
from gerbecalc.models.report import RunOptions
from gerbecalc.utils.exceptions import GerbeCalcException, ManifestError
from gerbecalc.utils.logger import setup_logger

logger = setup_logger(__name__)


@dataclass
class ScenarioForm:
    """매니페스트 form 정의 (fiber 이면 변수 (x.., t))"""
    form: MatrixForm
    fiber: bool


def int_param(params: Dict[str, str], key: str, line: int = 0, default: Optional[int] = None) -> int:
    """정수 인자 (없으면 default, 형식이 틀리면 ManifestError)"""
    if key not in params:
        if default is None:
            raise ManifestError(f"missing argument '{key}='", line)
        return default
    try:
        return int(params[key])
    except ValueError:
        raise ManifestError(f"argument '{key}' must be an integer, got '{params[key]}'", line) from None


def float_param(params: Dict[str, str], key: str, line: int = 0, default: Optional[float] = None) -> float:
    if key not in params:
        if default is None:
            raise ManifestError(f"missing argument '{key}='", line)
        return default
    try:
        return float(params[key])
    except ValueError:
        raise ManifestError(f"argument '{key}' must be a number, got '{params[key]}'", line) from None


def int_list_param(params: Dict[str, str], key: str, line: int = 0) -> Optional[tuple]:
    """'1,2' 꼴 정수 목록 (없으면 None)"""
    if key not in params:
        return None
    try:
        return tuple(int(part) for part in params[key].split(",") if part.strip())
    except ValueError:
        raise ManifestError(f"argument '{key}' must be a comma separated integer list", line) from None


class Scenario:
    """
    매니페스트 하나의 객체 그래프

    Note:
        - 객체 시드는 (매니페스트 시드, 객체 이름, 적힌 시드) 해시로 분기
        - 정의 중 엔진 오류는 ManifestError (정의 줄 번호) 로 바꾼다
    """

    def __init__(self, manifest: Manifest, options: RunOptions):
        self.manifest = manifest
        self.options = options
        spec = manifest.manifold
        grid = options.grid_override or spec.grid
        try:
            self.cover: Cover = build_torus_cover(spec.dim, grid, spec.margin)
        except GerbeCalcException as e:
            raise ManifestError(f"invalid manifold: {e}") from None
        self.bank = SampleBank(self.cover, options.sample_count, options.seed)
        self.bigon_bank = SampleBank(self.cover, min(options.bigon_sample_count, options.sample_count), options.seed)
        self.objects: Dict[str, Any] = {}
        self.kinds: Dict[str, str] = {}
        for definition in manifest.definitions:
            try:
                self.objects[definition.name] = self._build(definition)
            except ManifestError as e:
                if e.line:
                    raise
                raise ManifestError(str(e), definition.line) from None
            except GerbeCalcException as e:
                raise ManifestError(f"cannot build {definition.kind} '{definition.name}': {e}", definition.line) from None
            self.kinds[definition.name] = definition.kind
        logger.info(f"✅ 시나리오 구성 완료: {manifest.scenario or 'unnamed'} ({self.cover}, 객체 {len(self.objects)}개)")

    # ---------- 조회 ----------

    def get(self, name: str, kind: Optional[str] = None) -> Any:
        if name not in self.objects:
            raise ManifestError(f"unresolved reference '{name}'")
        if kind is not None and self.kinds[name] != kind:
            raise ManifestError(f"'{name}' is a {self.kinds[name]}, expected a {kind}")
        return self.objects[name]

    def derive_seed(self, *names: object) -> int:
        """매니페스트 시드에서 분기한 정수 시드"""
        return int(sub_seed(self.options.seed, *names).integers(2 ** 31))

    def two_form(self, value: str) -> MatrixForm:
        """form 이름 또는 "(expr) dx1^dx2" 텍스트를 스칼라 2-형식으로"""
        if value in self.objects and self.kinds[value] == "form":
            item: ScenarioForm = self.objects[value]
            if item.fiber or item.form.degree != 2:
                raise ManifestError(f"form '{value}' is not a 2-form on the torus")
            return item.form
        return parse_form(value, self.cover.variables, 2)

    # ---------- 정의 ----------

    def _build(self, item: Definition) -> Any:
        builder = getattr(self, f"_build_{item.kind}")
        return builder(item)

    def _build_gerbe(self, item: Definition):
        params = item.params
        if item.method == "trivial":
            return trivial_gerbe(self.cover, item.name)
        if item.method == "coboundary":
            seed = self.derive_seed(item.name, int_param(params, "seed", item.line))
            beta = self.two_form(params["beta"]) if "beta" in params else None
            return make_coboundary_gerbe(self.cover, seed, beta, item.name)
        if item.method == "twist":
            gerbe, alpha = self.get(item.refs[0]), self.get(item.refs[1])
            return apply_twist_morphism(gerbe, alpha, item.name)
        if item.method == "shift":
            return shift_by_xi(self.get(item.refs[0]), self.two_form(params["xi"]), item.name)
        raise ManifestError(f"unknown gerbe method '{item.method}'", item.line)

    def _build_twist1(self, item: Definition) -> DeligneOne:
        if item.method == "identity":
            alpha = DeligneOne.identity(self.cover)
            alpha.name = item.name
            return alpha
        seed = self.derive_seed(item.name, int_param(item.params, "seed", item.line))
        amplitude = float_param(item.params, "amp", item.line, 0.5)
        return random_deligne_one(self.cover, seed, amplitude, item.name)

    def _require_same_gerbe(self, item: Definition, bundle) -> None:
        if bundle.gerbe is not self.get(item.on):
            raise ManifestError(f"bundle '{bundle.name}' does not live on gerbe '{item.on}'", item.line)

    def _build_bundle(self, item: Definition):
        gerbe = self.get(item.on)
        params = item.params
        if item.method == "trivial":
            return make_trivial_bundle(gerbe, int_param(params, "rank", item.line), item.name)[0]
        if item.method == "line":
            return make_line_bundle(gerbe, int_param(params, "k", item.line), item.name)[0]
        if item.method == "sum":
            first, second = self.get(item.refs[0]), self.get(item.refs[1])
            self._require_same_gerbe(item, first)
            self._require_same_gerbe(item, second)
            bundle = direct_sum(first, second, item.name)
            if first.standard is not None and second.standard is not None:
                bundle.standard = direct_sum_conn(first.standard, second.standard, bundle)
            return bundle
        if item.method == "gauge":
            source = self.get(item.refs[0])
            self._require_same_gerbe(item, source)
            seed = self.derive_seed(item.name, int_param(params, "seed", item.line))
            return gauge_bundle(source, seed, item.name)[0]
        if item.method == "transport":
            source, alpha = self.get(item.refs[0]), self.get(item.refs[1])
            gerbe_item = self.manifest.definition(item.on)
            expected = (gerbe_item is not None and gerbe_item.method == "twist"
                        and self.get(gerbe_item.refs[0]) is source.gerbe and gerbe_item.refs[1] == item.refs[1])
            if not expected:
                raise ManifestError(
                    f"transport target gerbe '{item.on}' must be 'twist <gerbe of {item.refs[0]}> by {item.refs[1]}'",
                    item.line
                )
            return transport_twist(source, None, alpha, gerbe, item.name)[0]
        raise ManifestError(f"unknown bundle method '{item.method}'", item.line)

    def _build_connection(self, item: Definition):
        bundle = self.get(item.on)
        params = item.params
        if item.method == "standard":
            if bundle.standard is None:
                raise ManifestError(f"bundle '{item.on}' has no standard connection", item.line)
            return retag_connection(bundle.standard, bundle, item.name)
        source = self.get(item.refs[0])
        if item.method == "perturb":
            if source.bundle is not bundle:
                raise ManifestError(f"connection '{item.refs[0]}' is not on bundle '{item.on}'", item.line)
            seed = self.derive_seed(item.name, int_param(params, "seed", item.line))
            return perturb(source, seed, float_param(params, "amp", item.line, 0.3), item.name)
        if item.method == "transport":
            if bundle.structure != "transport" or bundle.parts[0] is not source.bundle:
                raise ManifestError(f"bundle '{item.on}' is not the transport of {item.refs[0]}'s bundle", item.line)
            return transport_connection(source, self.get(item.refs[1]), bundle)
        if item.method == "shiftxi":
            if source.bundle is not bundle:
                raise ManifestError(f"connection '{item.refs[0]}' is not on bundle '{item.on}'", item.line)
            gerbe = shift_by_xi(bundle.gerbe, self.two_form(params["xi"]), f"{bundle.gerbe.name}_xi")
            return retag_connection(source, shift_bundle(bundle, gerbe), item.name)
        raise ManifestError(f"unknown connection method '{item.method}'", item.line)

    def _build_path(self, item: Definition):
        if item.method == "affine":
            return affine_path(self.get(item.refs[0]), self.get(item.refs[1]), item.name)
        if item.method == "gaugepath":
            conn = self.get(item.refs[0])
            seed = int_param(item.params, "phi_seed", item.line)
            phi = random_automorphism(conn.bundle, sub_seed(self.options.seed, item.name, seed))
            return gauge_path(conn, phi, item.name)
        if item.method == "loop":
            return loop_path(self.get(item.refs[0]), item.name)
        if item.method == "reparam":
            # 끝점을 지키는 t 의 재매개화 (0 -> 0, 1 -> 1)
            profile = parse_expr(item.params["profile"], allowed=("t",))
            return reparametrize(self.get(item.refs[0]), profile, item.name)
        raise ManifestError(f"unknown path method '{item.method}'", item.line)

    def _build_form(self, item: Definition) -> ScenarioForm:
        params = item.params
        fiber = params.get("fiber", "false").lower() in ("1", "true", "yes")
        degree = int_param(params, "deg", item.line) if "deg" in params else None
        variables = self.cover.variables + (("t",) if fiber else ())
        return ScenarioForm(parse_form(params["expr"], variables, degree), fiber)


def build_scenario(manifest: Manifest, options: Optional[RunOptions] = None) -> Scenario:
    """매니페스트 -> Scenario (옵션 생략 시 settings 기준)"""
    return Scenario(manifest, options or RunOptions.resolve(manifest))
