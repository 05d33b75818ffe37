"""
매니페스트 문법 표
정의 방식별 / 검사별 인자 모양 (파서가 참조 검증에 사용)
"""
from dataclasses import dataclass, field
from typing import Dict, Tuple

OBJECT_KINDS = ("gerbe", "twist1", "bundle", "connection", "path", "form")

# "on <id>" 가 필요한 종류와 그 대상 종류
ON_KINDS: Dict[str, str] = {"bundle": "gerbe", "connection": "bundle"}


@dataclass(frozen=True)
class Signature:
    """
    위치 인자 종류와 key=value 인자 이름

    Note:
        - refs: 필수 위치 인자의 객체 종류
        - optional_refs: 뒤에 붙을 수 있는 위치 인자 종류
        - ref_params: 값이 객체 이름이어야 하는 key (key -> 종류)
        - tolerance: 검사 판정에 쓰는 허용 오차 이름
    """
    refs: Tuple[str, ...] = ()
    optional_refs: Tuple[str, ...] = ()
    required: Tuple[str, ...] = ()
    optional: Tuple[str, ...] = ()
    ref_params: Dict[str, str] = field(default_factory=dict)
    tolerance: str = "pointwise"


# (종류, 방식) -> 인자 모양
DEFINITIONS: Dict[Tuple[str, str], Signature] = {
    ("gerbe", "trivial"): Signature(),
    ("gerbe", "coboundary"): Signature(required=("seed",), optional=("beta",)),
    ("gerbe", "twist"): Signature(refs=("gerbe", "twist1")),
    ("gerbe", "shift"): Signature(refs=("gerbe",), required=("xi",)),
    ("twist1", "random"): Signature(required=("seed",), optional=("amp",)),
    ("twist1", "identity"): Signature(),
    ("bundle", "trivial"): Signature(required=("rank",)),
    ("bundle", "line"): Signature(required=("k",)),
    ("bundle", "sum"): Signature(refs=("bundle", "bundle")),
    ("bundle", "gauge"): Signature(refs=("bundle",), required=("seed",)),
    ("bundle", "transport"): Signature(refs=("bundle", "twist1")),
    ("connection", "standard"): Signature(),
    ("connection", "perturb"): Signature(refs=("connection",), required=("seed",), optional=("amp",)),
    ("connection", "transport"): Signature(refs=("connection", "twist1")),
    ("connection", "shiftxi"): Signature(refs=("connection",), required=("xi",)),
    ("path", "affine"): Signature(refs=("connection", "connection")),
    ("path", "gaugepath"): Signature(refs=("connection",), required=("phi_seed",)),
    ("path", "loop"): Signature(refs=("path",)),
    ("path", "reparam"): Signature(refs=("path",), required=("profile",)),
    ("form", "expr"): Signature(required=("expr",), optional=("deg", "fiber")),
}

# 'by' 로 두 위치 인자를 잇는 방식
BY_METHODS = {"twist", "transport"}

CHECKS: Dict[str, Signature] = {
    "validate_gerbe": Signature(refs=("gerbe",)),
    "validate_bundle": Signature(refs=("bundle",)),
    "validate_connection": Signature(refs=("connection",)),
    "ch_closed": Signature(refs=("connection",), tolerance="closed"),
    "ch_glue": Signature(refs=("connection",)),
    "ch_additive": Signature(refs=("connection", "connection")),
    "ch_rescale": Signature(refs=("connection",), required=("xi",), tolerance="closed"),
    "transgression": Signature(refs=("path",), optional=("nodes",), tolerance="quadrature"),
    "bigon": Signature(refs=("path", "path"), optional=("nodes",), tolerance="double_quadrature"),
    "cs_gauge": Signature(refs=("path",), required=("phi_seed",), tolerance="closed"),
    "odd_chern_winding": Signature(
        refs=("connection",), required=("phi", "axis", "expect"), optional=("xi", "twist", "translate"),
        ref_params={"twist": "twist1"}, tolerance="quadrature"
    ),
    "stokes_fiber": Signature(refs=("form",), optional=("nodes",), tolerance="quadrature"),
    "hexagon": Signature(
        refs=("connection",), optional_refs=("connection",), optional=("defect", "seed"), tolerance="closed"
    ),
    "certificate": Signature(
        refs=("connection",), required=("kind",), optional=("phi_seed", "defect"), tolerance="double_quadrature"
    ),
    "dd_class": Signature(
        refs=("gerbe",), required=("expect",), optional=("twist",), ref_params={"twist": "twist1"},
        tolerance="integrality"
    ),
    "cohomology": Signature(required=("complex", "q", "betti"), optional=("torsion", "file"), tolerance="exact"),
    "chern_number": Signature(
        refs=("connection",), required=("expect",), optional=("axes", "refine", "translate")
    ),
    "twist_compat": Signature(
        refs=("connection", "connection"), required=("twist", "xi"), optional=("seed",),
        ref_params={"twist": "twist1"}, tolerance="closed"
    ),
}

CERTIFICATE_KINDS = ("reflexive", "gauge", "chain", "a_map")
