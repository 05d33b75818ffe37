"""
매니페스트 파서 / 출력기
줄 단위 문법, '#' 주석, key=value 인자 (값은 큰따옴표 가능)
"""
import re
import shlex
from typing import Dict, List, Tuple

from pydantic import ValidationError

from gerbecalc.models.manifest import CheckSpec, Definition, Manifest, ManifoldSpec, SampleSpec, ToleranceSpec
from gerbecalc.schemas.checks import BY_METHODS, CHECKS, DEFINITIONS, OBJECT_KINDS, ON_KINDS, Signature
from gerbecalc.utils.exceptions import ManifestError
from gerbecalc.utils.logger import setup_logger

logger = setup_logger(__name__)

_NAME = re.compile(r"^[A-Za-z_][A-Za-z0-9_]*$")
_PARAM = re.compile(r"^([A-Za-z_][A-Za-z0-9_]*)=(.*)$", re.DOTALL)


# ========== 토큰 ==========

def _tokenize(raw: str, line: int) -> List[str]:
    try:
        return shlex.split(raw, comments=True)
    except ValueError as e:
        raise ManifestError(f"cannot tokenize line: {e}", line) from None


def _split_args(tokens: List[str], line: int) -> Tuple[List[str], Dict[str, str]]:
    """위치 인자와 key=value 인자 분리"""
    positional: List[str] = []
    params: Dict[str, str] = {}
    for token in tokens:
        match = _PARAM.match(token)
        if match:
            key, value = match.groups()
            if key in params:
                raise ManifestError(f"duplicate argument '{key}'", line)
            params[key] = value
        else:
            positional.append(token)
    return positional, params


def _check_name(name: str, line: int) -> None:
    if not _NAME.match(name):
        raise ManifestError(f"invalid object name '{name}'", line)


def _validate_args(
    what: str,
    signature: Signature,
    refs: List[str],
    params: Dict[str, str],
    kinds: Dict[str, str],
    line: int
) -> None:
    """위치 인자 개수/종류와 key=value 이름 검증"""
    low = len(signature.refs)
    high = low + len(signature.optional_refs)
    if not low <= len(refs) <= high:
        expected = f"{low}" if low == high else f"{low}..{high}"
        raise ManifestError(f"{what} takes {expected} object arguments, got {len(refs)}", line)
    for ref, kind in zip(refs, signature.refs + signature.optional_refs):
        _require_kind(ref, kind, kinds, line)
    for key in signature.required:
        if key not in params:
            raise ManifestError(f"{what} needs argument '{key}='", line)
    allowed = set(signature.required) | set(signature.optional)
    for key in params:
        if key not in allowed:
            raise ManifestError(f"{what} does not take argument '{key}='", line)
    for key, kind in signature.ref_params.items():
        if key in params:
            _require_kind(params[key], kind, kinds, line)


def _require_kind(name: str, kind: str, kinds: Dict[str, str], line: int) -> None:
    if name not in kinds:
        raise ManifestError(f"unresolved reference '{name}' (expected a {kind})", line)
    if kinds[name] != kind:
        raise ManifestError(f"'{name}' is a {kinds[name]}, expected a {kind}", line)


def _model(factory, values: Dict[str, str], line: int, what: str):
    try:
        return factory(**values)
    except ValidationError as e:
        problems = "; ".join(f"{'.'.join(str(p) for p in err['loc'])}: {err['msg']}" for err in e.errors())
        raise ManifestError(f"invalid {what}: {problems}", line) from None


# ========== 파서 ==========

def _parse_definition(tokens: List[str], line: int, kinds: Dict[str, str]) -> Definition:
    kind = tokens[0]
    if "=" not in tokens:
        raise ManifestError(f"{kind} definition needs '= <method>'", line)
    split = tokens.index("=")
    left, right = tokens[1:split], tokens[split + 1:]
    if not left:
        raise ManifestError(f"{kind} definition needs a name", line)
    name = left[0]
    _check_name(name, line)
    if name in kinds:
        raise ManifestError(f"duplicate name '{name}'", line)
    on = None
    params: Dict[str, str] = {}
    if kind in ON_KINDS:
        if len(left) != 3 or left[1] != "on":
            raise ManifestError(f"expected '{kind} <id> on <{ON_KINDS[kind]}-id> = ...'", line)
        on = left[2]
        _require_kind(on, ON_KINDS[kind], kinds, line)
    elif kind == "form":
        extra, params = _split_args(left[1:], line)
        if extra:
            raise ManifestError(f"unexpected tokens {extra} in form header", line)
    elif len(left) != 1:
        raise ManifestError(f"unexpected tokens {left[1:]} after name", line)
    if not right:
        raise ManifestError(f"{kind} definition needs a method after '='", line)

    if kind == "form":
        if len(right) != 1:
            raise ManifestError("form body must be a single quoted expression", line)
        method, refs = "expr", []
        params["expr"] = right[0]
    else:
        method = right[0]
        refs, method_params = _split_args(right[1:], line)
        params.update(method_params)
        if method in BY_METHODS:
            if len(refs) != 3 or refs[1] != "by":
                raise ManifestError(f"expected '{method} <id> by <twist1-id>'", line)
            refs = [refs[0], refs[2]]
    signature = DEFINITIONS.get((kind, method))
    if signature is None:
        known = sorted(m for k, m in DEFINITIONS if k == kind)
        raise ManifestError(f"unknown {kind} method '{method}' (known: {', '.join(known)})", line)
    _validate_args(f"{kind} {method}", signature, refs, params, kinds, line)
    kinds[name] = kind
    return Definition(kind=kind, name=name, on=on, method=method, refs=refs, params=params, line=line)


def _parse_check(tokens: List[str], line: int, kinds: Dict[str, str]) -> CheckSpec:
    if len(tokens) < 2:
        raise ManifestError("check needs a name", line)
    name = tokens[1]
    signature = CHECKS.get(name)
    if signature is None:
        raise ManifestError(f"unknown check '{name}'", line)
    refs, params = _split_args(tokens[2:], line)
    _validate_args(f"check {name}", signature, refs, params, kinds, line)
    return CheckSpec(name=name, refs=refs, params=params, line=line)


def parse_manifest(text: str) -> Manifest:
    """
    매니페스트 텍스트 파싱

    Args:
        text: 매니페스트 전체 텍스트

    Returns:
        Manifest (모든 참조가 앞선 정의로 해석됨)

    Raises:
        ManifestError: 구문 오류, 해석 안 되는 참조, 중복 이름, 알 수 없는 검사 (줄 번호 포함)
    """
    manifest = Manifest()
    kinds: Dict[str, str] = {}
    seen = set()
    for line, raw in enumerate(text.splitlines(), start=1):
        tokens = _tokenize(raw, line)
        if not tokens:
            continue
        head = tokens[0]
        if head in ("scenario", "manifold", "samples", "tolerance"):
            if head in seen:
                raise ManifestError(f"duplicate '{head}' line", line)
            seen.add(head)
        if head == "scenario":
            if len(tokens) != 2:
                raise ManifestError('expected scenario "<name>"', line)
            manifest.scenario = tokens[1]
        elif head == "manifold":
            if len(tokens) < 2 or tokens[1] != "torus":
                raise ManifestError("only 'manifold torus ...' is supported", line)
            extra, params = _split_args(tokens[2:], line)
            if extra:
                raise ManifestError(f"unexpected tokens {extra}", line)
            manifest.manifold = _model(ManifoldSpec, params, line, "manifold")
        elif head == "samples":
            extra, params = _split_args(tokens[1:], line)
            if extra:
                raise ManifestError(f"unexpected tokens {extra}", line)
            manifest.samples = _model(SampleSpec, params, line, "samples")
        elif head == "tolerance":
            extra, params = _split_args(tokens[1:], line)
            if extra:
                raise ManifestError(f"unexpected tokens {extra}", line)
            manifest.tolerance = _model(ToleranceSpec, params, line, "tolerance")
        elif head in OBJECT_KINDS:
            manifest.definitions.append(_parse_definition(tokens, line, kinds))
        elif head == "check":
            manifest.checks.append(_parse_check(tokens, line, kinds))
        else:
            raise ManifestError(f"unknown directive '{head}'", line)
    logger.debug(f"✅ 매니페스트 파싱: 객체 {len(manifest.definitions)}개, 검사 {len(manifest.checks)}개")
    return manifest


# ========== 출력기 ==========

def _quote(value: str) -> str:
    if value and not any(c.isspace() or c in "\"'#\\" for c in value):
        return value
    if '"' not in value and "\\" not in value:
        return f'"{value}"'
    return shlex.quote(value)


def _format_params(params: Dict[str, str]) -> List[str]:
    return [f"{key}={_quote(value)}" for key, value in params.items()]


def _format_definition(item: Definition) -> str:
    if item.kind == "form":
        header = ["form", item.name] + _format_params({k: v for k, v in item.params.items() if k != "expr"})
        return " ".join(header + ["=", _quote(item.params["expr"])])
    parts = [item.kind, item.name]
    if item.on is not None:
        parts += ["on", item.on]
    parts += ["=", item.method]
    if item.method in BY_METHODS:
        parts += [item.refs[0], "by", item.refs[1]]
    else:
        parts += item.refs
    return " ".join(parts + _format_params(item.params))


def format_manifest(manifest: Manifest) -> str:
    """정규형 매니페스트 텍스트 (parse_manifest 와 왕복 안정)"""
    lines = []
    if manifest.scenario:
        lines.append(f"scenario {_quote(manifest.scenario)}")
    m = manifest.manifold
    lines.append(f"manifold torus dim={m.dim} grid={m.grid} margin={m.margin!r}")
    samples = {k: str(v) for k, v in manifest.samples.model_dump().items() if v is not None}
    if samples:
        lines.append(" ".join(["samples"] + _format_params(samples)))
    tolerance = {k: repr(v) for k, v in manifest.tolerance.model_dump().items() if v is not None}
    if tolerance:
        lines.append(" ".join(["tolerance"] + _format_params(tolerance)))
    lines.extend(_format_definition(item) for item in manifest.definitions)
    for check in manifest.checks:
        lines.append(" ".join(["check", check.name] + check.refs + _format_params(check.params)))
    return "\n".join(lines) + "\n"
