"""
매니페스트 파서 / 출력기 테스트
"""
import pytest

from gerbecalc.api.manifest import format_manifest, parse_manifest
from gerbecalc.utils.exceptions import ManifestError

HEADER = """scenario "demo"
manifold torus dim=2 grid=3 margin=0.05
samples count=10 seed=1
"""

SAMPLE = HEADER + """
# 주석과 빈 줄은 무시
gerbe g = coboundary seed=3 beta="(0.2*sin(2*pi*x1)) dx1^dx2"
twist1 a = random seed=2
gerbe gt = twist g by a
bundle E on g = trivial rank=2
bundle L on g = line k=-1
bundle S on g = sum E L
connection e on E = standard
connection ep on E = perturb e seed=4 amp=0.2
path p = affine e ep
path r = reparam p profile="t^2*(3 - 2*t)"
form w fiber=true = "(t^2) dx1^dt + (x2) dx1^dx2"
check validate_gerbe gt
check odd_chern_winding e phi="exp(2*pi*i*x1)" axis=1 expect=2
check bigon p r nodes=8
check cohomology complex=rp2 q=2 betti=0 torsion=2
"""


def error_line(text: str) -> int:
    with pytest.raises(ManifestError) as info:
        parse_manifest(text)
    return info.value.line


def test_parse_sample_manifest():
    manifest = parse_manifest(SAMPLE)
    assert manifest.scenario == "demo"
    assert manifest.manifold.dim == 2
    assert manifest.samples.count == 10
    assert [d.name for d in manifest.definitions] == ["g", "a", "gt", "E", "L", "S", "e", "ep", "p", "r", "w"]
    twist = manifest.definition("gt")
    assert twist.method == "twist" and twist.refs == ["g", "a"]
    assert manifest.definition("E").on == "g"
    assert manifest.definition("w").params == {"fiber": "true", "expr": "(t^2) dx1^dt + (x2) dx1^dx2"}
    winding = manifest.checks[1]
    assert winding.refs == ["e"]
    assert winding.params["phi"] == "exp(2*pi*i*x1)"
    assert winding.line == 18


def test_format_then_parse_is_stable():
    manifest = parse_manifest(SAMPLE)
    text = format_manifest(manifest)
    again = parse_manifest(text)
    assert again.model_dump() == manifest.model_dump()
    assert format_manifest(again) == text


def test_scenario_files_parse(scenario_dir):
    files = sorted(scenario_dir.glob("*.manifest"))
    assert len(files) >= 7
    for path in files:
        manifest = parse_manifest(path.read_text(encoding="utf-8"))
        assert manifest.checks, path.name


@pytest.mark.parametrize("body, line, fragment", [
    ("check no_such_check g", 4, "unknown check"),
    ("bundle E on missing = trivial rank=1", 4, "unresolved reference"),
    ("gerbe g = trivial\ngerbe g = trivial", 5, "duplicate name"),
    ("gerbe g = trivial\nbundle E on g = trivial rank=1\ncheck validate_gerbe E", 6, "expected a gerbe"),
    ("gerbe g = trivial\ncheck validate_gerbe g extra", 5, "object arguments"),
    ("gerbe g trivial", 4, "needs '= <method>'"),
    ("gerbe g = nonsense", 4, "unknown gerbe method"),
    ("gerbe g = coboundary", 4, "needs argument 'seed='"),
    ("gerbe g = coboundary seed=1 colour=red", 4, "does not take argument"),
    ("frobnicate x", 4, "unknown directive"),
    ("manifold torus dim=2", 4, "duplicate 'manifold'"),
    ('gerbe g = coboundary seed=1 beta="unterminated', 4, "cannot tokenize"),
])
def test_errors_carry_line_numbers(body, line, fragment):
    with pytest.raises(ManifestError, match=fragment) as info:
        parse_manifest(HEADER + body)
    assert info.value.line == line
    assert str(info.value).startswith(f"line {line}: ")


def test_invalid_manifold_values():
    assert error_line("manifold torus dim=4 grid=3 margin=0.05") == 1
    assert error_line("manifold sphere dim=2") == 1
    assert error_line("samples count=-1") == 1


def test_empty_manifest_has_defaults():
    manifest = parse_manifest("# nothing\n")
    assert manifest.checks == []
    assert manifest.manifold.grid == 3
