"""
검사 실행기, 보고서, CLI 테스트
"""
import logging
import math
from pathlib import Path

import pytest
from pydantic import ValidationError

from gerbecalc.api.checks import evaluate_entries, get_check
from gerbecalc.api.manifest import parse_manifest
from gerbecalc.api.runner import run, run_manifest
from gerbecalc.config import Settings
from gerbecalc.main import EXIT_FAIL, EXIT_INPUT, EXIT_PASS, main
from gerbecalc.models.report import CheckResult, Report, RunOptions
from gerbecalc.schemas.checks import CHECKS
from gerbecalc.utils.exceptions import ManifestError
from gerbecalc.utils.logger import check_logger

SCENARIO_FILES = sorted((Path(__file__).resolve().parent.parent / "scenarios").glob("*.manifest"))

SMALL = """scenario "small"
manifold torus dim=2 grid=3 margin=0.05
samples count=4 seed=2

gerbe g = coboundary seed=1
bundle E on g = trivial rank=1
connection e on E = standard
connection ep on E = perturb e seed=3
path a = affine e ep
path b = affine ep e
"""

PASSING = SMALL + """check validate_gerbe g
check cohomology complex=circle q=1 betti=1
check validate_connection ep
"""

FAILING = SMALL + """check cohomology complex=rp2 q=2 betti=1 torsion=2
check validate_gerbe g
check bigon a b nodes=4
"""


def write(tmp_path, text, name="scenario.manifest"):
    path = tmp_path / name
    path.write_text(text, encoding="utf-8")
    return path


# ========== 보고서 ==========

def test_empty_manifest_gives_empty_passing_report():
    report = run(parse_manifest('scenario "empty"\n'))
    assert report.results == []
    assert report.passed and report.exit_code == 0
    assert report.to_text() == "SUMMARY pass=0 fail=0\n"


def test_report_line_format():
    ok = CheckResult(name="ch_closed", passed=True, max_residual=0.25, points=240)
    broken = CheckResult(name="bigon", passed=False, max_residual=math.inf, points=0, message="boom")
    assert ok.to_line() == "CHECK ch_closed PASS max_residual=0.25 points=240"
    assert broken.to_line() == "CHECK bigon FAIL max_residual=inf points=0"
    report = Report(results=[ok, broken])
    assert report.to_text().splitlines()[-1] == "SUMMARY pass=1 fail=1"
    assert report.exit_code == 1


def test_every_check_name_is_registered():
    for name in CHECKS:
        assert callable(get_check(name))
    with pytest.raises(ManifestError):
        get_check("no_such_check")


def test_evaluate_entries():
    assert evaluate_entries({}) == (True, 0.0, 0)
    assert evaluate_entries({"a": (1e-9, 10, 1e-8), "b": (0.0, 30, 0.0)}) == (True, 1e-9, 30)
    passed, worst, _ = evaluate_entries({"a": (2e-8, 10, 1e-8)})
    assert not passed and worst == 2e-8
    passed, worst, _ = evaluate_entries({"a": (float("nan"), 1, 1.0), "b": (0.0, 1, 1.0)})
    assert not passed and math.isnan(worst)


# ========== 실행기 ==========

def test_results_follow_manifest_order():
    manifest = parse_manifest(FAILING)
    report = run(manifest, RunOptions.resolve(manifest, max_concurrent=3))
    assert [r.name for r in report.results] == ["cohomology", "validate_gerbe", "bigon"]
    cohomology_result, gerbe_result, bigon_result = report.results
    assert not cohomology_result.passed and cohomology_result.max_residual == 1.0
    assert gerbe_result.passed
    # 끝점이 다른 경로: 예외는 FAIL(inf) 로
    assert not bigon_result.passed
    assert math.isinf(bigon_result.max_residual)
    assert "CompatibilityError" in bigon_result.message
    assert report.to_text().endswith("SUMMARY pass=1 fail=2\n")


@pytest.mark.asyncio
async def test_run_manifest_concurrently():
    manifest = parse_manifest(PASSING)
    report = await run_manifest(manifest, RunOptions.resolve(manifest, quad_nodes=8, max_concurrent=2))
    assert report.scenario == "small"
    assert [r.name for r in report.results] == ["validate_gerbe", "cohomology", "validate_connection"]
    assert report.passed
    assert set(report.results[0].details) >= {"lambda_cocycle", "curving", "H_gluing", "H_closed"}


def test_argument_errors_surface_with_line_number():
    manifest = parse_manifest(SMALL + "check cohomology complex=klein q=1 betti=0\n")
    with pytest.raises(ManifestError) as info:
        run(manifest)
    assert info.value.line == 11


def test_build_errors_surface_with_line_number():
    text = "manifold torus dim=1 grid=3 margin=0.05\ngerbe g = trivial\nbundle L on g = line k=1\n"
    with pytest.raises(ManifestError, match="line bundles need") as info:
        run(parse_manifest(text))
    assert info.value.line == 3


def test_options_resolution_order():
    manifest = parse_manifest(SMALL + "tolerance pointwise=1e-6\n")
    options = RunOptions.resolve(manifest, quad_nodes=6, grid_override=5)
    assert options.sample_count == 4 and options.seed == 2
    assert options.quad_nodes == 6 and options.grid_override == 5
    assert options.tolerance("pointwise") == 1e-6
    assert options.tolerance("exact") == 0.0


# ========== CLI ==========

def test_cli_exit_codes(tmp_path, capsys):
    assert main(["run", str(write(tmp_path, PASSING))]) == EXIT_PASS
    out = capsys.readouterr().out
    assert out.splitlines()[-1] == "SUMMARY pass=3 fail=0"
    assert all(line.startswith(("CHECK ", "SUMMARY ")) for line in out.splitlines())

    assert main(["run", str(write(tmp_path, FAILING))]) == EXIT_FAIL
    assert capsys.readouterr().out.splitlines()[-1] == "SUMMARY pass=1 fail=2"

    assert main(["run", str(write(tmp_path, SMALL + "check frobnicate g\n"))]) == EXIT_INPUT
    captured = capsys.readouterr()
    assert captured.out == ""
    assert "line 11" in captured.err

    assert main(["run", str(tmp_path / "missing.manifest")]) == EXIT_INPUT


def test_cli_writes_report_file(tmp_path, capsys):
    target = tmp_path / "out" / "report.txt"
    target.parent.mkdir()
    code = main(["--log-level", "ERROR", "run", str(write(tmp_path, PASSING)), "--report", str(target), "--jobs", "1"])
    assert code == EXIT_PASS
    assert capsys.readouterr().out == ""
    assert target.read_text(encoding="utf-8").endswith("SUMMARY pass=3 fail=0\n")


def test_cli_cohomology(tmp_path, capsys, scenario_dir):
    assert main(["cohomology", str(scenario_dir / "complexes" / "rp2.complex"), "--dim", "2"]) == EXIT_PASS
    assert capsys.readouterr().out == "H2 betti=0 torsion=2\n"
    assert main(["cohomology", str(scenario_dir / "complexes" / "circle.complex"), "--dim", "1"]) == EXIT_PASS
    assert capsys.readouterr().out == "H1 betti=1 torsion=-\n"
    bad = write(tmp_path, "0 1\n0 q\n", "bad.complex")
    assert main(["cohomology", str(bad), "--dim", "1"]) == EXIT_INPUT
    assert "line 2" in capsys.readouterr().err


def test_non_unit_phase_fails_the_winding_check():
    manifest = parse_manifest(SMALL + 'check odd_chern_winding e phi="2*exp(2*pi*i*x1)" axis=1 expect=1\n')
    result = run(manifest).results[0]
    assert not result.passed
    assert math.isinf(result.max_residual)
    assert "MorphismError" in result.message


def test_check_log_lines_carry_name_and_manifest_line():
    log = check_logger(logging.getLogger("gerbecalc.test"), "bigon", 7)
    message, kwargs = log.process("⚠️ FAIL", {})
    assert message == "[bigon @ line 7] ⚠️ FAIL"
    assert kwargs == {}


def test_settings_validation():
    assert Settings(LOG_LEVEL="debug  # 개발용").LOG_LEVEL == "DEBUG"
    with pytest.raises(ValidationError):
        Settings(JET_ORDER=1)
    with pytest.raises(ValidationError):
        Settings(TOL_CLOSED=0.0)
    with pytest.raises(ValidationError):
        Settings(QUAD_NODES=0)


@pytest.mark.slow
@pytest.mark.parametrize("path", SCENARIO_FILES, ids=lambda path: path.stem)
def test_scenario_manifests_run_end_to_end(path, capsys):
    code = main(["--log-level", "ERROR", "run", str(path)])
    summary = capsys.readouterr().out.splitlines()[-1]
    if path.name == "defects.manifest":
        # 결함 주입 시나리오는 모든 검사가 FAIL
        assert code == EXIT_FAIL
        assert summary == "SUMMARY pass=0 fail=5"
    else:
        assert code == EXIT_PASS, summary
        assert summary.endswith(" fail=0")
