"""
검사 실행기
검사를 스레드에서 병렬 실행하고 매니페스트 순서대로 보고서를 만든다
"""
import asyncio
import math
import time
from typing import Optional

from gerbecalc.api.checks import evaluate_entries, get_check
from gerbecalc.api.scenario import Scenario, build_scenario
from gerbecalc.models.manifest import CheckSpec, Manifest
from gerbecalc.models.report import CheckResult, Report, RunOptions
from gerbecalc.utils.exceptions import ManifestError
from gerbecalc.utils.logger import check_logger, setup_logger

logger = setup_logger(__name__)


def run_check(scenario: Scenario, spec: CheckSpec) -> CheckResult:
    """
    검사 하나 실행

    Note:
        - ManifestError (인자 값 오류) 는 그대로 올린다
        - 그 밖의 예외는 FAIL (max_residual=inf) 로 바꾼다
    """
    start = time.perf_counter()
    check = get_check(spec.name)
    log = check_logger(logger, spec.name, spec.line)
    try:
        entries = check(scenario, spec)
    except ManifestError as e:
        if e.line:
            raise
        raise ManifestError(str(e), spec.line) from None
    except Exception as e:
        elapsed = time.perf_counter() - start
        log.error(f"❌ 검사 실행 실패: {type(e).__name__}: {e}")
        return CheckResult(
            name=spec.name, passed=False, max_residual=math.inf, points=0, wall_time=elapsed,
            message=f"{type(e).__name__}: {e}"
        )
    passed, worst, points = evaluate_entries(entries)
    elapsed = time.perf_counter() - start
    details = {name: (value, count) for name, (value, count, _) in entries.items()}
    if passed:
        log.info(f"✅ PASS (max={worst:.3g}, {elapsed:.2f}s)")
    else:
        failing = [name for name, (value, _, tol) in entries.items() if not value <= tol]
        log.warning(f"⚠️ FAIL (max={worst:.3g}, 초과 항목: {', '.join(failing)})")
    return CheckResult(
        name=spec.name, passed=passed, max_residual=worst, points=points, wall_time=elapsed, details=details
    )


async def run_manifest(manifest: Manifest, options: Optional[RunOptions] = None) -> Report:
    """
    매니페스트 실행 (검사는 최대 options.max_concurrent 개 동시 실행)

    Args:
        manifest: 파싱된 매니페스트
        options: 실행 옵션 (생략 시 매니페스트 + settings)

    Returns:
        Report (결과 순서 = 매니페스트 check 순서)

    Raises:
        ManifestError: 객체 구성 또는 검사 인자 오류
    """
    options = options or RunOptions.resolve(manifest)
    logger.info(f"🚀 시나리오 실행 시작: {manifest.scenario or 'unnamed'} (검사 {len(manifest.checks)}개)")
    scenario = await asyncio.to_thread(build_scenario, manifest, options)
    semaphore = asyncio.Semaphore(options.max_concurrent)

    async def guarded(spec: CheckSpec) -> CheckResult:
        async with semaphore:
            return await asyncio.to_thread(run_check, scenario, spec)

    results = await asyncio.gather(*(guarded(spec) for spec in manifest.checks))
    report = Report(scenario=manifest.scenario, results=list(results))
    logger.info(f"✅ 시나리오 실행 완료: pass={report.pass_count}, fail={report.fail_count}")
    return report


def run(manifest: Manifest, options: Optional[RunOptions] = None) -> Report:
    """동기 진입점"""
    return asyncio.run(run_manifest(manifest, options))
