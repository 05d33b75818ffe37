"""
실행 옵션 / 검사 결과 / 보고서 모델
"""
import math
from typing import Dict, List, Optional, Tuple

from pydantic import BaseModel, Field

from gerbecalc.config import settings
from gerbecalc.models.manifest import Manifest


class RunOptions(BaseModel):
    """
    한 번의 실행에 쓰는 설정 (전역 settings 는 바꾸지 않음)

    우선순위: CLI 플래그 > 매니페스트 samples/tolerance > settings
    """
    sample_count: int = Field(..., ge=0)
    seed: int
    bigon_sample_count: int = Field(..., ge=0)
    quad_nodes: int = Field(..., ge=1)
    cycle_grid: int = Field(..., ge=1)
    grid_override: Optional[int] = Field(None, ge=3)
    tol_pointwise: float
    tol_closed: float
    tol_quadrature: float
    tol_double_quadrature: float
    tol_integrality: float
    tol_unit: float
    max_concurrent: int = Field(..., ge=1)

    @classmethod
    def resolve(
        cls,
        manifest: Manifest,
        quad_nodes: Optional[int] = None,
        grid_override: Optional[int] = None,
        max_concurrent: Optional[int] = None
    ) -> "RunOptions":
        samples = manifest.samples
        tolerance = manifest.tolerance
        return cls(
            sample_count=settings.SAMPLE_COUNT if samples.count is None else samples.count,
            seed=settings.SAMPLE_SEED if samples.seed is None else samples.seed,
            bigon_sample_count=settings.BIGON_SAMPLE_COUNT,
            quad_nodes=quad_nodes or settings.QUAD_NODES,
            cycle_grid=settings.CYCLE_GRID,
            grid_override=grid_override,
            tol_pointwise=tolerance.pointwise or settings.TOL_POINTWISE,
            tol_closed=tolerance.closed or settings.TOL_CLOSED,
            tol_quadrature=tolerance.quadrature or settings.TOL_QUADRATURE,
            tol_double_quadrature=tolerance.double_quadrature or settings.TOL_DOUBLE_QUADRATURE,
            tol_integrality=tolerance.integrality or settings.TOL_INTEGRALITY,
            tol_unit=settings.TOL_UNIT,
            max_concurrent=max_concurrent or settings.MAX_CONCURRENT_CHECKS,
        )

    def tolerance(self, kind: str) -> float:
        """허용 오차 이름 -> 값 ("exact" 는 0)"""
        if kind == "exact":
            return 0.0
        return getattr(self, f"tol_{kind}")


class CheckResult(BaseModel):
    """검사 하나의 결과"""
    name: str = Field(..., description="검사 이름")
    passed: bool = Field(..., description="PASS 여부")
    max_residual: float = Field(..., description="최대 잔차")
    points: int = Field(0, description="평가한 점(또는 단체) 수")
    wall_time: float = Field(0.0, description="실행 시간 (초, 보고서 본문에는 없음)")
    message: str = Field("", description="실패 사유")
    details: Dict[str, Tuple[float, int]] = Field(default_factory=dict, description="항목별 (잔차, 점 수)")

    def to_line(self) -> str:
        status = "PASS" if self.passed else "FAIL"
        residual = "inf" if math.isinf(self.max_residual) else f"{self.max_residual:.17g}"
        return f"CHECK {self.name} {status} max_residual={residual} points={self.points}"


class Report(BaseModel):
    """시나리오 실행 보고서"""
    scenario: str = ""
    results: List[CheckResult] = Field(default_factory=list)

    @property
    def pass_count(self) -> int:
        return sum(1 for r in self.results if r.passed)

    @property
    def fail_count(self) -> int:
        return len(self.results) - self.pass_count

    @property
    def passed(self) -> bool:
        return self.fail_count == 0

    @property
    def exit_code(self) -> int:
        return 0 if self.passed else 1

    def to_text(self) -> str:
        lines = [result.to_line() for result in self.results]
        lines.append(f"SUMMARY pass={self.pass_count} fail={self.fail_count}")
        return "\n".join(lines) + "\n"
