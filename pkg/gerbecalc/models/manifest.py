"""
매니페스트 관련 Pydantic 모델
"""
from typing import Dict, List, Optional

from pydantic import BaseModel, Field


# ========== 1. 다양체 / 표본 / 허용 오차 ==========
class ManifoldSpec(BaseModel):
    """평탄 토러스 T^dim 과 격자 덮개"""
    dim: int = Field(2, ge=1, le=3, description="토러스 차원")
    grid: int = Field(3, ge=3, description="축당 차트 수 N")
    margin: float = Field(0.05, gt=0.0, description="차트 여백 m (0 < m < (1/2 - 1/N)/2)")


class SampleSpec(BaseModel):
    """
    표본점 설정

    Note: 생략한 값은 실행 시 settings.SAMPLE_COUNT / SAMPLE_SEED
    """
    count: Optional[int] = Field(None, ge=0, description="단체당 표본점 수")
    seed: Optional[int] = Field(None, description="시나리오 시드")


class ToleranceSpec(BaseModel):
    """검사 허용 오차 덮어쓰기 (None 이면 settings 값)"""
    pointwise: Optional[float] = Field(None, gt=0.0)
    closed: Optional[float] = Field(None, gt=0.0)
    quadrature: Optional[float] = Field(None, gt=0.0)
    double_quadrature: Optional[float] = Field(None, gt=0.0)
    integrality: Optional[float] = Field(None, gt=0.0)


# ========== 2. 객체 정의 / 검사 ==========
class Definition(BaseModel):
    """
    이름 붙은 객체 정의 한 줄

    예: bundle E on G = gauge L seed=3
        -> kind="bundle", name="E", on="G", method="gauge", refs=["L"], params={"seed": "3"}
    """
    kind: str = Field(..., description="gerbe | twist1 | bundle | connection | path | form")
    name: str = Field(..., description="객체 이름")
    on: Optional[str] = Field(None, description="bundle 은 거브, connection 은 번들")
    method: str = Field(..., description="생성 방식 (trivial, coboundary, sum, ...)")
    refs: List[str] = Field(default_factory=list, description="참조하는 객체 이름")
    params: Dict[str, str] = Field(default_factory=dict, description="key=value 인자")
    line: int = Field(0, exclude=True, description="원본 줄 번호")


class CheckSpec(BaseModel):
    """검사 한 줄: check <name> <refs...> key=value..."""
    name: str
    refs: List[str] = Field(default_factory=list)
    params: Dict[str, str] = Field(default_factory=dict)
    line: int = Field(0, exclude=True)


class Manifest(BaseModel):
    """파싱된 시나리오"""
    scenario: str = Field("", description="시나리오 이름")
    manifold: ManifoldSpec = Field(default_factory=ManifoldSpec)
    samples: SampleSpec = Field(default_factory=SampleSpec)
    tolerance: ToleranceSpec = Field(default_factory=ToleranceSpec)
    definitions: List[Definition] = Field(default_factory=list)
    checks: List[CheckSpec] = Field(default_factory=list)

    def definition(self, name: str) -> Optional[Definition]:
        for item in self.definitions:
            if item.name == name:
                return item
        return None
