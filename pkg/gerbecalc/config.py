"""
애플리케이션 설정 관리
환경변수 로드 및 전역 설정
"""
from pydantic_settings import BaseSettings
from pydantic import field_validator


class Settings(BaseSettings):
    """검증 엔진 설정"""
    
    # 로깅 설정
    LOG_LEVEL: str = "INFO"
    
    # 샘플링 설정
    SAMPLE_COUNT: int = 200  # 단체(simplex)당 샘플 점 개수
    SAMPLE_SEED: int = 0
    SAMPLE_SHRINK: float = 0.01  # 교집합 상자를 변마다 1% 축소
    BIGON_SAMPLE_COUNT: int = 24  # 이중 구적 검사용 샘플 수
    
    # 미분 제트 / 구적 설정
    JET_ORDER: int = 3  # 최소 2
    QUAD_NODES: int = 16  # Gauss-Legendre 노드 수
    CYCLE_GRID: int = 48  # 토러스 사이클 사다리꼴 격자
    EVAL_CHUNK_POINTS: int = 512  # 구적 노드로 펼친 점을 한 번에 평가할 최대 개수
    
    # 허용 오차
    TOL_POINTWISE: float = 1e-8
    TOL_CLOSED: float = 1e-7
    TOL_QUADRATURE: float = 1e-6
    TOL_DOUBLE_QUADRATURE: float = 1e-5
    TOL_UNIT: float = 1e-9
    TOL_INTEGRALITY: float = 1e-6
    
    # 무작위 생성기 설정
    RANDOM_TRIG_DEGREE: int = 2  # 삼각다항식 최대 차수
    
    # 실행 설정
    MAX_CONCURRENT_CHECKS: int = 4  # 동시에 실행할 검사 개수
    
    # 환경 변수 값 정제
    @field_validator('LOG_LEVEL', mode='before')
    @classmethod
    def clean_log_level(cls, v):
        """환경 변수에서 주석 제거 (예: 'DEBUG  # comment' -> 'DEBUG')"""
        if isinstance(v, str):
            return v.split('#')[0].strip().upper()
        return v
    
    @field_validator('JET_ORDER')
    @classmethod
    def check_jet_order(cls, v):
        """제트 차수는 2 이상"""
        if v < 2:
            raise ValueError(f"JET_ORDER must be >= 2, got {v}")
        return v

    @field_validator(
        'TOL_POINTWISE', 'TOL_CLOSED', 'TOL_QUADRATURE', 'TOL_DOUBLE_QUADRATURE', 'TOL_UNIT', 'TOL_INTEGRALITY'
    )
    @classmethod
    def check_tolerance(cls, v, info):
        if not v > 0:
            raise ValueError(f"{info.field_name} must be > 0, got {v}")
        return v

    @field_validator('QUAD_NODES', 'CYCLE_GRID', 'BIGON_SAMPLE_COUNT', 'EVAL_CHUNK_POINTS', 'MAX_CONCURRENT_CHECKS')
    @classmethod
    def check_positive_count(cls, v, info):
        if v < 1:
            raise ValueError(f"{info.field_name} must be >= 1, got {v}")
        return v

    class Config:
        env_file = ".env"
        env_file_encoding = "utf-8"


# 전역 설정 인스턴스
settings = Settings()
