"""
커스텀 예외 클래스
"""


class GerbeCalcException(Exception):
    """기본 예외 클래스"""
    pass


class ExpressionSyntaxError(GerbeCalcException):
    """식 구문 오류 (바이트 오프셋 포함)"""

    def __init__(self, message: str, offset: int):
        super().__init__(f"{message} (offset {offset})")
        self.offset = offset


class UnknownIdentifierError(GerbeCalcException):
    """알 수 없는 식별자"""
    pass


class EvaluationDomainError(GerbeCalcException):
    """정의역 오류 (0으로 나누기, log 0)"""
    pass


class FormShapeError(GerbeCalcException):
    """미분형식 크기/차수 불일치"""
    pass


class CoverError(GerbeCalcException):
    """덮개(cover) 구성 오류"""
    pass


class GluingError(GerbeCalcException):
    """차트 간 접합 실패"""
    pass


class CompatibilityError(GerbeCalcException):
    """거브/번들 참조 불일치"""
    pass


class MorphismError(GerbeCalcException):
    """번들 사상 오류"""
    pass


class CertificateError(GerbeCalcException):
    """동치 인증서 오류"""
    pass


class CohomologyError(GerbeCalcException):
    """정수 코호몰로지 계산 오류"""
    pass


class ManifestError(GerbeCalcException):
    """매니페스트 파싱 오류 (줄 번호 포함)"""

    def __init__(self, message: str, line: int = 0):
        prefix = f"line {line}: " if line else ""
        super().__init__(f"{prefix}{message}")
        self.line = line
