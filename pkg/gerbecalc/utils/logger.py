"""
로깅 설정
로그는 stderr 로만 나간다 (stdout 은 보고서 전용)
"""
import logging
import sys
from typing import Any, MutableMapping, Tuple

from gerbecalc.config import settings

# 검사는 작업 스레드에서 돌기 때문에 스레드 이름을 같이 남긴다
LOG_FORMAT = '%(asctime)s - %(name)s - %(levelname)s - [%(threadName)s] %(message)s'
DATE_FORMAT = '%Y-%m-%d %H:%M:%S'


def setup_logger(name: str) -> logging.Logger:
    """
    로거 설정

    Args:
        name: 로거 이름 (보통 __name__)

    Returns:
        설정된 로거 객체
    """
    logger = logging.getLogger(name)

    # 이미 핸들러가 있으면 중복 추가 방지
    if logger.handlers:
        return logger

    level = getattr(logging, settings.LOG_LEVEL)
    logger.setLevel(level)

    handler = logging.StreamHandler(sys.stderr)
    handler.setLevel(level)
    handler.setFormatter(logging.Formatter(fmt=LOG_FORMAT, datefmt=DATE_FORMAT))

    logger.addHandler(handler)
    logger.propagate = False

    return logger


class CheckLogAdapter(logging.LoggerAdapter):
    """메시지 앞에 검사 이름과 매니페스트 줄 번호를 붙인다"""

    def process(self, msg: Any, kwargs: MutableMapping[str, Any]) -> Tuple[Any, MutableMapping[str, Any]]:
        return f"[{self.extra['check']} @ line {self.extra['line']}] {msg}", kwargs


def check_logger(logger: logging.Logger, check: str, line: int) -> CheckLogAdapter:
    return CheckLogAdapter(logger, {"check": check, "line": line})


def set_level(level: str) -> None:
    """gerbecalc 로거 전체의 레벨 변경 (CLI 옵션용)"""
    value = getattr(logging, level.upper())
    for name, logger in logging.root.manager.loggerDict.items():
        if name.startswith("gerbecalc") and isinstance(logger, logging.Logger):
            logger.setLevel(value)
            for handler in logger.handlers:
                handler.setLevel(value)
