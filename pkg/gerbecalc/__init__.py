"""
gerbecalc
꼬인 미분 K-이론 검증 엔진
"""

__version__ = "0.1.0"
