"""
계산 엔진
"""
