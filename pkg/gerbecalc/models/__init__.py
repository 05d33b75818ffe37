"""
Pydantic 모델 패키지
"""
