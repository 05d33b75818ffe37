"""
검사 실행 계층
매니페스트 파싱, 시나리오 구성, 검사 실행
"""
