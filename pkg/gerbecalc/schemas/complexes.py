"""
내장 추상 단체 복합체 데이터
"""
from typing import Dict, List, Tuple

# 3개 차트 원의 신경 (삼각형 그래프)
CIRCLE_SIMPLICES: List[Tuple[int, ...]] = [(0, 1), (1, 2), (0, 2)]

# 꼭짓점 6개 최소 RP² 삼각분할
RP2_SIMPLICES: List[Tuple[int, ...]] = [
    (0, 1, 2), (0, 2, 3), (0, 3, 4), (0, 4, 5), (0, 1, 5),
    (1, 2, 4), (1, 3, 4), (1, 3, 5), (2, 3, 5), (2, 4, 5),
]

STATIC_COMPLEXES: Dict[str, List[Tuple[int, ...]]] = {
    "circle": CIRCLE_SIMPLICES,
    "rp2": RP2_SIMPLICES,
}

# 토러스 격자 덮개의 신경: 이름 -> 차원
TORUS_COMPLEXES: Dict[str, int] = {"torus1": 1, "torus2": 2, "torus3": 3}
TORUS_GRID = 3
TORUS_MARGIN = 0.05
