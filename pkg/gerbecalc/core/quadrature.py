"""
구적 규칙
[0,1] 위의 Gauss-Legendre 와 주기 사다리꼴
"""
from functools import lru_cache
from typing import Tuple

import numpy as np
from scipy.special import roots_legendre


@lru_cache(maxsize=None)
def gauss_legendre_unit(nodes: int) -> Tuple[np.ndarray, np.ndarray]:
    """
    [0,1] 구간의 Gauss-Legendre 노드와 가중치

    Args:
        nodes: 노드 수 (>= 1)

    Returns:
        (노드, 가중치), 가중치 합은 1
    """
    if nodes < 1:
        raise ValueError(f"quadrature needs at least one node, got {nodes}")
    x, w = roots_legendre(nodes)
    return (x + 1.0) / 2.0, w / 2.0


@lru_cache(maxsize=None)
def periodic_trapezoid(grid: int) -> Tuple[np.ndarray, np.ndarray]:
    """주기 함수용 균등 노드 (0, 1/grid, ...) 와 가중치 1/grid"""
    if grid < 1:
        raise ValueError(f"grid must be positive, got {grid}")
    nodes = np.arange(grid, dtype=float) / grid
    return nodes, np.full(grid, 1.0 / grid)
