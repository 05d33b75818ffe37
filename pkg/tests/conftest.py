"""
공용 pytest 픽스처
덮개와 표본은 모듈 범위로 한 번만 만든다
"""
from pathlib import Path

import pytest

from gerbecalc.core.cover import SampleBank, build_torus_cover
from gerbecalc.core.deligne import make_coboundary_gerbe, trivial_gerbe
from gerbecalc.core.forms import parse_form

ROOT = Path(__file__).resolve().parent.parent
SCENARIOS = ROOT / "scenarios"


@pytest.fixture(scope="session")
def scenario_dir() -> Path:
    return SCENARIOS


@pytest.fixture(scope="module")
def cover2():
    return build_torus_cover(2, 3, 0.05)


@pytest.fixture(scope="module")
def cover3():
    return build_torus_cover(3, 3, 0.05)


@pytest.fixture(scope="module")
def bank2(cover2):
    return SampleBank(cover2, 20, 0)


@pytest.fixture(scope="module")
def bank3(cover3):
    return SampleBank(cover3, 6, 0)


@pytest.fixture(scope="module")
def flat_gerbe(cover2):
    return trivial_gerbe(cover2)


@pytest.fixture(scope="module")
def gerbe2(cover2):
    return make_coboundary_gerbe(cover2, 7, name="g7")


@pytest.fixture(scope="module")
def gerbe3(cover3):
    return make_coboundary_gerbe(cover3, 11, name="g11")


@pytest.fixture(scope="module")
def twisted_gerbe3(cover3):
    """H = dβ = 2π cos(2πx3) dx3∧dx1∧dx2 ≠ 0 인 T³ 거브"""
    beta = parse_form("(sin(2*pi*x3)) dx1^dx2", cover3.variables, 2)
    return make_coboundary_gerbe(cover3, 13, beta=beta, name="g13h")
