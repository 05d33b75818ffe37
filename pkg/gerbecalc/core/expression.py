"""
스칼라 식 언어
파서, 출력기, 기호 미분 및 제트 평가
"""
import math
import re
from dataclasses import dataclass
from typing import Dict, Iterable, Optional, Sequence, Set, Tuple, Union

import numpy as np

from gerbecalc.core.jet import Jet
from gerbecalc.utils.exceptions import ExpressionSyntaxError, UnknownIdentifierError

Number = Union[int, float, complex]

FUNCTIONS = ("sin", "cos", "exp", "log")
COORDINATES = tuple(f"x{k}" for k in range(1, 10))
PATH_PARAMETER = "t"


def coordinate_names(dim: int, with_t: bool = False) -> Tuple[str, ...]:
    """차트 좌표 이름 (x1..xd, 필요시 마지막에 t)"""
    names = COORDINATES[:dim]
    return names + (PATH_PARAMETER,) if with_t else names


class Expr:
    """
    스칼라 식 AST 기본 클래스

    Note:
        - 모든 노드는 불변이며 여러 식이 부분 트리를 공유할 수 있다
        - 산술 연산자는 자명한 상수 접기만 수행한다 (CAS 아님)
    """

    # ---------- 연산자 ----------

    def __add__(self, other):
        return add(self, as_expr(other))

    def __radd__(self, other):
        return add(as_expr(other), self)

    def __sub__(self, other):
        return sub(self, as_expr(other))

    def __rsub__(self, other):
        return sub(as_expr(other), self)

    def __mul__(self, other):
        return mul(self, as_expr(other))

    def __rmul__(self, other):
        return mul(as_expr(other), self)

    def __truediv__(self, other):
        return div(self, as_expr(other))

    def __rtruediv__(self, other):
        return div(as_expr(other), self)

    def __neg__(self):
        return neg(self)

    def __pow__(self, exponent: int):
        return power(self, exponent)

    # ---------- 공통 인터페이스 ----------

    def children(self) -> Tuple["Expr", ...]:
        return ()

    def variables(self) -> Set[str]:
        """식에 나타나는 변수 이름"""
        found: Set[str] = set()
        stack = [self]
        seen = set()
        while stack:
            node = stack.pop()
            if id(node) in seen:
                continue
            seen.add(id(node))
            if isinstance(node, Var):
                found.add(node.name)
            stack.extend(node.children())
        return found

    def to_text(self) -> str:
        return print_expr(self)

    def __str__(self) -> str:
        return print_expr(self)

    def diff(self, name: str) -> "Expr":
        return differentiate(self, name)

    def substitute(self, mapping: Dict[str, "Expr"]) -> "Expr":
        return substitute(self, mapping)

    def translate(self, offsets: Dict[str, float]) -> "Expr":
        """x -> x + c 치환 (격자 평행이동 당김)"""
        mapping = {name: Var(name) + Const(float(c)) for name, c in offsets.items() if c != 0}
        return substitute(self, mapping) if mapping else self

    def is_zero(self) -> bool:
        return isinstance(self, Const) and self.value == 0

    def is_one(self) -> bool:
        return isinstance(self, Const) and self.value == 1


@dataclass(frozen=True, eq=False)
class Const(Expr):
    value: complex
    label: Optional[str] = None


@dataclass(frozen=True, eq=False)
class Var(Expr):
    name: str


@dataclass(frozen=True, eq=False)
class Neg(Expr):
    operand: Expr

    def children(self):
        return (self.operand,)


@dataclass(frozen=True, eq=False)
class BinOp(Expr):
    op: str
    left: Expr
    right: Expr

    def children(self):
        return (self.left, self.right)


@dataclass(frozen=True, eq=False)
class Pow(Expr):
    base: Expr
    exponent: int

    def children(self):
        return (self.base,)


@dataclass(frozen=True, eq=False)
class Call(Expr):
    func: str
    arg: Expr

    def children(self):
        return (self.arg,)


ZERO = Const(0.0)
ONE = Const(1.0)
PI = Const(math.pi, "pi")
I_UNIT = Const(1j, "i")


def as_expr(value: Union[Expr, Number]) -> Expr:
    if isinstance(value, Expr):
        return value
    return Const(complex(value) if isinstance(value, complex) else float(value))


# ========== 상수 접기 생성자 ==========

def add(a: Expr, b: Expr) -> Expr:
    if a.is_zero():
        return b
    if b.is_zero():
        return a
    if isinstance(a, Const) and isinstance(b, Const) and a.label is None and b.label is None:
        return Const(a.value + b.value)
    return BinOp("+", a, b)


def sub(a: Expr, b: Expr) -> Expr:
    if b.is_zero():
        return a
    if a.is_zero():
        return neg(b)
    if isinstance(a, Const) and isinstance(b, Const) and a.label is None and b.label is None:
        return Const(a.value - b.value)
    return BinOp("-", a, b)


def mul(a: Expr, b: Expr) -> Expr:
    if a.is_zero() or b.is_zero():
        return ZERO
    if a.is_one():
        return b
    if b.is_one():
        return a
    if isinstance(a, Const) and isinstance(b, Const) and a.label is None and b.label is None:
        return Const(a.value * b.value)
    return BinOp("*", a, b)


def div(a: Expr, b: Expr) -> Expr:
    if b.is_one():
        return a
    if a.is_zero() and not b.is_zero():
        return ZERO
    return BinOp("/", a, b)


def neg(a: Expr) -> Expr:
    if isinstance(a, Const) and a.label is None:
        return Const(-a.value)
    if isinstance(a, Neg):
        return a.operand
    return Neg(a)


def power(a: Expr, exponent: int) -> Expr:
    if exponent == 0:
        return ONE
    if exponent == 1:
        return a
    if a.is_zero():
        return ZERO
    return Pow(a, int(exponent))


def call(func: str, arg: Expr) -> Expr:
    if func not in FUNCTIONS:
        raise UnknownIdentifierError(f"unknown function '{func}'")
    if arg.is_zero():
        if func in ("sin",):
            return ZERO
        if func in ("cos", "exp"):
            return ONE
    return Call(func, arg)


def sin(a) -> Expr:
    return call("sin", as_expr(a))


def cos(a) -> Expr:
    return call("cos", as_expr(a))


def exp(a) -> Expr:
    return call("exp", as_expr(a))


def log(a) -> Expr:
    return call("log", as_expr(a))


# ========== 파서 ==========

_TOKEN = re.compile(
    r"\s*(?:(?P<number>(?:\d+\.?\d*|\.\d+)(?:[eE][+-]?\d+)?)"
    r"|(?P<name>[A-Za-z_][A-Za-z_0-9]*)"
    r"|(?P<op>[-+*/^()]))"
)


class _Parser:
    """재귀 하강 파서 (EBNF: expr / term / factor / atom)"""

    def __init__(self, text: str, allowed: Optional[Iterable[str]] = None):
        self.text = text
        self.allowed = set(allowed) if allowed is not None else set(COORDINATES) | {PATH_PARAMETER}
        self.tokens = self._tokenize(text)
        self.pos = 0

    def _offset(self, index: int) -> int:
        return len(self.text[:index].encode("utf-8"))

    def _tokenize(self, text: str):
        tokens = []
        index = 0
        while index < len(text):
            if text[index].isspace():
                index += 1
                continue
            match = _TOKEN.match(text, index)
            if not match or match.end() == index:
                raise ExpressionSyntaxError(f"unexpected character {text[index]!r}", self._offset(index))
            kind = match.lastgroup
            start = match.start(kind)
            tokens.append((kind, match.group(kind), self._offset(start)))
            index = match.end()
        tokens.append(("end", "", self._offset(len(text))))
        return tokens

    def peek(self):
        return self.tokens[self.pos]

    def take(self):
        token = self.tokens[self.pos]
        self.pos += 1
        return token

    def expect(self, value: str):
        kind, text, offset = self.take()
        if text != value:
            found = text or "end of input"
            raise ExpressionSyntaxError(f"expected '{value}' but found '{found}'", offset)

    def parse(self) -> Expr:
        expr = self.expr()
        kind, text, offset = self.peek()
        if kind != "end":
            raise ExpressionSyntaxError(f"unexpected token '{text}'", offset)
        return expr

    def expr(self) -> Expr:
        node = self.term()
        while self.peek()[1] in ("+", "-") and self.peek()[0] == "op":
            op = self.take()[1]
            right = self.term()
            node = BinOp(op, node, right)
        return node

    def term(self) -> Expr:
        node = self.factor()
        while self.peek()[1] in ("*", "/") and self.peek()[0] == "op":
            op = self.take()[1]
            right = self.factor()
            node = BinOp(op, node, right)
        return node

    def factor(self) -> Expr:
        # 단항 부호는 문법의 확장 (출력기는 사용하지 않음)
        if self.peek()[1] in ("-", "+") and self.peek()[0] == "op":
            op = self.take()[1]
            operand = self.factor()
            return Neg(operand) if op == "-" else operand
        node = self.atom()
        if self.peek()[1] == "^":
            self.take()
            kind, text, offset = self.take()
            if kind != "number" or not text.isdigit():
                raise ExpressionSyntaxError("exponent must be a non-negative integer", offset)
            node = Pow(node, int(text))
        return node

    def atom(self) -> Expr:
        kind, text, offset = self.take()
        if kind == "number":
            return Const(float(text))
        if kind == "name":
            if text == "pi":
                return PI
            if text == "i":
                return I_UNIT
            if text in FUNCTIONS:
                self.expect("(")
                arg = self.expr()
                self.expect(")")
                return Call(text, arg)
            if text in self.allowed:
                return Var(text)
            raise UnknownIdentifierError(f"unknown identifier '{text}' at offset {offset}")
        if text == "(":
            node = self.expr()
            self.expect(")")
            return node
        found = text or "end of input"
        raise ExpressionSyntaxError(f"unexpected token '{found}'", offset)


def parse_expr(text: str, allowed: Optional[Iterable[str]] = None) -> Expr:
    """
    식 텍스트를 AST로 파싱

    Args:
        text: 문법을 따르는 식 (예: "sin(2*pi*x1)")
        allowed: 허용할 변수 이름 (기본: x1..x9, t)

    Returns:
        Expr AST
    """
    return _Parser(text, allowed).parse()


# ========== 출력기 ==========

def _format_number(value: float) -> str:
    text = repr(float(value))
    if text in ("inf", "-inf", "nan"):
        raise ValueError(f"cannot print non-finite constant {text}")
    return text


def _format_const(node: Const) -> str:
    if node.label is not None:
        return node.label
    value = complex(node.value)
    re_part, im_part = value.real, value.imag
    if im_part == 0:
        text = _format_number(abs(re_part))
        return f"(0-{text})" if math.copysign(1.0, re_part) < 0 and re_part != 0 else text
    im_text = _format_number(abs(im_part))
    im_sign = "-" if im_part < 0 else "+"
    re_text = _format_number(abs(re_part))
    re_sign = "0-" if re_part < 0 else ""
    return f"({re_sign}{re_text}{im_sign}{im_text}*i)"


def print_expr(node: Expr) -> str:
    """문법에 맞는 텍스트로 출력 (parse(print(e))는 e와 같은 값)"""
    if isinstance(node, Const):
        return _format_const(node)
    if isinstance(node, Var):
        return node.name
    if isinstance(node, Neg):
        return f"(0-{_wrap(node.operand)})"
    if isinstance(node, BinOp):
        return f"{_wrap(node.left)}{node.op}{_wrap(node.right)}"
    if isinstance(node, Pow):
        return f"{_wrap(node.base)}^{node.exponent}"
    if isinstance(node, Call):
        return f"{node.func}({print_expr(node.arg)})"
    raise TypeError(f"unknown node {type(node).__name__}")


def _wrap(node: Expr) -> str:
    text = print_expr(node)
    if isinstance(node, (Var, Call)) or (isinstance(node, Const) and not text.startswith("(")):
        return text
    if text.startswith("(") and _balanced_outer(text):
        return text
    return f"({text})"


def _balanced_outer(text: str) -> bool:
    depth = 0
    for index, char in enumerate(text):
        if char == "(":
            depth += 1
        elif char == ")":
            depth -= 1
            if depth == 0 and index != len(text) - 1:
                return False
    return depth == 0


# ========== 기호 미분 / 치환 ==========

def differentiate(node: Expr, name: str, _memo: Optional[dict] = None) -> Expr:
    """변수 name에 대한 기호 미분"""
    memo = {} if _memo is None else _memo
    key = id(node)
    if key in memo:
        return memo[key][1]
    result = _differentiate(node, name, memo)
    memo[key] = (node, result)
    return result


def _differentiate(node: Expr, name: str, memo: dict) -> Expr:
    d = lambda child: differentiate(child, name, memo)
    if isinstance(node, Const):
        return ZERO
    if isinstance(node, Var):
        return ONE if node.name == name else ZERO
    if isinstance(node, Neg):
        return neg(d(node.operand))
    if isinstance(node, BinOp):
        a, b = node.left, node.right
        if node.op == "+":
            return add(d(a), d(b))
        if node.op == "-":
            return sub(d(a), d(b))
        if node.op == "*":
            return add(mul(d(a), b), mul(a, d(b)))
        if node.op == "/":
            da, db = d(a), d(b)
            return sub(div(da, b), div(mul(a, db), power(b, 2)))
    if isinstance(node, Pow):
        return mul(mul(Const(float(node.exponent)), power(node.base, node.exponent - 1)), d(node.base))
    if isinstance(node, Call):
        inner = d(node.arg)
        if inner.is_zero():
            return ZERO
        if node.func == "sin":
            return mul(call("cos", node.arg), inner)
        if node.func == "cos":
            return neg(mul(call("sin", node.arg), inner))
        if node.func == "exp":
            return mul(node, inner)
        if node.func == "log":
            return div(inner, node.arg)
    raise TypeError(f"unknown node {type(node).__name__}")


def substitute(node: Expr, mapping: Dict[str, Expr], _memo: Optional[dict] = None) -> Expr:
    """변수를 식으로 치환"""
    memo = {} if _memo is None else _memo
    key = id(node)
    if key in memo:
        return memo[key][1]
    s = lambda child: substitute(child, mapping, memo)
    if isinstance(node, Var):
        result = mapping.get(node.name, node)
    elif isinstance(node, Const):
        result = node
    elif isinstance(node, Neg):
        result = neg(s(node.operand))
    elif isinstance(node, BinOp):
        left, right = s(node.left), s(node.right)
        result = {"+": add, "-": sub, "*": mul, "/": div}[node.op](left, right)
    elif isinstance(node, Pow):
        result = power(s(node.base), node.exponent)
    elif isinstance(node, Call):
        result = call(node.func, s(node.arg))
    else:
        raise TypeError(f"unknown node {type(node).__name__}")
    memo[key] = (node, result)
    return result


# ========== 제트 평가 ==========

def evaluate_jet(
    node: Expr,
    points: np.ndarray,
    variables: Sequence[str],
    order: int,
    _memo: Optional[dict] = None
) -> Jet:
    """
    점 배열에서 식의 제트 계산 (유한차분 없음)

    Args:
        node: 식
        points: (P, D) 좌표 배열
        variables: 각 열의 변수 이름
        order: 제트 차수
        _memo: 공유 부분 트리 캐시

    Returns:
        스칼라 Jet
    """
    memo = {} if _memo is None else _memo
    key = id(node)
    if key in memo:
        return memo[key][1]
    points = np.atleast_2d(points)
    npoints, dim = points.shape
    ev = lambda child: evaluate_jet(child, points, variables, order, memo)

    if isinstance(node, Const):
        result = Jet.constant(node.value, npoints, dim, order)
    elif isinstance(node, Var):
        if node.name not in variables:
            raise UnknownIdentifierError(f"variable '{node.name}' is not a coordinate of this ambient space")
        result = Jet.variable(points, list(variables).index(node.name), order)
    elif isinstance(node, Neg):
        result = -ev(node.operand)
    elif isinstance(node, BinOp):
        left, right = ev(node.left), ev(node.right)
        if node.op == "+":
            result = left + right
        elif node.op == "-":
            result = left - right
        elif node.op == "*":
            result = left * right
        else:
            result = left * right.reciprocal()
    elif isinstance(node, Pow):
        result = ev(node.base).power(node.exponent)
    elif isinstance(node, Call):
        result = getattr(ev(node.arg), node.func)()
    else:
        raise TypeError(f"unknown node {type(node).__name__}")
    memo[key] = (node, result)
    return result


def eval_jet(node: Expr, point, variables: Optional[Sequence[str]] = None, order: int = 2) -> Jet:
    """
    단일 점(또는 점 배열)에서의 제트

    Args:
        node: 식
        point: 길이 D 벡터 또는 (P, D) 배열
        variables: 좌표 이름 (기본: x1..xD, 식에 t가 있으면 마지막 좌표가 t)
        order: 제트 차수

    Returns:
        Jet (P=1 이면 value[0]이 값)
    """
    points = np.atleast_2d(np.asarray(point, dtype=float))
    if variables is None:
        dim = points.shape[1]
        if PATH_PARAMETER in node.variables():
            variables = coordinate_names(dim - 1, with_t=True)
        else:
            variables = coordinate_names(dim)
    if len(variables) != points.shape[1]:
        raise ValueError(f"point has {points.shape[1]} coordinates but {len(variables)} variables were given")
    return evaluate_jet(node, points, tuple(variables), order)
