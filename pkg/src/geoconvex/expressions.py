"""Recursive-descent parser and evaluator for constraint/objective formulas.

Grammar, loosest binding first: binary + and -, then * and /, then unary
minus, then ^ (right associative, constant exponent only), then atoms.
Atoms are decimal literals, variables x1..xN over ambient coordinates,
the one-argument functions sin cos tan sinh cosh tanh exp log sqrt abs,
the builtin gdist(a1, ..., aN) = geodesic distance to a literal point,
and parenthesized expressions.

Evaluation is plain real arithmetic; domain violations (log of a
nonpositive value, sqrt of a negative, |denominator| < 1e-300, bad
powers) raise EvalDomainError carrying the offending node's offset
instead of letting NaNs propagate.  Riemannian gradients come from
central differences along geodesics through an orthonormal tangent
basis, so gdist needs no special casing.
"""

from __future__ import annotations

import math
import re
from dataclasses import dataclass, field

import numpy as np

from .errors import EvalDomainError, ParseError
from .manifolds import (
    ManifoldSpec,
    Point,
    TangentVector,
    dist,
    exp_map,
    surface_point,
    tangent_basis,
)

FUNCTIONS = ("sin", "cos", "tan", "sinh", "cosh", "tanh", "exp", "log", "sqrt", "abs")

DIV_FLOOR = 1e-300
FD_SCALE = 1e-6


# ---------------------------------------------------------------------------
# AST
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class Num:
    value: float
    offset: int = field(compare=False, default=0)


@dataclass(frozen=True)
class Var:
    index: int  # 1-based, as written
    offset: int = field(compare=False, default=0)


@dataclass(frozen=True)
class Neg:
    operand: "Node"
    offset: int = field(compare=False, default=0)


@dataclass(frozen=True)
class BinOp:
    op: str  # one of + - * / ^
    left: "Node"
    right: "Node"
    offset: int = field(compare=False, default=0)


@dataclass(frozen=True)
class Call:
    name: str
    arg: "Node"
    offset: int = field(compare=False, default=0)


@dataclass(frozen=True)
class GeoDist:
    anchor: tuple[float, ...]
    offset: int = field(compare=False, default=0)


Node = Num | Var | Neg | BinOp | Call | GeoDist


def _contains_variables(node: Node) -> bool:
    if isinstance(node, (Var, GeoDist)):
        return True
    if isinstance(node, Neg):
        return _contains_variables(node.operand)
    if isinstance(node, BinOp):
        return _contains_variables(node.left) or _contains_variables(node.right)
    if isinstance(node, Call):
        return _contains_variables(node.arg)
    return False


# ---------------------------------------------------------------------------
# Tokenizer
# ---------------------------------------------------------------------------

_TOKEN_RE = re.compile(
    r"\s*(?:(?P<num>(?:\d+\.?\d*|\.\d+)(?:[eE][+-]?\d+)?)"
    r"|(?P<ident>[A-Za-z_][A-Za-z_0-9]*)"
    r"|(?P<op>[-+*/^(),]))"
)


@dataclass(frozen=True)
class _Token:
    kind: str  # num | ident | op | end
    text: str
    offset: int


def _tokenize(source: str) -> list[_Token]:
    tokens = []
    pos = 0
    while pos < len(source):
        m = _TOKEN_RE.match(source, pos)
        if m is None:
            stripped = source[pos:].lstrip()
            if not stripped:
                break
            bad = len(source) - len(stripped)
            raise ParseError(
                f"unexpected character {source[bad]!r} at offset {bad}",
                offset=bad,
                expected="a number, identifier, or operator",
                excerpt=_excerpt(source, bad),
            )
        pos = m.end()
        for kind in ("num", "ident", "op"):
            text = m.group(kind)
            if text is not None:
                tokens.append(_Token(kind, text, m.start(kind)))
                break
    tokens.append(_Token("end", "", len(source)))
    return tokens


def _excerpt(source: str, offset: int, width: int = 12) -> str:
    lo = max(0, offset - width)
    return source[lo : offset + width]


# ---------------------------------------------------------------------------
# Parser
# ---------------------------------------------------------------------------


class _Parser:
    def __init__(self, source: str, ambient_dim: int):
        self.source = source
        self.ambient_dim = ambient_dim
        self.tokens = _tokenize(source)
        self.pos = 0

    def peek(self) -> _Token:
        return self.tokens[self.pos]

    def advance(self) -> _Token:
        tok = self.tokens[self.pos]
        self.pos += 1
        return tok

    def fail(self, expected: str, tok: _Token | None = None):
        tok = tok or self.peek()
        shown = tok.text if tok.kind != "end" else "end of input"
        raise ParseError(
            f"expected {expected} at offset {tok.offset}, found {shown!r}",
            offset=tok.offset,
            expected=expected,
            excerpt=_excerpt(self.source, tok.offset),
        )

    def expect_op(self, ch: str):
        tok = self.peek()
        if tok.kind == "op" and tok.text == ch:
            return self.advance()
        self.fail(f"'{ch}'")

    def parse(self) -> Node:
        node = self.expr()
        tok = self.peek()
        if tok.kind != "end":
            self.fail("end of expression", tok)
        return node

    def expr(self) -> Node:
        node = self.term()
        while self.peek().kind == "op" and self.peek().text in "+-":
            tok = self.advance()
            node = BinOp(tok.text, node, self.term(), offset=tok.offset)
        return node

    def term(self) -> Node:
        node = self.unary()
        while self.peek().kind == "op" and self.peek().text in "*/":
            tok = self.advance()
            node = BinOp(tok.text, node, self.unary(), offset=tok.offset)
        return node

    def unary(self) -> Node:
        tok = self.peek()
        if tok.kind == "op" and tok.text == "-":
            self.advance()
            return Neg(self.unary(), offset=tok.offset)
        return self.power()

    def power(self) -> Node:
        base = self.atom()
        tok = self.peek()
        if tok.kind == "op" and tok.text == "^":
            self.advance()
            exponent = self.exponent()
            if _contains_variables(exponent):
                raise ParseError(
                    f"exponent must be constant at offset {tok.offset}",
                    offset=tok.offset,
                    expected="a constant exponent",
                    excerpt=_excerpt(self.source, tok.offset),
                )
            return BinOp("^", base, exponent, offset=tok.offset)
        return base

    def exponent(self) -> Node:
        # Right associative; allows a sign on the constant, e.g. x1^-2.
        tok = self.peek()
        if tok.kind == "op" and tok.text == "-":
            self.advance()
            return Neg(self.exponent(), offset=tok.offset)
        base = self.atom()
        nxt = self.peek()
        if nxt.kind == "op" and nxt.text == "^":
            self.advance()
            return BinOp("^", base, self.exponent(), offset=nxt.offset)
        return base

    def atom(self) -> Node:
        tok = self.peek()
        if tok.kind == "num":
            self.advance()
            return Num(float(tok.text), offset=tok.offset)
        if tok.kind == "ident":
            return self.ident()
        if tok.kind == "op" and tok.text == "(":
            self.advance()
            node = self.expr()
            self.expect_op(")")
            return node
        self.fail("a value")

    def ident(self) -> Node:
        tok = self.advance()
        name = tok.text
        if name in FUNCTIONS:
            self.expect_op("(")
            arg = self.expr()
            self.expect_op(")")
            return Call(name, arg, offset=tok.offset)
        if name == "gdist":
            return self.gdist(tok)
        m = re.fullmatch(r"x([0-9]+)", name)
        if m:
            index = int(m.group(1))
            if not 1 <= index <= self.ambient_dim:
                raise ParseError(
                    f"variable {name} out of range at offset {tok.offset} "
                    f"(ambient dimension is {self.ambient_dim})",
                    offset=tok.offset,
                    expected=f"x1..x{self.ambient_dim}",
                    excerpt=_excerpt(self.source, tok.offset),
                )
            return Var(index, offset=tok.offset)
        raise ParseError(
            f"unknown identifier {name!r} at offset {tok.offset}",
            offset=tok.offset,
            expected="a function name or variable",
            excerpt=_excerpt(self.source, tok.offset),
        )

    def gdist(self, tok: _Token) -> Node:
        self.expect_op("(")
        coords = [self.literal()]
        while self.peek().kind == "op" and self.peek().text == ",":
            self.advance()
            coords.append(self.literal())
        self.expect_op(")")
        if len(coords) != self.ambient_dim:
            raise ParseError(
                f"gdist expects {self.ambient_dim} literal coordinates, got {len(coords)} "
                f"at offset {tok.offset}",
                offset=tok.offset,
                expected=f"{self.ambient_dim} coordinates",
                excerpt=_excerpt(self.source, tok.offset),
            )
        return GeoDist(tuple(coords), offset=tok.offset)

    def literal(self) -> float:
        sign = 1.0
        tok = self.peek()
        while tok.kind == "op" and tok.text == "-":
            self.advance()
            sign = -sign
            tok = self.peek()
        if tok.kind != "num":
            self.fail("a numeric literal")
        self.advance()
        return sign * float(tok.text)


# ---------------------------------------------------------------------------
# Guarded evaluation helpers (compiled code calls these)
# ---------------------------------------------------------------------------


def _div(a: float, b: float, off: int) -> float:
    if abs(b) < DIV_FLOOR:
        raise EvalDomainError(f"division by near-zero value at offset {off}", offset=off)
    return a / b


def _pow(a: float, b: float, off: int) -> float:
    try:
        return math.pow(a, b)
    except (ValueError, OverflowError) as exc:
        raise EvalDomainError(f"invalid power at offset {off}: {exc}", offset=off) from None


def _log(a: float, off: int) -> float:
    if a <= 0.0:
        raise EvalDomainError(f"log of nonpositive value at offset {off}", offset=off)
    return math.log(a)


def _sqrt(a: float, off: int) -> float:
    if a < 0.0:
        raise EvalDomainError(f"sqrt of negative value at offset {off}", offset=off)
    return math.sqrt(a)


def _exp(a: float, off: int) -> float:
    try:
        return math.exp(a)
    except OverflowError:
        raise EvalDomainError(f"exp overflow at offset {off}", offset=off) from None


_PLAIN_FUNCS = {
    "sin": math.sin,
    "cos": math.cos,
    "tan": math.tan,
    "sinh": math.sinh,
    "cosh": math.cosh,
    "tanh": math.tanh,
    "abs": abs,
}


# ---------------------------------------------------------------------------
# Expression handle
# ---------------------------------------------------------------------------


class Expression:
    """A parsed formula bound to an ambient dimension.

    Compiles the AST once to a Python code object; evaluation then costs a
    single function call, which keeps penalty descents and probe loops cheap.
    """

    def __init__(self, source: str, ast: Node, ambient_dim: int):
        self.source = source
        self.ast = ast
        self.ambient_dim = ambient_dim
        self._gdist_nodes: list[GeoDist] = []
        self._anchor_points: dict[tuple, Point] = {}
        self._fn = self._compile()
        self._grad_cache: dict[tuple, TangentVector] = {}

    def __repr__(self):
        return f"Expression({self.source!r})"

    # -- compilation --------------------------------------------------------

    def _compile(self):
        body = self._emit(self.ast)
        namespace = {
            "_div": _div,
            "_pow": _pow,
            "_log": _log,
            "_sqrt": _sqrt,
            "_exp": _exp,
            "_gd": self._gdist_value,
            **_PLAIN_FUNCS,
        }
        code = f"def _f(x, p):\n    return {body}\n"
        exec(compile(code, f"<expression: {self.source!r}>", "exec"), namespace)
        return namespace["_f"]

    def _emit(self, node: Node) -> str:
        if isinstance(node, Num):
            return repr(node.value)
        if isinstance(node, Var):
            return f"x[{node.index - 1}]"
        if isinstance(node, Neg):
            return f"(-{self._emit(node.operand)})"
        if isinstance(node, BinOp):
            left, right = self._emit(node.left), self._emit(node.right)
            if node.op == "/":
                return f"_div({left}, {right}, {node.offset})"
            if node.op == "^":
                return f"_pow({left}, {right}, {node.offset})"
            return f"({left} {node.op} {right})"
        if isinstance(node, Call):
            arg = self._emit(node.arg)
            if node.name in ("log", "sqrt", "exp"):
                return f"_{node.name}({arg}, {node.offset})"
            return f"{node.name}({arg})"
        if isinstance(node, GeoDist):
            self._gdist_nodes.append(node)
            return f"_gd(p, {len(self._gdist_nodes) - 1})"
        raise TypeError(f"unknown node {node!r}")  # pragma: no cover

    def _gdist_value(self, point: Point, idx: int) -> float:
        node = self._gdist_nodes[idx]
        key = (point.manifold.kind, point.manifold.dim)
        anchor = self._anchor_points.get(key)
        if anchor is None:
            try:
                anchor = surface_point(point.manifold, np.array(node.anchor), tol=1e-9)
            except Exception:
                raise EvalDomainError(
                    f"gdist anchor at offset {node.offset} does not lie on the "
                    f"{point.manifold.kind.value} surface",
                    offset=node.offset,
                ) from None
            self._anchor_points[key] = anchor
        return dist(point, anchor)

    # -- evaluation ---------------------------------------------------------

    def evaluate(self, point: Point) -> float:
        if point.manifold.ambient_dim != self.ambient_dim:
            raise EvalDomainError(
                f"expression expects {self.ambient_dim} ambient coordinates, "
                f"point has {point.manifold.ambient_dim}"
            )
        try:
            value = self._fn(point.coords, point)
        except EvalDomainError:
            raise
        except (OverflowError, ValueError, ZeroDivisionError) as exc:
            raise EvalDomainError(f"evaluation failed: {exc}") from None
        if not math.isfinite(value):
            raise EvalDomainError("evaluation produced a non-finite value")
        return float(value)

    def gradient(self, point: Point) -> TangentVector:
        """Riemannian gradient by central differences along geodesics.

        Step size h = 1e-6 * max(1, sqrt(|f(p)|)); components are taken in an
        orthonormal tangent basis, so the result is a genuine tangent vector.
        """
        key = (point.manifold.kind, point.coords.tobytes())
        cached = self._grad_cache.get(key)
        if cached is not None:
            return cached
        f0 = self.evaluate(point)
        h = FD_SCALE * max(1.0, math.sqrt(abs(f0)))
        basis = tangent_basis(point)
        out = np.zeros(point.manifold.ambient_dim)
        for e in basis:
            fp = self.evaluate(exp_map(e.scaled(h)))
            fm = self.evaluate(exp_map(e.scaled(-h)))
            out += ((fp - fm) / (2.0 * h)) * e.coords
        grad = TangentVector(point, out)
        if len(self._grad_cache) > 512:
            self._grad_cache.clear()
        self._grad_cache[key] = grad
        return grad

    # -- canonical text -----------------------------------------------------

    def canonical(self) -> str:
        return _unparse(self.ast)


def _unparse(node: Node) -> str:
    if isinstance(node, Num):
        return repr(node.value)
    if isinstance(node, Var):
        return f"x{node.index}"
    if isinstance(node, Neg):
        return f"(-{_unparse(node.operand)})"
    if isinstance(node, BinOp):
        return f"({_unparse(node.left)} {node.op} {_unparse(node.right)})"
    if isinstance(node, Call):
        return f"{node.name}({_unparse(node.arg)})"
    if isinstance(node, GeoDist):
        return "gdist(" + ", ".join(repr(c) for c in node.anchor) + ")"
    raise TypeError(f"unknown node {node!r}")  # pragma: no cover


def parse(source: str, ambient_dim: int) -> Expression:
    """Parse a formula over x1..x<ambient_dim>. Raises ParseError with offset."""
    if ambient_dim < 1:
        raise ValueError("ambient_dim must be >= 1")
    ast = _Parser(source, ambient_dim).parse()
    return Expression(source, ast, ambient_dim)
