"""Scalar time expressions, delay laws and matrix-valued coefficient functions.

Coefficient matrices, forcing terms and initial functions are given as text
expressions in the single variable ``t``.  The grammar is deliberately small:

    expr   := term (('+' | '-') term)*
    term   := unary (('*' | '/') unary)*
    unary  := '-' unary | atom
    atom   := NUMBER | 't' | NAME '(' expr (',' expr)* ')' | '(' expr ')'

with the functions ``exp``, ``ln``, ``sin``, ``cos``, ``abs`` (one argument)
and ``pow`` (two arguments).  Evaluation is plain IEEE double arithmetic;
``ln`` of a non-positive number and division by zero raise
:class:`EvalDomainError` instead of producing NaN/inf silently.
"""
from __future__ import annotations

import math
import re
from dataclasses import dataclass

__all__ = [
    "TimeExpr",
    "Num",
    "TimeVar",
    "Neg",
    "Bin",
    "Call",
    "ParseError",
    "EvalDomainError",
    "DelayViolation",
    "parse",
    "evaluate",
    "to_text",
    "is_constant",
    "DelayLaw",
    "ConstantLag",
    "Pantograph",
    "ExprDelay",
    "parse_delay",
    "validate_delay",
    "MatrixFunction",
]

FUNCTIONS = {"exp": 1, "ln": 1, "sin": 1, "cos": 1, "abs": 1, "pow": 2}


class ParseError(ValueError):
    """Malformed expression text; ``offset`` is the byte position of the fault."""

    def __init__(self, message: str, offset: int):
        super().__init__(f"{message} (offset {offset})")
        self.offset = offset


class EvalDomainError(ArithmeticError):
    """Evaluation left the expression's domain (ln <= 0, x/0, pow overflow)."""

    def __init__(self, message: str, subexpr: str):
        super().__init__(f"{message} in '{subexpr}'")
        self.subexpr = subexpr


@dataclass(frozen=True)
class Num:
    value: float


@dataclass(frozen=True)
class TimeVar:
    pass


@dataclass(frozen=True)
class Neg:
    arg: "TimeExpr"


@dataclass(frozen=True)
class Bin:
    op: str  # one of + - * /
    left: "TimeExpr"
    right: "TimeExpr"


@dataclass(frozen=True)
class Call:
    name: str
    args: tuple


TimeExpr = Num | TimeVar | Neg | Bin | Call

_TOKEN_RE = re.compile(
    r"\s*(?:(?P<num>(?:\d+\.?\d*|\.\d+)(?:[eE][+-]?\d+)?)"
    r"|(?P<name>[A-Za-z_][A-Za-z_0-9]*)"
    r"|(?P<op>[-+*/(),]))"
)


def _tokenize(text: str) -> list[tuple[str, str, int]]:
    tokens = []
    pos = 0
    while pos < len(text):
        m = _TOKEN_RE.match(text, pos)
        if m is None:
            stripped = text[pos:].lstrip()
            if not stripped:
                break
            raise ParseError(f"unexpected character {stripped[0]!r}", len(text) - len(stripped))
        if m.lastgroup == "num":
            tokens.append(("num", m.group("num"), m.start("num")))
        elif m.lastgroup == "name":
            tokens.append(("name", m.group("name"), m.start("name")))
        else:
            tokens.append(("op", m.group("op"), m.start("op")))
        pos = m.end()
    tokens.append(("end", "", len(text)))
    return tokens


class _Parser:
    def __init__(self, text: str):
        self.text = text
        self.tokens = _tokenize(text)
        self.i = 0

    def peek(self):
        return self.tokens[self.i]

    def advance(self):
        tok = self.tokens[self.i]
        self.i += 1
        return tok

    def expect_op(self, op: str):
        kind, val, pos = self.peek()
        if kind != "op" or val != op:
            raise ParseError(f"expected {op!r}", pos)
        return self.advance()

    def parse(self) -> TimeExpr:
        node = self.expr()
        kind, val, pos = self.peek()
        if kind != "end":
            raise ParseError(f"unexpected trailing input {val!r}", pos)
        return node

    def expr(self) -> TimeExpr:
        node = self.term()
        while True:
            kind, val, _ = self.peek()
            if kind == "op" and val in "+-":
                self.advance()
                node = Bin(val, node, self.term())
            else:
                return node

    def term(self) -> TimeExpr:
        node = self.unary()
        while True:
            kind, val, _ = self.peek()
            if kind == "op" and val in "*/":
                self.advance()
                node = Bin(val, node, self.unary())
            else:
                return node

    def unary(self) -> TimeExpr:
        kind, val, _ = self.peek()
        if kind == "op" and val == "-":
            self.advance()
            return Neg(self.unary())
        return self.atom()

    def atom(self) -> TimeExpr:
        kind, val, pos = self.advance()
        if kind == "num":
            return Num(float(val))
        if kind == "name":
            if val == "t":
                return TimeVar()
            if val not in FUNCTIONS:
                raise ParseError(f"unknown identifier {val!r}", pos)
            self.expect_op("(")
            args = [self.expr()]
            while True:
                k2, v2, p2 = self.peek()
                if k2 == "op" and v2 == ",":
                    self.advance()
                    args.append(self.expr())
                else:
                    break
            self.expect_op(")")
            if len(args) != FUNCTIONS[val]:
                raise ParseError(
                    f"{val} takes {FUNCTIONS[val]} argument(s), got {len(args)}", pos
                )
            return Call(val, tuple(args))
        if kind == "op" and val == "(":
            node = self.expr()
            self.expect_op(")")
            return node
        if kind == "end":
            raise ParseError("unexpected end of input", pos)
        raise ParseError(f"unexpected token {val!r}", pos)


def parse(text: str) -> TimeExpr:
    """Parse expression text into a tree; whitespace-insensitive."""
    return _Parser(text).parse()


_PREC = {"+": 1, "-": 1, "*": 2, "/": 2}


def to_text(e: TimeExpr) -> str:
    """Canonical text form; ``parse(to_text(e))`` rebuilds the identical tree."""

    def prec(node) -> int:
        if isinstance(node, Bin):
            return _PREC[node.op]
        if isinstance(node, Neg):
            return 3
        return 4

    def render(node) -> str:
        if isinstance(node, Num):
            return repr(node.value)
        if isinstance(node, TimeVar):
            return "t"
        if isinstance(node, Neg):
            inner = render(node.arg)
            if prec(node.arg) < 3:
                inner = f"({inner})"
            return f"-{inner}"
        if isinstance(node, Call):
            return f"{node.name}({', '.join(render(a) for a in node.args)})"
        left = render(node.left)
        if prec(node.left) < _PREC[node.op]:
            left = f"({left})"
        right = render(node.right)
        # same-precedence right operands keep their parentheses so the tree
        # (and therefore floating-point evaluation order) survives a re-parse
        if prec(node.right) <= _PREC[node.op]:
            right = f"({right})"
        return f"{left} {node.op} {right}"

    return render(e)


def evaluate(e: TimeExpr, t: float) -> float:
    """Evaluate the tree at time ``t`` in IEEE double arithmetic."""
    if isinstance(e, Num):
        return e.value
    if isinstance(e, TimeVar):
        return t
    if isinstance(e, Neg):
        return -evaluate(e.arg, t)
    if isinstance(e, Bin):
        a = evaluate(e.left, t)
        b = evaluate(e.right, t)
        if e.op == "+":
            return a + b
        if e.op == "-":
            return a - b
        if e.op == "*":
            return a * b
        if b == 0.0:
            raise EvalDomainError("division by zero", to_text(e))
        return a / b
    # Call
    args = [evaluate(a, t) for a in e.args]
    try:
        if e.name == "exp":
            return math.exp(args[0])
        if e.name == "ln":
            if args[0] <= 0.0:
                raise EvalDomainError("ln of non-positive argument", to_text(e))
            return math.log(args[0])
        if e.name == "sin":
            return math.sin(args[0])
        if e.name == "cos":
            return math.cos(args[0])
        if e.name == "abs":
            return abs(args[0])
        return math.pow(args[0], args[1])
    except OverflowError:
        raise EvalDomainError("overflow", to_text(e)) from None
    except ValueError:
        raise EvalDomainError("argument outside function domain", to_text(e)) from None


def is_constant(e: TimeExpr) -> bool:
    if isinstance(e, TimeVar):
        return False
    if isinstance(e, Num):
        return True
    if isinstance(e, Neg):
        return is_constant(e.arg)
    if isinstance(e, Bin):
        return is_constant(e.left) and is_constant(e.right)
    return all(is_constant(a) for a in e.args)


# ---------------------------------------------------------------------------
# delay laws


class DelayViolation(ValueError):
    """A delayed argument exceeded the current time somewhere on the grid."""

    def __init__(self, t: float, h_of_t: float):
        super().__init__(f"delay law violates h(t) <= t at t={t!r} (h(t)={h_of_t!r})")
        self.t = t
        self.h_of_t = h_of_t


@dataclass(frozen=True)
class ConstantLag:
    """h(t) = t - tau with a fixed lag tau >= 0."""

    tau: float

    def __post_init__(self):
        if self.tau < 0:
            raise ValueError("constant lag must be non-negative")

    def delayed_time(self, t: float) -> float:
        return t - self.tau

    def describe(self) -> str:
        return f"constant {self.tau!r}"


@dataclass(frozen=True)
class Pantograph:
    """Proportional delay h(t) = ratio * t with ratio in (0, 1]."""

    ratio: float

    def __post_init__(self):
        if not 0.0 < self.ratio <= 1.0:
            raise ValueError("pantograph ratio must lie in (0, 1]")

    def delayed_time(self, t: float) -> float:
        return self.ratio * t

    def describe(self) -> str:
        return f"pantograph {self.ratio!r}"


@dataclass(frozen=True)
class ExprDelay:
    """Delayed time given by an arbitrary expression h(t)."""

    expr: TimeExpr

    def delayed_time(self, t: float) -> float:
        return evaluate(self.expr, t)

    def describe(self) -> str:
        return to_text(self.expr)


DelayLaw = ConstantLag | Pantograph | ExprDelay


def parse_delay(spec: str) -> DelayLaw:
    """Build a delay law from config text.

    Accepts ``"constant <tau>"``, ``"pantograph <ratio>"`` or any expression
    in ``t`` giving the delayed time directly (e.g. ``"t - 0.1"``).
    """
    words = spec.strip().split()
    if len(words) == 2 and words[0] in ("constant", "constant_lag", "lag"):
        return ConstantLag(float(words[1]))
    if len(words) == 2 and words[0] == "pantograph":
        return Pantograph(float(words[1]))
    return ExprDelay(parse(spec))


def validate_delay(law: DelayLaw, grid) -> float:
    """Check h(t) <= t on every grid point; return sup of the lag t - h(t).

    Raises :class:`DelayViolation` at the first offending time.
    """
    grid = list(grid)
    if not grid:
        raise ValueError("validation grid must be non-empty")
    sup_lag = 0.0
    for t in grid:
        u = law.delayed_time(float(t))
        if u > t + 1e-12:
            raise DelayViolation(float(t), u)
        sup_lag = max(sup_lag, t - u)
    return sup_lag


# ---------------------------------------------------------------------------
# matrix-valued functions of time


class MatrixFunction:
    """A rectangular grid of :data:`TimeExpr` entries evaluated jointly."""

    def __init__(self, entries):
        rows = []
        for row in entries:
            parsed = []
            for cell in row:
                if isinstance(cell, (int, float)):
                    parsed.append(Num(float(cell)))
                elif isinstance(cell, str):
                    parsed.append(parse(cell))
                else:
                    parsed.append(cell)
            rows.append(tuple(parsed))
        if not rows or any(len(r) != len(rows[0]) for r in rows):
            raise ValueError("matrix entries must form a rectangular non-empty grid")
        self.entries = tuple(rows)
        self.shape = (len(rows), len(rows[0]))
        self._const = None
        if all(is_constant(c) for row in self.entries for c in row):
            self._const = self._eval_raw(0.0)

    @classmethod
    def zero(cls, n: int, m: int = 1) -> "MatrixFunction":
        return cls([[0.0] * m for _ in range(n)])

    def _eval_raw(self, t: float):
        import numpy as np

        out = np.empty(self.shape)
        for i, row in enumerate(self.entries):
            for j, cell in enumerate(row):
                out[i, j] = evaluate(cell, t)
        return out

    def __call__(self, t: float):
        if self._const is not None:
            return self._const
        return self._eval_raw(t)

    def texts(self):
        return [[to_text(c) for c in row] for row in self.entries]

    def __repr__(self):
        return f"MatrixFunction({self.texts()!r})"
