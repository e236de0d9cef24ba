"""A tiny expression language for boundary profiles rho(t).

One variable ``t``, the unary functions abs/log/exp/sqrt, arithmetic with the
usual precedence (pow binds tightest, then unary minus, then * and /, then
+ and -; pow is right-associative), and the builtin ``logk(k, e)`` for the
iterated logarithm: ``logk(1, e) = |log e|``, ``logk(j, e) = log(logk(j-1, e))``.

Grammar (EBNF):

    expr    = term { ("+" | "-") term } ;
    term    = unary { ("*" | "/") unary } ;
    unary   = "-" unary | power ;
    power   = atom [ "^" unary ] ;
    atom    = NUMBER | "t" | "(" expr ")"
            | ("abs"|"log"|"exp"|"sqrt") "(" expr ")"
            | "logk" "(" INTEGER "," expr ")" ;

Evaluation raises a typed DomainError naming the offending subexpression
instead of producing NaN.
"""
from __future__ import annotations

import math
import re
from dataclasses import dataclass

import numpy as np

from .errors import DomainError, ParseError
from .kernel import Side

_UNARY_FUNCS = ("neg", "abs", "log", "exp", "sqrt")


@dataclass(frozen=True)
class Const:
    value: float

    def __post_init__(self):
        # negative literals are represented as Unary("neg", ...), which keeps
        # print -> parse an exact structural round trip
        if not (self.value >= 0.0 and math.isfinite(self.value)):
            raise DomainError(f"constants must be finite and nonnegative, got {self.value}")


@dataclass(frozen=True)
class Var:
    pass


@dataclass(frozen=True)
class Unary:
    op: str
    arg: "ExprAst"

    def __post_init__(self):
        if self.op not in _UNARY_FUNCS:
            raise DomainError(f"unknown unary op {self.op!r}")


@dataclass(frozen=True)
class Binary:
    op: str
    left: "ExprAst"
    right: "ExprAst"

    def __post_init__(self):
        if self.op not in ("+", "-", "*", "/", "^"):
            raise DomainError(f"unknown binary op {self.op!r}")


@dataclass(frozen=True)
class LogK:
    k: int
    arg: "ExprAst"

    def __post_init__(self):
        if not isinstance(self.k, int) or self.k < 1:
            raise DomainError(f"logk level must be an integer >= 1, got {self.k}")


ExprAst = Const | Var | Unary | Binary | LogK

_TOKEN_RE = re.compile(r"""
    (?P<num>\d+\.\d*(?:[eE][+-]?\d+)?|\.\d+(?:[eE][+-]?\d+)?|\d+(?:[eE][+-]?\d+)?)
  | (?P<ident>[A-Za-z_][A-Za-z_0-9]*)
  | (?P<op>[-+*/^(),])
  | (?P<ws>\s+)
""", re.VERBOSE)


def _tokenize(text: str):
    tokens = []
    pos = 0
    while pos < len(text):
        m = _TOKEN_RE.match(text, pos)
        if m is None:
            raise ParseError(f"unexpected character {text[pos]!r}", pos)
        if m.lastgroup != "ws":
            tokens.append((m.lastgroup, m.group(), pos))
        pos = m.end()
    tokens.append(("eof", "", len(text)))
    return tokens


class _Parser:
    def __init__(self, text: str):
        self.tokens = _tokenize(text)
        self.i = 0

    def peek(self):
        return self.tokens[self.i]

    def advance(self):
        tok = self.tokens[self.i]
        self.i += 1
        return tok

    def expect(self, value: str):
        kind, val, off = self.peek()
        if val != value:
            raise ParseError(f"expected {value!r}, found {val or 'end of input'!r}", off)
        return self.advance()

    def parse_expr(self):
        node = self.parse_term()
        while self.peek()[1] in ("+", "-"):
            op = self.advance()[1]
            node = Binary(op, node, self.parse_term())
        return node

    def parse_term(self):
        node = self.parse_unary()
        while self.peek()[1] in ("*", "/"):
            op = self.advance()[1]
            node = Binary(op, node, self.parse_unary())
        return node

    def parse_unary(self):
        if self.peek()[1] == "-":
            self.advance()
            return Unary("neg", self.parse_unary())
        return self.parse_power()

    def parse_power(self):
        base = self.parse_atom()
        if self.peek()[1] == "^":
            self.advance()
            return Binary("^", base, self.parse_unary())
        return base

    def parse_atom(self):
        kind, val, off = self.peek()
        if kind == "num":
            self.advance()
            return Const(float(val))
        if kind == "ident":
            self.advance()
            if val == "t":
                return Var()
            if val in ("abs", "log", "exp", "sqrt"):
                self.expect("(")
                arg = self.parse_expr()
                self.expect(")")
                return Unary(val, arg)
            if val == "logk":
                self.expect("(")
                kkind, kval, koff = self.peek()
                if kkind != "num" or not kval.isdigit():
                    raise ParseError("logk needs an integer level literal", koff)
                self.advance()
                self.expect(",")
                arg = self.parse_expr()
                self.expect(")")
                return LogK(int(kval), arg)
            raise ParseError(f"unknown identifier {val!r}", off)
        if val == "(":
            self.advance()
            node = self.parse_expr()
            self.expect(")")
            return node
        raise ParseError(f"unexpected token {val or 'end of input'!r}", off)


def parse(text: str) -> ExprAst:
    """Parse an expression; raises ParseError with the byte offset on bad input."""
    p = _Parser(text)
    node = p.parse_expr()
    kind, val, off = p.peek()
    if kind != "eof":
        raise ParseError(f"trailing input {val!r}", off)
    return node


def print_ast(ast: ExprAst) -> str:
    """Canonical fully-parenthesized rendering; parse(print_ast(a)) == a."""
    if isinstance(ast, Const):
        return repr(ast.value)
    if isinstance(ast, Var):
        return "t"
    if isinstance(ast, Unary):
        if ast.op == "neg":
            return f"(-{print_ast(ast.arg)})"
        return f"{ast.op}({print_ast(ast.arg)})"
    if isinstance(ast, Binary):
        return f"({print_ast(ast.left)} {ast.op} {print_ast(ast.right)})"
    if isinstance(ast, LogK):
        return f"logk({ast.k}, {print_ast(ast.arg)})"
    raise TypeError(f"not an ExprAst node: {ast!r}")


def _bad(node, why):
    return DomainError(f"{why} in subexpression {print_ast(node)}")


def eval_ast(ast: ExprAst, t):
    """Evaluate at t (scalar or ndarray) in double precision.

    log/sqrt of a negative quantity, log of zero, division by zero and
    0^negative raise DomainError; they never return NaN.
    """
    val = _eval(ast, np.asarray(t, dtype=float))
    if np.any(np.isnan(val)):
        raise _bad(ast, "evaluation produced NaN")
    return val


def _eval(node, t):
    if isinstance(node, Const):
        return np.full_like(t, node.value) if t.shape else node.value
    if isinstance(node, Var):
        return t
    if isinstance(node, Unary):
        a = _eval(node.arg, t)
        if node.op == "neg":
            return -a
        if node.op == "abs":
            return np.abs(a)
        if node.op == "log":
            if np.any(a <= 0.0):
                raise _bad(node, "log of nonpositive argument")
            return np.log(a)
        if node.op == "exp":
            with np.errstate(over="ignore"):
                return np.exp(a)
        if node.op == "sqrt":
            if np.any(a < 0.0):
                raise _bad(node, "sqrt of negative argument")
            return np.sqrt(a)
    if isinstance(node, Binary):
        a = _eval(node.left, t)
        b = _eval(node.right, t)
        if node.op == "+":
            return a + b
        if node.op == "-":
            return a - b
        if node.op == "*":
            return a * b
        if node.op == "/":
            if np.any(b == 0.0):
                raise _bad(node, "division by zero")
            return a / b
        if node.op == "^":
            neg_base = np.any(a < 0.0)
            if neg_base and np.any(np.asarray(b) != np.floor(b)):
                raise _bad(node, "negative base with non-integer exponent")
            if np.any((np.asarray(a) == 0.0) & (np.asarray(b) < 0.0)):
                raise _bad(node, "zero base with negative exponent")
            with np.errstate(over="ignore"):
                return np.power(a, b)
    if isinstance(node, LogK):
        a = _eval(node.arg, t)
        if np.any(a <= 0.0):
            raise _bad(node, "logk of nonpositive argument")
        cur = np.abs(np.log(a))
        for _ in range(node.k - 1):
            if np.any(cur <= 0.0):
                raise _bad(node, "iterated log left its window")
            cur = np.log(cur)
        return cur
    raise TypeError(f"not an ExprAst node: {node!r}")


def expression_profile(text: str, side: Side = Side.PLUS):
    """Build a Profile whose rho(t) is the parsed expression.

    On the minus side the expression receives |t|, per the substitution
    convention.  The window start is located numerically; evaluation in the
    shell variable s keeps t = e^{-s} representable down to s ~ 700, beyond
    which shells are reported invalid.
    """
    from .profiles import Profile, _solve_s_min

    ast = parse(text)

    def g(s, ast=ast, side=side):
        s = np.asarray(s, dtype=float)
        tt = np.exp(-s) if side is Side.PLUS else np.exp(s)
        if np.any(tt == 0.0) or np.any(np.isinf(tt)):
            raise DomainError("time underflows/overflows at this shell depth; "
                              "expression profiles reach s up to ~700 only")
        rho = np.asarray(eval_ast(ast, tt), dtype=float)
        if np.any(rho <= 0.0):
            raise DomainError(f"rho(t) <= 0 for expression {text!r}")
        return np.log(rho)

    s_min = _solve_s_min(g, 1e-9)
    return Profile(side=side, label=f"expr:{text}", s_min=s_min, log_rho=g,
                   dlog_rho=None, symbolic_divergent=None,
                   meta={"expression": print_ast(ast)})
