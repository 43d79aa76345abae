"""Expression language for holomorphic functions of ``z``.

Grammar (whitespace-insensitive, no implicit multiplication)::

    expr  := term (("+" | "-") term)*
    term  := unary (("*" | "/") unary)*
    unary := ("-" | "+") unary | power
    power := atom ("^" unary)?          # right-associative
    atom  := number | name | name "(" expr ")" | "(" expr ")"

Evaluation works on Python complex scalars (strict: raises on division by
zero and log of zero) and on numpy arrays (IEEE semantics, inf/nan
propagate).  First derivatives are carried by :class:`Jet` dual numbers.
"""

from __future__ import annotations

import re
from dataclasses import dataclass
from typing import Callable, Iterable, Mapping, Union

import numpy as np

CONSTANTS = {"pi": np.pi, "e": np.e, "i": 1j}


class ExprError(Exception):
    """Base class for expression errors."""


class ParseError(ExprError):
    def __init__(self, message: str, offset: int):
        super().__init__(f"{message} at offset {offset}")
        self.offset = offset


class EvalError(ExprError):
    pass


# ---------------------------------------------------------------------------
# AST


@dataclass(frozen=True)
class Num:
    value: Union[int, float]


@dataclass(frozen=True)
class Const:
    name: str


@dataclass(frozen=True)
class Var:
    name: str


@dataclass(frozen=True)
class Neg:
    operand: "Node"


@dataclass(frozen=True)
class BinOp:
    left: "Node"
    right: "Node"
    op = "?"


@dataclass(frozen=True)
class Add(BinOp):
    op = "+"


@dataclass(frozen=True)
class Sub(BinOp):
    op = "-"


@dataclass(frozen=True)
class Mul(BinOp):
    op = "*"


@dataclass(frozen=True)
class Div(BinOp):
    op = "/"


@dataclass(frozen=True)
class Pow:
    base: "Node"
    exponent: "Node"
    # True when the exponent is an integer literal or index variable
    # (optionally negated); such powers use repeated squaring.
    integer_exponent: bool


@dataclass(frozen=True)
class Call:
    func: str
    arg: "Node"


Node = Union[Num, Const, Var, Neg, BinOp, Pow, Call]

_BINOPS = {"+": Add, "-": Sub, "*": Mul, "/": Div}


def free_vars(node: Node) -> set[str]:
    if isinstance(node, Var):
        return {node.name}
    if isinstance(node, (Num, Const)):
        return set()
    if isinstance(node, Neg):
        return free_vars(node.operand)
    if isinstance(node, BinOp):
        return free_vars(node.left) | free_vars(node.right)
    if isinstance(node, Pow):
        return free_vars(node.base) | free_vars(node.exponent)
    if isinstance(node, Call):
        return free_vars(node.arg)
    raise TypeError(f"not an expression node: {node!r}")


def depends_on(node: Node, name: str = "z") -> bool:
    return name in free_vars(node)


def walk(node: Node) -> Iterable[Node]:
    yield node
    if isinstance(node, Neg):
        yield from walk(node.operand)
    elif isinstance(node, BinOp):
        yield from walk(node.left)
        yield from walk(node.right)
    elif isinstance(node, Pow):
        yield from walk(node.base)
        yield from walk(node.exponent)
    elif isinstance(node, Call):
        yield from walk(node.arg)


# ---------------------------------------------------------------------------
# Dual numbers


def _is_scalar(x) -> bool:
    return not isinstance(x, np.ndarray)


@dataclass
class Jet:
    """Value of f together with df/dz at the same point(s)."""

    value: complex
    dz: complex

    @classmethod
    def constant(cls, c) -> "Jet":
        return cls(c, 0j)

    def __add__(self, other: "Jet") -> "Jet":
        return Jet(self.value + other.value, self.dz + other.dz)

    def __sub__(self, other: "Jet") -> "Jet":
        return Jet(self.value - other.value, self.dz - other.dz)

    def __neg__(self) -> "Jet":
        return Jet(-self.value, -self.dz)

    def __mul__(self, other: "Jet") -> "Jet":
        return Jet(self.value * other.value, self.value * other.dz + self.dz * other.value)

    def __truediv__(self, other: "Jet") -> "Jet":
        if _is_scalar(other.value) and other.value == 0:
            raise EvalError("division by zero")
        q = self.value / other.value
        return Jet(q, (self.dz - q * other.dz) / other.value)

    def reciprocal(self) -> "Jet":
        return Jet.constant(1.0 + 0j) / self

    def ipow(self, k: int) -> "Jet":
        if k < 0:
            return self.ipow(-k).reciprocal()
        result = None
        base = self
        while k:
            if k & 1:
                result = base if result is None else result * base
            k >>= 1
            if k:
                base = base * base
        if result is None:
            one = np.ones_like(self.value) if not _is_scalar(self.value) else 1 + 0j
            return Jet(one, 0 * self.dz)
        return result


def _d_tan(u):
    c = np.cos(u)
    return 1 / (c * c)


def _log(u):
    if _is_scalar(u) and u == 0:
        raise EvalError("log of zero")
    return np.log(u)


def _d_log(u):
    return 1 / u


# name -> (f, f').  Extend to add functions to the language.
FUNCTIONS: dict[str, tuple[Callable, Callable]] = {
    "sin": (np.sin, np.cos),
    "cos": (np.cos, lambda u: -np.sin(u)),
    "tan": (np.tan, _d_tan),
    "exp": (np.exp, np.exp),
    "log": (_log, _d_log),
    "sinh": (np.sinh, np.cosh),
    "cosh": (np.cosh, np.sinh),
}

TRANSCENDENTAL = frozenset(FUNCTIONS)


# ---------------------------------------------------------------------------
# Parsing

_TOKEN = re.compile(
    r"\s*(?:"
    r"(?P<num>(?:\d+\.\d*|\.\d+|\d+)(?:[eE][+-]?\d+)?)"
    r"|(?P<name>[A-Za-z_][A-Za-z_0-9]*)"
    r"|(?P<op>[-+*/^(),])"
    r")"
)


def _tokenize(text: str) -> list[tuple[str, str, int]]:
    tokens = []
    pos = 0
    n = len(text)
    while pos < n:
        m = _TOKEN.match(text, pos)
        if m is None or m.end() == pos:
            if text[pos:].strip() == "":
                break
            stripped = len(text[pos:]) - len(text[pos:].lstrip())
            raise ParseError(f"unexpected character {text[pos + stripped]!r}", _byte_offset(text, pos + stripped))
        kind = m.lastgroup
        if kind is None:
            break
        tokens.append((kind, m.group(kind), m.start(kind)))
        pos = m.end()
    tokens.append(("end", "", len(text)))
    return tokens


def _byte_offset(text: str, index: int) -> int:
    return len(text[:index].encode("utf-8"))


class _Parser:
    def __init__(self, text: str, declared: frozenset[str], index_vars: frozenset[str]):
        self.text = text
        self.tokens = _tokenize(text)
        self.pos = 0
        self.declared = declared
        self.index_vars = index_vars

    def peek(self):
        return self.tokens[self.pos]

    def advance(self):
        tok = self.tokens[self.pos]
        self.pos += 1
        return tok

    def error(self, message: str, tok=None) -> ParseError:
        tok = tok or self.peek()
        return ParseError(message, _byte_offset(self.text, tok[2]))

    def expect(self, value: str):
        tok = self.peek()
        if tok[0] != "op" or tok[1] != value:
            what = "end of input" if tok[0] == "end" else repr(tok[1])
            raise self.error(f"expected {value!r}, found {what}")
        self.advance()

    def parse(self) -> Node:
        if self.peek()[0] == "end":
            raise self.error("empty input")
        node = self.expr()
        tok = self.peek()
        if tok[0] != "end":
            raise self.error(f"unexpected token {tok[1]!r}")
        return node

    def expr(self) -> Node:
        node = self.term()
        while self.peek()[0] == "op" and self.peek()[1] in "+-":
            op = self.advance()[1]
            node = _BINOPS[op](node, self.term())
        return node

    def term(self) -> Node:
        node = self.unary()
        while self.peek()[0] == "op" and self.peek()[1] in "*/":
            op = self.advance()[1]
            node = _BINOPS[op](node, self.unary())
        return node

    def unary(self) -> Node:
        tok = self.peek()
        if tok[0] == "op" and tok[1] == "-":
            self.advance()
            return Neg(self.unary())
        if tok[0] == "op" and tok[1] == "+":
            self.advance()
            return self.unary()
        return self.power()

    def power(self) -> Node:
        base = self.atom()
        if self.peek()[0] == "op" and self.peek()[1] == "^":
            self.advance()
            exponent = self.unary()
            return Pow(base, exponent, _integer_exponent(exponent, self.index_vars))
        return base

    def atom(self) -> Node:
        tok = self.advance()
        kind, text, _ = tok
        if kind == "num":
            if re.fullmatch(r"\d+", text):
                return Num(int(text))
            return Num(float(text))
        if kind == "name":
            if self.peek()[0] == "op" and self.peek()[1] == "(":
                if text not in FUNCTIONS:
                    raise self.error(f"unknown function {text!r}", tok)
                self.advance()
                arg = self.expr()
                self.expect(")")
                return Call(text, arg)
            if text in FUNCTIONS:
                raise self.error(f"function {text!r} requires an argument", tok)
            if text in self.declared:
                return Var(text)
            if text in CONSTANTS:
                return Const(text)
            raise self.error(f"unknown identifier {text!r}", tok)
        if kind == "op" and text == "(":
            node = self.expr()
            self.expect(")")
            return node
        if kind == "end":
            self.pos -= 1
            raise self.error("unexpected end of input", tok)
        raise self.error(f"unexpected token {text!r}", tok)


def _integer_exponent(node: Node, index_vars: Iterable[str]) -> bool:
    while isinstance(node, Neg):
        node = node.operand
    if isinstance(node, Num):
        return isinstance(node.value, int)
    if isinstance(node, Var):
        return node.name in index_vars
    return False


def parse_expression(
    text: str,
    declared_vars: Iterable[str] = ("z",),
    index_vars: Iterable[str] = (),
) -> Node:
    """Parse ``text`` into an AST.

    ``index_vars`` names the integer-valued variables; powers whose exponent
    is one of them are evaluated by repeated squaring.
    """
    declared = frozenset(declared_vars)
    index = frozenset(index_vars)
    if "z" not in declared:
        raise ValueError("declared variables must include 'z'")
    reserved = declared & (set(CONSTANTS) | set(FUNCTIONS))
    if reserved:
        raise ValueError(f"reserved names cannot be variables: {sorted(reserved)}")
    if not index <= declared:
        raise ValueError("index variables must be declared")
    return _Parser(text, declared, index).parse()


def format(node: Node) -> str:  # noqa: A001 - canonical name of the operation
    """Canonical fully-parenthesized text of ``node``."""
    if isinstance(node, Num):
        return str(node.value) if isinstance(node.value, int) else repr(float(node.value))
    if isinstance(node, (Const, Var)):
        return node.name
    if isinstance(node, Neg):
        return f"(-{format(node.operand)})"
    if isinstance(node, BinOp):
        return f"({format(node.left)}{node.op}{format(node.right)})"
    if isinstance(node, Pow):
        return f"({format(node.base)}^{format(node.exponent)})"
    if isinstance(node, Call):
        return f"{node.func}({format(node.arg)})"
    raise TypeError(f"not an expression node: {node!r}")


# ---------------------------------------------------------------------------
# Evaluation


@dataclass(frozen=True)
class Bindings:
    z: complex
    indices: Mapping[str, int]
    params: Mapping[str, complex]

    def lookup(self, name: str):
        if name in self.indices:
            return self.indices[name]
        if name in self.params:
            return self.params[name]
        raise EvalError(f"unbound variable {name!r}")


def bindings(z, **values) -> Bindings:
    """Convenience constructor: integer values become indices, others params."""
    indices = {k: v for k, v in values.items() if isinstance(v, (int, np.integer))}
    params = {k: complex(v) for k, v in values.items() if k not in indices}
    return Bindings(z, indices, params)


JetFn = Callable[[Jet], Jet]


def compile_jet(node: Node, env: Bindings) -> JetFn:
    """Close ``node`` over the non-z bindings of ``env``.

    z-free subtrees are folded to constants once; the returned function maps
    a seeded Jet for z to the Jet of the expression.
    """
    if not depends_on(node):
        try:
            value = _fold(node, env)
        except EvalError:
            pass
        else:
            const = Jet.constant(value)
            return lambda z: const
    if isinstance(node, Var):
        if node.name == "z":
            return lambda z: z
        value = env.lookup(node.name)
        const = Jet.constant(value)
        return lambda z: const
    if isinstance(node, Num):
        const = Jet.constant(node.value)
        return lambda z: const
    if isinstance(node, Const):
        const = Jet.constant(CONSTANTS[node.name])
        return lambda z: const
    if isinstance(node, Neg):
        inner = compile_jet(node.operand, env)
        return lambda z: -inner(z)
    if isinstance(node, BinOp):
        return _compile_binop(node, env)
    if isinstance(node, Pow):
        base = compile_jet(node.base, env)
        if node.integer_exponent:
            k = _integer_value(node.exponent, env)

            def power(z):
                b = base(z)
                if k < 0 and _is_scalar(b.value) and b.value == 0:
                    raise EvalError("division by zero")
                return b.ipow(k)

            return power
        exponent = compile_jet(node.exponent, env)
        return lambda z: _apply("exp", exponent(z) * _apply("log", base(z)))
    if isinstance(node, Call):
        arg = compile_jet(node.arg, env)
        name = node.func
        return lambda z: _apply(name, arg(z))
    raise TypeError(f"not an expression node: {node!r}")


def _fold(node: Node, env: Bindings) -> complex:
    with np.errstate(all="raise"):
        try:
            value = _eval_const(node, env)
        except (FloatingPointError, ZeroDivisionError, OverflowError) as exc:
            raise EvalError(str(exc)) from exc
    return value


def _eval_const(node: Node, env: Bindings):
    if isinstance(node, Num):
        return node.value
    if isinstance(node, Const):
        return CONSTANTS[node.name]
    if isinstance(node, Var):
        return env.lookup(node.name)
    if isinstance(node, Neg):
        return -_eval_const(node.operand, env)
    if isinstance(node, BinOp):
        a = _eval_const(node.left, env)
        b = _eval_const(node.right, env)
        if isinstance(node, Add):
            return a + b
        if isinstance(node, Sub):
            return a - b
        if isinstance(node, Mul):
            return a * b
        if b == 0:
            raise EvalError("division by zero")
        return a / b
    if isinstance(node, Pow):
        a = _eval_const(node.base, env)
        if node.integer_exponent:
            return Jet.constant(complex(a)).ipow(_integer_value(node.exponent, env)).value
        b = _eval_const(node.exponent, env)
        return np.exp(b * _log(complex(a)))
    if isinstance(node, Call):
        return FUNCTIONS[node.func][0](complex(_eval_const(node.arg, env)))
    raise TypeError(f"not an expression node: {node!r}")


def _compile_binop(node: BinOp, env: Bindings) -> JetFn:
    left = compile_jet(node.left, env)
    right = compile_jet(node.right, env)
    lconst = not depends_on(node.left)
    rconst = not depends_on(node.right)
    if isinstance(node, Add):
        if lconst:
            return lambda z: _shift(right(z), left(z).value)
        if rconst:
            return lambda z: _shift(left(z), right(z).value)
        return lambda z: left(z) + right(z)
    if isinstance(node, Sub):
        if rconst:
            return lambda z: _shift(left(z), -right(z).value)
        return lambda z: left(z) - right(z)
    if isinstance(node, Mul):
        if lconst:
            return lambda z: _scale(right(z), left(z).value)
        if rconst:
            return lambda z: _scale(left(z), right(z).value)
        return lambda z: left(z) * right(z)
    return lambda z: left(z) / right(z)


def _shift(j: Jet, c) -> Jet:
    return Jet(j.value + c, j.dz)


def _scale(j: Jet, c) -> Jet:
    return Jet(j.value * c, j.dz * c)


def _apply(name: str, u: Jet) -> Jet:
    f, df = FUNCTIONS[name]
    return Jet(f(u.value), df(u.value) * u.dz)


def _integer_value(node: Node, env: Bindings) -> int:
    sign = 1
    while isinstance(node, Neg):
        sign = -sign
        node = node.operand
    if isinstance(node, Num):
        return sign * int(node.value)
    value = env.lookup(node.name)
    if isinstance(value, complex) or int(value) != value:
        raise EvalError(f"exponent {node.name!r} must be an integer")
    return sign * int(value)


def run_jet(fn: JetFn, z):
    """Apply a compiled expression at scalar or array ``z``."""
    if _is_scalar(z):
        with np.errstate(all="raise", under="ignore"):
            try:
                out = fn(Jet(complex(z), 1 + 0j))
            except (FloatingPointError, ZeroDivisionError, OverflowError) as exc:
                raise EvalError(str(exc)) from exc
        return Jet(complex(out.value), complex(out.dz))
    z = np.asarray(z, dtype=complex)
    with np.errstate(all="ignore"):
        out = fn(Jet(z, np.ones_like(z)))
    return Jet(np.broadcast_to(out.value, z.shape), np.broadcast_to(out.dz, z.shape))


def eval_with_derivative(node: Node, env: Bindings) -> Jet:
    """Value and exact dz at ``env.z`` (scalar or numpy array)."""
    return run_jet(compile_jet(node, env), env.z)


def eval(node: Node, env: Bindings):  # noqa: A001
    return eval_with_derivative(node, env).value


# ---------------------------------------------------------------------------
# Polynomial expansion


def to_polynomial(node: Node, env: Bindings) -> np.ndarray | None:
    """Coefficients (constant term first) of ``node`` as a polynomial in z.

    Returns None when the expression is not syntactically a polynomial:
    transcendental calls or divisions involving z, non-integer or negative
    powers of z-dependent bases.
    """
    if not depends_on(node):
        try:
            value = eval(node, Bindings(0j, env.indices, env.params))
        except EvalError:
            return None
        return np.array([complex(value)])
    if isinstance(node, Var):
        return np.array([0j, 1 + 0j])
    if isinstance(node, Neg):
        inner = to_polynomial(node.operand, env)
        return None if inner is None else -inner
    if isinstance(node, (Add, Sub)):
        a = to_polynomial(node.left, env)
        b = to_polynomial(node.right, env)
        if a is None or b is None:
            return None
        size = max(len(a), len(b))
        a = np.pad(a, (0, size - len(a)))
        b = np.pad(b, (0, size - len(b)))
        return _trim(a + b if isinstance(node, Add) else a - b)
    if isinstance(node, Mul):
        a = to_polynomial(node.left, env)
        b = to_polynomial(node.right, env)
        if a is None or b is None:
            return None
        return _trim(np.convolve(a, b))
    if isinstance(node, Div):
        if depends_on(node.right):
            return None
        a = to_polynomial(node.left, env)
        d = to_polynomial(node.right, env)
        if a is None or d is None or d[0] == 0:
            return None
        return a / d[0]
    if isinstance(node, Pow):
        if not node.integer_exponent or depends_on(node.exponent):
            return None
        k = _integer_value(node.exponent, env)
        if k < 0:
            return None
        base = to_polynomial(node.base, env)
        if base is None:
            return None
        result = np.array([1 + 0j])
        while k:
            if k & 1:
                result = np.convolve(result, base)
            k >>= 1
            if k:
                base = np.convolve(base, base)
        return _trim(result)
    return None


def _trim(c: np.ndarray) -> np.ndarray:
    nz = np.flatnonzero(c)
    if len(nz) == 0:
        return c[:1] * 0
    return c[: nz[-1] + 1]
