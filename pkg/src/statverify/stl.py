"""A small signal temporal logic fragment with quantitative (robustness) semantics.

Concrete syntax::

    formula   := disj
    disj      := conj ('or' conj)*
    conj      := unary ('and' unary)*
    unary     := 'not' unary | ('G' | 'F') '[' num ',' num ']' '(' formula ')'
               | '(' formula ')' | predicate
    predicate := expr ('>=' | '<=') expr
    expr      := term (('+' | '-') term)*
    term      := factor ('*' factor)*
    factor    := '-' factor | number | channel | 'abs' '(' expr ')' | '(' expr ')'

For example ``G[0,40](1 - abs(e1) >= 0)``.  Temporal operators may not be
nested.  Evaluation uses the sampled time points only (no interpolation);
interval endpoints are taken relative to the first sample time and are
closed with a 1e-9 tolerance.
"""
from __future__ import annotations

import re
from dataclasses import dataclass
from typing import Mapping, Union

import numpy as np

TIME_TOL = 1e-9


class StlSyntaxError(ValueError):
    def __init__(self, message, position):
        super().__init__(f"{message} at position {position}")
        self.position = position


class StlEvaluationError(ValueError):
    pass


@dataclass(frozen=True)
class Trajectory:
    times: np.ndarray
    signals: Mapping[str, np.ndarray]

    def __post_init__(self):
        t = np.asarray(self.times, dtype=float).ravel()
        if t.size < 1:
            raise ValueError("trajectory needs at least one sample")
        if np.any(np.diff(t) <= 0):
            raise ValueError("times must be strictly increasing")
        sig = {}
        for name, values in self.signals.items():
            v = np.asarray(values, dtype=float).ravel()
            if v.size != t.size:
                raise ValueError(f"channel {name!r} has {v.size} samples, expected {t.size}")
            sig[name] = v
        object.__setattr__(self, "times", t)
        object.__setattr__(self, "signals", sig)


# -- expression AST ---------------------------------------------------------

@dataclass(frozen=True)
class Const:
    value: float


@dataclass(frozen=True)
class Channel:
    name: str


@dataclass(frozen=True)
class Neg:
    arg: "Expr"


@dataclass(frozen=True)
class Abs:
    arg: "Expr"


@dataclass(frozen=True)
class BinOp:
    op: str
    left: "Expr"
    right: "Expr"


Expr = Union[Const, Channel, Neg, Abs, BinOp]


# -- formula AST ------------------------------------------------------------

@dataclass(frozen=True)
class Predicate:
    """``expr >= 0``."""

    expr: Expr


@dataclass(frozen=True)
class Not:
    arg: "StlFormula"


@dataclass(frozen=True)
class And:
    args: tuple


@dataclass(frozen=True)
class Or:
    args: tuple


@dataclass(frozen=True)
class Globally:
    lo: float
    hi: float
    arg: "StlFormula"


@dataclass(frozen=True)
class Eventually:
    lo: float
    hi: float
    arg: "StlFormula"


StlFormula = Union[Predicate, Not, And, Or, Globally, Eventually]


# -- parser -----------------------------------------------------------------

_TOKEN = re.compile(r"\s*(?:(?P<num>\d+\.?\d*(?:[eE][-+]?\d+)?|\.\d+(?:[eE][-+]?\d+)?)"
                    r"|(?P<name>[A-Za-z_][A-Za-z_0-9]*)|(?P<op>>=|<=|[-+*()\[\],]))")
_KEYWORDS = {"G", "F", "and", "or", "not", "abs"}


def _tokenize(text):
    tokens = []
    pos = 0
    while pos < len(text):
        m = _TOKEN.match(text, pos)
        if not m or m.end() == pos:
            if text[pos:].strip() == "":
                break
            raise StlSyntaxError(f"unexpected character {text[pos]!r}", pos)
        kind = m.lastgroup
        tokens.append((kind, m.group(kind), m.start(kind)))
        pos = m.end()
    tokens.append(("end", "", len(text)))
    return tokens


class _Parser:
    def __init__(self, text):
        self.tokens = _tokenize(text)
        self.i = 0
        self.temporal_depth = 0

    def peek(self):
        return self.tokens[self.i]

    def take(self, value=None, kind=None):
        tok = self.tokens[self.i]
        if (value is not None and tok[1] != value) or (kind is not None and tok[0] != kind):
            want = value if value is not None else kind
            raise StlSyntaxError(f"expected {want!r}, found {tok[1] or 'end of input'!r}", tok[2])
        self.i += 1
        return tok

    def at(self, value):
        return self.tokens[self.i][1] == value and self.tokens[self.i][0] != "num"

    # formulas
    def formula(self):
        args = [self.conj()]
        while self.at("or"):
            self.take()
            args.append(self.conj())
        return args[0] if len(args) == 1 else Or(tuple(args))

    def conj(self):
        args = [self.unary()]
        while self.at("and"):
            self.take()
            args.append(self.unary())
        return args[0] if len(args) == 1 else And(tuple(args))

    def unary(self):
        if self.at("not"):
            self.take()
            return Not(self.unary())
        if self.at("G") or self.at("F"):
            _, op, pos = self.take()
            self.take("[")
            lo = self.number()
            self.take(",")
            hi = self.number()
            self.take("]")
            if lo < 0 or lo > hi:
                raise StlSyntaxError(f"invalid interval [{lo:g},{hi:g}]", pos)
            if self.temporal_depth:
                raise StlSyntaxError("nested temporal operators are not supported", pos)
            self.take("(")
            self.temporal_depth += 1
            arg = self.formula()
            self.temporal_depth -= 1
            self.take(")")
            return (Globally if op == "G" else Eventually)(lo, hi, arg)
        if self.at("("):
            # either a parenthesized formula or the start of an arithmetic predicate
            save = self.i
            self.take()
            try:
                inner = self.formula()
                self.take(")")
                if not self.peek()[1] in (">=", "<=", "+", "-", "*"):
                    return inner
            except StlSyntaxError:
                pass
            self.i = save
        return self.predicate()

    def predicate(self):
        left = self.expr()
        kind, op, pos = self.peek()
        if op not in (">=", "<="):
            raise StlSyntaxError(f"expected '>=' or '<=', found {op or 'end of input'!r}", pos)
        self.take()
        right = self.expr()
        diff = BinOp("-", left, right) if op == ">=" else BinOp("-", right, left)
        if isinstance(right, Const) and right.value == 0.0:
            diff = left if op == ">=" else Neg(left)
        return Predicate(diff)

    def number(self):
        sign = 1.0
        if self.at("-"):
            self.take()
            sign = -1.0
        return sign * float(self.take(kind="num")[1])

    # expressions
    def expr(self):
        node = self.term()
        while self.at("+") or self.at("-"):
            op = self.take()[1]
            node = BinOp(op, node, self.term())
        return node

    def term(self):
        node = self.factor()
        while self.at("*"):
            self.take()
            node = BinOp("*", node, self.factor())
        return node

    def factor(self):
        kind, value, pos = self.peek()
        if value == "-" and kind == "op":
            self.take()
            return Neg(self.factor())
        if kind == "num":
            self.take()
            return Const(float(value))
        if value == "abs":
            self.take()
            self.take("(")
            node = self.expr()
            self.take(")")
            return Abs(node)
        if value == "(":
            self.take()
            node = self.expr()
            self.take(")")
            return node
        if kind == "name" and value not in _KEYWORDS:
            self.take()
            return Channel(value)
        raise StlSyntaxError(f"unexpected token {value or 'end of input'!r}", pos)


def parse(spec_text: str) -> StlFormula:
    """Parse a formula string into an AST; raises StlSyntaxError."""
    p = _Parser(spec_text)
    node = p.formula()
    kind, value, pos = p.peek()
    if kind != "end":
        raise StlSyntaxError(f"trailing input {value!r}", pos)
    return node


def channels(node) -> set[str]:
    """Names of all channels referenced by a formula or expression."""
    if isinstance(node, Channel):
        return {node.name}
    if isinstance(node, Const):
        return set()
    if isinstance(node, Predicate):
        return channels(node.expr)
    if isinstance(node, BinOp):
        return channels(node.left) | channels(node.right)
    if isinstance(node, (And, Or)):
        return set().union(*(channels(a) for a in node.args))
    return channels(node.arg)


# -- evaluation -------------------------------------------------------------

def _eval_expr(e, sig):
    if isinstance(e, Const):
        return e.value
    if isinstance(e, Channel):
        try:
            return sig[e.name]
        except KeyError:
            raise StlEvaluationError(f"missing channel {e.name!r}") from None
    if isinstance(e, Neg):
        return -_eval_expr(e.arg, sig)
    if isinstance(e, Abs):
        return np.abs(_eval_expr(e.arg, sig))
    a, b = _eval_expr(e.left, sig), _eval_expr(e.right, sig)
    if e.op == "+":
        return a + b
    if e.op == "-":
        return a - b
    return a * b


def _signal(f, traj, n):
    """Robustness of ``f`` at every sample time, shape (n,)."""
    if isinstance(f, Predicate):
        return np.broadcast_to(np.asarray(_eval_expr(f.expr, traj.signals), dtype=float), (n,))
    if isinstance(f, Not):
        return -_signal(f.arg, traj, n)
    if isinstance(f, And):
        return np.min([_signal(a, traj, n) for a in f.args], axis=0)
    if isinstance(f, Or):
        return np.max([_signal(a, traj, n) for a in f.args], axis=0)
    raise StlEvaluationError("nested temporal operators are not supported")


def _window(traj, lo, hi):
    t0, tn = traj.times[0], traj.times[-1]
    if t0 + hi > tn + TIME_TOL:
        raise StlEvaluationError(f"interval [{lo:g},{hi:g}] exceeds trajectory span "
                                 f"[{t0:g},{tn:g}]")
    rel = traj.times - t0
    mask = (rel >= lo - TIME_TOL) & (rel <= hi + TIME_TOL)
    if not mask.any():
        raise StlEvaluationError(f"no samples inside interval [{lo:g},{hi:g}]")
    return mask


def robustness(formula: StlFormula, traj: Trajectory) -> float:
    """Robustness degree of ``formula`` at the first sample time of ``traj``."""
    n = traj.times.size
    if isinstance(formula, (Globally, Eventually)):
        mask = _window(traj, formula.lo, formula.hi)
        values = _signal(formula.arg, traj, n)[mask]
        return float(values.min() if isinstance(formula, Globally) else values.max())
    if isinstance(formula, Not):
        return -robustness(formula.arg, traj)
    if isinstance(formula, And):
        return min(robustness(a, traj) for a in formula.args)
    if isinstance(formula, Or):
        return max(robustness(a, traj) for a in formula.args)
    return float(_signal(formula, traj, n)[0])


def to_text(node) -> str:
    """Render a formula or expression back to concrete syntax."""
    if isinstance(node, Const):
        return repr(node.value)
    if isinstance(node, Channel):
        return node.name
    if isinstance(node, Neg):
        return f"-({to_text(node.arg)})"
    if isinstance(node, Abs):
        return f"abs({to_text(node.arg)})"
    if isinstance(node, BinOp):
        return f"({to_text(node.left)} {node.op} {to_text(node.right)})"
    if isinstance(node, Predicate):
        return f"{to_text(node.expr)} >= 0"
    if isinstance(node, Not):
        return f"not ({to_text(node.arg)})"
    if isinstance(node, And):
        return " and ".join(f"({to_text(a)})" for a in node.args)
    if isinstance(node, Or):
        return " or ".join(f"({to_text(a)})" for a in node.args)
    op = "G" if isinstance(node, Globally) else "F"
    return f"{op}[{node.lo!r},{node.hi!r}]({to_text(node.arg)})"
