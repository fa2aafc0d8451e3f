"""Query parsing and evaluation.

Forms::

    E<> pred                     reachability
    A[] pred                     invariance, answered as not E<> not pred
    E[<=bound;runs] (max: expr)  maximum of expr over simulated runs

Predicates combine ``proc.Location``, ``proc.Term``, ``proc.AssertViolation``,
``glob:name CMP int`` (``CMP`` is ``=``, ``==``, ``!=``, ``<=`` or ``>=``,
optionally suffixed with ``s`` for a signed comparison), ``true`` and
``false`` with ``!``, ``&&``, ``||`` and parentheses.  Expressions add
integers, ``globalTime`` (alias ``G``), ``+ - *`` and comparisons; truth
values count as 0/1.  An arithmetic operand of ``&&``/``||`` must be
parenthesized: ``1 - a || b`` is rejected as ambiguous.
"""
from __future__ import annotations

import re
from dataclasses import dataclass
from fractions import Fraction
from typing import Callable

from ..cfa import DiscreteState, Network
from ..machine import to_signed
from .model import TimedModel
from .smc import DEFAULT_BINS, DEFAULT_SCALE, EstimateResult, estimate_max
from .trace import Trace
from .zones import Limits, Verdict, zone_reach


class QuerySyntaxError(Exception):
    def __init__(self, message: str, position: int):
        super().__init__(f"{message} (at column {position + 1})")
        self.message = message
        self.position = position


class QueryNameError(QuerySyntaxError):
    """The query names an unknown process, location or global register."""


# --- AST -----------------------------------------------------------------------

@dataclass(frozen=True)
class Node:
    kind: str           # num, time, loc, glob, not, and, or, cmp, arith, neg, bool
    args: tuple = ()
    pos: int = 0
    parens: bool = False

    @property
    def is_arith(self) -> bool:
        return self.kind in ("arith", "neg") and not self.parens

    @property
    def uses_time(self) -> bool:
        return self.kind == "time" or any(isinstance(a, Node) and a.uses_time for a in self.args)


@dataclass(frozen=True)
class Exists:
    pred: Node


@dataclass(frozen=True)
class Always:
    pred: Node


@dataclass(frozen=True)
class EstimateMax:
    expr: Node
    bound: Fraction
    runs: int


Query = Exists | Always | EstimateMax

_TOKEN = re.compile(r"""
    (?P<ws>\s+)
  | (?P<glob>glob:[A-Za-z_%@.$][A-Za-z0-9_.$]*)
  | (?P<num>\d+(?:\.\d+)?)
  | (?P<name>[A-Za-z_%$][A-Za-z0-9_$]*(?:\.[A-Za-z0-9_.$]+)?)
  | (?P<op>&&|\|\||(?:<=|>=|==|!=|=|<|>)s(?![A-Za-z0-9_.$])|<=|>=|==|!=|=|<|>|!|\(|\)|\+|-|\*|:|;|\[|\])
""", re.VERBOSE)

_CMPS = {"=", "==", "!=", "<=", ">=", "<", ">"}


def _tokenize(text: str) -> list[tuple[str, str, int]]:
    toks = []
    pos = 0
    while pos < len(text):
        m = _TOKEN.match(text, pos)
        if m is None:
            raise QuerySyntaxError(f"unexpected character {text[pos]!r}", pos)
        if m.lastgroup != "ws":
            toks.append((m.lastgroup, m.group(), pos))
        pos = m.end()
    toks.append(("eof", "", len(text)))
    return toks


class _Parser:
    def __init__(self, text: str):
        self.toks = _tokenize(text)
        self.i = 0

    def peek(self, value: str | None = None, kind: str | None = None) -> bool:
        k, v, _ = self.toks[self.i]
        return (value is None or v == value) and (kind is None or k == kind)

    def take(self, value: str | None = None, kind: str | None = None):
        k, v, p = self.toks[self.i]
        if not self.peek(value, kind):
            want = repr(value) if value else kind
            raise QuerySyntaxError(f"expected {want}, found {v or 'end of input'!r}", p)
        self.i += 1
        return k, v, p

    @property
    def pos(self) -> int:
        return self.toks[self.i][2]

    def logic(self, op: str, sub) -> Node:
        first = sub()
        if not self.peek(op):
            return first
        args = [first]
        pos = first.pos
        while self.peek(op):
            self.take(op)
            args.append(sub())
        for a in args:
            if a.is_arith:
                raise QuerySyntaxError(f"arithmetic operand of {op!r} must be parenthesized", a.pos)
        return Node("and" if op == "&&" else "or", tuple(args), pos)

    def expr(self) -> Node:
        return self.logic("||", self.conj)

    def conj(self) -> Node:
        return self.logic("&&", self.unary_not)

    def unary_not(self) -> Node:
        if self.peek("!"):
            p = self.take("!")[2]
            arg = self.unary_not()
            if arg.is_arith:
                raise QuerySyntaxError("arithmetic operand of '!' must be parenthesized", arg.pos)
            return Node("not", (arg,), p)
        return self.comparison()

    def comparison(self) -> Node:
        left = self.sum()
        k, v, p = self.toks[self.i]
        if k == "op" and v in _CMPS:
            self.i += 1
            right = self.sum()
            return Node("cmp", (v, left, right), left.pos)
        return left

    def sum(self) -> Node:
        node = self.product()
        while self.peek("+") or self.peek("-"):
            op = self.take()[1]
            node = Node("arith", (op, node, self.product()), node.pos)
        return node

    def product(self) -> Node:
        node = self.negation()
        while self.peek("*"):
            self.take("*")
            node = Node("arith", ("*", node, self.negation()), node.pos)
        return node

    def negation(self) -> Node:
        if self.peek("-"):
            p = self.take("-")[2]
            return Node("neg", (self.negation(),), p)
        return self.atom()

    def atom(self) -> Node:
        k, v, p = self.toks[self.i]
        if v == "(":
            self.i += 1
            inner = self.expr()
            self.take(")")
            return Node(inner.kind, inner.args, p, True)
        if k == "num":
            self.i += 1
            return Node("num", (Fraction(v),), p)
        if k == "glob":
            self.i += 1
            ck, cv, cp = self.toks[self.i]
            if ck != "op" or cv.rstrip("s") not in _CMPS:
                raise QuerySyntaxError("expected a comparison after a global register", cp)
            self.i += 1
            signed = cv.endswith("s")
            neg = False
            if self.peek("-"):
                self.take("-")
                neg = True
            _, num, np_ = self.take(kind="num")
            if "." in num:
                raise QuerySyntaxError("global registers compare against integers", np_)
            val = -int(num) if neg else int(num)
            return Node("glob", (v[len("glob:"):], cv.rstrip("s"), val, signed), p)
        if k == "name":
            self.i += 1
            if v in ("true", "false"):
                return Node("bool", (v == "true",), p)
            if v in ("globalTime", "G"):
                return Node("time", (), p)
            if "." not in v:
                raise QuerySyntaxError(f"expected 'process.Location', found {v!r}", p)
            proc, loc = v.split(".", 1)
            return Node("loc", (proc, loc), p)
        raise QuerySyntaxError(f"unexpected {v or 'end of input'!r}", p)


def parse_expr(text: str) -> Node:
    p = _Parser(text)
    node = p.expr()
    p.take(kind="eof")
    return node


def parse_query(text: str) -> Query:
    stripped = text.lstrip()
    off = len(text) - len(stripped)
    if stripped.startswith("E<>"):
        pred = parse_expr(" " * (off + 3) + stripped[3:])
        _no_time(pred)
        return Exists(pred)
    if stripped.startswith("A[]"):
        pred = parse_expr(" " * (off + 3) + stripped[3:])
        _no_time(pred)
        return Always(pred)
    if stripped.startswith("E["):
        p = _Parser(text)
        p.take("E")
        p.take("[")
        p.take("<=")
        _, b, bp = p.take(kind="num")
        p.take(";")
        _, r, rp = p.take(kind="num")
        if "." in r or int(r) < 1:
            raise QuerySyntaxError("run count must be a positive integer", rp)
        p.take("]")
        p.take("(")
        _, word, wp = p.take(kind="name")
        if word != "max":
            raise QuerySyntaxError("only 'max:' estimates are supported", wp)
        p.take(":")
        expr = p.expr()
        p.take(")")
        p.take(kind="eof")
        return EstimateMax(expr, Fraction(b), int(r))
    raise QuerySyntaxError("query must start with 'E<>', 'A[]' or 'E[<='", off)


def _no_time(node: Node) -> None:
    if node.uses_time:
        raise QuerySyntaxError("globalTime is only allowed in estimate expressions", node.pos)


# --- compilation ---------------------------------------------------------------

def compile_expr(node: Node, net: Network) -> Callable[[DiscreteState, Fraction], object]:
    """Closure evaluating ``node`` on (discrete state, global time)."""
    k, a = node.kind, node.args
    if k == "num":
        v = a[0]
        v = int(v) if v.denominator == 1 else v
        return lambda s, t: v
    if k == "bool":
        v = int(a[0])
        return lambda s, t: v
    if k == "time":
        return lambda s, t: t
    if k == "loc":
        return _location_atom(node, net)
    if k == "glob":
        return _global_atom(node, net)
    if k == "not":
        f = compile_expr(a[0], net)
        return lambda s, t: int(not f(s, t))
    if k in ("and", "or"):
        fs = [compile_expr(x, net) for x in a]
        if k == "and":
            return lambda s, t: int(all(f(s, t) for f in fs))
        return lambda s, t: int(any(f(s, t) for f in fs))
    if k == "neg":
        f = compile_expr(a[0], net)
        return lambda s, t: -f(s, t)
    if k == "arith":
        op, l, r = a[0], compile_expr(a[1], net), compile_expr(a[2], net)
        if op == "+":
            return lambda s, t: l(s, t) + r(s, t)
        if op == "-":
            return lambda s, t: l(s, t) - r(s, t)
        return lambda s, t: l(s, t) * r(s, t)
    if k == "cmp":
        op, l, r = a[0], compile_expr(a[1], net), compile_expr(a[2], net)
        return lambda s, t: int(_compare(op, l(s, t), r(s, t)))
    raise AssertionError(k)


def _compare(op: str, x, y) -> bool:
    if op in ("=", "=="):
        return x == y
    if op == "!=":
        return x != y
    if op == "<=":
        return x <= y
    if op == ">=":
        return x >= y
    if op == "<":
        return x < y
    return x > y


def _location_atom(node: Node, net: Network):
    proc, loc = node.args
    try:
        i = net.cfa_index(proc)
    except KeyError:
        raise QueryNameError(f"unknown process {proc!r}", node.pos) from None
    cfa = net.cfas[i]
    names = {l.name for l in cfa.locations}
    if loc in names:
        target = loc
    elif loc == "Term":
        target = cfa.term
    elif loc == "AssertViolation":
        target = cfa.assert_violation
    else:
        raise QueryNameError(f"process {proc!r} has no location {loc!r}", node.pos)
    return lambda s, t: int(s.locations[i] == target)


def _global_atom(node: Node, net: Network):
    name, op, val, signed = node.args
    idx = next((j for j, g in enumerate(net.globals) if g.name == name), None)
    if idx is None:
        raise QueryNameError(f"unknown global register {name!r}", node.pos)
    ty = net.globals[idx].type
    if ty.is_int:
        width = ty.width
        if signed:
            return lambda s, t: int(_compare(op, to_signed(s.globals[idx], width), val))
        return lambda s, t: int(_compare(op, s.globals[idx], val))
    return lambda s, t: int(_compare(op, int(s.globals[idx]), val))


def compile_pred(node: Node, net: Network) -> Callable[[DiscreteState], bool]:
    f = compile_expr(node, net)
    return lambda s: bool(f(s, 0))


# --- evaluation ----------------------------------------------------------------

@dataclass
class QueryResult:
    verdict: str                    # Reachable / Unreachable / Holds / Violated / LimitExceeded / Estimate
    trace: Trace | None = None
    stored: int = 0
    explored: int = 0
    estimate: EstimateResult | None = None


def eval_query(q: Query, model: TimedModel, limits: Limits = Limits(), seed: int = 0,
               horizon: int | None = None, bins: int = DEFAULT_BINS,
               scale: int = DEFAULT_SCALE) -> QueryResult:
    net = model.net
    if isinstance(q, EstimateMax):
        expr = compile_expr(q.expr, net)
        est = estimate_max(net, model.omega, expr, q.bound, q.runs, seed, bins, scale)
        return QueryResult("Estimate", estimate=est)
    pred = compile_pred(q.pred, net)
    if isinstance(q, Always):
        inner = pred
        pred = lambda s: not inner(s)
    res = zone_reach(model, pred, limits, horizon)
    if res.verdict is Verdict.LIMIT:
        verdict = "LimitExceeded"
    elif isinstance(q, Always):
        verdict = "Holds" if res.verdict is Verdict.UNREACHABLE else "Violated"
    else:
        verdict = str(res.verdict)
    return QueryResult(verdict, res.trace, res.stored, res.explored)
