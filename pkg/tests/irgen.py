"""Random straight-line ``.sir`` programs and a direct interpreter for the
parsed IR, used as the oracle for lowering and inlining."""
from __future__ import annotations

import random

from ulmc.frontend.ir import Br, IntT, Local, Ret

WIDTHS = [8, 16, 32]
BINOPS = ["add", "sub", "mul", "udiv", "sdiv", "shl", "ashr", "lshr"]
PREDS = ["eq", "ne", "ule", "sle", "uge", "sge", "ult", "slt", "ugt", "sgt"]


class Fault(Exception):
    pass


def _signed(v, w):
    return v - (1 << w) if v >> (w - 1) & 1 else v


def _binop(op, a, b, w):
    m = (1 << w) - 1
    sa, sb = _signed(a, w), _signed(b, w)
    if op == "add":
        return (a + b) & m
    if op == "sub":
        return (a - b) & m
    if op == "mul":
        return (a * b) & m
    if op == "udiv":
        if b == 0:
            raise Fault
        return a // b
    if op == "sdiv":
        if b == 0 or (sa == -(1 << (w - 1)) and sb == -1):
            raise Fault
        q = abs(sa) // abs(sb)
        return (-q if (sa < 0) != (sb < 0) else q) & m
    if op == "shl":
        return 0 if b >= w else (a << b) & m
    if op == "lshr":
        return 0 if b >= w else a >> b
    if op == "ashr":
        return (sa >> min(b, w)) & m
    raise AssertionError(op)


def _icmp(pred, a, b, w):
    if pred[0] == "s":
        a, b = _signed(a, w), _signed(b, w)
    return {"eq": a == b, "ne": a != b, "le": a <= b, "ge": a >= b, "lt": a < b, "gt": a > b}[
        pred if pred in ("eq", "ne") else pred[1:]]


def interpret(module, name, args=()):
    """Run function ``name``; returns (return value, locals)."""
    fn = module.function(name)
    env = {}
    for (ty, p), v in zip(fn.params, args):
        env[p.name] = v

    def val(x, ty):
        if isinstance(x, Local):
            return env[x.name]
        w = ty.bits
        if w == 1:
            return bool(x.value & 1)
        return x.value % (1 << w)

    block = fn.blocks[0]
    while True:
        for ins in block.instrs:
            op = ins.op
            if op in BINOPS:
                env[ins.dest.name] = _binop(op, val(ins.args[0], ins.ty), val(ins.args[1], ins.ty), ins.ty.bits)
            elif op == "icmp":
                env[ins.dest.name] = _icmp(ins.extra, val(ins.args[0], ins.ty), val(ins.args[1], ins.ty), ins.ty.bits)
            elif op in ("zext", "sext", "trunc"):
                src_w, dst_w = ins.extra.bits, ins.ty.bits
                x = val(ins.args[0], ins.extra)
                x = int(x)
                if op == "sext":
                    x = _signed(x, src_w)
                x %= 1 << dst_w
                env[ins.dest.name] = bool(x) if dst_w == 1 else x
            elif op == "call":
                callee = module.function(ins.extra[0])
                vals = [val(a, t) for a, (t, _) in zip(ins.args, callee.params)]
                r, _ = interpret(module, ins.extra[0], vals)
                if ins.dest is not None:
                    env[ins.dest.name] = r
            else:
                raise AssertionError(op)
        t = block.term
        if isinstance(t, Ret):
            return (None if t.value is None else val(t.value, t.ty)), env
        if isinstance(t, Br):
            target = t.targets[0] if t.cond is None or val(t.cond, IntT(1)) else t.targets[1]
            block = fn.block(target)


class ProgramGen:
    """Straight-line integer programs over i1/i8/i16/i32 values."""

    def __init__(self, rng: random.Random, prefix: str = "v"):
        self.rng = rng
        self.prefix = prefix
        self.values: dict[int, list[str]] = {1: [], 8: [], 16: [], 32: []}
        self.lines: list[str] = []
        self.n = 0

    def literal(self, w):
        rng = self.rng
        if w == 1:
            return rng.choice(["true", "false"])
        pick = rng.random()
        if pick < 0.3:
            return str(rng.randrange(w + 2))
        if pick < 0.5:
            return str(rng.randrange(-(1 << (w - 1)), 0))
        return str(rng.randrange(1 << w))

    def operand(self, w):
        if self.values[w] and self.rng.random() < 0.75:
            return self.rng.choice(self.values[w])
        return self.literal(w)

    def fresh(self, w):
        name = f"%{self.prefix}{self.n}"
        self.n += 1
        self.values[w].append(name)
        return name

    def instruction(self):
        rng = self.rng
        kind = rng.random()
        w = rng.choice(WIDTHS)
        if kind < 0.5:
            op = rng.choice(BINOPS)
            a, b = self.operand(w), self.operand(w)
            if op in ("shl", "ashr", "lshr") and rng.random() < 0.7:
                b = str(rng.randrange(w))
            self.lines.append(f"  {self.fresh(w)} = {op} i{w} {a}, {b}")
        elif kind < 0.7:
            a, b = self.operand(w), self.operand(w)
            self.lines.append(f"  {self.fresh(1)} = icmp {rng.choice(PREDS)} i{w} {a}, {b}")
        else:
            src = rng.choice([1] + WIDTHS)
            others = [x for x in WIDTHS if x != src]
            dst = rng.choice(others)
            op = "trunc" if dst < src else rng.choice(["zext", "sext"])
            if src == 1:
                op = rng.choice(["zext", "sext"])
            elif rng.random() < 0.15:
                dst, op = 1, "trunc"
            self.lines.append(f"  {self.fresh(dst)} = {op} i{src} {self.operand(src)} to i{dst}")

    def body(self, length):
        for _ in range(length):
            self.instruction()
        return self.lines


def random_program(rng: random.Random, max_len: int = 30) -> str:
    g = ProgramGen(rng)
    lines = g.body(rng.randint(1, max_len))
    return "define i32 @main() {\nentry:\n" + "\n".join(lines) + "\n  ret i32 0\n}\n"


def random_call_tree(rng: random.Random, max_len: int = 10) -> str:
    """main calls helper f (which calls leaf g) on values it computed."""
    leaf = ProgramGen(rng, "g")
    leaf.values[8].append("%x")
    leaf.body(rng.randint(1, max_len))
    mid = ProgramGen(rng, "f")
    mid.values[8].append("%y")
    mid.body(rng.randint(0, max_len))
    mid.lines.append(f"  %fr = call i8 @g(i8 {mid.operand(8)})")
    mid.values[8].append("%fr")
    mid.body(rng.randint(0, 3))
    top = ProgramGen(rng)
    top.body(rng.randint(0, max_len))
    for k in range(rng.randint(1, 2)):
        top.lines.append(f"  %call{k} = call i8 @f(i8 {top.operand(8)})")
        top.values[8].append(f"%call{k}")
        top.body(rng.randint(0, 3))
    return ("define i8 @g(i8 %x) {\nentry:\n" + "\n".join(leaf.lines) + f"\n  ret i8 {leaf.operand(8)}\n}}\n"
            f"define i8 @f(i8 %y) {{\nentry:\n" + "\n".join(mid.lines) + f"\n  ret i8 {mid.operand(8)}\n}}\n"
            "define i32 @main() {\nentry:\n" + "\n".join(top.lines) + "\n  ret i32 0\n}\n")
