"""Interpreter for UL instruction sequences.

Register values are plain Python objects: ``int`` holding the unsigned bit
pattern for integer and address registers, ``bool`` for Bool registers.  The
interpretation (unsigned or 2s-complement) is picked by each instruction.
"""
from __future__ import annotations

import enum
from dataclasses import dataclass
from typing import Callable, Dict, Iterable, Optional

from .ulcore import (
    ARITH, CAST, CMP, Const, Instruction, InstructionSequence, Op, Operand, UlType,
)

Env = Dict[str, object]
Chooser = Callable[[UlType], object]


class MachineFault(Exception):
    """The error state †: division by zero, signed overflow in SDiv, or an
    out-of-bounds memory access."""


class AllocationError(Exception):
    pass


@dataclass(frozen=True)
class BitVec:
    width: int
    bits: int

    def __post_init__(self):
        if not 0 <= self.bits < (1 << self.width):
            raise ValueError(f"{self.bits:#x} does not fit {self.width} bits")

    @property
    def unsigned(self) -> int:
        return self.bits

    @property
    def signed(self) -> int:
        return to_signed(self.bits, self.width)

    def __repr__(self) -> str:
        return f"BitVec({self.bits:#0{self.width // 4 + 2}x}, w{self.width})"


def to_signed(bits: int, width: int) -> int:
    return bits - (1 << width) if bits >> (width - 1) else bits


def mask(width: int) -> int:
    return (1 << width) - 1


@dataclass(frozen=True)
class Memory:
    """Fixed-size byte memory with a bump pointer."""

    data: bytes
    pointer: int = 0

    @classmethod
    def zeroed(cls, size: int, pointer: int = 0) -> "Memory":
        return cls(bytes(size), pointer)

    @property
    def size(self) -> int:
        return len(self.data)

    def hex(self) -> str:
        return self.data.hex()


def alloc(mem: Memory, nbytes: int) -> tuple[Memory, int]:
    """Bump-allocate ``nbytes``; returns the new memory and the block address."""
    if nbytes < 0:
        raise ValueError("negative allocation")
    if mem.pointer + nbytes > mem.size:
        raise AllocationError(f"cannot allocate {nbytes} bytes at {mem.pointer} (memsize {mem.size})")
    return Memory(mem.data, mem.pointer + nbytes), mem.pointer


class Status(enum.Enum):
    OK = "ok"
    BLOCKED = "blocked"
    ERROR = "error"
    ASSERT = "assert"


class Guard(enum.Enum):
    ENABLED = "enabled"
    BLOCKED = "blocked"
    ASSERT_HIT = "assert-hit"


@dataclass(frozen=True)
class StepOutcome:
    status: Status
    env: Optional[Env] = None
    memory: Optional[Memory] = None


# --- evaluation --------------------------------------------------------------

def eval_operand(op: Operand, env: Env):
    if isinstance(op, Const):
        return op.pattern
    return env[op.name]


def _width(op: Operand) -> int:
    return op.width if isinstance(op, Const) else op.type.width


def _arith(op: Op, a: int, b: int, w: int) -> int:
    m = mask(w)
    if op is Op.ADD:
        return (a + b) & m
    if op is Op.SUB:
        return (a - b) & m
    if op is Op.MULT:
        return (a * b) & m
    if op is Op.DIV:
        if b == 0:
            raise MachineFault("division by zero")
        return a // b
    if op is Op.SDIV:
        if b == 0:
            raise MachineFault("division by zero")
        sa, sb = to_signed(a, w), to_signed(b, w)
        if sa == -(1 << (w - 1)) and sb == -1:
            raise MachineFault("signed division overflow")
        q = abs(sa) // abs(sb)
        return (q if (sa < 0) == (sb < 0) else -q) & m
    if op is Op.LSHL:
        return (a << b) & m if b < w else 0
    if op is Op.LSHR:
        return a >> b if b < w else 0
    if op is Op.ASHR:
        return (to_signed(a, w) >> min(b, w)) & m
    raise AssertionError(op)


def _cmp(op: Op, a: int, b: int, w: int) -> bool:
    if op is Op.EQ:
        return a == b
    if op is Op.NEQ:
        return a != b
    if op is Op.LEQ:
        return a <= b
    if op is Op.GEQ:
        return a >= b
    sa, sb = to_signed(a, w), to_signed(b, w)
    if op is Op.SLEQ:
        return sa <= sb
    if op is Op.SGEQ:
        return sa >= sb
    raise AssertionError(op)


def _cast(op: Op, v, src_w: int | None, dst_w: int) -> int:
    if op is Op.ZEXT:
        return v
    if op is Op.SEXT:
        return to_signed(v, src_w) & mask(dst_w)
    if op is Op.TRUNC:
        return v & mask(dst_w)
    if op is Op.BOOLZEXT:
        return 1 if v else 0
    if op is Op.BOOLSEXT:
        return mask(dst_w) if v else 0
    raise AssertionError(op)


def _load(mem: bytearray | bytes, addr: int, ty: UlType):
    size = ty.byte_size
    if addr >= 1 << 63 or addr + size > len(mem):
        raise MachineFault(f"load of {size} bytes at {addr} out of bounds")
    raw = int.from_bytes(mem[addr:addr + size], "little")
    return raw != 0 if ty is UlType.BOOL else raw


def _store(mem: bytearray, addr: int, value, ty: UlType) -> None:
    size = ty.byte_size
    if addr >= 1 << 63 or addr + size > len(mem):
        raise MachineFault(f"store of {size} bytes at {addr} out of bounds")
    mem[addr:addr + size] = int(value).to_bytes(size, "little")


def _execute(ins: Instruction, env: Env, mem: bytearray, chooser: Chooser | None) -> None:
    """Execute one non-internal instruction in place."""
    op = ins.op
    args = ins.args
    if op in ARITH:
        w = ins.dest.type.width
        env[ins.dest.name] = _arith(op, eval_operand(args[0], env), eval_operand(args[1], env), w)
    elif op in CMP:
        env[ins.dest.name] = _cmp(op, eval_operand(args[0], env), eval_operand(args[1], env), _width(args[0]))
    elif op in CAST:
        src = args[0]
        src_w = None if op in (Op.BOOLSEXT, Op.BOOLZEXT) else _width(src)
        env[ins.dest.name] = _cast(op, eval_operand(src, env), src_w, ins.dest.type.width)
    elif op is Op.LOAD:
        env[ins.dest.name] = _load(mem, eval_operand(args[0], env), ins.dest.type)
    elif op is Op.STORE:
        val = args[1]
        _store(mem, eval_operand(args[0], env), eval_operand(val, env), val.type)
    elif op is Op.COPY:
        env[ins.dest.name] = eval_operand(args[0], env)
    elif op is Op.NONDET:
        if chooser is None:
            raise ValueError("NonDet needs a chooser")
        env[ins.dest.name] = chooser(ins.dest.type)
    elif op is Op.DECL:
        pass
    else:
        raise ValueError(f"{op} is not executable here")


def exec_arith(ins: Instruction, env: Env) -> Env:
    """Raises :class:`MachineFault` for the error state."""
    out = dict(env)
    _execute(ins, out, bytearray(), None)
    return out


exec_cast = exec_arith
exec_cmp = exec_arith


def exec_memory(ins: Instruction, env: Env, mem: Memory) -> tuple[Env, Memory]:
    out = dict(env)
    buf = bytearray(mem.data)
    _execute(ins, out, buf, None)
    return out, (mem if ins.op is Op.LOAD else Memory(bytes(buf), mem.pointer))


def exec_assign(ins: Instruction, env: Env, chooser: Chooser | None = None) -> Env:
    out = dict(env)
    _execute(ins, out, bytearray(), chooser)
    return out


def check_guard(ins: Instruction, env: Env) -> Guard:
    if ins.op is Op.ASSERT:
        return Guard.ASSERT_HIT
    val = env[ins.args[0].name]
    if ins.op is Op.ASSUME:
        return Guard.ENABLED if val else Guard.BLOCKED
    if ins.op is Op.NEGASSUME:
        return Guard.BLOCKED if val else Guard.ENABLED
    raise ValueError(f"{ins.op} is not a guard")


def step_sequence(seq: InstructionSequence, env: Env, mem: Memory,
                  chooser: Chooser | None = None) -> StepOutcome:
    """Run the guard, then the body left to right.  The first fault wins."""
    status = Status.OK
    if seq.guard is not None:
        g = check_guard(seq.guard, env)
        if g is Guard.BLOCKED:
            return StepOutcome(Status.BLOCKED)
        if g is Guard.ASSERT_HIT:
            status = Status.ASSERT
    out = dict(env)
    buf = None
    try:
        for ins in seq.body:
            if ins.op is Op.STORE:
                if buf is None:
                    buf = bytearray(mem.data)
                _execute(ins, out, buf, chooser)
            else:
                _execute(ins, out, mem.data if buf is None else buf, chooser)
    except MachineFault:
        return StepOutcome(Status.ERROR)
    new_mem = mem if buf is None else Memory(bytes(buf), mem.pointer)
    return StepOutcome(status, out, new_mem)


def domain(ty: UlType) -> range | tuple[bool, bool]:
    """All values of ``ty`` in canonical order (unsigned ascending, False first)."""
    if ty is UlType.BOOL:
        return (False, True)
    return range(1 << ty.width)


def zero_value(ty: UlType):
    return False if ty is UlType.BOOL else 0


def replay_chooser(values: Iterable) -> Chooser:
    it = iter(values)

    def choose(ty: UlType):
        return next(it)

    return choose
