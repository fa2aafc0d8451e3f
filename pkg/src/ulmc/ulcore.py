"""UL types, operands, instructions and instruction sequences.

Textual syntax of one edge label::

    r1 ← Add r2, [1]^Int8 ; Store p, r1

``<-`` is accepted for ``←``.  Unsigned constants are written ``[n]^IntB``,
2s-complement constants ``[z]^IntB_2`` and address constants ``[n]^Addr``.
A bare register name is a declaration (``Decl``).
"""
from __future__ import annotations

import enum
import re
from dataclasses import dataclass
from typing import Mapping, Sequence, Union


class UlError(Exception):
    """Base class for errors raised while reading or checking UL."""


class UlSyntaxError(UlError):
    def __init__(self, message: str, line: int | None = None, column: int | None = None):
        self.message = message
        self.line = line
        self.column = column
        where = ""
        if line is not None:
            where = f"line {line}" + (f", column {column}" if column is not None else "") + ": "
        elif column is not None:
            where = f"column {column}: "
        super().__init__(where + message)


class MisplacedInternal(UlSyntaxError):
    pass


class DuplicateName(UlError):
    pass


class UnknownRegister(UlError):
    pass


class UnknownLocation(UlError):
    pass


class OutOfRange(UlError):
    pass


class UlTypeError(UlError):
    def __init__(self, index: int, reason: str):
        self.index = index
        self.reason = reason
        super().__init__(f"instruction {index}: {reason}")


class UlType(enum.Enum):
    INT8 = "Int8"
    INT16 = "Int16"
    INT32 = "Int32"
    INT64 = "Int64"
    BOOL = "Bool"
    ADDR = "Addr"

    @property
    def width(self) -> int | None:
        return _WIDTHS[self]

    @property
    def byte_size(self) -> int:
        w = _WIDTHS[self]
        return 1 if w is None else w // 8

    @property
    def is_int(self) -> bool:
        return self in _INTS

    @classmethod
    def parse(cls, text: str) -> "UlType":
        try:
            return cls(text)
        except ValueError:
            raise UlSyntaxError(f"unknown type {text!r}") from None

    @classmethod
    def int_of_width(cls, width: int) -> "UlType":
        return _INT_BY_WIDTH[width]

    def __str__(self) -> str:
        return self.value


_WIDTHS = {
    UlType.INT8: 8,
    UlType.INT16: 16,
    UlType.INT32: 32,
    UlType.INT64: 64,
    UlType.BOOL: None,
    UlType.ADDR: 64,
}
_INTS = frozenset({UlType.INT8, UlType.INT16, UlType.INT32, UlType.INT64})
_INT_BY_WIDTH = {8: UlType.INT8, 16: UlType.INT16, 32: UlType.INT32, 64: UlType.INT64}


@dataclass(frozen=True)
class Register:
    name: str
    type: UlType

    def __str__(self) -> str:
        return self.name


@dataclass(frozen=True)
class Const:
    """Integer constant.  ``signed`` selects the ``[z]^IntB_2`` encoding;
    ``addr`` marks an ``[n]^Addr`` constant (always unsigned, 64 bits)."""

    value: int
    width: int
    signed: bool = False
    addr: bool = False

    def __post_init__(self):
        if self.addr:
            if self.width != 64 or self.signed:
                raise OutOfRange("address constants are unsigned 64-bit")
        elif self.width not in _INT_BY_WIDTH:
            raise OutOfRange(f"unsupported constant width {self.width}")
        lo, hi = (-(1 << (self.width - 1)), (1 << (self.width - 1)) - 1) if self.signed else (0, (1 << self.width) - 1)
        if not lo <= self.value <= hi:
            raise OutOfRange(f"{self.value} does not fit {self.width}-bit {'signed' if self.signed else 'unsigned'}")

    @property
    def type(self) -> UlType:
        return UlType.ADDR if self.addr else UlType.int_of_width(self.width)

    @property
    def pattern(self) -> int:
        return self.value & ((1 << self.width) - 1)

    def __str__(self) -> str:
        if self.addr:
            return f"[{self.value}]^Addr"
        return f"[{self.value}]^Int{self.width}" + ("_2" if self.signed else "")


Operand = Union[Register, Const]


class Op(enum.Enum):
    ADD = "Add"
    SUB = "Sub"
    DIV = "Div"
    SDIV = "SDiv"
    MULT = "Mult"
    LSHL = "LShl"
    ASHR = "AShr"
    LSHR = "LShr"
    SEXT = "SExt"
    ZEXT = "ZExt"
    TRUNC = "Trunc"
    BOOLSEXT = "BoolSExt"
    BOOLZEXT = "BoolZExt"
    LEQ = "LEq"
    SLEQ = "SLEq"
    NEQ = "NEq"
    EQ = "Eq"
    GEQ = "GEq"
    SGEQ = "SGEq"
    LOAD = "Load"
    STORE = "Store"
    ASSUME = "Assume"
    NEGASSUME = "NegAssume"
    ASSERT = "Assert"
    DECL = "Decl"
    NONDET = "NonDet"
    COPY = "Copy"

    def __str__(self) -> str:
        return self.value


ARITH = frozenset({Op.ADD, Op.SUB, Op.DIV, Op.SDIV, Op.MULT, Op.LSHL, Op.ASHR, Op.LSHR})
CAST = frozenset({Op.SEXT, Op.ZEXT, Op.TRUNC, Op.BOOLSEXT, Op.BOOLZEXT})
CMP = frozenset({Op.LEQ, Op.SLEQ, Op.NEQ, Op.EQ, Op.GEQ, Op.SGEQ})
MEMORY = frozenset({Op.LOAD, Op.STORE})
INTERNAL = frozenset({Op.ASSUME, Op.NEGASSUME, Op.ASSERT})
ASSIGNS = frozenset({Op.DECL, Op.NONDET, Op.COPY})

# (has dest, number of source operands)
_SHAPE = {op: (True, 2) for op in ARITH | CMP}
_SHAPE.update({op: (True, 1) for op in CAST})
_SHAPE.update({
    Op.LOAD: (True, 1),
    Op.STORE: (False, 2),
    Op.ASSUME: (False, 1),
    Op.NEGASSUME: (False, 1),
    Op.ASSERT: (False, 0),
    Op.DECL: (True, 0),
    Op.NONDET: (True, 0),
    Op.COPY: (True, 1),
})


@dataclass(frozen=True)
class Instruction:
    op: Op
    dest: Register | None = None
    args: tuple[Operand, ...] = ()

    def __post_init__(self):
        has_dest, nargs = _SHAPE[self.op]
        if has_dest != (self.dest is not None) or len(self.args) != nargs:
            raise UlSyntaxError(f"wrong arity for {self.op}")
        if self.op in (Op.ASSUME, Op.NEGASSUME) and not isinstance(self.args[0], Register):
            raise UlSyntaxError(f"{self.op} takes a register")

    @property
    def is_internal(self) -> bool:
        return self.op in INTERNAL

    @property
    def is_memory(self) -> bool:
        return self.op in MEMORY

    def registers(self) -> list[Register]:
        regs = [self.dest] if self.dest is not None else []
        regs.extend(a for a in self.args if isinstance(a, Register))
        return regs

    def __str__(self) -> str:
        args = ", ".join(str(a) for a in self.args)
        if self.op is Op.DECL:
            return self.dest.name
        head = f"{self.op}" + (f" {args}" if args else "")
        if self.dest is not None:
            return f"{self.dest.name} ← {head}"
        return head


@dataclass(frozen=True)
class InstructionSequence:
    guard: Instruction | None = None
    body: tuple[Instruction, ...] = ()

    def __post_init__(self):
        if self.guard is not None and not self.guard.is_internal:
            raise MisplacedInternal("guard must be Assume, NegAssume or Assert")
        for k, ins in enumerate(self.body):
            if ins.is_internal:
                raise MisplacedInternal(f"{ins.op} only allowed at the head (position {k + 1})")

    def instructions(self) -> tuple[Instruction, ...]:
        return ((self.guard,) if self.guard is not None else ()) + self.body

    def __len__(self) -> int:
        return len(self.body) + (self.guard is not None)

    def __str__(self) -> str:
        return render(self)


EMPTY = InstructionSequence()


def render(seq: InstructionSequence) -> str:
    return " ; ".join(str(i) for i in seq.instructions())


# --- parsing ---------------------------------------------------------------

IDENT = r"[A-Za-z_%@.$][A-Za-z0-9_.$]*"
_TOKEN = re.compile(
    rf"""
    (?P<ws>\s+)
  | (?P<arrow>←|<-)
  | (?P<const>\[\s*(?P<num>[+-]?\d+)\s*\]\s*\^\s*(?P<ty>Int(?:8|16|32|64)(?:_2)?|Addr))
  | (?P<comma>,)
  | (?P<semi>;)
  | (?P<name>{IDENT})
    """,
    re.VERBOSE,
)
_OPS = {op.value: op for op in Op if op is not Op.DECL}


def _tokenize(text: str, line: int | None):
    pos = 0
    out = []
    while pos < len(text):
        m = _TOKEN.match(text, pos)
        if m is None:
            raise UlSyntaxError(f"unexpected character {text[pos]!r}", line, pos + 1)
        kind = m.lastgroup
        if m.group("const") is not None:
            kind = "const"
        if kind != "ws":
            out.append((kind, m, pos + 1))
        pos = m.end()
    out.append(("eof", None, len(text) + 1))
    return out


def parse_const(text: str) -> Const:
    m = _TOKEN.fullmatch(text.strip())
    if m is None or m.group("const") is None:
        raise UlSyntaxError(f"bad constant {text!r}")
    return _make_const(m, None, 1)


def _make_const(m, line, col) -> Const:
    ty = m.group("ty")
    n = int(m.group("num"))
    try:
        if ty == "Addr":
            return Const(n, 64, addr=True)
        signed = ty.endswith("_2")
        width = int(ty[3:].removesuffix("_2"))
        return Const(n, width, signed=signed)
    except OutOfRange as exc:
        raise OutOfRange(f"{exc} (column {col})" if line is None else f"line {line}, column {col}: {exc}") from None


class _SeqParser:
    def __init__(self, text: str, regs: Mapping[str, UlType], line: int | None):
        self.toks = _tokenize(text, line)
        self.i = 0
        self.regs = regs
        self.line = line

    def peek(self):
        return self.toks[self.i]

    def take(self, kind=None):
        tok = self.toks[self.i]
        if kind is not None and tok[0] != kind:
            found = "end of input" if tok[0] == "eof" else repr(tok[1].group(0))
            raise UlSyntaxError(f"expected {kind}, found {found}", self.line, tok[2])
        self.i += 1
        return tok

    def register(self, tok) -> Register:
        name = tok[1].group(0)
        if name not in self.regs:
            raise UnknownRegister(f"unknown register {name!r}" + (f" (line {self.line})" if self.line else ""))
        return Register(name, self.regs[name])

    def operand(self) -> Operand:
        tok = self.peek()
        if tok[0] == "const":
            self.i += 1
            return _make_const(tok[1], self.line, tok[2])
        if tok[0] == "name":
            self.i += 1
            return self.register(tok)
        found = "end of input" if tok[0] == "eof" else repr(tok[1].group(0))
        raise UlSyntaxError(f"expected operand, found {found}", self.line, tok[2])

    def operands(self, n: int) -> tuple[Operand, ...]:
        ops = []
        for k in range(n):
            if k:
                self.take("comma")
            ops.append(self.operand())
        return tuple(ops)

    def opcode(self) -> tuple[Op, int]:
        tok = self.take("name")
        word = tok[1].group(0)
        if word not in _OPS:
            raise UlSyntaxError(f"unknown opcode {word!r}", self.line, tok[2])
        return _OPS[word], tok[2]

    def instruction(self) -> Instruction:
        tok = self.peek()
        if tok[0] != "name":
            found = "end of input" if tok[0] == "eof" else repr(tok[1].group(0))
            raise UlSyntaxError(f"expected instruction, found {found}", self.line, tok[2])
        word = tok[1].group(0)
        nxt = self.toks[self.i + 1][0]
        if word in _OPS and nxt != "arrow":
            op, _ = self.opcode()
            has_dest, nargs = _SHAPE[op]
            if has_dest:
                raise UlSyntaxError(f"{op} needs a destination", self.line, tok[2])
            return Instruction(op, None, self.operands(nargs))
        self.i += 1
        dest = self.register(tok)
        if self.peek()[0] != "arrow":
            return Instruction(Op.DECL, dest)
        self.take("arrow")
        op, col = self.opcode()
        has_dest, nargs = _SHAPE[op]
        if not has_dest or op is Op.DECL:
            raise UlSyntaxError(f"{op} takes no destination", self.line, col)
        return Instruction(op, dest, self.operands(nargs))

    def sequence(self) -> InstructionSequence:
        instrs = []
        if self.peek()[0] == "eof":
            return EMPTY
        while True:
            instrs.append(self.instruction())
            if self.peek()[0] == "eof":
                break
            self.take("semi")
        guard = None
        if instrs and instrs[0].is_internal:
            guard = instrs.pop(0)
        for k, ins in enumerate(instrs):
            if ins.is_internal:
                raise MisplacedInternal(
                    f"{ins.op} must be the first instruction of a sequence", self.line, None)
        return InstructionSequence(guard, tuple(instrs))


def parse_sequence(text: str, regs: Mapping[str, UlType], line: int | None = None) -> InstructionSequence:
    """Parse one edge label against the register table ``regs``."""
    return _SeqParser(text, regs, line).sequence()


# --- typing ----------------------------------------------------------------

def operand_type(op: Operand, gamma: Mapping[str, UlType]) -> UlType:
    if isinstance(op, Const):
        return op.type
    return gamma[op.name]


def typecheck_instruction(ins: Instruction, gamma: Mapping[str, UlType], index: int = 0) -> None:
    for reg in ins.registers():
        if reg.name not in gamma:
            raise UlTypeError(index, f"register {reg.name!r} not in Γ")
        if gamma[reg.name] is not reg.type:
            raise UlTypeError(index, f"register {reg.name!r} annotated {reg.type}, Γ says {gamma[reg.name]}")
    ts = [operand_type(a, gamma) for a in ins.args]
    dt = gamma[ins.dest.name] if ins.dest is not None else None
    op = ins.op

    def fail(reason):
        raise UlTypeError(index, f"{op}: {reason}")

    if op in ARITH:
        # Addr ← Add/Sub Addr, Int64 is the address-arithmetic extension
        if dt is UlType.ADDR and op in (Op.ADD, Op.SUB):
            if ts[0] is not UlType.ADDR or ts[1] not in (UlType.INT64, UlType.ADDR):
                fail("address arithmetic needs Addr, Int64 operands")
        elif not (dt is not None and dt.is_int and ts[0] is dt and ts[1] is dt):
            fail(f"operands and destination must share one integer type, got {dt} ← {ts[0]}, {ts[1]}")
    elif op in CMP:
        if dt is not UlType.BOOL:
            fail("destination must be Bool")
        if not (ts[0].is_int and ts[0] is ts[1]):
            fail(f"operands must share one integer type, got {ts[0]}, {ts[1]}")
    elif op in (Op.SEXT, Op.ZEXT, Op.TRUNC):
        if not (ts[0].is_int and dt is not None and dt.is_int):
            fail("integer source and destination required")
        if op is Op.TRUNC and not dt.width < ts[0].width:
            fail("truncation target must be narrower")
        if op is not Op.TRUNC and not dt.width > ts[0].width:
            fail("extension target must be wider")
    elif op in (Op.BOOLSEXT, Op.BOOLZEXT):
        if ts[0] is not UlType.BOOL or not (dt is not None and dt.is_int):
            fail("Bool source and integer destination required")
    elif op is Op.LOAD:
        if ts[0] is not UlType.ADDR:
            fail("address operand must be Addr")
        if not (dt.is_int or dt is UlType.ADDR):
            fail(f"cannot load into {dt}")
    elif op is Op.STORE:
        if ts[0] is not UlType.ADDR:
            fail("address operand must be Addr")
        if not (ts[1].is_int or ts[1] is UlType.ADDR):
            fail(f"cannot store {ts[1]}")
    elif op in (Op.ASSUME, Op.NEGASSUME):
        if ts[0] is not UlType.BOOL:
            fail("guard register must be Bool")
    elif op is Op.COPY:
        if ts[0] is not dt:
            fail(f"cannot copy {ts[0]} into {dt}")


def typecheck_sequence(seq: InstructionSequence, gamma: Mapping[str, UlType]) -> None:
    """Raise :class:`UlTypeError` on the first ill-typed instruction."""
    for k, ins in enumerate(seq.instructions()):
        typecheck_instruction(ins, gamma, k)


def encode_const(op: Const) -> "BitVec":
    from .machine import BitVec

    if not isinstance(op, Const):
        raise OutOfRange("only constants can be encoded")
    return BitVec(op.width, op.pattern)


def nondet_registers(seq: InstructionSequence | Sequence[Instruction]) -> list[Register]:
    instrs = seq.body if isinstance(seq, InstructionSequence) else seq
    return [i.dest for i in instrs if i.op is Op.NONDET]
