"""Lowering of inlined subset-IR functions to CFAs."""
from __future__ import annotations

from dataclasses import dataclass, field

from ..cfa import (
    Cfa, Edge, FrameOverflow, GlobalRegister, Location, Network, normalize, validate,
)
from ..ulcore import (
    Const, Instruction, InstructionSequence, Op, Register, UlType,
)
from .inline import UnknownFunction, inline_calls
from .ir import (
    PTR, VOID, ArrayT, FrontendError, GlobalRef, IntLit, IntT, IrFunction, IrInstr,
    IrModule, Local, Ret, StructT,
)


class UnsupportedPattern(FrontendError):
    pass


_BINOP = {"add": Op.ADD, "sub": Op.SUB, "mul": Op.MULT, "udiv": Op.DIV, "sdiv": Op.SDIV,
          "shl": Op.LSHL, "ashr": Op.ASHR, "lshr": Op.LSHR}
_DIRECT_CMP = {"eq": Op.EQ, "ne": Op.NEQ, "ule": Op.LEQ, "sle": Op.SLEQ, "uge": Op.GEQ, "sge": Op.SGEQ}
# strict predicates are the negation of the opposite non-strict one
_NEGATED_CMP = {"ult": Op.GEQ, "ugt": Op.LEQ, "slt": Op.SGEQ, "sgt": Op.SLEQ}

ASSERT_NAME = "assert"


def ul_type(ty, line: int | None = None) -> UlType:
    if isinstance(ty, IntT):
        return UlType.BOOL if ty.bits == 1 else UlType.int_of_width(ty.bits)
    if ty == PTR:
        return UlType.ADDR
    raise UnsupportedPattern(f"line {line}: values of type {ty} cannot live in registers")


@dataclass
class GlobalsTable:
    """Addresses and IR types of module globals in the shared static prefix."""

    addrs: dict[str, int] = field(default_factory=dict)
    types: dict[str, object] = field(default_factory=dict)
    inits: dict[str, int] = field(default_factory=dict)
    size: int = 0

    @classmethod
    def layout(cls, module: IrModule, base: int = 0) -> "GlobalsTable":
        t = cls()
        at = base
        for g in module.globals:
            t.addrs[g.name] = at
            t.types[g.name] = g.ty
            t.inits[g.name] = g.init
            at += g.ty.size
        t.size = at
        return t

    def registers(self) -> list[GlobalRegister]:
        return [GlobalRegister(n, UlType.ADDR, a) for n, a in self.addrs.items()]

    def data(self) -> list[tuple[int, bytes]]:
        out = []
        for n, v in self.inits.items():
            if v:
                ty = self.types[n]
                out.append((self.addrs[n], (v % (1 << (8 * ty.size))).to_bytes(ty.size, "little")))
        return out


def frame_size(fn: IrFunction) -> int:
    return sum(ins.ty.size for b in fn.blocks for ins in b.instrs if ins.op == "alloca")


class _Lowering:
    def __init__(self, fn: IrFunction, table: GlobalsTable, base: int, declared: set[str]):
        self.fn = fn
        self.table = table
        self.next_addr = base
        self.declared = declared
        self.regs: dict[str, UlType] = {}
        self.temps = 0
        self.locations: list[Location] = []
        self.taken: set[str] = set()
        self.edges: list[Edge] = []
        self.fresh_count: dict[str, int] = {}
        self.alloca_addr: dict[int, int] = {}
        self.av: str | None = None

    # -- names ------------------------------------------------------------------
    def add_location(self, name: str, **flags) -> str:
        self.taken.add(name)
        self.locations.append(Location(name, **flags))
        return name

    def fresh_location(self, base: str) -> str:
        while True:
            k = self.fresh_count.get(base, 0)
            self.fresh_count[base] = k + 1
            name = f"{base}__s{k}"
            if name not in self.taken:
                return self.add_location(name, synthetic=True)

    def unique_location(self, base: str, **flags) -> str:
        name, k = base, 0
        while name in self.taken:
            k += 1
            name = f"{base}_{k}"
        return self.add_location(name, **flags)

    def temp(self, ty: UlType) -> Register:
        self.temps += 1
        name = f"$t{self.temps}"
        self.regs[name] = ty
        return Register(name, ty)

    def reg(self, local: Local, line: int) -> Register:
        ty = self.regs.get(local.name)
        if ty is None:
            raise UnsupportedPattern(f"line {line}: {local} used but never defined")
        return Register(local.name, ty)

    def declare(self, local: Local, ty, line: int) -> Register:
        t = ul_type(ty, line)
        old = self.regs.get(local.name)
        if old is not None and old is not t:
            raise UnsupportedPattern(f"line {line}: {local} defined with types {old} and {t}")
        self.regs[local.name] = t
        return Register(local.name, t)

    # -- operands ---------------------------------------------------------------
    def operand(self, v, ty, line: int, out: list[Instruction]):
        """UL operand for IR value ``v`` of IR type ``ty``; may emit helper
        instructions into ``out`` (Bool constants)."""
        if isinstance(v, Local):
            r = self.reg(v, line)
            want = ul_type(ty, line)
            if r.type is not want:
                raise UnsupportedPattern(f"line {line}: {v} is {r.type}, used as {want}")
            return r
        if isinstance(v, GlobalRef):
            if v.name not in self.table.addrs:
                raise UnsupportedPattern(f"line {line}: unknown global @{v.name}")
            if ty != PTR:
                raise UnsupportedPattern(f"line {line}: @{v.name} used as {ty}")
            return Register(v.name, UlType.ADDR)
        if ty == PTR:
            return Const(v.value, 64, addr=True)
        if not isinstance(ty, IntT):
            raise UnsupportedPattern(f"line {line}: constant of type {ty}")
        if ty.bits == 1:
            t = self.temp(UlType.BOOL)
            zero = Const(0, 8)
            out.append(Instruction(Op.EQ if v.value & 1 else Op.NEQ, t, (zero, zero)))
            return t
        return int_const(v.value, ty.bits, line)

    # -- main -------------------------------------------------------------------
    def run(self, name: str) -> Cfa:
        fn = self.fn
        if fn.params:
            raise UnsupportedPattern(f"entry @{fn.name} must not take parameters")
        self._collect_types()
        for b in fn.blocks:
            self.add_location(b.label, init=(b is fn.blocks[0]))
        self.term = self.unique_location(f"{fn.name}_Term", term=True)
        for b in fn.blocks:
            self._block(b)
        regs = tuple(Register(n, t) for n, t in self.regs.items())
        return Cfa(name, regs, tuple(self.locations), tuple(self.edges))

    def _collect_types(self):
        for b in self.fn.blocks:
            for ins in b.instrs:
                if ins.dest is None:
                    continue
                if ins.op == "icmp":
                    ty = IntT(1)
                elif ins.op in ("alloca", "getelementptr"):
                    ty = PTR
                else:
                    ty = ins.ty
                if ty is VOID:
                    continue
                self.declare(ins.dest, ty, ins.line)

    def _edge(self, src: str, body: list[Instruction], dst: str, guard: Instruction | None = None):
        self.edges.append(Edge(src, InstructionSequence(guard, tuple(body)), dst))

    def _block(self, b):
        cur = b.label
        pending: list[Instruction] = []
        for ins in b.instrs:
            if ins.op == "call" and ins.extra[0] == ASSERT_NAME and ins.extra[0] in self.declared:
                cur = self._assert(ins, cur, pending, b.label)
                pending = []
            else:
                pending.extend(self._instr(ins))
        t = b.term
        if isinstance(t, Ret):
            self._edge(cur, pending, self.term)
        elif t.cond is None:
            self._edge(cur, pending, t.targets[0])
        elif isinstance(t.cond, IntLit):
            self._edge(cur, pending, t.targets[0] if t.cond.value & 1 else t.targets[1])
        else:
            c = self.operand(t.cond, IntT(1), t.line, pending)
            src = cur
            if pending:
                src = self.fresh_location(b.label)
                self._edge(cur, pending, src)
            self._edge(src, [], t.targets[0], Instruction(Op.ASSUME, None, (c,)))
            self._edge(src, [], t.targets[1], Instruction(Op.NEGASSUME, None, (c,)))

    def _assert(self, ins: IrInstr, cur: str, pending: list[Instruction], label: str) -> str:
        if len(ins.args) != 1:
            raise UnsupportedPattern(f"line {ins.line}: assert takes one argument")
        ty = ins.extra[1][0]
        if not isinstance(ty, IntT):
            raise UnsupportedPattern(f"line {ins.line}: assert on {ty}")
        e = self.operand(ins.args[0], ty, ins.line, pending)
        if ty.bits == 1:
            wide = self.temp(UlType.INT8)
            pending.append(Instruction(Op.BOOLZEXT, wide, (e,)))
            e, ty = wide, IntT(8)
        z = self.temp(UlType.BOOL)
        pending.append(Instruction(Op.EQ, z, (e, Const(0, ty.bits))))
        if self.av is None:
            self.av = self.unique_location("AssertViolation", assert_violation=True)
        split = self.fresh_location(label)
        self._edge(cur, pending, split)
        failing = self.fresh_location(label)
        self._edge(split, [], failing, Instruction(Op.ASSUME, None, (z,)))
        self._edge(failing, [], self.av, Instruction(Op.ASSERT))
        cont = self.fresh_location(label)
        self._edge(split, [], cont, Instruction(Op.NEGASSUME, None, (z,)))
        return cont

    def _instr(self, ins: IrInstr) -> list[Instruction]:
        out: list[Instruction] = []
        op, a, line = ins.op, ins.args, ins.line
        if op in _BINOP:
            if not isinstance(ins.ty, IntT) or ins.ty.bits == 1:
                raise UnsupportedPattern(f"line {line}: {op} on {ins.ty}")
            x = self.operand(a[0], ins.ty, line, out)
            y = self.operand(a[1], ins.ty, line, out)
            out.append(Instruction(_BINOP[op], self.reg(ins.dest, line), (x, y)))
        elif op == "icmp":
            out.extend(self._icmp(ins))
        elif op in ("zext", "sext", "trunc"):
            out.extend(self._cast(ins))
        elif op == "load":
            p = self.operand(a[0], PTR, line, out)
            dest = self.reg(ins.dest, line)
            if ins.ty == IntT(1):
                t = self.temp(UlType.INT8)
                out.append(Instruction(Op.LOAD, t, (p,)))
                out.append(Instruction(Op.NEQ, dest, (t, Const(0, 8))))
            else:
                ul_type(ins.ty, line)
                out.append(Instruction(Op.LOAD, dest, (p,)))
        elif op == "store":
            p = self.operand(a[1], PTR, line, out)
            if ins.ty == IntT(1):
                if isinstance(a[0], IntLit):
                    v = Const(a[0].value & 1, 8)
                else:
                    b = self.operand(a[0], ins.ty, line, out)
                    v = self.temp(UlType.INT8)
                    out.append(Instruction(Op.BOOLZEXT, v, (b,)))
            else:
                v = self.operand(a[0], ins.ty, line, out)
            out.append(Instruction(Op.STORE, None, (p, v)))
        elif op == "alloca":
            addr = self.alloca_addr.get(id(ins))
            if addr is None:
                addr = self.alloca_addr[id(ins)] = self.next_addr
                self.next_addr += ins.ty.size
            dest = self.reg(ins.dest, line)
            out.append(Instruction(Op.DECL, dest))
            out.append(Instruction(Op.COPY, dest, (Const(addr, 64, addr=True),)))
        elif op == "getelementptr":
            out.extend(self._gep(ins))
        elif op == "call":
            callee = ins.extra[0]
            if callee not in self.declared:
                raise UnsupportedPattern(f"line {line}: call to @{callee} was not inlined")
            if ins.dest is not None:
                dest = self.reg(ins.dest, line)
                if dest.type is UlType.ADDR:
                    raise UnsupportedPattern(f"line {line}: @{callee} returns a pointer")
                out.append(Instruction(Op.NONDET, dest))
        elif op == "copy":
            dest = self.reg(ins.dest, line)
            if isinstance(a[0], IntLit) and ins.ty == IntT(1):
                zero = Const(0, 8)
                out.append(Instruction(Op.EQ if a[0].value & 1 else Op.NEQ, dest, (zero, zero)))
            else:
                out.append(Instruction(Op.COPY, dest, (self.operand(a[0], ins.ty, line, out),)))
        else:
            raise UnsupportedPattern(f"line {line}: cannot lower {op}")
        return out

    def _icmp(self, ins: IrInstr) -> list[Instruction]:
        out: list[Instruction] = []
        ty, line = ins.ty, ins.line
        if not isinstance(ty, IntT):
            raise UnsupportedPattern(f"line {line}: icmp on {ty}")
        x = self.operand(ins.args[0], ty, line, out)
        y = self.operand(ins.args[1], ty, line, out)
        if ty.bits == 1:
            wx, wy = self.temp(UlType.INT8), self.temp(UlType.INT8)
            out.append(Instruction(Op.BOOLZEXT, wx, (x,)))
            out.append(Instruction(Op.BOOLZEXT, wy, (y,)))
            x, y = wx, wy
        dest = self.reg(ins.dest, line)
        pred = ins.extra
        if pred in _DIRECT_CMP:
            out.append(Instruction(_DIRECT_CMP[pred], dest, (x, y)))
        else:
            t = self.temp(UlType.BOOL)
            u = self.temp(UlType.INT8)
            out.append(Instruction(_NEGATED_CMP[pred], t, (x, y)))
            out.append(Instruction(Op.BOOLZEXT, u, (t,)))
            out.append(Instruction(Op.EQ, dest, (u, Const(0, 8))))
        return out

    def _cast(self, ins: IrInstr) -> list[Instruction]:
        out: list[Instruction] = []
        src_ty, to, line = ins.extra, ins.ty, ins.line
        if not (isinstance(src_ty, IntT) and isinstance(to, IntT)):
            raise UnsupportedPattern(f"line {line}: {ins.op} from {src_ty} to {to}")
        x = self.operand(ins.args[0], src_ty, line, out)
        dest = self.reg(ins.dest, line)
        if ins.op == "trunc":
            if to.bits > src_ty.bits:
                raise UnsupportedPattern(f"line {line}: trunc to a wider type")
            if to.bits == src_ty.bits:
                out.append(Instruction(Op.COPY, dest, (x,)))
            elif to.bits == 1:
                w = src_ty.bits
                t = self.temp(UlType.int_of_width(w))
                out.append(Instruction(Op.LSHL, t, (x, Const(w - 1, w))))
                out.append(Instruction(Op.NEQ, dest, (t, Const(0, w))))
            else:
                out.append(Instruction(Op.TRUNC, dest, (x,)))
            return out
        if to.bits < src_ty.bits:
            raise UnsupportedPattern(f"line {line}: {ins.op} to a narrower type")
        if to.bits == src_ty.bits:
            out.append(Instruction(Op.COPY, dest, (x,)))
        elif src_ty.bits == 1:
            out.append(Instruction(Op.BOOLZEXT if ins.op == "zext" else Op.BOOLSEXT, dest, (x,)))
        else:
            out.append(Instruction(Op.ZEXT if ins.op == "zext" else Op.SEXT, dest, (x,)))
        return out

    def _gep(self, ins: IrInstr) -> list[Instruction]:
        out: list[Instruction] = []
        line = ins.line
        base = self.operand(ins.args[0], PTR, line, out)
        idx_types = ins.extra
        offset = 0
        dynamic = None
        cur = ins.ty
        for pos, (ity, v) in enumerate(zip(idx_types, ins.args[1:])):
            if pos == 0:
                scale = cur.size
            elif isinstance(cur, ArrayT):
                scale = cur.elem.size
                cur = cur.elem
            elif isinstance(cur, StructT):
                if not isinstance(v, IntLit) or not 0 <= v.value < len(cur.fields):
                    raise UnsupportedPattern(f"line {line}: struct field index must be a valid constant")
                offset += cur.offset(v.value)
                cur = cur.fields[v.value]
                continue
            else:
                raise UnsupportedPattern(f"line {line}: cannot index into {cur}")
            if isinstance(v, IntLit):
                offset += v.value * scale
            else:
                if dynamic is not None:
                    raise UnsupportedPattern(f"line {line}: at most one dynamic gep index is supported")
                if not isinstance(ity, IntT) or ity.bits == 1:
                    raise UnsupportedPattern(f"line {line}: gep index of type {ity}")
                dynamic = (self.operand(v, ity, line, out), ity.bits, scale)
        dest = self.reg(ins.dest, line)
        if dynamic is not None:
            r, bits, scale = dynamic
            wide = self.temp(UlType.INT64)
            out.append(Instruction(Op.SEXT if bits < 64 else Op.COPY, wide, (r,)))
            scaled = self.temp(UlType.INT64)
            out.append(Instruction(Op.MULT, scaled, (wide, Const(scale, 64))))
            moved = self.temp(UlType.ADDR)
            out.append(Instruction(Op.ADD, moved, (base, scaled)))
            base = moved
        out.append(Instruction(Op.ADD, dest, (base, int_const(offset, 64, line))))
        return out


def int_const(value: int, bits: int, line: int | None = None) -> Const:
    if not -(1 << (bits - 1)) <= value < (1 << bits):
        raise UnsupportedPattern(f"line {line}: constant {value} does not fit i{bits}")
    if value < 0:
        return Const(value, bits, signed=True)
    return Const(value, bits)


def lower_function(fn: IrFunction, table: GlobalsTable, base: int | None = None,
                   declared: set[str] | None = None, name: str | None = None) -> Cfa:
    """Lower an inlined, phi-free function.  Allocas get consecutive static
    addresses starting at ``base`` (default: just past the globals)."""
    low = _Lowering(fn, table, table.size if base is None else base,
                    {ASSERT_NAME} if declared is None else declared)
    return low.run(name or fn.name)


@dataclass
class BuildStats:
    name: str
    locations: int
    edges: int
    frame: int


class NetworkBuildError(FrontendError):
    pass


def build_network(module: IrModule, entries: list[str], memsize: int,
                  stats: list | None = None, normalized: bool = True) -> Network:
    """One CFA per entry; globals and then one frame per entry fill the
    static prefix of memory.  The result is validated and (unless
    ``normalized`` is false) normalized."""
    if not entries:
        raise NetworkBuildError("at least one entry point is required")
    if len(set(entries)) != len(entries):
        raise NetworkBuildError("entry points must be distinct")
    table = GlobalsTable.layout(module)
    declared = set(module.declarations)
    at = table.size
    cfas = []
    for entry in entries:
        if module.function(entry) is None:
            raise UnknownFunction(f"unknown entry point @{entry}")
        fn = inline_calls(module, entry)
        size = frame_size(fn)
        cfa = lower_function(fn, table, at, declared, entry)
        if stats is not None:
            stats.append(BuildStats(entry, len(cfa.locations), len(cfa.edges), size))
        at += size
        cfas.append(cfa)
    if at > memsize:
        raise FrameOverflow(f"static data needs {at} bytes, memsize is {memsize}")
    net = Network(tuple(cfas), tuple(table.registers()), memsize, at, tuple(table.data()))
    errs = validate(net)
    if errs:
        raise NetworkBuildError("; ".join(str(e) for e in errs))
    if not normalized:
        return net
    net = normalize(net)
    errs = validate(net)
    if errs:
        raise NetworkBuildError("; ".join(str(e) for e in errs))
    return net
