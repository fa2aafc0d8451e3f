"""Parser for the subset IR (``.sir``): an LLVM-like, phi-free,
alloca/load/store style register language.

Grammar (one item per line, ``;`` starts a comment)::

    @g = global <type> <int | zeroinitializer>
    declare <ret> @name(<type>, ...)
    define <ret> @name(<type> %p, ...) {
    <label>:
      %x = add|sub|mul|udiv|sdiv|shl|ashr|lshr <type> <v>, <v>
      %x = icmp eq|ne|ule|sle|uge|sge|ult|slt|ugt|sgt <type> <v>, <v>
      %x = zext|sext|trunc <type> <v> to <type>
      %x = load <type>, ptr <v>
      store <type> <v>, ptr <v>
      %x = alloca <type>
      %x = getelementptr <type>, ptr <v>, <type> <v>, ...
      [%x =] call <ret> @f(<type> <v>, ...)
      br label %l  |  br i1 <v>, label %a, label %b
      ret void  |  ret <type> <v>
    }

Types are ``i1 i8 i16 i32 i64``, ``ptr`` (typed pointers such as ``i32*``
are accepted as ``ptr``), arrays ``[N x T]`` and literal structs
``{T, ...}``.  Aggregates are laid out packed.  ``nsw``/``nuw``/``exact``
flags, ``dso_local`` and ``, align N`` suffixes are ignored.
"""
from __future__ import annotations

import re
from dataclasses import dataclass, field

from ..ulcore import UlError


class FrontendError(UlError):
    pass


class SirSyntaxError(FrontendError):
    def __init__(self, message: str, line: int | None = None):
        super().__init__(f"line {line}: {message}" if line else message)
        self.line = line


class UnsupportedInstruction(FrontendError):
    def __init__(self, name: str, line: int | None = None):
        super().__init__(f"line {line}: unsupported instruction {name!r}" if line
                         else f"unsupported instruction {name!r}")
        self.name = name
        self.line = line


class PhiNotSupported(UnsupportedInstruction):
    def __init__(self, line: int | None = None):
        super().__init__("phi", line)


# --- types ---------------------------------------------------------------------

@dataclass(frozen=True)
class IntT:
    bits: int

    @property
    def size(self) -> int:
        return max(1, self.bits // 8)

    def __str__(self) -> str:
        return f"i{self.bits}"


@dataclass(frozen=True)
class PtrT:
    size = 8

    def __str__(self) -> str:
        return "ptr"


@dataclass(frozen=True)
class ArrayT:
    count: int
    elem: object

    @property
    def size(self) -> int:
        return self.count * self.elem.size

    def __str__(self) -> str:
        return f"[{self.count} x {self.elem}]"


@dataclass(frozen=True)
class StructT:
    fields: tuple

    @property
    def size(self) -> int:
        return sum(f.size for f in self.fields)

    def offset(self, k: int) -> int:
        return sum(f.size for f in self.fields[:k])

    def __str__(self) -> str:
        return "{" + ", ".join(str(f) for f in self.fields) + "}"


@dataclass(frozen=True)
class VoidT:
    size = 0

    def __str__(self) -> str:
        return "void"


VOID = VoidT()
PTR = PtrT()
I1 = IntT(1)


# --- values and instructions ----------------------------------------------------

@dataclass(frozen=True)
class Local:
    name: str           # including the leading '%'

    def __str__(self) -> str:
        return self.name


@dataclass(frozen=True)
class GlobalRef:
    name: str           # without '@'

    def __str__(self) -> str:
        return "@" + self.name


@dataclass(frozen=True)
class IntLit:
    value: int

    def __str__(self) -> str:
        return str(self.value)


@dataclass(frozen=True)
class IrInstr:
    """``op`` is the IR opcode; ``ty`` the result (or stored/compared) type.

    ``args`` holds operands; ``extra`` holds opcode specific data: the icmp
    predicate, the cast target type, the gep index types, the callee name.
    """

    op: str
    dest: Local | None
    ty: object
    args: tuple = ()
    extra: object = None
    line: int = 0


@dataclass(frozen=True)
class Br:
    cond: object | None
    targets: tuple[str, ...]
    line: int = 0


@dataclass(frozen=True)
class Ret:
    ty: object
    value: object | None = None
    line: int = 0


@dataclass
class Block:
    label: str
    instrs: list = field(default_factory=list)
    term: object = None


@dataclass
class IrFunction:
    name: str
    ret: object
    params: list[tuple[object, Local]]
    blocks: list[Block]

    def block(self, label: str) -> Block:
        for b in self.blocks:
            if b.label == label:
                return b
        raise KeyError(label)


@dataclass
class IrGlobal:
    name: str
    ty: object
    init: int = 0


@dataclass
class IrModule:
    globals: list[IrGlobal] = field(default_factory=list)
    functions: list[IrFunction] = field(default_factory=list)
    declarations: dict[str, tuple] = field(default_factory=dict)   # name -> (ret, param types)

    def function(self, name: str) -> IrFunction | None:
        for f in self.functions:
            if f.name == name:
                return f
        return None

    def global_(self, name: str) -> IrGlobal | None:
        for g in self.globals:
            if g.name == name:
                return g
        return None


# --- parsing -------------------------------------------------------------------

BINOPS = {"add", "sub", "mul", "udiv", "sdiv", "shl", "ashr", "lshr"}
CASTS = {"zext", "sext", "trunc"}
PREDICATES = {"eq", "ne", "ule", "sle", "uge", "sge", "ult", "slt", "ugt", "sgt"}
KNOWN_UNSUPPORTED = {
    "and", "or", "xor", "urem", "srem", "fadd", "fsub", "fmul", "fdiv", "frem", "fcmp",
    "select", "switch", "unreachable", "invoke", "bitcast", "ptrtoint", "inttoptr",
    "extractvalue", "insertvalue", "extractelement", "insertelement", "shufflevector",
    "atomicrmw", "cmpxchg", "fence", "va_arg", "landingpad", "indirectbr", "freeze",
    "fptrunc", "fpext", "fptoui", "fptosi", "uitofp", "sitofp", "addrspacecast", "resume",
}
_IGNORED = {"nsw", "nuw", "exact", "dso_local", "noundef", "inbounds", "local_unnamed_addr",
            "internal", "private", "volatile", "signext", "zeroext"}

_TOK = re.compile(r"""
    \s*(?:
      (?P<local>%[A-Za-z0-9_.$]+)
    | (?P<global>@[A-Za-z0-9_.$]+)
    | (?P<int>-?\d+)
    | (?P<word>[A-Za-z_][A-Za-z0-9_.]*\**)
    | (?P<punct>[(){}\[\],=*:])
    )""", re.VERBOSE)


class _Tokens:
    def __init__(self, text: str, line: int):
        self.line = line
        self.toks: list[tuple[str, str]] = []
        pos = 0
        text = text.rstrip()
        while pos < len(text):
            m = _TOK.match(text, pos)
            if m is None or m.end() == pos:
                raise SirSyntaxError(f"unexpected character {text[pos:].strip()[:1]!r}", line)
            kind = m.lastgroup
            val = m.group(kind)
            if not (kind == "word" and val in _IGNORED):
                self.toks.append((kind, val))
            pos = m.end()
        self.i = 0
        self._strip_align()

    def _strip_align(self):
        t = self.toks
        if len(t) >= 3 and t[-2] == ("word", "align") and t[-1][0] == "int" and t[-3] == ("punct", ","):
            del t[-3:]

    def peek(self, val: str | None = None, kind: str | None = None) -> bool:
        if self.i >= len(self.toks):
            return False
        k, v = self.toks[self.i]
        return (val is None or v == val) and (kind is None or k == kind)

    def next(self, val: str | None = None, kind: str | None = None) -> str:
        if not self.peek(val, kind):
            got = self.toks[self.i][1] if self.i < len(self.toks) else "end of line"
            raise SirSyntaxError(f"expected {val or kind}, found {got!r}", self.line)
        self.i += 1
        return self.toks[self.i - 1][1]

    def done(self) -> bool:
        return self.i >= len(self.toks)

    def end(self):
        if not self.done():
            raise SirSyntaxError(f"trailing {self.toks[self.i][1]!r}", self.line)

    def type(self):
        if self.peek("["):
            self.next("[")
            n = int(self.next(kind="int"))
            if self.next(kind="word") != "x":
                raise SirSyntaxError("expected 'x' in array type", self.line)
            elem = self.type()
            self.next("]")
            return self._stars(ArrayT(n, elem))
        if self.peek("{"):
            self.next("{")
            fields = [self.type()]
            while self.peek(","):
                self.next(",")
                fields.append(self.type())
            self.next("}")
            return self._stars(StructT(tuple(fields)))
        w = self.next(kind="word")
        base, stars = w.rstrip("*"), len(w) - len(w.rstrip("*"))
        if base == "ptr":
            ty = PTR
        elif base == "void":
            ty = VOID
        elif re.fullmatch(r"i(1|8|16|32|64)", base):
            ty = IntT(int(base[1:]))
        else:
            raise SirSyntaxError(f"unknown type {w!r}", self.line)
        return PTR if stars else self._stars(ty)

    def _stars(self, ty):
        if self.peek("*"):
            while self.peek("*"):
                self.next("*")
            return PTR
        return ty

    def value(self):
        if self.peek(kind="local"):
            return Local(self.next())
        if self.peek(kind="global"):
            return GlobalRef(self.next()[1:])
        if self.peek(kind="int"):
            return IntLit(int(self.next()))
        if self.peek("true"):
            self.next()
            return IntLit(1)
        if self.peek("false"):
            self.next()
            return IntLit(0)
        if self.peek("null"):
            self.next()
            return IntLit(0)
        got = self.toks[self.i][1] if self.i < len(self.toks) else "end of line"
        raise SirSyntaxError(f"expected a value, found {got!r}", self.line)

    def label(self) -> str:
        self.next("label")
        return self.next(kind="local")[1:]


def parse_subset_ir(text: str) -> IrModule:
    mod = IrModule()
    fn: IrFunction | None = None
    block: Block | None = None
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split(";", 1)[0].strip()
        if not line:
            continue
        if fn is None:
            _top_level(mod, line, lineno)
            if line.startswith("define"):
                fn = _header(line, lineno)
                block = None
            continue
        if line == "}":
            if block is not None and block.term is None:
                raise SirSyntaxError(f"block {block.label!r} lacks a terminator", lineno)
            if not fn.blocks:
                raise SirSyntaxError(f"function @{fn.name} has no blocks", lineno)
            _check_labels(fn, lineno)
            mod.functions.append(fn)
            fn = None
            continue
        m = re.fullmatch(r"([A-Za-z0-9_.$]+):", line)
        if m:
            if block is not None and block.term is None:
                raise SirSyntaxError(f"block {block.label!r} lacks a terminator", lineno)
            if any(b.label == m.group(1) for b in fn.blocks):
                raise SirSyntaxError(f"duplicate label {m.group(1)!r}", lineno)
            block = Block(m.group(1))
            fn.blocks.append(block)
            continue
        if block is None:
            block = Block("entry")
            fn.blocks.append(block)
        elif block.term is not None:
            raise SirSyntaxError("instruction after terminator", lineno)
        item = _instruction(line, lineno)
        if isinstance(item, (Br, Ret)):
            block.term = item
        else:
            block.instrs.append(item)
    if fn is not None:
        raise SirSyntaxError(f"function @{fn.name} lacks a closing '}}'", None)
    names = [f.name for f in mod.functions]
    for n in names:
        if names.count(n) > 1 or n in mod.declarations:
            raise SirSyntaxError(f"function @{n} defined twice")
    _check_callees(mod)
    return mod


def _top_level(mod: IrModule, line: str, lineno: int) -> None:
    if line.startswith("define"):
        return
    t = _Tokens(line, lineno)
    if t.peek(kind="global"):
        name = t.next()[1:]
        t.next("=")
        kind = t.next(kind="word")
        if kind not in ("global", "constant"):
            raise SirSyntaxError(f"expected 'global', found {kind!r}", lineno)
        ty = t.type()
        if t.peek("zeroinitializer"):
            t.next()
            init = 0
        else:
            v = t.value()
            if not isinstance(v, IntLit) or not isinstance(ty, IntT):
                raise SirSyntaxError("global initializers must be integers or zeroinitializer", lineno)
            init = v.value
        t.end()
        if mod.global_(name):
            raise SirSyntaxError(f"global @{name} defined twice", lineno)
        mod.globals.append(IrGlobal(name, ty, init))
        return
    if t.peek("declare"):
        t.next()
        ret = t.type()
        name = t.next(kind="global")[1:]
        t.next("(")
        params = []
        while not t.peek(")"):
            params.append(t.type())
            if t.peek(kind="local"):
                t.next()
            if not t.peek(")"):
                t.next(",")
        t.next(")")
        t.end()
        mod.declarations[name] = (ret, tuple(params))
        return
    if t.peek(kind="word") and t.toks[0][1] == "source_filename" or line.startswith("target "):
        return
    raise SirSyntaxError(f"unexpected top-level line {line!r}", lineno)


def _header(line: str, lineno: int) -> IrFunction:
    t = _Tokens(line, lineno)
    t.next("define")
    ret = t.type()
    name = t.next(kind="global")[1:]
    t.next("(")
    params = []
    while not t.peek(")"):
        ty = t.type()
        params.append((ty, Local(t.next(kind="local"))))
        if not t.peek(")"):
            t.next(",")
    t.next(")")
    while t.peek(kind="word"):   # attributes such as #0 are not tokens; skip words
        t.next()
    t.next("{")
    t.end()
    return IrFunction(name, ret, params, [])


def _args(t: _Tokens) -> list[tuple[object, object]]:
    t.next("(")
    out = []
    while not t.peek(")"):
        ty = t.type()
        out.append((ty, t.value()))
        if not t.peek(")"):
            t.next(",")
    t.next(")")
    return out


_OPCODE = re.compile(r"(?:%[-\w.$]+\s*=\s*)?(?:tail\s+)?([a-z_]+)\b")


def _instruction(line: str, lineno: int):
    m = _OPCODE.match(line)
    if m and m.group(1) in KNOWN_UNSUPPORTED:
        # before tokenizing, so float literals and the like cannot mask the name
        raise UnsupportedInstruction(m.group(1), lineno)
    t = _Tokens(line, lineno)
    dest = None
    if t.peek(kind="local") and len(t.toks) > 1 and t.toks[1] == ("punct", "="):
        dest = Local(t.next())
        t.next("=")
    if t.peek("tail"):
        t.next()
    op = t.next(kind="word")

    def need_dest():
        if dest is None:
            raise SirSyntaxError(f"{op} needs a destination", lineno)

    def no_dest():
        if dest is not None:
            raise SirSyntaxError(f"{op} has no result", lineno)

    if op == "phi":
        raise PhiNotSupported(lineno)
    if op in BINOPS:
        need_dest()
        ty = t.type()
        a = t.value()
        t.next(",")
        b = t.value()
        t.end()
        return IrInstr(op, dest, ty, (a, b), line=lineno)
    if op == "icmp":
        need_dest()
        pred = t.next(kind="word")
        if pred not in PREDICATES:
            raise SirSyntaxError(f"unknown icmp predicate {pred!r}", lineno)
        ty = t.type()
        a = t.value()
        t.next(",")
        b = t.value()
        t.end()
        return IrInstr(op, dest, ty, (a, b), pred, lineno)
    if op in CASTS:
        need_dest()
        src_ty = t.type()
        a = t.value()
        t.next("to")
        to = t.type()
        t.end()
        return IrInstr(op, dest, to, (a,), src_ty, lineno)
    if op == "load":
        need_dest()
        ty = t.type()
        t.next(",")
        t.type()
        p = t.value()
        t.end()
        return IrInstr(op, dest, ty, (p,), line=lineno)
    if op == "store":
        no_dest()
        ty = t.type()
        v = t.value()
        t.next(",")
        t.type()
        p = t.value()
        t.end()
        return IrInstr(op, None, ty, (v, p), line=lineno)
    if op == "alloca":
        need_dest()
        ty = t.type()
        t.end()
        return IrInstr(op, dest, ty, (), line=lineno)
    if op == "getelementptr":
        need_dest()
        base = t.type()
        t.next(",")
        t.type()
        p = t.value()
        idx_types, idx = [], []
        while t.peek(","):
            t.next(",")
            idx_types.append(t.type())
            idx.append(t.value())
        t.end()
        if not idx:
            raise SirSyntaxError("getelementptr needs at least one index", lineno)
        return IrInstr(op, dest, base, (p, *idx), tuple(idx_types), lineno)
    if op == "call":
        ret = t.type()
        callee = t.next(kind="global")[1:]
        args = _args(t)
        t.end()
        if dest is not None and ret is VOID:
            raise SirSyntaxError("void call cannot have a result", lineno)
        return IrInstr(op, dest, ret, tuple(v for _, v in args), (callee, tuple(ty for ty, _ in args)), lineno)
    if op == "copy":    # produced by inlining; accepted for round trips
        need_dest()
        ty = t.type()
        a = t.value()
        t.end()
        return IrInstr(op, dest, ty, (a,), line=lineno)
    if op == "br":
        no_dest()
        if t.peek("label"):
            target = t.label()
            t.end()
            return Br(None, (target,), lineno)
        ty = t.type()
        if ty != I1:
            raise SirSyntaxError("conditional branch needs an i1 condition", lineno)
        c = t.value()
        t.next(",")
        a = t.label()
        t.next(",")
        b = t.label()
        t.end()
        return Br(c, (a, b), lineno)
    if op == "ret":
        no_dest()
        ty = t.type()
        if ty is VOID:
            t.end()
            return Ret(VOID, None, lineno)
        v = t.value()
        t.end()
        return Ret(ty, v, lineno)
    if op in KNOWN_UNSUPPORTED:
        raise UnsupportedInstruction(op, lineno)
    raise UnsupportedInstruction(op, lineno)


def _check_labels(fn: IrFunction, lineno: int) -> None:
    labels = {b.label for b in fn.blocks}
    for b in fn.blocks:
        if isinstance(b.term, Br):
            for tgt in b.term.targets:
                if tgt not in labels:
                    raise SirSyntaxError(f"@{fn.name}: branch to unknown label {tgt!r}", b.term.line)


def _check_callees(mod: IrModule) -> None:
    defined = {f.name for f in mod.functions}
    for f in mod.functions:
        for b in f.blocks:
            for ins in b.instrs:
                if ins.op == "call":
                    callee = ins.extra[0]
                    if callee not in defined and callee not in mod.declarations:
                        raise SirSyntaxError(f"call to undeclared function @{callee}", ins.line)


def render_ir(fn: IrFunction) -> str:
    """Text form of a single function (used to inspect inlining results)."""
    out = [f"define {fn.ret} @{fn.name}(" + ", ".join(f"{ty} {p}" for ty, p in fn.params) + ") {"]
    for b in fn.blocks:
        out.append(f"{b.label}:")
        for ins in b.instrs:
            out.append("  " + _render_instr(ins))
        out.append("  " + _render_term(b.term))
    out.append("}")
    return "\n".join(out) + "\n"


def _render_instr(ins: IrInstr) -> str:
    d = f"{ins.dest} = " if ins.dest is not None else ""
    a = ins.args
    if ins.op in BINOPS:
        return f"{d}{ins.op} {ins.ty} {a[0]}, {a[1]}"
    if ins.op == "icmp":
        return f"{d}icmp {ins.extra} {ins.ty} {a[0]}, {a[1]}"
    if ins.op in CASTS:
        return f"{d}{ins.op} {ins.extra} {a[0]} to {ins.ty}"
    if ins.op == "load":
        return f"{d}load {ins.ty}, ptr {a[0]}"
    if ins.op == "store":
        return f"store {ins.ty} {a[0]}, ptr {a[1]}"
    if ins.op == "alloca":
        return f"{d}alloca {ins.ty}"
    if ins.op == "getelementptr":
        idx = "".join(f", {ty} {v}" for ty, v in zip(ins.extra, a[1:]))
        return f"{d}getelementptr {ins.ty}, ptr {a[0]}{idx}"
    if ins.op == "call":
        callee, tys = ins.extra
        args = ", ".join(f"{ty} {v}" for ty, v in zip(tys, a))
        return f"{d}call {ins.ty} @{callee}({args})"
    if ins.op == "copy":
        return f"{d}copy {ins.ty} {a[0]}"
    raise AssertionError(ins.op)


def _render_term(term) -> str:
    if isinstance(term, Ret):
        return "ret void" if term.value is None else f"ret {term.ty} {term.value}"
    if term.cond is None:
        return f"br label %{term.targets[0]}"
    return f"br i1 {term.cond}, label %{term.targets[0]}, label %{term.targets[1]}"
