"""Reader and writer for ``.ul`` model files.

::

    memsize 64
    static 8                      # optional: bytes reserved before the bump pointer
    data 0 2a000000               # optional: initial memory bytes (hex)
    global turn : Addr = 0
    process p
      register r : Int8
      location start init
      location done term
      edge start -> done : r ← Add r, [1]^Int8
    end
"""
from __future__ import annotations

import re

from .cfa import Cfa, Edge, GlobalRegister, Location, Network
from .ulcore import (
    IDENT, DuplicateName, Register, UlSyntaxError, UlType, UlTypeError, UnknownLocation,
    parse_sequence, typecheck_sequence,
)

_NAME = re.compile(IDENT + r"$")
_LOCNAME = re.compile(r"[A-Za-z0-9_.$]+$")
_FLAGS = {"init", "term", "assertviolation", "synthetic"}


def _name(tok: str, lineno: int, loc: bool = False) -> str:
    if not (_LOCNAME if loc else _NAME).match(tok):
        raise UlSyntaxError(f"bad name {tok!r}", lineno)
    return tok


def _typed(rest: str, lineno: int) -> tuple[str, UlType, str | None]:
    m = re.fullmatch(r"(\S+)\s*:\s*(\w+)\s*(?:=\s*([+-]?\d+))?", rest)
    if m is None:
        raise UlSyntaxError("expected '<name> : <type> [= <int>]'", lineno)
    try:
        ty = UlType.parse(m.group(2))
    except UlSyntaxError:
        raise UlSyntaxError(f"unknown type {m.group(2)!r}", lineno) from None
    return _name(m.group(1), lineno), ty, m.group(3)


def parse_program(text: str) -> Network:
    memsize = None
    static = 0
    data: list[tuple[int, bytes]] = []
    globals_: list[GlobalRegister] = []
    procs: list[dict] = []
    cur = None
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        word, _, rest = line.partition(" ")
        rest = rest.strip()
        if cur is None:
            if word == "memsize":
                memsize = _natural(rest, lineno)
            elif word == "static":
                static = _natural(rest, lineno)
            elif word == "data":
                parts = rest.split()
                if len(parts) != 2:
                    raise UlSyntaxError("expected 'data <addr> <hex>'", lineno)
                try:
                    blob = bytes.fromhex(parts[1])
                except ValueError:
                    raise UlSyntaxError("bad hex data", lineno) from None
                data.append((_natural(parts[0], lineno), blob))
            elif word == "global":
                name, ty, init = _typed(rest, lineno)
                if any(g.name == name for g in globals_):
                    raise DuplicateName(f"line {lineno}: global {name!r} declared twice")
                globals_.append(GlobalRegister(name, ty, _init_value(init, ty, lineno)))
            elif word == "process":
                cur = {"name": _name(rest, lineno), "regs": {}, "locs": {}, "edges": [], "line": lineno}
                if any(p["name"] == cur["name"] for p in procs):
                    raise DuplicateName(f"line {lineno}: process {rest!r} declared twice")
            else:
                raise UlSyntaxError(f"unexpected {word!r}", lineno)
            continue
        if word == "register":
            name, ty, init = _typed(rest, lineno)
            if init is not None:
                raise UlSyntaxError("local registers take no initializer", lineno)
            if name in cur["regs"] or any(g.name == name for g in globals_):
                raise DuplicateName(f"line {lineno}: register {name!r} already declared")
            cur["regs"][name] = ty
        elif word == "location":
            parts = rest.split()
            if not parts:
                raise UlSyntaxError("location needs a name", lineno)
            name = _name(parts[0], lineno, loc=True)
            flags = set(parts[1:])
            if flags - _FLAGS:
                raise UlSyntaxError(f"unknown location flag(s) {sorted(flags - _FLAGS)}", lineno)
            if name in cur["locs"]:
                raise DuplicateName(f"line {lineno}: location {name!r} declared twice")
            cur["locs"][name] = Location(name, "init" in flags, "term" in flags,
                                         "assertviolation" in flags, "synthetic" in flags)
        elif word == "edge":
            m = re.fullmatch(r"(\S+)\s*->\s*(\S+)\s*:(.*)", rest)
            if m is None:
                raise UlSyntaxError("expected 'edge <from> -> <to> : <sequence>'", lineno)
            cur["edges"].append((m.group(1), m.group(2), m.group(3).strip(), lineno))
        elif word == "end":
            procs.append(cur)
            cur = None
        else:
            raise UlSyntaxError(f"unexpected {word!r} inside process", lineno)
    if cur is not None:
        raise UlSyntaxError(f"process {cur['name']!r} lacks 'end'", cur["line"])
    if memsize is None:
        raise UlSyntaxError("missing 'memsize'", 1)

    gamma_glob = {g.name: g.type for g in globals_}
    cfas = []
    for p in procs:
        gamma = dict(gamma_glob)
        gamma.update(p["regs"])
        inits = [n for n, loc in p["locs"].items() if loc.init]
        if len(inits) != 1:
            raise UlSyntaxError(f"process {p['name']!r} needs exactly one init location", p["line"])
        edges = []
        for src, dst, text_, lineno in p["edges"]:
            for end in (src, dst):
                if end not in p["locs"]:
                    raise UnknownLocation(f"line {lineno}: unknown location {end!r}")
            seq = parse_sequence(text_, gamma, lineno)
            try:
                typecheck_sequence(seq, gamma)
            except UlTypeError as exc:
                raise UlTypeError(exc.index, f"line {lineno}: {exc.reason}") from None
            edges.append(Edge(src, seq, dst))
        regs = tuple(Register(n, t) for n, t in p["regs"].items())
        cfas.append(Cfa(p["name"], regs, tuple(p["locs"].values()), tuple(edges)))
    return Network(tuple(cfas), tuple(globals_), memsize, static, tuple(data))


def _natural(tok: str, lineno: int) -> int:
    if not tok.isdigit():
        raise UlSyntaxError(f"expected a natural number, got {tok!r}", lineno)
    return int(tok)


def _init_value(tok: str | None, ty: UlType, lineno: int) -> int:
    if tok is None:
        return 0
    v = int(tok)
    if ty is UlType.BOOL:
        if v not in (0, 1):
            raise UlSyntaxError("Bool initializer must be 0 or 1", lineno)
        return v
    w = ty.width
    if not -(1 << (w - 1)) <= v < (1 << w):
        raise UlSyntaxError(f"initializer {v} does not fit {ty}", lineno)
    return v & ((1 << w) - 1)


def render_program(net: Network) -> str:
    out = [f"memsize {net.memsize}"]
    if net.static_size:
        out.append(f"static {net.static_size}")
    for addr, blob in net.data:
        out.append(f"data {addr} {blob.hex()}")
    for g in net.globals:
        out.append(f"global {g.name} : {g.type}" + (f" = {g.init}" if g.init else ""))
    for c in net.cfas:
        out.append("")
        out.append(f"process {c.name}")
        for r in c.registers:
            out.append(f"  register {r.name} : {r.type}")
        for loc in c.locations:
            flags = [f for f, on in (("init", loc.init), ("term", loc.term),
                                     ("assertviolation", loc.assert_violation),
                                     ("synthetic", loc.synthetic)) if on]
            out.append("  location " + " ".join([loc.name, *flags]))
        for e in c.edges:
            out.append(f"  edge {e.src} -> {e.dst} : {e.seq}".rstrip())
        out.append("end")
    return "\n".join(out) + "\n"
