"""Control-flow automata, their parallel composition and the normalization
pipeline (memory-access splitting, Term/AssertViolation sinks)."""
from __future__ import annotations

import itertools
from collections import deque
from dataclasses import dataclass, replace
from typing import Iterator, Sequence

from .machine import (
    Env, Guard, Memory, Status, StepOutcome, check_guard, domain, replay_chooser, step_sequence,
    zero_value,
)
from .ulcore import (
    Const, EMPTY, Instruction, InstructionSequence, Op, Register, UlError, UlType, UlTypeError,
    typecheck_sequence,
)

DEFAULT_NONDET_CAP = 1 << 16


class RefusedExpansion(UlError):
    pass


@dataclass(frozen=True)
class Location:
    name: str
    init: bool = False
    term: bool = False
    assert_violation: bool = False
    synthetic: bool = False

    @property
    def is_sink(self) -> bool:
        return self.term or self.assert_violation


@dataclass(frozen=True)
class Edge:
    src: str
    seq: InstructionSequence
    dst: str


@dataclass(frozen=True)
class GlobalRegister:
    name: str
    type: UlType
    init: int = 0


@dataclass(frozen=True)
class Cfa:
    name: str
    registers: tuple[Register, ...]
    locations: tuple[Location, ...]
    edges: tuple[Edge, ...]

    def location(self, name: str) -> Location:
        for loc in self.locations:
            if loc.name == name:
                return loc
        raise KeyError(name)

    @property
    def init(self) -> str:
        return next(loc.name for loc in self.locations if loc.init)

    @property
    def term(self) -> str | None:
        return next((loc.name for loc in self.locations if loc.term), None)

    @property
    def assert_violation(self) -> str | None:
        return next((loc.name for loc in self.locations if loc.assert_violation), None)

    def outgoing(self, loc: str) -> list[tuple[int, Edge]]:
        return [(k, e) for k, e in enumerate(self.edges) if e.src == loc]


@dataclass(frozen=True)
class Network:
    cfas: tuple[Cfa, ...]
    globals: tuple[GlobalRegister, ...] = ()
    memsize: int = 0
    static_size: int = 0
    data: tuple[tuple[int, bytes], ...] = ()

    def gamma(self, cfa: Cfa) -> dict[str, UlType]:
        g = {r.name: r.type for r in self.globals}
        g.update({r.name: r.type for r in cfa.registers})
        return g

    def cfa_index(self, name: str) -> int:
        for k, c in enumerate(self.cfas):
            if c.name == name:
                return k
        raise KeyError(name)


@dataclass(frozen=True)
class WellFormednessError:
    kind: str
    message: str

    def __str__(self) -> str:
        return f"{self.kind}: {self.message}"


def validate(net: Network) -> list[WellFormednessError]:
    errs: list[WellFormednessError] = []

    def err(kind, msg):
        errs.append(WellFormednessError(kind, msg))

    gnames = [g.name for g in net.globals]
    for name in {n for n in gnames if gnames.count(n) > 1}:
        err("DuplicateName", f"global {name!r} declared twice")
    cnames = [c.name for c in net.cfas]
    for name in {n for n in cnames if cnames.count(n) > 1}:
        err("DuplicateName", f"process {name!r} declared twice")
    if net.static_size > net.memsize:
        err("FrameOverflow", f"static region {net.static_size} exceeds memsize {net.memsize}")
    for addr, blob in net.data:
        if addr < 0 or addr + len(blob) > net.memsize:
            err("FrameOverflow", f"data block at {addr} exceeds memsize {net.memsize}")
    for cfa in net.cfas:
        where = f"process {cfa.name!r}"
        rnames = [r.name for r in cfa.registers]
        for name in {n for n in rnames if rnames.count(n) > 1}:
            err("DuplicateName", f"{where}: register {name!r} declared twice")
        for name in set(rnames) & set(gnames):
            err("NameClash", f"{where}: register {name!r} shadows a global")
        lnames = [loc.name for loc in cfa.locations]
        for name in {n for n in lnames if lnames.count(n) > 1}:
            err("DuplicateName", f"{where}: location {name!r} declared twice")
        inits = sum(loc.init for loc in cfa.locations)
        if inits == 0:
            err("NoInit", f"{where} has no init location")
        elif inits > 1:
            err("DuplicateInit", f"{where} has {inits} init locations")
        if sum(loc.term for loc in cfa.locations) > 1:
            err("DuplicateTerm", f"{where} has more than one term location")
        if sum(loc.assert_violation for loc in cfa.locations) > 1:
            err("DuplicateAssertViolation", f"{where} has more than one AssertViolation location")
        sinks = {loc.name for loc in cfa.locations if loc.is_sink}
        known = set(lnames)
        gamma = net.gamma(cfa)
        for k, e in enumerate(cfa.edges):
            for end in (e.src, e.dst):
                if end not in known:
                    err("UnknownLocation", f"{where}: edge {k} references {end!r}")
            if e.src in sinks:
                err("EdgeFromSink", f"{where}: edge {k} leaves sink location {e.src!r}")
            try:
                typecheck_sequence(e.seq, gamma)
            except UlTypeError as exc:
                err("TypeError", f"{where}: edge {k} ({e.src} -> {e.dst}): {exc}")
    return errs


# --- normalization ---------------------------------------------------------

def _fresh(base: str, taken: set[str]) -> str:
    if base not in taken:
        taken.add(base)
        return base
    for k in itertools.count(1):
        cand = f"{base}_{k}"
        if cand not in taken:
            taken.add(cand)
            return cand


def _segments(seq: InstructionSequence) -> list[InstructionSequence]:
    """Cut ``seq`` after every memory access (and before trailing work that
    follows the last one)."""
    body = seq.body
    mem_idx = [k for k, ins in enumerate(body) if ins.is_memory]
    if not mem_idx or (len(mem_idx) == 1 and mem_idx[0] == len(body) - 1):
        return [seq]
    chunks, start = [], 0
    for k in mem_idx:
        chunks.append(body[start:k + 1])
        start = k + 1
    if start < len(body):
        chunks.append(body[start:])
    guard = seq.guard
    if guard is not None and guard.op is Op.ASSERT:
        # the violation is flagged by the segment entering AssertViolation
        return ([InstructionSequence(None, c) for c in chunks[:-1]]
                + [InstructionSequence(guard, chunks[-1])])
    return [InstructionSequence(guard, chunks[0])] + [InstructionSequence(None, c) for c in chunks[1:]]


def split_memory_accesses(cfa: Cfa) -> Cfa:
    taken = {loc.name for loc in cfa.locations}
    counters: dict[str, int] = {}
    locations = list(cfa.locations)
    edges: list[Edge] = []
    for e in cfa.edges:
        segs = _segments(e.seq)
        if len(segs) == 1:
            edges.append(e)
            continue
        src = e.src
        for seg in segs[:-1]:
            while True:
                k = counters.get(e.src, 0)
                counters[e.src] = k + 1
                name = f"{e.src}__m{k}"
                if name not in taken:
                    taken.add(name)
                    break
            locations.append(Location(name, synthetic=True))
            edges.append(Edge(src, seg, name))
            src = name
        edges.append(Edge(src, segs[-1], e.dst))
    return replace(cfa, locations=tuple(locations), edges=tuple(edges))


def _normalize_cfa(cfa: Cfa) -> Cfa:
    taken = {loc.name for loc in cfa.locations}
    locations = list(cfa.locations)
    edges = list(cfa.edges)
    av = cfa.assert_violation
    if av is None and any(e.seq.guard is not None and e.seq.guard.op is Op.ASSERT for e in edges):
        av = _fresh("AssertViolation", taken)
        locations.append(Location(av, assert_violation=True))
    if av is not None:
        edges = [replace(e, dst=av) if e.seq.guard is not None and e.seq.guard.op is Op.ASSERT else e
                 for e in edges]
    term = cfa.term
    if term is None:
        term = _fresh("Term", taken)
        locations.append(Location(term, term=True))
    has_out = {e.src for e in edges}
    for loc in list(locations):
        if not loc.is_sink and loc.name not in has_out:
            edges.append(Edge(loc.name, EMPTY, term))
    if av is None:
        av = _fresh("AssertViolation", taken)
        locations.append(Location(av, assert_violation=True))
    return split_memory_accesses(replace(cfa, locations=tuple(locations), edges=tuple(edges)))


def normalize(net: Network) -> Network:
    """Split memory accesses, add the Term/AssertViolation sinks, route
    dead ends into Term and Assert edges into AssertViolation.  Idempotent."""
    return replace(net, cfas=tuple(_normalize_cfa(c) for c in net.cfas))


def materialize_nondet(cfa: Cfa, cap: int = DEFAULT_NONDET_CAP) -> Cfa:
    """Replace each NonDet by one explicit edge per value (``Copy`` of the
    constant; Bool uses ``Eq``/``NEq`` of a constant pair)."""
    edges = []
    for e in cfa.edges:
        nd = [k for k, ins in enumerate(e.seq.body) if ins.op is Op.NONDET]
        if not nd:
            edges.append(e)
            continue
        doms = [list(domain(e.seq.body[k].dest.type)) for k in nd]
        total = 1
        for d in doms:
            total *= len(d)
        if total > cap:
            raise RefusedExpansion(f"{total} branches exceed cap {cap}")
        for combo in itertools.product(*doms):
            body = list(e.seq.body)
            for k, v in zip(nd, combo):
                dest = body[k].dest
                if dest.type is UlType.BOOL:
                    z = Const(0, 8)
                    body[k] = Instruction(Op.EQ if v else Op.NEQ, dest, (z, z))
                elif dest.type is UlType.ADDR:
                    body[k] = Instruction(Op.COPY, dest, (Const(v, 64, addr=True),))
                else:
                    body[k] = Instruction(Op.COPY, dest, (Const(v, dest.type.width),))
            edges.append(Edge(e.src, InstructionSequence(e.seq.guard, tuple(body)), e.dst))
    return replace(cfa, edges=tuple(edges))


# --- discrete states -----------------------------------------------------------

@dataclass(frozen=True)
class DiscreteState:
    locations: tuple[str, ...]
    locals: tuple[tuple, ...]
    globals: tuple
    memory: Memory
    error: bool = False
    assert_hit: bool = False


class CompiledNetwork:
    """Lookup tables for stepping a network; built once per network."""

    def __init__(self, net: Network, nondet_cap: int = DEFAULT_NONDET_CAP):
        self.net = net
        self.nondet_cap = nondet_cap
        self.global_names = tuple(g.name for g in net.globals)
        self.local_names = tuple(tuple(r.name for r in c.registers) for c in net.cfas)
        self.outgoing = [{loc.name: c.outgoing(loc.name) for loc in c.locations} for c in net.cfas]
        self.sinks = [frozenset(loc.name for loc in c.locations if loc.is_sink) for c in net.cfas]
        self.av = [c.assert_violation for c in net.cfas]
        self.nondet_domains = {}
        for i, c in enumerate(net.cfas):
            for k, e in enumerate(c.edges):
                doms = [domain(ins.dest.type) for ins in e.seq.body if ins.op is Op.NONDET]
                self.nondet_domains[i, k] = doms

    def initial(self) -> DiscreteState:
        net = self.net
        if net.static_size > net.memsize:
            raise FrameOverflow(f"static region {net.static_size} exceeds memsize {net.memsize}")
        buf = bytearray(net.memsize)
        for addr, blob in net.data:
            if addr + len(blob) > net.memsize:
                raise FrameOverflow(f"data block at {addr} exceeds memsize {net.memsize}")
            buf[addr:addr + len(blob)] = blob
        glob = tuple(bool(g.init) if g.type is UlType.BOOL else g.init for g in net.globals)
        locs = tuple(tuple(zero_value(r.type) for r in c.registers) for c in net.cfas)
        return DiscreteState(
            tuple(c.init for c in net.cfas), locs, glob, Memory(bytes(buf), net.static_size))

    def env(self, s: DiscreteState, i: int) -> Env:
        env = dict(zip(self.global_names, s.globals))
        env.update(zip(self.local_names[i], s.locals[i]))
        return env

    def enabled(self, s: DiscreteState) -> list[tuple[int, int, Edge]]:
        if s.error:
            return []
        out = []
        for i, loc in enumerate(s.locations):
            env = None
            for k, e in self.outgoing[i][loc]:
                g = e.seq.guard
                if g is not None and g.op is not Op.ASSERT:
                    if env is None:
                        env = self.env(s, i)
                    if check_guard(g, env) is Guard.BLOCKED:
                        continue
                out.append((i, k, e))
        return out

    def apply(self, s: DiscreteState, i: int, edge: Edge, outcome: StepOutcome) -> DiscreteState | None:
        """Successor state for ``outcome`` of firing ``edge`` in CFA ``i``."""
        if outcome.status is Status.BLOCKED:
            return None
        if outcome.status is Status.ERROR:
            return replace(s, error=True)
        env = outcome.env
        locs = list(s.locations)
        locs[i] = edge.dst
        loc_vals = list(s.locals)
        loc_vals[i] = tuple(env[n] for n in self.local_names[i])
        return DiscreteState(
            tuple(locs), tuple(loc_vals), tuple(env[n] for n in self.global_names), outcome.memory,
            False, s.assert_hit or outcome.status is Status.ASSERT)

    def fire(self, s: DiscreteState, i: int, k: int, values: Sequence = ()) -> DiscreteState | None:
        edge = self.net.cfas[i].edges[k]
        outcome = step_sequence(edge.seq, self.env(s, i), s.memory, replay_chooser(values))
        return self.apply(s, i, edge, outcome)

    def branches(self, s: DiscreteState, i: int, k: int) -> Iterator[tuple[tuple, DiscreteState]]:
        """All (nondet values, successor) pairs of firing edge ``k`` of CFA ``i``."""
        edge = self.net.cfas[i].edges[k]
        doms = self.nondet_domains[i, k]
        total = 1
        for d in doms:
            total *= len(d)
        if total > self.nondet_cap:
            raise RefusedExpansion(
                f"{self.net.cfas[i].name}: edge {edge.src} -> {edge.dst} has {total} NonDet branches "
                f"(cap {self.nondet_cap})")
        env = self.env(s, i)
        for combo in itertools.product(*doms):
            outcome = step_sequence(edge.seq, env, s.memory, replay_chooser(combo))
            nxt = self.apply(s, i, edge, outcome)
            if nxt is not None:
                yield combo, nxt

    def at_sinks(self, s: DiscreteState) -> bool:
        return all(loc in self.sinks[i] for i, loc in enumerate(s.locations))


class FrameOverflow(UlError):
    pass


def enabled_edges(state: DiscreteState, net: Network) -> list[tuple[int, Edge]]:
    return [(i, e) for i, _, e in CompiledNetwork(net).enabled(state)]


def nondet_branches(seq: InstructionSequence, env: Env, mem: Memory,
                    cap: int = DEFAULT_NONDET_CAP) -> Iterator[tuple[tuple, StepOutcome]]:
    """Lazily enumerate step outcomes for every combination of NonDet values."""
    doms = [domain(ins.dest.type) for ins in seq.body if ins.op is Op.NONDET]
    total = 1
    for d in doms:
        total *= len(d)
    if total > cap:
        raise RefusedExpansion(f"{total} NonDet branches exceed cap {cap}")
    for combo in itertools.product(*doms):
        yield combo, step_sequence(seq, env, mem, replay_chooser(combo))


def reachable_states(net: Network, limit: int = 100_000,
                     nondet_cap: int = DEFAULT_NONDET_CAP) -> set[DiscreteState]:
    """Untimed explicit-state enumeration under interleaving semantics."""
    cn = CompiledNetwork(net, nondet_cap)
    init = cn.initial()
    seen = {init}
    queue = deque([init])
    while queue:
        s = queue.popleft()
        for i, k, _ in cn.enabled(s):
            for _, nxt in cn.branches(s, i, k):
                if nxt not in seen:
                    if len(seen) >= limit:
                        raise RefusedExpansion(f"more than {limit} states")
                    seen.add(nxt)
                    queue.append(nxt)
    return seen
