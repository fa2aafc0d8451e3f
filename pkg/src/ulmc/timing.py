"""Execution-time bounds for instructions, sequences and locations.

An ``.omg`` file maps opcodes to closed integer intervals::

    # reference platform
    default 1 2
    Load 2 4
    Store 2 4
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Mapping

from .ulcore import InstructionSequence, Op, UlError, UlSyntaxError


class InvalidInterval(UlError):
    pass


class MissingDefault(UlError):
    pass


@dataclass(frozen=True)
class Interval:
    lo: int
    hi: int

    def __post_init__(self):
        if not 0 <= self.lo <= self.hi:
            raise InvalidInterval(f"bad interval [{self.lo},{self.hi}]")

    def __add__(self, other: "Interval") -> "Interval":
        return Interval(self.lo + other.lo, self.hi + other.hi)

    def scaled(self, k: int) -> "Interval":
        return Interval(self.lo * k, self.hi * k)

    def __iter__(self):
        return iter((self.lo, self.hi))


ZERO = Interval(0, 0)


@dataclass(frozen=True)
class OmegaConfig:
    default: Interval
    table: Mapping[Op, Interval] = field(default_factory=dict)

    def of(self, op: Op) -> Interval:
        return self.table.get(op, self.default)

    def scaled(self, k: int) -> "OmegaConfig":
        return OmegaConfig(self.default.scaled(k), {op: iv.scaled(k) for op, iv in self.table.items()})

    def max_endpoint(self) -> int:
        return max([self.default.hi, *(iv.hi for iv in self.table.values())])

    def render(self) -> str:
        lines = [f"default {self.default.lo} {self.default.hi}"]
        lines += [f"{op.value} {iv.lo} {iv.hi}" for op, iv in sorted(self.table.items(), key=lambda kv: kv[0].value)]
        return "\n".join(lines) + "\n"

    # frozen dataclass with a dict field: hash on content
    def __hash__(self):
        return hash((self.default, tuple(sorted((op.value, iv) for op, iv in self.table.items()))))


def load_omega(text: str) -> OmegaConfig:
    default = None
    table: dict[Op, Interval] = {}
    opcodes = {op.value: op for op in Op}
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        parts = line.split()
        if len(parts) != 3:
            raise UlSyntaxError("expected '<Opcode> <lo> <hi>'", lineno)
        name, lo_s, hi_s = parts
        try:
            lo, hi = int(lo_s), int(hi_s)
        except ValueError:
            raise UlSyntaxError("interval endpoints must be naturals", lineno) from None
        if lo < 0 or hi < 0:
            raise UlSyntaxError("interval endpoints must be naturals", lineno)
        if lo > hi:
            raise InvalidInterval(f"line {lineno}: lower bound {lo} exceeds upper bound {hi}")
        iv = Interval(lo, hi)
        if name == "default":
            default = iv
        elif name in opcodes:
            table[opcodes[name]] = iv
        else:
            raise UlSyntaxError(f"unknown opcode {name!r}", lineno)
    if default is None:
        raise MissingDefault("no 'default' line")
    return OmegaConfig(default, table)


def seq_interval(seq: InstructionSequence, omega: OmegaConfig) -> Interval:
    lo = hi = 0
    for ins in seq.instructions():
        iv = omega.of(ins.op)
        lo += iv.lo
        hi += iv.hi
    return Interval(lo, hi)


def location_upper_bound(cfa, location: str, omega: OmegaConfig) -> float:
    """Largest upper bound over the location's outgoing edges; ``math.inf``
    for locations without outgoing edges."""
    his = [seq_interval(e.seq, omega).hi for e in cfa.edges if e.src == location]
    return max(his) if his else math.inf
