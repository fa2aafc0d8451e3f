"""Timed traces: alternating delays and discrete steps, plus text I/O.

Text format::

    # ulmc trace
    # model <sha256>
    # seed <n>
    delay 3
    fire p1 entry -> loop
    fire p2 entry -> entry__m0 [nondet: 97]
    # end assert
"""
from __future__ import annotations

import hashlib
from dataclasses import dataclass, field
from decimal import Decimal
from fractions import Fraction

from ..cfa import Network
from .model import Step, TimedModel, TimedState


@dataclass
class Trace:
    items: list = field(default_factory=list)
    end_reason: str | None = None
    final: TimedState | None = None
    seed: int | None = None
    model_hash: str | None = None
    # delays are stored in ticks of 1/time_scale time units
    time_scale: int = 1
    snapshots: list = field(default_factory=list)

    @property
    def steps(self) -> list[Step]:
        return [it for it in self.items if isinstance(it, Step)]

    def __len__(self) -> int:
        return len(self.items)


def model_hash(*texts: str) -> str:
    h = hashlib.sha256()
    for t in texts:
        h.update(t.encode())
        h.update(b"\0")
    return h.hexdigest()


def _fmt_time(ticks, scale: int) -> str:
    q = Fraction(ticks) / scale
    if q.denominator == 1:
        return str(q.numerator)
    # scale is 10^k or 2^k in practice; exact decimal otherwise fall back to p/q
    d = Decimal(q.numerator) / Decimal(q.denominator)
    if Fraction(d) == q:
        return format(d.normalize(), "f")
    return f"{q.numerator}/{q.denominator}"


def format_value(v) -> str:
    if isinstance(v, bool):
        return "true" if v else "false"
    return str(v)


def parse_value(tok: str):
    if tok == "true":
        return True
    if tok == "false":
        return False
    return int(tok)


def render_trace(trace: Trace, net: Network) -> str:
    lines = ["# ulmc trace"]
    if trace.model_hash:
        lines.append(f"# model {trace.model_hash}")
    if trace.seed is not None:
        lines.append(f"# seed {trace.seed}")
    for it in trace.items:
        if isinstance(it, Step):
            cfa = net.cfas[it.cfa]
            e = cfa.edges[it.edge]
            line = f"fire {cfa.name} {e.src} -> {e.dst}"
            if it.values:
                line += " [nondet: " + ",".join(format_value(v) for v in it.values) + "]"
            lines.append(line)
        else:
            lines.append(f"delay {_fmt_time(it, trace.time_scale)}")
    if trace.end_reason:
        lines.append(f"# end {trace.end_reason}")
    if trace.final is not None:
        lines.append(f"# time {_fmt_time(trace.final.time, trace.time_scale)}")
        lines.append("# locations " + " ".join(trace.final.discrete.locations))
        lines.append(f"# memory {trace.final.discrete.memory.hex()}")
    return "\n".join(lines) + "\n"


class TraceError(Exception):
    pass


def parse_trace(text: str, model: TimedModel, time_scale: int = 1) -> Trace:
    """Parse a trace and resolve each ``fire`` line against ``model`` by
    replaying it; delays are converted to ticks of ``1/time_scale``."""
    trace = Trace(time_scale=time_scale)
    net = model.net
    state = model.initial_state()
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.strip()
        if not line:
            continue
        if line.startswith("#"):
            parts = line[1:].split()
            if len(parts) == 2 and parts[0] == "seed":
                trace.seed = int(parts[1])
            elif len(parts) == 2 and parts[0] == "model":
                trace.model_hash = parts[1]
            elif len(parts) == 2 and parts[0] == "end":
                trace.end_reason = parts[1]
            continue
        word, _, rest = line.partition(" ")
        if word == "delay":
            d = Fraction(rest.strip()) * time_scale
            if d.denominator != 1:
                raise TraceError(f"line {lineno}: delay not a multiple of 1/{time_scale}")
            d = d.numerator
            state = model.delay(state, d)
            trace.items.append(d)
        elif word == "fire":
            body, _, nd = rest.partition("[")
            values = ()
            if nd:
                nd = nd.rstrip("]").strip()
                if not nd.startswith("nondet:"):
                    raise TraceError(f"line {lineno}: bad nondet annotation")
                values = tuple(parse_value(v.strip()) for v in nd[len("nondet:"):].split(","))
            toks = body.split()
            if len(toks) != 4 or toks[2] != "->":
                raise TraceError(f"line {lineno}: expected 'fire <proc> <from> -> <to>'")
            proc, src, _, dst = toks
            try:
                i = net.cfa_index(proc)
            except KeyError:
                raise TraceError(f"line {lineno}: unknown process {proc!r}") from None
            step = _resolve(model, state, i, src, dst, values)
            if step is None:
                raise TraceError(f"line {lineno}: no enabled edge {src} -> {dst} in {proc}")
            state = model.fire(state, step)
            trace.items.append(step)
        else:
            raise TraceError(f"line {lineno}: unexpected {word!r}")
    trace.final = state
    return trace


def _resolve(model: TimedModel, state: TimedState, i: int, src: str, dst: str, values) -> Step | None:
    for k, e in enumerate(model.net.cfas[i].edges):
        if e.src != src or e.dst != dst:
            continue
        if len(model.cn.nondet_domains[i, k]) != len(values):
            continue
        step = Step(i, k, values)
        try:
            model.fire(state, step)
        except Exception:
            continue
        return step
    return None
