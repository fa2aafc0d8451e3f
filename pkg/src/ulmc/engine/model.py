"""Concrete timed semantics of a network: one clock per CFA plus the
never-reset global clock.

A CFA may stay in a location while its clock is at most the location's
upper bound (the largest upper bound of its outgoing edges); an edge fires
when its guard holds and the clock lies in the edge's interval.  Firing
resets the CFA's clock.  Clock values may be ints or Fractions.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

from ..cfa import DEFAULT_NONDET_CAP, CompiledNetwork, DiscreteState, Network
from ..timing import OmegaConfig, location_upper_bound, seq_interval


class ContractViolation(Exception):
    """A caller asked for a transition the semantics does not allow."""


@dataclass(frozen=True)
class TimedState:
    discrete: DiscreteState
    clocks: tuple
    time: object = 0


@dataclass(frozen=True)
class Step:
    """One discrete transition: CFA index, edge index, NonDet values."""

    cfa: int
    edge: int
    values: tuple = ()


class TimedModel:
    def __init__(self, net: Network, omega: OmegaConfig, nondet_cap: int = DEFAULT_NONDET_CAP):
        self.net = net
        self.omega = omega
        self.cn = CompiledNetwork(net, nondet_cap)
        self.windows = [tuple(tuple(seq_interval(e.seq, omega)) for e in c.edges) for c in net.cfas]
        self.bounds = [{loc.name: location_upper_bound(c, loc.name, omega) for loc in c.locations}
                       for c in net.cfas]
        finite = [b for per in self.bounds for b in per.values() if b != math.inf]
        self.max_constant = max(finite, default=0)

    @property
    def n(self) -> int:
        return len(self.net.cfas)

    def initial_state(self) -> TimedState:
        return TimedState(self.cn.initial(), (0,) * self.n, 0)

    def bound(self, i: int, loc: str) -> float:
        return self.bounds[i][loc]

    def max_delay(self, s: TimedState):
        if s.discrete.error:
            return math.inf
        slack = math.inf
        for i, loc in enumerate(s.discrete.locations):
            b = self.bounds[i][loc]
            if b != math.inf:
                slack = min(slack, b - s.clocks[i])
        return max(slack, 0) if slack != math.inf else math.inf

    def timing_ok(self, s: TimedState, i: int, k: int) -> bool:
        lo, hi = self.windows[i][k]
        return lo <= s.clocks[i] <= hi

    def fire(self, s: TimedState, step: Step) -> TimedState:
        d = s.discrete
        if d.error:
            raise ContractViolation("no transitions leave the error state")
        edge = self.net.cfas[step.cfa].edges[step.edge]
        if edge.src != d.locations[step.cfa]:
            raise ContractViolation(f"edge {step.edge} does not leave {d.locations[step.cfa]!r}")
        if not self.timing_ok(s, step.cfa, step.edge):
            raise ContractViolation(
                f"clock {s.clocks[step.cfa]} outside {self.windows[step.cfa][step.edge]}")
        nxt = self.cn.fire(d, step.cfa, step.edge, step.values)
        if nxt is None:
            raise ContractViolation("guard blocks the edge")
        clocks = list(s.clocks)
        clocks[step.cfa] = 0
        return TimedState(nxt, tuple(clocks), s.time)

    def discrete_successors(self, s: TimedState) -> list[tuple[TimedState, Step]]:
        out = []
        for i, k, _ in self.cn.enabled(s.discrete):
            if not self.timing_ok(s, i, k):
                continue
            clocks = list(s.clocks)
            clocks[i] = 0
            clocks = tuple(clocks)
            for values, nxt in self.cn.branches(s.discrete, i, k):
                out.append((TimedState(nxt, clocks, s.time), Step(i, k, values)))
        return out

    def delay(self, s: TimedState, d) -> TimedState:
        if d < 0 or d > self.max_delay(s):
            raise ContractViolation(f"delay {d} exceeds the allowed {self.max_delay(s)}")
        return delay(s, d)

    def replay(self, steps: Sequence, start: TimedState | None = None) -> TimedState:
        """Replay a sequence of delays (numbers) and :class:`Step` items."""
        s = self.initial_state() if start is None else start
        for item in steps:
            s = self.fire(s, item) if isinstance(item, Step) else self.delay(s, item)
        return s


def delay(s: TimedState, d) -> TimedState:
    """Advance every clock and the global time by ``d`` (no invariant check)."""
    if d == 0:
        return s
    return TimedState(s.discrete, tuple(x + d for x in s.clocks), s.time + d)


def initial_state(net: Network, omega: OmegaConfig) -> TimedState:
    return TimedModel(net, omega).initial_state()


def discrete_successors(s: TimedState, net: Network, omega: OmegaConfig):
    return TimedModel(net, omega).discrete_successors(s)


def max_delay(s: TimedState, net: Network, omega: OmegaConfig):
    return TimedModel(net, omega).max_delay(s)
