"""Symbolic reachability over (discrete state, zone) pairs."""
from __future__ import annotations

import enum
import math
import time
from collections import deque
from dataclasses import dataclass, field
from typing import Callable

from ..cfa import DiscreteState
from .dbm import Zone, le
from .model import Step, TimedModel
from .trace import Trace

Predicate = Callable[[DiscreteState], bool]


class Verdict(enum.Enum):
    REACHABLE = "Reachable"
    UNREACHABLE = "Unreachable"
    LIMIT = "LimitExceeded"

    def __str__(self) -> str:
        return self.value


@dataclass(frozen=True)
class Limits:
    max_states: int = 1_000_000
    max_seconds: float = 600.0


@dataclass
class ReachResult:
    verdict: Verdict
    trace: Trace | None = None
    stored: int = 0
    explored: int = 0
    seconds: float = 0.0
    # (min, max) global time at discrete arrivals into predicate states
    window: tuple[int, float] | None = None
    states: set = field(default_factory=set)


class _Explorer:
    def __init__(self, model: TimedModel, horizon: int | None, track_time: bool):
        self.model = model
        n = model.n
        self.use_g = horizon is not None or track_time
        self.dim = n + 1 + (1 if self.use_g else 0)
        self.g = n + 1 if self.use_g else None
        self.horizon = horizon
        m = model.max_constant
        g_max = math.inf if track_time else (horizon or 0)
        self.maxima = [0] + [m] * n + ([g_max] if self.use_g else [])

    def invariant(self, z: Zone, s: DiscreteState) -> bool:
        if s.error:
            return True
        for i, loc in enumerate(s.locations):
            b = self.model.bounds[i][loc]
            if b != math.inf and not z.constrain(i + 1, 0, le(b)):
                return False
        if self.horizon is not None and not z.constrain(self.g, 0, le(self.horizon)):
            return False
        return True

    def settle(self, z: Zone, s: DiscreteState) -> Zone | None:
        """Let time pass in ``s`` and extrapolate."""
        if not s.error:
            z.up()
        if not self.invariant(z, s):
            return None
        return z.extrapolate(self.maxima)


def zone_reach(model: TimedModel, pred: Predicate, limits: Limits = Limits(),
               horizon: int | None = None, track_time: bool = False,
               collect: bool = False) -> ReachResult:
    """Breadth-first zone-graph search for a state satisfying ``pred``.

    ``horizon`` bounds global time.  With ``track_time`` the global clock is
    kept exact, the search is exhaustive and ``window`` reports the earliest
    and latest global time at which a discrete step enters a ``pred`` state.
    ``collect`` returns every reached discrete state in ``states``.
    """
    started = time.monotonic()
    ex = _Explorer(model, horizon, track_time)
    cn = model.cn
    windows = model.windows

    init = model.cn.initial()
    z0 = ex.settle(Zone.zero(ex.dim), init)
    nodes: list[tuple] = [(init, z0, -1, None)]
    passed: dict[DiscreteState, list[int]] = {init: [0]}
    dead: set[int] = set()
    queue = deque([0])
    lo_t, hi_t = math.inf, -math.inf
    result = ReachResult(Verdict.UNREACHABLE)

    def finish(verdict, hit=None):
        result.verdict = verdict
        result.stored = len(nodes)
        result.seconds = time.monotonic() - started
        if hit is not None:
            result.trace = _witness(model, nodes, hit, horizon)
        if track_time and lo_t != math.inf:
            result.window = (lo_t, hi_t)
        if collect:
            result.states = set(passed)
        return result

    if pred(init):
        lo_t, hi_t = 0, 0
        if not track_time:
            return finish(Verdict.REACHABLE, 0)

    while queue:
        nid = queue.popleft()
        if nid in dead:
            continue
        result.explored += 1
        if result.explored % 256 == 0 and time.monotonic() - started > limits.max_seconds:
            return finish(Verdict.LIMIT)
        s, z, _, _ = nodes[nid]
        if s.error:
            continue
        for i, k, _ in cn.enabled(s):
            lo, hi = windows[i][k]
            zg = z.copy()
            if not (zg.constrain(0, i + 1, le(-lo)) and zg.constrain(i + 1, 0, le(hi))):
                continue
            zg.reset(i + 1)
            for values, s2 in cn.branches(s, i, k):
                hit = pred(s2)
                if hit and track_time:
                    a, b = zg.bounds(ex.g)
                    lo_t, hi_t = min(lo_t, a), max(hi_t, b)
                z2 = ex.settle(zg.copy(), s2)
                if z2 is None:
                    continue
                known = passed.get(s2)
                if known is None:
                    known = passed[s2] = []
                elif any(nodes[o][1].includes(z2) for o in known):
                    continue
                else:
                    for o in known:
                        if z2.includes(nodes[o][1]):
                            dead.add(o)
                    known[:] = [o for o in known if o not in dead]
                if len(nodes) >= limits.max_states:
                    return finish(Verdict.LIMIT)
                nodes.append((s2, z2, nid, Step(i, k, values)))
                new = len(nodes) - 1
                known.append(new)
                queue.append(new)
                if hit and not track_time:
                    return finish(Verdict.REACHABLE, new)
    if track_time:
        return finish(Verdict.REACHABLE if lo_t != math.inf else Verdict.UNREACHABLE)
    return finish(Verdict.UNREACHABLE)


def _witness(model: TimedModel, nodes, hit: int, horizon: int | None) -> Trace:
    path = []
    nid = hit
    while nid > 0:
        s, _, parent, step = nodes[nid]
        path.append((nodes[parent][0], step))
        nid = parent
    path.reverse()
    times = concretize(model, path, horizon)
    items = []
    prev = 0
    for (_, step), t in zip(path, times[1:]):
        if t > prev:
            items.append(t - prev)
        items.append(step)
        prev = t
    final = model.replay(items)
    return Trace(items, end_reason="reached", final=final)


def concretize(model: TimedModel, path, horizon: int | None = None) -> list[int]:
    """Earliest integer firing times for a discrete path.

    ``path`` lists (state before the step, step).  The timing constraints of
    the path form a system of difference constraints ``t_a - t_b <= c``,
    solved by Bellman-Ford.
    """
    n = model.n
    cons = []  # (a, b, c): t_a - t_b <= c
    last = [0] * n
    for k, (s, step) in enumerate(path, start=1):
        i = step.cfa
        lo, hi = model.windows[i][step.edge]
        cons.append((last[i], k, -lo))
        cons.append((k, last[i], hi))
        for j, loc in enumerate(s.locations):
            b = model.bounds[j][loc]
            if b != math.inf:
                cons.append((k, last[j], b))
        cons.append((k - 1, k, 0))
        if horizon is not None:
            cons.append((k, 0, horizon))
        last[i] = k
    # earliest solution: u = -t, constraint becomes u_b - u_a <= c (edge a -> b)
    size = len(path) + 1
    dist = [math.inf] * size
    dist[0] = 0
    for _ in range(size):
        changed = False
        for a, b, c in cons:
            if dist[a] + c < dist[b]:
                dist[b] = dist[a] + c
                changed = True
        if not changed:
            break
    else:
        raise ValueError("timing constraints of the path are infeasible")
    return [-d for d in dist]


def symbolic_window(model: TimedModel, pred: Predicate, limits: Limits = Limits()) -> tuple[int, float] | None:
    """Earliest and latest global time at which ``pred`` can be entered."""
    res = zone_reach(model, pred, limits, track_time=True)
    if res.verdict is Verdict.LIMIT:
        raise TimeoutError("state or time limit exceeded while computing the window")
    return res.window
