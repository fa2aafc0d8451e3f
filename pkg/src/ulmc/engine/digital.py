"""Discrete-time oracle: explicit exploration with unit delays.

With closed integer intervals every reachable discrete state is reachable
at integer time points, so this is exact for the verdicts and arrival-time
windows the zone engine computes.  Clocks above the largest constant are
capped, which keeps the state space finite when no horizon is given.
"""
from __future__ import annotations

import math
import time
from collections import deque
from dataclasses import dataclass, field

from .model import TimedModel
from .zones import Limits, Predicate, Verdict


class LimitExceeded(Exception):
    pass


@dataclass
class DigitalResult:
    verdict: Verdict
    states: set = field(default_factory=set)
    window: tuple[int, int] | None = None
    stored: int = 0


def discrete_time_reach(model: TimedModel, pred: Predicate, horizon: int | None = None,
                        limits: Limits = Limits(), track_time: bool = False) -> DigitalResult:
    """Enumerate timed states at integer granularity.

    Returns every reached discrete state.  Without ``track_time`` a state
    (discrete, capped clocks) is only re-expanded when reached at an earlier
    global time; with it, global time is part of the state and ``window``
    is the (min, max) global time of discrete steps entering ``pred``.
    """
    started = time.monotonic()
    cap = model.max_constant + 1
    cn = model.cn
    n = model.n
    init = cn.initial()
    start = (init, (0,) * n)
    best: dict = {start: 0}
    seen_timed: set = {(start, 0)}
    reached = {init}
    queue = deque([(start, 0)])
    lo_t, hi_t = math.inf, -math.inf
    if pred(init):
        lo_t = hi_t = 0
        if not track_time:
            return DigitalResult(Verdict.REACHABLE, reached, None, 1)

    def push(key, g, front):
        if track_time:
            if (key, g) in seen_timed:
                return
            seen_timed.add((key, g))
        else:
            old = best.get(key)
            if old is not None and old <= g:
                return
            best[key] = g
        if len(seen_timed) + len(best) > limits.max_states:
            raise LimitExceeded(f"more than {limits.max_states} states")
        if front:
            queue.appendleft((key, g))
        else:
            queue.append((key, g))

    expanded = 0
    while queue:
        (s, clocks), g = queue.popleft()
        if not track_time and best[(s, clocks)] < g:
            continue
        expanded += 1
        if expanded % 4096 == 0 and time.monotonic() - started > limits.max_seconds:
            raise LimitExceeded("time limit exceeded")
        if s.error:
            continue
        for i, k, _ in cn.enabled(s):
            lo, hi = model.windows[i][k]
            if not lo <= clocks[i] <= hi:
                continue
            c2 = clocks[:i] + (0,) + clocks[i + 1:]
            for _, s2 in cn.branches(s, i, k):
                reached.add(s2)
                if pred(s2):
                    lo_t, hi_t = min(lo_t, g), max(hi_t, g)
                    if not track_time:
                        return DigitalResult(Verdict.REACHABLE, reached, None, len(best))
                push((s2, c2), g, True)
        # unit delay
        if cn.at_sinks(s) or (horizon is not None and g + 1 > horizon):
            continue
        ok = True
        for i, loc in enumerate(s.locations):
            b = model.bounds[i][loc]
            if b != math.inf and clocks[i] + 1 > b:
                ok = False
                break
        if ok:
            push((s, tuple(min(x + 1, cap) for x in clocks)), g + 1, False)

    window = (lo_t, hi_t) if lo_t != math.inf else None
    if track_time:
        verdict = Verdict.REACHABLE if window else Verdict.UNREACHABLE
        return DigitalResult(verdict, reached, window, len(seen_timed))
    verdict = Verdict.REACHABLE if window else Verdict.UNREACHABLE
    return DigitalResult(verdict, reached, None, len(best))
