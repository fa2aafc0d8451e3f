"""Statistical simulation under race semantics.

Time is discretized into ``scale`` ticks per time unit.  At each step every
CFA with a guard-enabled edge whose window has not passed picks one such
edge uniformly, then a firing time uniformly among the ticks of
``[max(x_i, lo), hi]``; the earliest candidate fires (ties broken
uniformly).  NonDet values are uniform over the register's type.

Run ``k`` of an estimate with seed ``s`` draws from
``numpy.random.default_rng([s, k])``, so runs are independent of each
other and of the number of runs requested.
"""
from __future__ import annotations

import io
import math
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Callable

import numpy as np

from ..cfa import DiscreteState, Network
from ..timing import OmegaConfig
from ..ulcore import Op, UlType
from .model import Step, TimedModel
from .trace import Trace

DEFAULT_SCALE = 1000
DEFAULT_BINS = 100

# expression over (discrete state, global time in time units)
Expr = Callable[[DiscreteState, Fraction], object]


class Simulator:
    def __init__(self, net: Network, omega: OmegaConfig, scale: int = DEFAULT_SCALE):
        self.scale = scale
        self.model = TimedModel(net, omega.scaled(scale))
        self.nondet_types = {
            (i, k): [ins.dest.type for ins in e.seq.body if ins.op is Op.NONDET]
            for i, c in enumerate(net.cfas) for k, e in enumerate(c.edges)
        }

    def _sample_value(self, rng: np.random.Generator, ty: UlType):
        if ty is UlType.BOOL:
            return bool(rng.integers(2))
        return int.from_bytes(rng.bytes(ty.width // 8), "little")

    def run(self, rng: np.random.Generator, bound: int, expr: Expr | None = None,
            snapshot_every: int = 0) -> tuple[Trace, object]:
        """One run up to ``bound`` ticks.  Returns the trace and the maximum
        of ``expr`` over visited states (None without ``expr``)."""
        model, cn = self.model, self.model.cn
        s = model.initial_state()
        items: list = []
        best = None

        def observe(state):
            nonlocal best
            if expr is not None:
                v = expr(state.discrete, Fraction(state.time, self.scale))
                if best is None or v > best:
                    best = v

        observe(s)
        reason = None
        while reason is None:
            d = s.discrete
            if d.error:
                reason = "error"
                break
            if d.assert_hit:
                reason = "assert"
                break
            if cn.at_sinks(d):
                reason = "term"
                break
            if s.time >= bound:
                reason = "bound"
                break
            per_cfa: dict[int, list[int]] = {}
            for i, k, _ in cn.enabled(d):
                if model.windows[i][k][1] >= s.clocks[i]:
                    per_cfa.setdefault(i, []).append(k)
            cands = []
            for i in sorted(per_cfa):
                ks = per_cfa[i]
                k = ks[int(rng.integers(len(ks)))] if len(ks) > 1 else ks[0]
                lo, hi = model.windows[i][k]
                t = int(rng.integers(max(s.clocks[i], lo), hi + 1))
                cands.append((t - s.clocks[i], i, k))
            if not cands:
                reason = "deadlock"
                break
            dmin = min(c[0] for c in cands)
            if dmin > model.max_delay(s):
                reason = "deadlock"  # timelock
                break
            if s.time + dmin > bound:
                rest = bound - s.time
                if rest > 0:
                    s = model.delay(s, rest)
                    items.append(rest)
                    observe(s)
                reason = "bound"
                break
            ties = [c for c in cands if c[0] == dmin]
            _, i, k = ties[int(rng.integers(len(ties)))] if len(ties) > 1 else ties[0]
            if dmin:
                s = model.delay(s, dmin)
                items.append(dmin)
                observe(s)
            values = tuple(self._sample_value(rng, ty) for ty in self.nondet_types[i, k])
            step = Step(i, k, values)
            s = model.fire(s, step)
            items.append(step)
            observe(s)
        trace = Trace(items, end_reason=reason, final=s, time_scale=self.scale)
        if snapshot_every:
            trace.snapshots = _snapshots(model, items, snapshot_every)
        return trace, best


def _snapshots(model: TimedModel, items, every: int) -> list:
    out = []
    s = model.initial_state()
    for n, it in enumerate(items, 1):
        s = model.fire(s, it) if isinstance(it, Step) else model.delay(s, it)
        if n % every == 0:
            out.append((n, s))
    return out


def to_ticks(bound, scale: int) -> int:
    """Convert a time bound in time units (int, str or Fraction) to ticks."""
    return math.floor(Fraction(bound) * scale)


def simulate_run(net: Network, omega: OmegaConfig, seed: int, time_bound,
                 scale: int = DEFAULT_SCALE, run: int = 0) -> Trace:
    sim = Simulator(net, omega, scale)
    trace, _ = sim.run(np.random.default_rng([seed, run]), to_ticks(time_bound, scale))
    trace.seed = seed
    return trace


@dataclass
class EstimateResult:
    samples: list
    bins: int = DEFAULT_BINS
    end_reasons: dict = field(default_factory=dict)

    @property
    def values(self) -> np.ndarray:
        return np.array([float(v) for v in self.samples], dtype=float)

    @property
    def min(self) -> float:
        return float(self.values.min())

    @property
    def max(self) -> float:
        return float(self.values.max())

    @property
    def mean(self) -> float:
        return float(self.values.mean())

    def histogram(self) -> tuple[np.ndarray, np.ndarray]:
        counts, edges = np.histogram(self.values, bins=self.bins)
        return counts, edges

    def histogram_csv(self) -> str:
        counts, edges = self.histogram()
        buf = io.StringIO()
        buf.write("bin_lo,bin_hi,count\n")
        for c, lo, hi in zip(counts, edges[:-1], edges[1:]):
            buf.write(f"{lo:.6f},{hi:.6f},{int(c)}\n")
        return buf.getvalue()


def estimate_max(net: Network, omega: OmegaConfig, expr: Expr, time_bound, runs: int,
                 seed: int = 0, bins: int = DEFAULT_BINS, scale: int = DEFAULT_SCALE) -> EstimateResult:
    """Maximum of ``expr`` along each of ``runs`` simulated runs."""
    if runs < 1:
        raise ValueError("runs must be at least 1")
    sim = Simulator(net, omega, scale)
    bound = to_ticks(time_bound, scale)
    samples = []
    reasons: dict[str, int] = {}
    for k in range(runs):
        trace, best = sim.run(np.random.default_rng([seed, k]), bound, expr)
        samples.append(best)
        reasons[trace.end_reason] = reasons.get(trace.end_reason, 0) + 1
    return EstimateResult(samples, bins, reasons)
