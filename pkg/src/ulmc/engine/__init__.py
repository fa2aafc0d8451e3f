"""Timed semantics, symbolic and explicit exploration, simulation, queries."""
from .digital import DigitalResult, LimitExceeded, discrete_time_reach
from .model import (
    ContractViolation, Step, TimedModel, TimedState, delay, discrete_successors, initial_state,
    max_delay,
)
from .query import (
    Always, EstimateMax, Exists, QueryNameError, QueryResult, QuerySyntaxError, compile_expr,
    compile_pred, eval_query, parse_expr, parse_query,
)
from .smc import EstimateResult, Simulator, estimate_max, simulate_run
from .trace import Trace, TraceError, parse_trace, render_trace
from .zones import Limits, ReachResult, Verdict, concretize, symbolic_window, zone_reach

__all__ = [
    "Always", "ContractViolation", "DigitalResult", "EstimateMax", "EstimateResult", "Exists",
    "LimitExceeded", "Limits", "QueryNameError", "QueryResult", "QuerySyntaxError", "ReachResult",
    "Simulator", "Step", "TimedModel", "TimedState", "Trace", "TraceError", "Verdict",
    "compile_expr", "compile_pred", "concretize", "delay", "discrete_successors",
    "discrete_time_reach", "estimate_max", "eval_query", "initial_state", "max_delay",
    "parse_expr", "parse_query", "parse_trace", "render_trace", "simulate_run",
    "symbolic_window", "zone_reach",
]
