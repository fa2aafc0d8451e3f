"""Subset-IR frontend: parsing, inlining and lowering to CFA networks."""
from ..cfa import FrameOverflow
from .inline import RecursionDetected, UnknownFunction, inline_calls
from .ir import (
    FrontendError, IrFunction, IrModule, PhiNotSupported, SirSyntaxError, UnsupportedInstruction,
    parse_subset_ir, render_ir,
)
from .lower import (
    BuildStats, GlobalsTable, NetworkBuildError, UnsupportedPattern, build_network, lower_function,
)

SyntaxError = SirSyntaxError  # noqa: A001  (name used by the interface description)

__all__ = [
    "FrameOverflow", "FrontendError", "IrFunction", "IrModule", "PhiNotSupported",
    "RecursionDetected", "SirSyntaxError", "UnknownFunction", "UnsupportedInstruction",
    "UnsupportedPattern", "BuildStats", "GlobalsTable", "NetworkBuildError",
    "build_network", "inline_calls", "lower_function", "parse_subset_ir", "render_ir",
]
