"""Timed model checking of LLVM-like programs lowered to networks of
control-flow automata."""

__version__ = "0.1.0"
