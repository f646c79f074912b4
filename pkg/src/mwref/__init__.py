"""Executable reference model of a MimbleWimble-style ledger and its consensus,
with model-based testing and runtime monitoring on top."""

__version__ = "0.1.0"
