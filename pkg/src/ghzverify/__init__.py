"""Simulator and analysis toolkit for loss-tolerant GHZ verification protocols."""

from . import adversary, analytics, protocol, qstate, simnet, sources

__all__ = ["adversary", "analytics", "protocol", "qstate", "simnet", "sources"]

__version__ = "0.1.0"
