"""Finite-set representation independence: relations, quotients and structure transfer."""

from __future__ import annotations

__version__ = "0.1.0"
