"""Exact event-driven pinball simulation and a compiler from two-stack PDAs to pinball scenes."""

__version__ = "0.1.0"
