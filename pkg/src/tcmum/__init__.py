"""Integrated design of transit frequencies and AMoD fleets under mode choice."""

__version__ = "0.1.0"
