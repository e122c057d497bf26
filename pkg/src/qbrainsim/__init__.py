"""Lattice-field system described classically, statistically and quantum mechanically,
with collapse events, a pattern-memory schema engine and collapse-placement experiments."""

__version__ = "0.1.0"
