"""Equilibrium solvers, evolutionary dynamics and equivalence checks."""

__version__ = "0.1.0"

from . import causal, coalgebra, diversity, evo, fixpoint, metricyoneda, netecon, vi  # noqa: F401
