"""Approximate NFA reduction for deep packet inspection.

Compiles PCRE-style rules into NFAs, labels states by how much real traffic
reaches them, shrinks the automata at a bounded cost in false positives and
plans multi-stage matcher pipelines under throughput and LUT budgets.
"""

# Defined before importing .core; emit.py reads it while core is importing.
__version__ = "0.1.0"

from .core import Nfa, compile_ruleset, evaluate, label, reduce_nfa, solve

# Plotting needs the optional extras; it is imported on demand only
__all__ = [
    "Nfa",
    "compile_ruleset",
    "evaluate",
    "label",
    "reduce_nfa",
    "solve",
]


def _get_plotter_class():
    """Lazy import of plotting functionality."""
    try:
        from .plotting import SweepPlotter
        return SweepPlotter
    except ImportError as e:
        raise ImportError("plotly and pandas are required for plotting. Install with: pip install -e \".[plotting]\"") from e
