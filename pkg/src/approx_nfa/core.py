"""Public API facade for approx_nfa.

The focused modules are the real homes of these names; this module re-exports
the stable surface so callers can write ``from approx_nfa.core import ...``.
"""

from .automata import Nfa, Stepper, accepts_prefix, export_dot, nfa_hash, read_nfa, step, write_nfa
from .cost import CostModel, lut_estimate, resolve_cost_model
from .evaluate import estimate_accept_prob, evaluate
from .labelling import frequency, label, read_labeling, write_labeling
from .models import (
    ApproxNfaError,
    Candidate,
    EvalResult,
    Infeasible,
    Labeling,
    PlanProblem,
    ReductionReport,
    RuleSet,
    StagePlan,
)
from .recompile import compile_regex, compile_ruleset
from .reduce import bfs_reduce, merge, merge_prune, prune, reduce_nfa
from .planner import solve, sweep
from .runner import PipelineConfig, pareto_candidates, run_pipeline
from .traffic import TrafficSample, load_sample, read_pcap, read_raw, synthetic_sample

__all__ = [
    "Nfa",
    "Stepper",
    "accepts_prefix",
    "step",
    "read_nfa",
    "write_nfa",
    "nfa_hash",
    "export_dot",
    "CostModel",
    "lut_estimate",
    "resolve_cost_model",
    "evaluate",
    "estimate_accept_prob",
    "label",
    "frequency",
    "read_labeling",
    "write_labeling",
    "ApproxNfaError",
    "Candidate",
    "EvalResult",
    "Infeasible",
    "Labeling",
    "PlanProblem",
    "ReductionReport",
    "RuleSet",
    "StagePlan",
    "compile_regex",
    "compile_ruleset",
    "prune",
    "merge",
    "merge_prune",
    "bfs_reduce",
    "reduce_nfa",
    "solve",
    "sweep",
    "PipelineConfig",
    "pareto_candidates",
    "run_pipeline",
    "TrafficSample",
    "load_sample",
    "read_pcap",
    "read_raw",
    "synthetic_sample",
]
