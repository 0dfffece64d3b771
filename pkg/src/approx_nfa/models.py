"""Data models: exception hierarchy and the records passed between modules.

The automaton itself (``Nfa``) lives in automata.py and the packet multiset
(``TrafficSample``) in traffic.py, since both carry behavior; everything here
is a plain record.
"""

from dataclasses import dataclass, field
from fractions import Fraction
from typing import Dict, Optional, Tuple

from .constants import (
    EXIT_INFEASIBLE,
    EXIT_INPUT_FORMAT,
    EXIT_INVARIANT,
    EXIT_USAGE,
    OPT_OUT,
    OPT_RSC,
)


class ApproxNfaError(Exception):
    """Base class; ``code`` is the machine-parseable token the CLI prints."""

    code = 'ERROR'
    exit_code = 1


class UsageError(ApproxNfaError, ValueError):
    """Invalid parameter, bound or grid."""

    code = 'USAGE'
    exit_code = EXIT_USAGE


class InputFormatError(ApproxNfaError):
    code = 'INPUT_FORMAT'
    exit_code = EXIT_INPUT_FORMAT


class NfaParseError(InputFormatError):
    """Malformed NFA text; ``line`` is 1-based."""

    def __init__(self, message: str, line: Optional[int] = None, path: Optional[str] = None):
        self.line = line
        self.path = path
        where = ''
        if path:
            where = f'{path}:'
        if line is not None:
            where += f'{line}:'
        super().__init__(f'{where} {message}' if where else message)


class TraceFormatError(InputFormatError):
    """Malformed pcap or raw sample; ``offset`` is the byte offset of the problem."""

    def __init__(self, message: str, offset: Optional[int] = None):
        self.offset = offset
        if offset is not None:
            message = f'{message} (at byte offset {offset})'
        super().__init__(message)


class RuleFileError(InputFormatError):
    pass


class RegexSyntaxError(InputFormatError):
    def __init__(self, message: str, pattern: str, position: int):
        self.pattern = pattern
        self.position = position
        super().__init__(f'{message} at position {position} in {pattern!r}')


class UnsupportedRegexError(RegexSyntaxError):
    """A PCRE construct outside the supported subset; ``construct`` names it."""

    def __init__(self, construct: str, pattern: str, position: int):
        self.construct = construct
        super().__init__(f'unsupported feature: {construct}', pattern, position)


class ConfigError(InputFormatError):
    pass


class MismatchingLabelingError(InputFormatError):
    """Raised when a persisted labeling was computed for a different automaton"""

    code = 'LABEL_MISMATCH'

    def __init__(self, expected_hash: str, found_hash: str):
        self.expected_hash = expected_hash
        self.found_hash = found_hash
        super().__init__(
            f"Labeling belongs to a different NFA: '{found_hash[:12]}' != '{expected_hash[:12]}'")


class InfeasiblePlanError(ApproxNfaError):
    code = 'INFEASIBLE'
    exit_code = EXIT_INFEASIBLE

    def __init__(self, infeasible: 'Infeasible'):
        self.infeasible = infeasible
        super().__init__(infeasible.message)


class InvariantViolationError(ApproxNfaError):
    code = 'INVARIANT'
    exit_code = EXIT_INVARIANT


class UnderApproximationError(InvariantViolationError):
    """A reduced automaton rejects a word the precise automaton accepts."""

    def __init__(self, counterexamples):
        self.counterexamples = list(counterexamples)
        shown = ', '.join(repr(w) for w in self.counterexamples[:3])
        super().__init__(
            f'reduced NFA rejects {len(self.counterexamples)} accepted word(s), e.g. {shown}')


@dataclass(frozen=True)
class RuleSet:
    """Ordered (rule id, pattern) pairs; ids are unique."""

    rules: Tuple[Tuple[str, str], ...] = ()

    def __post_init__(self):
        seen = set()
        for rule_id, _ in self.rules:
            if rule_id in seen:
                raise RuleFileError(f'duplicate rule id: {rule_id}')
            seen.add(rule_id)

    def __len__(self):
        return len(self.rules)

    def __iter__(self):
        return iter(self.rules)


@dataclass(frozen=True)
class Labeling:
    """Per-state significance: ``counts[q]`` packets of the sample reach q over some prefix."""

    counts: Tuple[int, ...]
    sample_size: int
    nfa_hash: Optional[str] = None

    def __len__(self):
        return len(self.counts)

    def __getitem__(self, state: int) -> int:
        return self.counts[state]


@dataclass
class ReductionReport:
    method: str
    states_before: int
    states_after: int
    error_bound: Optional[int] = None
    parameters: Dict[str, float] = field(default_factory=dict)
    border_states: Tuple[int, ...] = ()
    merged_classes: Tuple[Tuple[int, ...], ...] = ()

    @property
    def ratio_achieved(self) -> float:
        return self.states_after / self.states_before if self.states_before else 1.0

    def to_dict(self) -> dict:
        return {
            'method': self.method,
            'states_before': self.states_before,
            'states_after': self.states_after,
            'ratio_achieved': round(self.ratio_achieved, 6),
            'error_bound': self.error_bound,
            'parameters': dict(self.parameters),
            'border_states': list(self.border_states),
            'merged_classes': [list(c) for c in self.merged_classes],
        }


@dataclass
class EvalResult:
    """Acceptance counts of a reduced NFA against the precise one, per packet occurrence."""

    a_tp: int = 0
    a_fp: int = 0
    a_fn: int = 0
    a_tn: int = 0

    @property
    def sample_size(self) -> int:
        return self.a_tp + self.a_fp + self.a_fn + self.a_tn

    @property
    def no_acceptances(self) -> bool:
        return self.a_tp + self.a_fp == 0

    @property
    def ap(self) -> float:
        # 0/0 is reported as 1.0; see no_acceptances
        if self.no_acceptances:
            return 1.0
        return self.a_tp / (self.a_tp + self.a_fp)

    @property
    def prob_fraction(self) -> Fraction:
        return Fraction(self.a_tp + self.a_fp, self.sample_size)

    @property
    def prob(self) -> float:
        return float(self.prob_fraction)

    @property
    def error(self) -> float:
        """Share of the sample wrongly accepted, the exact reduction error over |S|."""
        return self.a_fp / self.sample_size

    @property
    def violation(self) -> bool:
        return self.a_fn > 0

    def __add__(self, other: 'EvalResult') -> 'EvalResult':
        return EvalResult(self.a_tp + other.a_tp, self.a_fp + other.a_fp,
                          self.a_fn + other.a_fn, self.a_tn + other.a_tn)

    def to_dict(self) -> dict:
        return {
            'a_tp': self.a_tp,
            'a_fp': self.a_fp,
            'a_fn': self.a_fn,
            'a_tn': self.a_tn,
            'sample_size': self.sample_size,
            'ap': self.ap,
            'prob': self.prob,
            'error': self.error,
            'no_acceptances': self.no_acceptances,
            'violation': self.violation,
        }


@dataclass(frozen=True)
class Candidate:
    """One point of the Pareto set: an automaton with its LUT cost and acceptance probability."""

    id: str
    lut: float
    accpt: float
    nfa_path: Optional[str] = None
    precise: bool = False

    def __post_init__(self):
        if not self.lut > 0:
            raise UsageError(f'candidate {self.id}: lut must be positive, got {self.lut}')
        if not 0 <= self.accpt <= 1:
            raise UsageError(f'candidate {self.id}: accpt must be in [0,1], got {self.accpt}')


@dataclass(frozen=True)
class PlanProblem:
    """Inputs of OPT_RSC / OPT_out.

    ``max_output`` is X (Gbps), ``max_luts`` is Y (LUTs). The objective decides
    which quantity is minimised; whichever bounds are given constrain the plan.
    ``max_stages`` is n; with ``exact_stages`` only n-stage plans are considered,
    otherwise 1..n.
    """

    candidates: Tuple[Candidate, ...]
    input_rate: float
    engine_throughput: float
    max_stages: int = 1
    objective: str = OPT_RSC
    max_output: Optional[float] = None
    max_luts: Optional[float] = None
    exact_stages: bool = False

    def __post_init__(self):
        if not self.candidates:
            raise UsageError('candidate list is empty')
        ids = [c.id for c in self.candidates]
        if len(set(ids)) != len(ids):
            raise UsageError('candidate ids must be unique')
        if not self.input_rate > 0:
            raise UsageError(f'input rate must be positive, got {self.input_rate}')
        if not self.engine_throughput > 0:
            raise UsageError(f'engine throughput must be positive, got {self.engine_throughput}')
        if self.max_stages < 1:
            raise UsageError(f'number of stages must be at least 1, got {self.max_stages}')
        if self.objective not in (OPT_RSC, OPT_OUT):
            raise UsageError(f'unknown objective: {self.objective}')
        if self.objective == OPT_RSC and self.max_output is None:
            raise UsageError('OPT_RSC needs an output bound X')
        if self.objective == OPT_OUT and self.max_luts is None:
            raise UsageError('OPT_out needs a resource bound Y')
        if self.max_output is not None and not self.max_output > 0:
            raise UsageError(f'output bound X must be positive, got {self.max_output}')
        if self.max_luts is not None and not self.max_luts > 0:
            raise UsageError(f'resource bound Y must be positive, got {self.max_luts}')

    @property
    def precise(self) -> Candidate:
        """The flagged precise candidate, else the one with the lowest accpt."""
        for candidate in self.candidates:
            if candidate.precise:
                return candidate
        return min(self.candidates, key=lambda c: (c.accpt, -c.lut, c.id))


@dataclass(frozen=True)
class StageAssignment:
    candidate_id: str
    replicas: int
    input_rate: Fraction
    output_rate: Fraction
    luts: Fraction


@dataclass(frozen=True)
class StagePlan:
    stages: Tuple[StageAssignment, ...]
    total_rsc: Fraction
    output_rate: Fraction

    @property
    def candidate_ids(self) -> Tuple[str, ...]:
        return tuple(s.candidate_id for s in self.stages)

    def to_dict(self) -> dict:
        return {
            'stages': [
                {
                    'stage': i,
                    'candidate': s.candidate_id,
                    'replicas': s.replicas,
                    'input_gbps': float(s.input_rate),
                    'output_gbps': float(s.output_rate),
                    'luts': float(s.luts),
                }
                for i, s in enumerate(self.stages, start=1)
            ],
            'total_rsc': float(self.total_rsc),
            'output_gbps': float(self.output_rate),
        }


@dataclass(frozen=True)
class Infeasible:
    """No assignment satisfies the bounds; ``binding`` is 'max_output' or 'max_luts'."""

    binding: str
    message: str

    def to_dict(self) -> dict:
        return {'infeasible': True, 'binding': self.binding, 'message': self.message}
