"""Reduced-vs-precise evaluation on a testing sample."""

import logging
from dataclasses import dataclass
from fractions import Fraction
from typing import Dict, List, Tuple

from .automata import Nfa, Stepper
from .models import EvalResult, UsageError
from .recompile import rule_matches
from .traffic import TrafficSample
from .utils import parallel_map

logger = logging.getLogger(__name__)

UNATTRIBUTED = '<border>'


def _eval_chunk(job: Tuple[Nfa, Nfa, List[Tuple[bytes, int]]]) -> EvalResult:
    precise, reduced, items = job
    exact_run, approx_run = Stepper(precise), Stepper(reduced)
    result = EvalResult()
    for packet, count in items:
        hit = exact_run.accepts(packet)
        approx_hit = approx_run.accepts(packet)
        if hit and approx_hit:
            result.a_tp += count
        elif approx_hit:
            result.a_fp += count
        elif hit:
            result.a_fn += count
        else:
            result.a_tn += count
    return result


def evaluate(precise: Nfa, reduced: Nfa, test: TrafficSample, workers: int = 1) -> EvalResult:
    """Classify every packet occurrence by (precise accepts, reduced accepts)."""
    if test.total_packets == 0:
        raise UsageError('evaluation needs a non-empty sample')
    chunks = test.chunks(workers) if workers > 1 else [list(test)]
    result = EvalResult()
    for part in parallel_map(_eval_chunk, [(precise, reduced, c) for c in chunks], workers):
        result = result + part
    if result.violation:
        logger.warning('reduced NFA rejects %d packet(s) the precise NFA accepts', result.a_fn)
    return result


def estimate_accept_prob(nfa: Nfa, sample: TrafficSample) -> Fraction:
    """accpt(A): share of packet occurrences the automaton accepts."""
    if sample.total_packets == 0:
        raise UsageError('acceptance probability needs a non-empty sample')
    stepper = Stepper(nfa)
    accepted = sum(count for packet, count in sample if stepper.accepts(packet))
    return Fraction(accepted, sample.total_packets)


@dataclass
class RuleHits:
    rule_id: str
    precise: int = 0
    reduced: int = 0

    @property
    def extra(self) -> int:
        return self.reduced - self.precise


def compare_rules(precise: Nfa, reduced: Nfa, sample: TrafficSample) -> List[RuleHits]:
    """Per-rule packet hits of both automata.

    Acceptances of the reduced NFA that reach no annotated final (border
    states made final by pruning) are reported under ``<border>``.
    """
    hits: Dict[str, RuleHits] = {}
    exact_run, approx_run = Stepper(precise), Stepper(reduced)
    for packet, count in sample:
        for rule_id in rule_matches(precise, packet, exact_run):
            hits.setdefault(rule_id, RuleHits(rule_id)).precise += count
        matched = rule_matches(reduced, packet, approx_run)
        for rule_id in matched:
            hits.setdefault(rule_id, RuleHits(rule_id)).reduced += count
        if not matched and approx_run.accepts(packet):
            hits.setdefault(UNATTRIBUTED, RuleHits(UNATTRIBUTED)).reduced += count
    return [hits[k] for k in sorted(hits)]
