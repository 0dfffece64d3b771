"""Approximate reductions: prune, merge, merge-prune and the BFS baseline.

Every reduction over-approximates: pruning turns border states (kept states
with a transition into the removed set) into finals, and merging only adds
paths. Ties among equally ranked states remove the higher state id first.
"""

import logging
from fractions import Fraction
from typing import Dict, Iterable, List, Optional, Sequence, Tuple, Union

import networkx as nx

from .automata import Nfa, Stepper, read_nfa
from .constants import METHOD_BFS, METHOD_MERGE, METHOD_MERGE_PRUNE, METHOD_PRUNE
from .labelling import check_labeling, merged_labeling
from .models import Labeling, ReductionReport, UnderApproximationError, UsageError
from .traffic import TrafficSample
from .utils import exact

logger = logging.getLogger(__name__)

Number = Union[int, float, str, Fraction]


def _theta(theta: Number) -> Fraction:
    value = exact(theta)
    if not 0 < value <= 1:
        raise UsageError(f'reduction ratio theta must be in (0,1], got {theta}')
    return value


def kept_state_count(num_states: int, theta: Number) -> int:
    """m = ceil(theta * n), with theta read from its decimal text."""
    value = _theta(theta)
    return -(-value.numerator * num_states // value.denominator)


def prune_states(nfa: Nfa, removed: Iterable[int],
                 labeling: Optional[Labeling] = None) -> Tuple[Nfa, ReductionReport]:
    """Remove R; its surviving predecessors (border states B) become final.

    With a labeling, the report carries the error bound sum of l(q) over B.
    """
    removed = set(removed)
    if nfa.initial in removed:
        raise UsageError('the initial state cannot be pruned')
    keep = [q for q in nfa.states if q not in removed]
    border = sorted({src for (src, dst) in nfa.transitions
                     if dst in removed and src not in removed})
    reduced = nfa.restrict(keep, extra_finals=border)
    bound = sum(labeling[q] for q in border) if labeling is not None else None
    report = ReductionReport(METHOD_PRUNE, nfa.num_states, reduced.num_states,
                             error_bound=bound, border_states=tuple(border))
    return reduced, report


def _least_significant(nfa: Nfa, counts: Sequence[int], count: int) -> List[int]:
    ranked = sorted((q for q in nfa.states if q != nfa.initial), key=lambda q: (counts[q], -q))
    return ranked[:count]


def prune(nfa: Nfa, labeling: Labeling, theta: Number) -> Tuple[Nfa, ReductionReport]:
    """Keep the ceil(theta*|Q|) most significant states."""
    check_labeling(nfa, labeling)
    m = kept_state_count(nfa.num_states, theta)
    removed = _least_significant(nfa, labeling.counts, nfa.num_states - m)
    reduced, report = prune_states(nfa, removed, labeling)
    report.parameters = {'theta': float(theta)}
    logger.debug('prune theta=%s: %d -> %d states, bound %s',
                 theta, nfa.num_states, reduced.num_states, report.error_bound)
    return reduced, report


def _distance_within(lq: int, lr: int, ceiling: Fraction) -> bool:
    """d(q, r) <= D, with d = 1 when both counts are 0 and infinite when one is."""
    if lq == 0 or lr == 0:
        return lq == lr
    return max(lq, lr) <= ceiling * min(lq, lr)


def _merge(nfa: Nfa, labeling: Labeling, distance_ceiling: Number,
           frequency_ceiling: Number) -> Tuple[Nfa, List[Tuple[int, ...]], ReductionReport]:
    check_labeling(nfa, labeling)
    if labeling.sample_size == 0:
        raise UsageError('merging needs a non-empty sample (frequencies are undefined)')
    d_max = exact(distance_ceiling)
    f_max = exact(frequency_ceiling)
    if d_max < 1:
        raise UsageError(f'distance ceiling D must be at least 1, got {distance_ceiling}')
    if not 0 < f_max <= 1:
        raise UsageError(f'frequency ceiling F must be in (0,1], got {frequency_ceiling}')

    counts = labeling.counts
    rare = {q for q in nfa.states if counts[q] <= f_max * labeling.sample_size}
    similar = nx.Graph()
    similar.add_nodes_from(nfa.states)
    for (q, r) in nfa.transitions:
        if q != r and q in rare and r in rare and _distance_within(counts[q], counts[r], d_max):
            similar.add_edge(q, r)
    blocks = sorted(tuple(sorted(c)) for c in nx.connected_components(similar))

    index: Dict[int, int] = {}
    for new, block in enumerate(blocks):
        for q in block:
            index[q] = new
    edges = [(index[src], bitmap, index[dst]) for src, bitmap, dst in nfa.edges()]
    rules: Dict[int, set] = {}
    for q, ids in nfa.final_rules.items():
        rules.setdefault(index[q], set()).update(ids)
    names = ['+'.join(nfa.state_name(q) for q in block) for block in blocks]
    merged = Nfa.build(len(blocks), index[nfa.initial], {index[q] for q in nfa.finals},
                       edges, rules, names)
    report = ReductionReport(
        METHOD_MERGE, nfa.num_states, merged.num_states,
        parameters={'D': float(distance_ceiling), 'F': float(frequency_ceiling)},
        merged_classes=tuple(b for b in blocks if len(b) > 1))
    return merged, blocks, report


def merge(nfa: Nfa, labeling: Labeling, distance_ceiling: Number,
          frequency_ceiling: Number) -> Tuple[Nfa, ReductionReport]:
    """Collapse classes of rare neighbour states with similar significance.

    Neighbours q, r are related when d(q,r) = max(l(q)/l(r), l(r)/l(q)) <= D
    and both frequencies are at most F; each connected class becomes one state
    (named ``"2+3+4"``) whose internal transitions turn into self-loops.
    """
    merged, _, report = _merge(nfa, labeling, distance_ceiling, frequency_ceiling)
    logger.debug('merge D=%s F=%s: %d -> %d states',
                 distance_ceiling, frequency_ceiling, nfa.num_states, merged.num_states)
    return merged, report


def merge_prune(nfa: Nfa, labeling: Labeling, distance_ceiling: Number,
                frequency_ceiling: Number, theta: Number) -> Tuple[Nfa, ReductionReport]:
    """Merge, then prune to ceil(theta * original state count).

    A merged state counts as significant as its most significant member.
    """
    m = kept_state_count(nfa.num_states, theta)
    merged, blocks, merge_report = _merge(nfa, labeling, distance_ceiling, frequency_ceiling)
    merged_counts = merged_labeling(labeling, blocks)
    removed = _least_significant(merged, merged_counts.counts, max(merged.num_states - m, 0))
    reduced, report = prune_states(merged, removed, merged_counts)
    report.method = METHOD_MERGE_PRUNE
    report.states_before = nfa.num_states
    report.parameters = dict(merge_report.parameters, theta=float(theta))
    report.merged_classes = merge_report.merged_classes
    return reduced, report


def bfs_reduce(nfa: Nfa, theta: Number,
               labeling: Optional[Labeling] = None) -> Tuple[Nfa, ReductionReport]:
    """Prune the states farthest from q_I; unreachable states count as deepest."""
    if labeling is not None:
        check_labeling(nfa, labeling)
    m = kept_state_count(nfa.num_states, theta)
    depth = nx.single_source_shortest_path_length(nfa.to_graph(), nfa.initial)
    unreachable = nfa.num_states
    ranked = sorted((q for q in nfa.states if q != nfa.initial),
                    key=lambda q: (-depth.get(q, unreachable), -q))
    reduced, report = prune_states(nfa, ranked[:nfa.num_states - m], labeling)
    report.method = METHOD_BFS
    report.parameters = {'theta': float(theta)}
    return reduced, report


def reduce_nfa(nfa: Nfa, method: str, labeling: Optional[Labeling] = None,
               theta: Number = 1, distance_ceiling: Optional[Number] = None,
               frequency_ceiling: Optional[Number] = None) -> Tuple[Nfa, ReductionReport]:
    """Dispatch on the method name used by the CLI and sweeps."""
    if method == METHOD_BFS:
        return bfs_reduce(nfa, theta, labeling)
    if labeling is None:
        raise UsageError(f'method {method} needs a labeling')
    if method == METHOD_PRUNE:
        return prune(nfa, labeling, theta)
    if distance_ceiling is None or frequency_ceiling is None:
        raise UsageError(f'method {method} needs both D and F')
    if method == METHOD_MERGE:
        return merge(nfa, labeling, distance_ceiling, frequency_ceiling)
    if method == METHOD_MERGE_PRUNE:
        return merge_prune(nfa, labeling, distance_ceiling, frequency_ceiling, theta)
    raise UsageError(f'unknown reduction method: {method}')


def check_inclusion(original: Nfa, reduced: Nfa, words: Iterable[bytes]) -> List[bytes]:
    """Words accepted by ``original`` but rejected by ``reduced``."""
    precise = Stepper(original)
    approx = Stepper(reduced)
    return [w for w in words if precise.accepts(w) and not approx.accepts(w)]


def substitute_external(original: Nfa, path: str,
                        sample: Optional[TrafficSample] = None) -> Tuple[Nfa, ReductionReport]:
    """Load an externally reduced NFA, spot-checking inclusion on the sample's packets."""
    reduced = read_nfa(path)
    if sample is not None:
        counterexamples = check_inclusion(original, reduced, (w for w, _ in sample))
        if counterexamples:
            raise UnderApproximationError(counterexamples)
    report = ReductionReport('external', original.num_states, reduced.num_states,
                             parameters={})
    return reduced, report
