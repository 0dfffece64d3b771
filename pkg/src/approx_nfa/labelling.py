"""State significance over a training sample.

l(q) is the number of sample packets (with multiplicity) over which q is
reachable by some prefix. Each packet is run through the subset construction
to its end; the frontiers it meets are united and every state in the union is
credited once per occurrence.
"""

import logging
from collections import Counter
from fractions import Fraction
from typing import List, Optional, Sequence, Tuple

import numpy as np

from .automata import Nfa, Stepper, nfa_hash
from .models import InputFormatError, Labeling, MismatchingLabelingError, UsageError
from .traffic import TrafficSample
from .utils import parallel_map

logger = logging.getLogger(__name__)


def _label_chunk(job: Tuple[Nfa, List[Tuple[bytes, int]]]) -> np.ndarray:
    nfa, items = job
    stepper = Stepper(nfa)
    reached: Counter = Counter()
    for packet, count in items:
        reached[stepper.reached(packet)] += count
    counts = np.zeros(nfa.num_states, dtype=np.int64)
    for states, count in reached.items():
        counts[np.fromiter(states, dtype=np.int64, count=len(states))] += count
    return counts


def label(nfa: Nfa, sample: TrafficSample, workers: int = 1) -> Labeling:
    """Significance of every state; the labeling records the NFA's hash."""
    chunks = sample.chunks(workers) if workers > 1 else [list(sample)]
    counts = np.zeros(nfa.num_states, dtype=np.int64)
    for part in parallel_map(_label_chunk, [(nfa, c) for c in chunks if c], workers):
        counts += part
    logger.debug('Labelled %d states over %d packets (%d distinct)',
                 nfa.num_states, sample.total_packets, len(sample))
    return Labeling(tuple(int(c) for c in counts), sample.total_packets, nfa_hash(nfa))


def frequency(labeling: Labeling, q: int) -> Fraction:
    """f(q) = l(q) / |S|, exact."""
    if labeling.sample_size == 0:
        raise UsageError('frequency is undefined for an empty sample')
    return Fraction(labeling[q], labeling.sample_size)


def frequencies(labeling: Labeling) -> List[Fraction]:
    return [frequency(labeling, q) for q in range(len(labeling))]


def merged_labeling(labeling: Labeling, blocks: Sequence[Sequence[int]]) -> Labeling:
    """Labeling of a merged automaton: new state i gets the max over ``blocks[i]``."""
    counts = tuple(max(labeling[q] for q in block) for block in blocks)
    return Labeling(counts, labeling.sample_size)


def check_labeling(nfa: Nfa, labeling: Labeling) -> None:
    """Reject a labeling computed for another automaton."""
    if labeling.nfa_hash is not None:
        expected = nfa_hash(nfa)
        if labeling.nfa_hash != expected:
            raise MismatchingLabelingError(expected, labeling.nfa_hash)
    if len(labeling) != nfa.num_states:
        raise InputFormatError(
            f'labeling covers {len(labeling)} states, NFA has {nfa.num_states}')


def write_labeling(labeling: Labeling, path: str) -> None:
    with open(path, 'w', encoding='utf-8') as f:
        f.write(f'# sample_size={labeling.sample_size}\n')
        if labeling.nfa_hash:
            f.write(f'# nfa_hash={labeling.nfa_hash}\n')
        f.write('state,count\n')
        for q, count in enumerate(labeling.counts):
            f.write(f'{q},{count}\n')


def read_labeling(path: str, nfa: Optional[Nfa] = None) -> Labeling:
    """Read a labeling CSV; with ``nfa`` given, also check it belongs to it."""
    sample_size = None
    digest = None
    counts: List[int] = []
    with open(path, encoding='utf-8') as f:
        for number, raw in enumerate(f, start=1):
            line = raw.strip()
            if not line:
                continue
            if line.startswith('#'):
                key, _, value = line[1:].strip().partition('=')
                if key.strip() == 'sample_size':
                    sample_size = _int_field(value, path, number)
                elif key.strip() == 'nfa_hash':
                    digest = value.strip()
                continue
            if line == 'state,count':
                continue
            state_text, _, count_text = line.partition(',')
            state = _int_field(state_text, path, number)
            if state != len(counts):
                raise InputFormatError(f'{path}:{number}: expected state {len(counts)}, got {state}')
            counts.append(_int_field(count_text, path, number))
    if sample_size is None:
        raise InputFormatError(f'{path}: missing "# sample_size=" header')
    if not counts:
        raise InputFormatError(f'{path}: no states')
    if any(c < 0 or c > sample_size for c in counts):
        raise InputFormatError(f'{path}: counts must lie in 0..{sample_size}')
    labeling = Labeling(tuple(counts), sample_size, digest)
    if nfa is not None:
        check_labeling(nfa, labeling)
    return labeling


def _int_field(text: str, path: str, number: int) -> int:
    try:
        return int(text.strip())
    except ValueError:
        raise InputFormatError(f'{path}:{number}: expected an integer, got {text.strip()!r}') from None
