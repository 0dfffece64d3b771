import sys
from pathlib import Path

import numpy as np
import pytest

REPO_ROOT = Path(__file__).resolve().parent.parent
SCRIPT = REPO_ROOT / "approx-nfa.py"

# Make the tests dir importable so `from conftest import ...` works in test modules.
if str(Path(__file__).resolve().parent) not in sys.path:
    sys.path.insert(0, str(Path(__file__).resolve().parent))

from approx_nfa.automata import Nfa, byte_class  # noqa: E402
from approx_nfa.models import Candidate, Labeling, PlanProblem  # noqa: E402
from approx_nfa.traffic import TrafficSample  # noqa: E402

A, B, C, D = (ord(ch) for ch in "abcd")
SMALL_ALPHABET = b"abcd"


def sym(*chars: str) -> int:
    return byte_class(ord(ch) for ch in chars)


def forked_nfa() -> Nfa:
    """a a* then either a (q3, final) or b b (q2 -> q4, final)."""
    return Nfa.build(5, 0, {3, 4}, [
        (0, sym("a"), 1),
        (1, sym("a"), 1),
        (1, sym("b"), 2),
        (2, sym("b"), 4),
        (1, sym("a"), 3),
    ])


def forked_pruned() -> Nfa:
    return Nfa.build(3, 0, {1, 2}, [
        (0, sym("a"), 1),
        (1, sym("a"), 1),
        (1, sym("a"), 2),
    ])


def chained_nfa() -> Nfa:
    return Nfa.build(8, 0, {1, 6, 7}, [
        (0, sym("a"), 1),
        (0, sym("b"), 2),
        (2, sym("c"), 3),
        (3, sym("d"), 4),
        (4, sym("a"), 5),
        (4, sym("c"), 7),
        (5, sym("b"), 6),
    ])


def chained_merged() -> Nfa:
    # blocks (0) (1) (2,3,4) (5) (6) (7)
    return Nfa.build(6, 0, {1, 4, 5}, [
        (0, sym("a"), 1),
        (0, sym("b"), 2),
        (2, sym("c", "d"), 2),
        (2, sym("a"), 3),
        (2, sym("c"), 5),
        (3, sym("b"), 4),
    ])


# l(q2) = l(q3) = l(q4) within D = 1.5 of each other, every other neighbour pair far apart
CHAINED_COUNTS = (100, 10, 50, 50, 50, 20, 5, 3)


def chained_labeling() -> Labeling:
    return Labeling(CHAINED_COUNTS, 100)


STAGE_CANDIDATES = (("A1", 100, 0.5), ("A2", 200, 0.2), ("A3", 1000, 0.1))


def stage_candidates():
    return tuple(Candidate(i, lut, accpt, precise=(i == "A3")) for i, lut, accpt in STAGE_CANDIDATES)


def stage_problem(**overrides) -> PlanProblem:
    settings = dict(candidates=stage_candidates(), input_rate=100, engine_throughput=6.4,
                    max_stages=3, objective="rsc", max_output=10)
    settings.update(overrides)
    return PlanProblem(**settings)


# -- seeded generators --------------------------------------------------------

def random_nfa(rng: np.random.Generator, max_states: int = 10,
               alphabet: bytes = SMALL_ALPHABET, density: float = 0.25) -> Nfa:
    n = int(rng.integers(1, max_states + 1))
    edges = []
    for src in range(n):
        for dst in range(n):
            if rng.random() < density:
                chosen = [a for a in alphabet if rng.random() < 0.5] or [alphabet[0]]
                edges.append((src, byte_class(chosen), dst))
    finals = {q for q in range(n) if rng.random() < 0.3}
    return Nfa.build(n, 0, finals, edges)


def random_word(rng: np.random.Generator, max_len: int, alphabet: bytes = SMALL_ALPHABET) -> bytes:
    length = int(rng.integers(0, max_len + 1))
    return bytes(alphabet[int(i)] for i in rng.integers(0, len(alphabet), size=length))


def random_sample(rng: np.random.Generator, packets: int, max_len: int = 8,
                  alphabet: bytes = SMALL_ALPHABET) -> TrafficSample:
    return TrafficSample.from_packets(random_word(rng, max_len, alphabet) for _ in range(packets))


def all_words(max_len: int, alphabet: bytes = SMALL_ALPHABET):
    words = [b""]
    frontier = [b""]
    for _ in range(max_len):
        frontier = [w + bytes([a]) for w in frontier for a in alphabet]
        words.extend(frontier)
    return words


# -- brute-force oracles ------------------------------------------------------

def _runs(nfa: Nfa, word: bytes):
    """Every (state, position) some run over a prefix of ``word`` visits."""
    seen = {(nfa.initial, 0)}
    stack = [(nfa.initial, 0)]
    while stack:
        q, i = stack.pop()
        if i == len(word):
            continue
        for (src, dst), bitmap in nfa.transitions.items():
            if src == q and bitmap >> word[i] & 1 and (dst, i + 1) not in seen:
                seen.add((dst, i + 1))
                stack.append((dst, i + 1))
    return seen


def oracle_accepts(nfa: Nfa, word: bytes) -> bool:
    return any(q in nfa.finals for q, _ in _runs(nfa, word))


def oracle_counts(nfa: Nfa, sample: TrafficSample):
    counts = [0] * nfa.num_states
    for word, count in sample:
        for q in {q for q, _ in _runs(nfa, word)}:
            counts[q] += count
    return counts


@pytest.fixture
def forked():
    return forked_nfa()


@pytest.fixture
def chained():
    return chained_nfa()


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)
