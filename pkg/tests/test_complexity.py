"""Scaling checks; run with ``pytest -m slow``."""

import time

import numpy as np
import pytest

from approx_nfa.automata import Nfa, byte_class
from approx_nfa.constants import FULL_BYTE_CLASS
from approx_nfa.labelling import label
from approx_nfa.models import RuleSet
from approx_nfa.recompile import compile_ruleset
from approx_nfa.reduce import prune
from approx_nfa.traffic import TrafficSample
from conftest import random_sample

pytestmark = pytest.mark.slow

CHAINS = 111
CHAIN_LENGTH = 9  # 1 hub + 111 * 9 = 1,000 states


def _signature_nfa(rng) -> Nfa:
    """Hub with a self-loop plus one literal chain of upper-case bytes per signature."""
    edges = [(0, FULL_BYTE_CLASS, 0)]
    finals = []
    for chain in range(CHAINS):
        word = rng.integers(0x41, 0x5b, size=CHAIN_LENGTH)
        prev = 0
        for i, symbol in enumerate(word):
            state = 1 + chain * CHAIN_LENGTH + i
            edges.append((prev, byte_class([int(symbol)]), state))
            prev = state
        finals.append(prev)
    return Nfa.build(1 + CHAINS * CHAIN_LENGTH, 0, finals, edges)


def _packets(rng, n: int, length: int = 64) -> list:
    """Lower-case payloads with about 2 % upper-case bytes that can start a signature."""
    body = rng.integers(0x61, 0x7b, size=(n, length))
    upper = rng.integers(0x41, 0x5b, size=(n, length))
    body = np.where(rng.random((n, length)) < 0.02, upper, body).astype(np.uint8)
    return [row.tobytes() for row in body]


def _timed(fn, *args):
    start = time.perf_counter()
    result = fn(*args)
    return result, time.perf_counter() - start


def test_labelling_sparse_thousand_state_nfa(rng):
    nfa = _signature_nfa(rng)
    assert nfa.num_states == 1000
    packets = _packets(rng, 200_000)
    single = TrafficSample.from_packets(packets[:100_000])
    double = TrafficSample.from_packets(packets)

    labeling, t_single = _timed(label, nfa, single)
    assert labeling.counts[0] == 100_000
    assert t_single < 30.0

    doubled, t_double = _timed(label, nfa, double)
    assert doubled.counts[0] == 200_000
    assert all(b >= a for a, b in zip(labeling.counts, doubled.counts))
    # linear within 50 % of the doubled time
    assert 0.5 * 2 * t_single <= t_double <= 1.5 * 2 * t_single


def test_prune_is_fast_on_large_automata(rng):
    rules = RuleSet(tuple((f"r{i}", f"{chr(97 + i % 20)}[a-z]{{3,9}}x{i}") for i in range(60)))
    nfa = compile_ruleset(rules)
    labeling = label(nfa, random_sample(rng, 500, max_len=32, alphabet=b"abcdefghijklmnopqrstx0123"))
    (reduced, report), elapsed = _timed(prune, nfa, labeling, "0.5")
    assert reduced.num_states <= nfa.num_states
    assert report.states_before == nfa.num_states
    assert elapsed < 5.0
