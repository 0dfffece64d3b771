"""Tests for the approximate reductions (prune, merge, merge-prune, bfs)."""

import pytest

from approx_nfa.automata import Nfa, Stepper, write_nfa
from approx_nfa.constants import METHODS
from approx_nfa.labelling import label
from approx_nfa.models import InputFormatError, Labeling, UnderApproximationError, UsageError
from approx_nfa.reduce import (
    bfs_reduce,
    check_inclusion,
    kept_state_count,
    merge,
    merge_prune,
    prune,
    prune_states,
    reduce_nfa,
    substitute_external,
)
from approx_nfa.traffic import TrafficSample
from conftest import (
    all_words,
    forked_pruned,
    chained_labeling,
    chained_merged,
    random_nfa,
    random_sample,
    sym,
)

WORDS = all_words(6)

FORKED_LABELING = Labeling((2, 2, 1, 2, 0), 2)


def _minimal_accepted(nfa):
    """Accepted words none of whose proper prefixes is accepted."""
    run = Stepper(nfa)
    return [w for w in WORDS if run.accepts(w) and (not w or not run.accepts(w[:-1]))]


@pytest.mark.parametrize("theta,expected", [
    (1, 5), ("0.6", 3), (0.5, 3), ("0.2", 1), ("0.01", 1), (0.99, 5),
])
def test_kept_state_count(theta, expected):
    assert kept_state_count(5, theta) == expected


def test_kept_state_count_uses_decimal_text():
    # 0.3 * 10 is 3.0000000000000004 in binary floating point
    assert kept_state_count(10, 0.3) == 3


@pytest.mark.parametrize("theta", [0, -0.5, 1.5, "x"])
def test_bad_theta(theta, forked):
    with pytest.raises(UsageError):
        prune(forked, FORKED_LABELING, theta)


def test_prune_states_makes_border_final(forked):
    reduced, report = prune_states(forked, {2, 4}, FORKED_LABELING)
    assert reduced == forked_pruned()
    assert report.border_states == (1,)
    assert report.error_bound == 2


def test_prune_removes_least_significant(forked):
    reduced, report = prune(forked, FORKED_LABELING, "0.6")
    assert reduced == forked_pruned()
    assert report.states_before == 5
    assert report.states_after == 3
    assert report.error_bound == 2
    assert [reduced.state_name(q) for q in reduced.states] == ["0", "1", "3"]


def test_prune_theta_one_is_identity(forked):
    reduced, report = prune(forked, FORKED_LABELING, 1)
    assert reduced == forked
    assert report.error_bound == 0


def test_prune_never_removes_initial(forked):
    reduced, _ = prune(forked, Labeling((0, 5, 5, 5, 5), 5), "0.2")
    assert reduced.num_states == 1
    assert reduced.initial == 0
    assert reduced.finals == {0}


def test_prune_tie_removes_higher_ids_first():
    nfa = Nfa.build(4, 0, {3}, [(0, sym("a"), 1), (0, sym("b"), 2), (0, sym("c"), 3)])
    reduced, _ = prune(nfa, Labeling((9, 1, 1, 1), 9), 0.5)
    assert [reduced.state_name(q) for q in reduced.states] == ["0", "1"]


def test_prune_rejects_initial(forked):
    with pytest.raises(UsageError):
        prune_states(forked, {0})


def test_prune_checks_labeling_length(forked):
    with pytest.raises(InputFormatError):
        prune(forked, Labeling((1, 1), 1), 0.5)


def test_merge_collapses_similar_rare_neighbours(chained):
    merged, report = merge(chained, chained_labeling(), 1.5, 0.6)
    assert merged == chained_merged()
    assert report.merged_classes == ((2, 3, 4),)
    assert merged.state_name(2) == "2+3+4"
    assert report.states_after == 6


def test_merge_with_frequent_states_does_nothing(chained):
    merged, report = merge(chained, chained_labeling(), 1.5, 0.04)
    assert merged == chained
    assert report.merged_classes == ()


def test_merge_zero_counts():
    nfa = Nfa.build(4, 0, {3}, [(0, sym("a"), 1), (1, sym("b"), 2), (2, sym("c"), 3)])
    merged, report = merge(nfa, Labeling((10, 0, 0, 1), 10), 1.005, 1)
    assert report.merged_classes == ((1, 2),)
    assert merged.num_states == 3


def test_merge_parameter_validation(chained):
    with pytest.raises(UsageError):
        merge(chained, chained_labeling(), 0.9, 0.5)
    with pytest.raises(UsageError):
        merge(chained, chained_labeling(), 1.5, 0)
    with pytest.raises(UsageError):
        merge(chained, Labeling((0,) * 8, 0), 1.5, 0.5)


def test_merge_prune_prunes_merged_automaton(chained):
    reduced, report = merge_prune(chained, chained_labeling(), 1.5, 0.6, 0.5)
    assert report.states_before == 8
    assert reduced.num_states == 4
    assert reduced.finals == {1, 2, 3}
    assert report.error_bound == 70
    assert report.merged_classes == ((2, 3, 4),)
    assert report.parameters == {"D": 1.5, "F": 0.6, "theta": 0.5}


def test_merge_prune_below_merged_size_is_merge(chained):
    reduced, _ = merge_prune(chained, chained_labeling(), 1.5, 0.6, 1)
    assert reduced == chained_merged()


def test_bfs_chain_keeps_shallow_states():
    chain = Nfa.build(4, 0, {3}, [(0, sym("a"), 1), (1, sym("b"), 2), (2, sym("c"), 3)])
    reduced, report = bfs_reduce(chain, 0.5)
    assert reduced.num_states == 2
    assert reduced.finals == {1}
    assert report.error_bound is None
    assert reduced.accepts_prefix(b"a")


def test_bfs_star_removes_deepest_then_highest():
    star = Nfa.build(5, 0, {4}, [(0, sym("a"), 1), (0, sym("b"), 2), (0, sym("c"), 3),
                                 (1, sym("d"), 4)])
    reduced, report = bfs_reduce(star, 0.6)
    assert [reduced.state_name(q) for q in reduced.states] == ["0", "1", "2"]
    assert report.border_states == (0, 1)
    assert reduced.accepts_prefix(b"")


def test_bfs_prunes_unreachable_first():
    nfa = Nfa.build(3, 0, {1}, [(0, sym("a"), 1), (2, sym("a"), 1)])
    reduced, _ = bfs_reduce(nfa, "0.6")
    assert [reduced.state_name(q) for q in reduced.states] == ["0", "1"]
    assert reduced.finals == {1}


def test_reduce_dispatch(forked, chained):
    assert reduce_nfa(forked, "prune", FORKED_LABELING, theta="0.6")[0] == forked_pruned()
    assert reduce_nfa(chained, "merge", chained_labeling(), distance_ceiling=1.5,
                      frequency_ceiling=0.6)[0] == chained_merged()
    assert reduce_nfa(forked, "bfs", theta=1)[0] == forked
    with pytest.raises(UsageError):
        reduce_nfa(forked, "prune")
    with pytest.raises(UsageError):
        reduce_nfa(chained, "merge", chained_labeling())
    with pytest.raises(UsageError):
        reduce_nfa(forked, "shrink", FORKED_LABELING)


def test_reductions_over_approximate(rng):
    params = [("0.3", 1.5, 0.5), ("0.7", 3, 1)]
    for _ in range(200):
        nfa = random_nfa(rng)
        labeling = label(nfa, random_sample(rng, 30, max_len=6))
        needed = _minimal_accepted(nfa)
        for method in METHODS:
            for theta, distance, frequency in params:
                reduced, report = reduce_nfa(nfa, method, labeling, theta=theta,
                                             distance_ceiling=distance,
                                             frequency_ceiling=frequency)
                assert report.states_after <= nfa.num_states
                for word in needed:
                    assert reduced.accepts_prefix(word), (method, theta, word)


def test_reduced_size_matches_ratio(rng):
    for _ in range(50):
        nfa = random_nfa(rng)
        labeling = label(nfa, random_sample(rng, 20))
        for theta in ("0.25", "0.5", "1"):
            assert prune(nfa, labeling, theta)[0].num_states == kept_state_count(nfa.num_states, theta)
            assert bfs_reduce(nfa, theta)[0].num_states == kept_state_count(nfa.num_states, theta)


def test_prune_error_bound_holds_on_training_sample(rng):
    for _ in range(100):
        nfa = random_nfa(rng)
        sample = random_sample(rng, 40, max_len=8)
        labeling = label(nfa, sample)
        for reduce in (lambda: prune(nfa, labeling, "0.5"),
                       lambda: bfs_reduce(nfa, "0.5", labeling)):
            reduced, report = reduce()
            wrong = sum(c for w, c in sample
                        if reduced.accepts_prefix(w) and not nfa.accepts_prefix(w))
            assert wrong <= report.error_bound


def test_check_inclusion(forked):
    assert check_inclusion(forked, forked_pruned(), WORDS[:100]) == []
    rejecting = Nfa.build(1, 0, set(), [])
    assert check_inclusion(forked, rejecting, [b"aa", b"b"]) == [b"aa"]


def test_substitute_external(forked, tmp_path):
    path = tmp_path / "ext.nfa"
    write_nfa(forked_pruned(), str(path))
    sample = TrafficSample.from_packets([b"aab", b"aa", b"ab"])
    reduced, report = substitute_external(forked, str(path), sample)
    assert reduced == forked_pruned()
    assert report.method == "external"


def test_substitute_external_rejects_under_approximation(forked, tmp_path):
    path = tmp_path / "ext.nfa"
    write_nfa(Nfa.build(1, 0, set(), []), str(path))
    with pytest.raises(UnderApproximationError) as excinfo:
        substitute_external(forked, str(path), TrafficSample.from_packets([b"aa", b"b"]))
    assert excinfo.value.counterexamples == [b"aa"]
    assert excinfo.value.exit_code == 5
