"""Tests for the NFA model, its text/DOT formats and prefix acceptance (automata.py)."""

import pytest

from approx_nfa.automata import (
    Nfa,
    Stepper,
    accepts_prefix,
    byte_range,
    class_ranges,
    display_class,
    dot_lines,
    export_dot,
    format_nfa,
    format_symspec,
    is_isomorphic,
    nfa_hash,
    parse_nfa,
    parse_symspec,
    read_nfa,
    step,
    write_nfa,
)
from approx_nfa.constants import FULL_BYTE_CLASS
from approx_nfa.models import Labeling, NfaParseError, UsageError
from conftest import all_words, forked_nfa, oracle_accepts, random_nfa, sym


def test_step_single_state(forked):
    assert step(forked, {1}, ord("b")) == {2}


def test_step_empty_frontier(forked):
    assert step(forked, set(), ord("a")) == frozenset()


def test_step_unions_successors(forked):
    assert step(forked, {0, 1}, ord("a")) == {1, 3}


def test_accepts_after_reaching_final(forked):
    assert accepts_prefix(forked, b"aab")


def test_rejects_when_frontier_empties(forked):
    assert not accepts_prefix(forked, b"b")


def test_rejects_without_final(forked):
    assert not accepts_prefix(forked, b"a")
    assert not accepts_prefix(forked, b"ab")


def test_initial_final_accepts_empty_packet():
    nfa = Nfa.build(1, 0, {0}, [])
    assert accepts_prefix(nfa, b"")
    assert accepts_prefix(nfa, b"anything")


def test_stepper_agrees_with_nfa(forked):
    stepper = Stepper(forked)
    for word in all_words(5, b"ab"):
        assert stepper.accepts(word) == forked.accepts_prefix(word)


def test_stepper_reached_is_union_of_frontiers(forked):
    stepper = Stepper(forked)
    assert stepper.reached(b"aab") == {0, 1, 2, 3}
    assert stepper.reached(b"aa") == {0, 1, 3}
    assert stepper.reached(b"") == {0}


def test_stepper_cache_is_bounded(forked):
    stepper = Stepper(forked, max_cache=2)
    for word in all_words(4, b"ab"):
        stepper.accepts(word)
        assert len(stepper._cache) <= 2


def test_accepts_matches_brute_force_oracle(rng):
    for _ in range(60):
        nfa = random_nfa(rng, max_states=8)
        for word in all_words(4):
            assert nfa.accepts_prefix(word) == oracle_accepts(nfa, word)


def test_step_is_monotone(rng):
    for _ in range(30):
        nfa = random_nfa(rng)
        small = {q for q in nfa.states if rng.random() < 0.4}
        large = small | {q for q in nfa.states if rng.random() < 0.4}
        for a in b"abcd":
            assert step(nfa, small, a) <= step(nfa, large, a)


def test_acceptance_is_prefix_closed(rng):
    for _ in range(30):
        nfa = random_nfa(rng)
        for word in all_words(3):
            if nfa.accepts_prefix(word):
                assert nfa.accepts_prefix(word + b"dcba")


def test_build_merges_classes_per_pair():
    nfa = Nfa.build(2, 0, {1}, [(0, sym("a"), 1), (0, sym("b"), 1)])
    assert nfa.transition_count == 1
    assert nfa.transitions[(0, 1)] == sym("a", "b")


@pytest.mark.parametrize("kwargs", [
    dict(num_states=0, initial=0, finals=frozenset(), transitions={}),
    dict(num_states=2, initial=2, finals=frozenset(), transitions={}),
    dict(num_states=2, initial=0, finals=frozenset({5}), transitions={}),
    dict(num_states=2, initial=0, finals=frozenset(), transitions={(0, 3): 1}),
    dict(num_states=2, initial=0, finals=frozenset(), transitions={(0, 1): 0}),
])
def test_invalid_automata_rejected(kwargs):
    with pytest.raises(UsageError):
        Nfa(**kwargs)


def test_restrict_makes_extra_finals_and_keeps_names(forked):
    reduced = forked.restrict([0, 1, 3], extra_finals=[1])
    assert reduced.num_states == 3
    assert reduced.finals == {1, 2}
    assert [reduced.state_name(q) for q in reduced.states] == ["0", "1", "3"]


def test_restrict_refuses_to_drop_initial(forked):
    with pytest.raises(UsageError):
        forked.restrict([1, 2, 3])


def test_trim_drops_useless_states():
    nfa = Nfa.build(4, 0, {1}, [(0, sym("a"), 1), (0, sym("b"), 2), (3, sym("a"), 1)])
    trimmed = nfa.trim()
    assert trimmed.num_states == 2
    for word in all_words(3, b"ab"):
        assert trimmed.accepts_prefix(word) == nfa.accepts_prefix(word)


def test_symspec_round_trip():
    bitmap = byte_range(0x61, 0x63) | sym("x") | 1
    text = format_symspec(bitmap)
    assert text == "0x00,0x61-0x63,0x78"
    assert parse_symspec(text) == bitmap


@pytest.mark.parametrize("text", ["", "61", "0x100", "0x63-0x61", "0xzz"])
def test_bad_symspec(text):
    with pytest.raises(ValueError):
        parse_symspec(text)


def test_class_ranges_and_display():
    assert class_ranges(sym("a", "b", "c", "x")) == [(0x61, 0x63), (0x78, 0x78)]
    assert display_class(sym("a", "b", "c", "x")) == "a-c,x"
    assert display_class(FULL_BYTE_CLASS) == "any"
    assert display_class(FULL_BYTE_CLASS ^ sym("a")).startswith("^[")


def test_text_round_trip(forked, tmp_path):
    path = tmp_path / "forked.nfa"
    write_nfa(forked, str(path))
    again = read_nfa(str(path))
    assert again == forked
    assert format_nfa(again) == path.read_text()


def test_text_format_layout(forked):
    lines = format_nfa(forked).splitlines()
    assert lines[0] == "initial 0"
    assert lines[1] == "states 5"
    assert "1 1 0x61" in lines
    assert lines[-1] == "final 3 4"


def test_rule_annotations_round_trip():
    nfa = Nfa.build(2, 0, {1}, [(0, sym("a"), 1)], final_rules={1: ["sid-1", "sid-2"]})
    again = parse_nfa(format_nfa(nfa))
    assert again.final_rules == {1: frozenset({"sid-1", "sid-2"})}


def test_parse_without_states_line():
    nfa = parse_nfa("initial 0\n0 1 0x61  # a\n\nfinal 1\n")
    assert nfa.num_states == 2
    assert nfa.accepts_prefix(b"a")


def test_parse_empty_final_list():
    nfa = parse_nfa("initial 0\nstates 1\nfinal\n")
    assert nfa.finals == frozenset()
    assert not nfa.accepts_prefix(b"abc")


def test_degenerate_accept_everything():
    nfa = parse_nfa("initial 0\nfinal 0\n")
    assert nfa.accepts_prefix(b"")
    assert nfa.transition_count == 0


@pytest.mark.parametrize("text,line", [
    ("initial 0\nstates 2\n0 2 0x61\nfinal 1\n", 3),
    ("initial 0\n0 1 0x61\nfinal 1\n0 1 0x62\n", 4),
    ("0 1 0x61\nfinal 1\n", 1),
    ("initial 0\ninitial 1\nfinal 1\n", 2),
    ("initial 0\n0 1 zz\nfinal 1\n", 2),
    ("initial 0\n0 x 0x61\nfinal 1\n", 2),
])
def test_parse_errors_carry_line(text, line):
    with pytest.raises(NfaParseError) as excinfo:
        parse_nfa(text)
    assert excinfo.value.line == line


def test_parse_missing_final_line():
    with pytest.raises(NfaParseError):
        parse_nfa("initial 0\n0 1 0x61\n")


def test_hash_tracks_structure(forked):
    assert nfa_hash(forked) == nfa_hash(forked_nfa())
    other = Nfa.build(5, 0, {3}, [(src, bitmap, dst) for src, bitmap, dst in forked.edges()])
    assert nfa_hash(other) != nfa_hash(forked)


def test_isomorphism_ignores_numbering(forked):
    order = [0, 3, 1, 4, 2]
    renamed = forked.restrict(order)
    assert renamed != forked
    assert is_isomorphic(renamed, forked)
    assert not is_isomorphic(forked.restrict([0, 1, 3]), forked)


def test_dot_has_one_node_per_state(forked, tmp_path):
    labeling = Labeling((2, 2, 1, 2, 0), 2)
    path = tmp_path / "forked.dot"
    export_dot(forked, labeling, str(path))
    text = path.read_text()
    assert text.startswith("digraph nfa {")
    node_lines = [ln for ln in text.splitlines() if ln.strip()[:1].isdigit() and "->" not in ln]
    assert len(node_lines) == 5
    assert "fillcolor" in text


def test_dot_without_labeling_is_uncoloured(forked):
    text = "\n".join(dot_lines(forked))
    assert "fillcolor" not in text
    assert "doublecircle" in text


def test_dot_all_cold_when_nothing_reached(forked):
    lines = list(dot_lines(forked, Labeling((0,) * 5, 0)))
    colours = {ln.split('fillcolor="')[1].split('"')[0] for ln in lines if "fillcolor" in ln}
    assert colours == {"0.667 0.600 1.000"}


def test_dot_is_deterministic(forked):
    labeling = Labeling((2, 2, 1, 2, 0), 2)
    assert list(dot_lines(forked, labeling)) == list(dot_lines(forked, labeling))


def test_dot_rejects_short_labeling(forked):
    with pytest.raises(UsageError):
        list(dot_lines(forked, Labeling((1, 1), 1)))
