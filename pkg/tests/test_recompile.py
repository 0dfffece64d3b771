"""Tests for regex-to-NFA compilation, checked against Python's re on short words."""

import re

import pytest

from approx_nfa.automata import is_isomorphic
from approx_nfa.models import RegexSyntaxError, RuleFileError, RuleSet, UnsupportedRegexError
from approx_nfa.recompile import compile_regex, compile_ruleset, read_rules, rule_matches
from conftest import all_words

ORACLE_PATTERNS = [
    "ab",
    "a|bc",
    "a*b",
    "(ab)+c",
    "a{2,3}",
    "a{2,}d",
    "[a-c]d",
    "[^a]b",
    "^ab",
    "^a|b",
    "a.c",
    "(a|b){2}",
    "a?b?c",
    "\\x61b",
    "(?:ab)*d",
    "b(c|d)*a",
    "^(a|b)c{1,2}",
]


@pytest.mark.parametrize("pattern", ORACLE_PATTERNS)
def test_prefix_acceptance_matches_re_search(pattern):
    nfa = compile_regex(pattern)
    oracle = re.compile(pattern.encode(), re.DOTALL)
    for word in all_words(5):
        assert nfa.accepts_prefix(word) == (oracle.search(word) is not None), word


def test_ignore_case_flag():
    nfa = compile_regex("pcre:/ab/i")
    oracle = re.compile(b"ab", re.IGNORECASE)
    for word in all_words(4, b"aAbB"):
        assert nfa.accepts_prefix(word) == (oracle.search(word) is not None), word


def test_inline_ignore_case():
    nfa = compile_regex("(?i)x[a-b]")
    assert nfa.accepts_prefix(b"..XB")
    assert not nfa.accepts_prefix(b"..XC")


def test_slashes_without_flags_are_literal():
    nfa = compile_regex("/cgi-bin/phf")
    assert nfa.accepts_prefix(b"GET /cgi-bin/phf HTTP/1.0")
    assert not nfa.accepts_prefix(b"GET /cgi-bin/ph")


SLASHED = ["/admin/", "/a/", "/etc/ms", "/a/i", "a/b/s"]


@pytest.mark.parametrize("pattern", SLASHED)
def test_slashed_patterns_are_literal(pattern):
    nfa = compile_regex(pattern)
    oracle = re.compile(re.escape(pattern).encode())
    for word in all_words(3, b"a/b") + [pattern.encode(), b"GET " + pattern.encode() + b" HTTP"]:
        assert nfa.accepts_prefix(word) == (oracle.search(word) is not None), word


def test_pcre_prefix_forms():
    quoted = compile_regex('pcre:"/ad+min/i"')
    bare = compile_regex("pcre:/ad+min/i")
    assert is_isomorphic(quoted, bare)
    assert bare.accepts_prefix(b"GET /ADDMIN")
    assert not bare.accepts_prefix(b"GET /amin")


@pytest.mark.parametrize("pattern", ["pcre:admin", "pcre:/admin", "pcre:/ab/q"])
def test_malformed_pcre_literal(pattern):
    with pytest.raises(RegexSyntaxError):
        compile_regex(pattern)


def test_dot_matches_every_byte():
    nfa = compile_regex("a.b")
    assert nfa.accepts_prefix(b"a\nb")
    assert nfa.accepts_prefix(b"a\xffb")


def test_class_escapes():
    nfa = compile_regex("\\d\\d\\s\\w")
    assert nfa.accepts_prefix(b"xx42 _")
    assert not nfa.accepts_prefix(b"4a _")


def test_empty_pattern_accepts_everything():
    nfa = compile_regex("")
    assert nfa.accepts_prefix(b"")


def test_compiled_automaton_is_trim():
    nfa = compile_regex("abc|abd")
    assert nfa.trim().num_states == nfa.num_states


@pytest.mark.parametrize("pattern,construct", [
    ("(a)\\1", "backreference"),
    ("a(?=b)", "lookahead"),
    ("a(?!b)", "negative lookahead"),
    ("(?<=a)b", "lookbehind"),
    ("ab$", "end anchor"),
    ("a\\bb", "word boundary"),
    ("a*?b", "lazy quantifier"),
    ("a++b", "possessive quantifier"),
    ("[[:digit:]]", "POSIX character class"),
    ("pcre:/ab/x", "flag x"),
    ("a^b", "anchor ^"),
])
def test_unsupported_constructs_are_named(pattern, construct):
    with pytest.raises(UnsupportedRegexError) as excinfo:
        compile_regex(pattern)
    assert construct in excinfo.value.construct


@pytest.mark.parametrize("pattern", ["(ab", "ab)", "[ab", "*a", "a{3,2}", "\\x6", "[z-a]", "ab\\"])
def test_syntax_errors(pattern):
    with pytest.raises(RegexSyntaxError):
        compile_regex(pattern)


def test_syntax_error_reports_position():
    with pytest.raises(RegexSyntaxError) as excinfo:
        compile_regex("ab(cd")
    assert excinfo.value.position == 5
    assert "ab(cd" in str(excinfo.value)


def test_expansion_cap():
    compile_regex("a{5}", expansion_cap=5)
    with pytest.raises(UnsupportedRegexError) as excinfo:
        compile_regex("a{6}", expansion_cap=5)
    assert "expansion cap" in str(excinfo.value)


def test_expansion_cap_counts_nested_repetition():
    compile_regex("(a{4}){4}", expansion_cap=16)
    with pytest.raises(UnsupportedRegexError):
        compile_regex("(a{4}){5}", expansion_cap=16)
    with pytest.raises(UnsupportedRegexError):
        compile_regex("(a{100}){100}")
    with pytest.raises(UnsupportedRegexError):
        compile_regex("((ab){8}c){9}")
    # sequential repetitions are bounded one at a time
    compile_regex("a{60}b{60}")


def test_ruleset_is_union_of_rules():
    rules = RuleSet((("r1", "ab"), ("r2", "^cd"), ("r3", "b+d")))
    union = compile_ruleset(rules)
    parts = [compile_regex(pattern) for _, pattern in rules]
    for word in all_words(4):
        assert union.accepts_prefix(word) == any(p.accepts_prefix(word) for p in parts), word


def test_rule_matches_reports_rule_ids():
    rules = RuleSet((("r1", "ab"), ("r2", "^cd"), ("r3", "b+d")))
    nfa = compile_ruleset(rules)
    assert rule_matches(nfa, b"cdab") == {"r1", "r2"}
    assert rule_matches(nfa, b"abbd") == {"r1", "r3"}
    assert rule_matches(nfa, b"dddd") == frozenset()


def test_rule_matches_without_annotations():
    assert rule_matches(compile_regex("ab"), b"ab") == frozenset()


def test_ruleset_error_names_rule():
    rules = RuleSet((("ok", "ab"), ("bad", "a(?=b)")))
    with pytest.raises(UnsupportedRegexError) as excinfo:
        compile_ruleset(rules)
    assert excinfo.value.rule_id == "bad"
    assert "rule bad" in str(excinfo.value)


def test_read_rules(tmp_path):
    path = tmp_path / "rules.txt"
    path.write_text("# web rules\n\nsid-1\tGET /admin\nsid-2\t^\\x16\\x03\n")
    rules = read_rules(str(path))
    assert rules.rules == (("sid-1", "GET /admin"), ("sid-2", "^\\x16\\x03"))


def test_read_rules_rejects_missing_tab(tmp_path):
    path = tmp_path / "rules.txt"
    path.write_text("sid-1 GET\n")
    with pytest.raises(RuleFileError):
        read_rules(str(path))


def test_duplicate_rule_ids(tmp_path):
    path = tmp_path / "rules.txt"
    path.write_text("a\tx\na\ty\n")
    with pytest.raises(RuleFileError):
        read_rules(str(path))
