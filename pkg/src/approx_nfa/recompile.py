"""Regex subset to prefix-accepting NFA compilation.

Patterns are parsed into a small AST, built into an epsilon-NFA with the
Thompson construction, and epsilon transitions are eliminated before the
result is trimmed. Unless a pattern (or a top-level alternative) starts with
``^``, it is searched anywhere in the packet: such alternatives hang off a
shared initial hub state with a self-loop over every byte.

Supported: literals, ``\\xNN``, ``\\d\\w\\s`` and their negations, classes with
ranges and negation, ``.`` (every byte), ``* + ? {m} {m,} {m,n}``, ``|``,
``(...)``, ``(?:...)``, a leading ``(?i)``/``(?s)`` and the Snort-style
``pcre:/pattern/flags`` form with flags ``i``, ``s`` and ``m``. A pattern without
that prefix is taken literally, slashes included.
"""

import dataclasses
import logging
from typing import Dict, FrozenSet, List, Optional, Sequence, Set, Tuple

from .automata import Nfa, Stepper, byte_class, byte_range, class_symbols
from .constants import DEFAULT_EXPANSION_CAP, FULL_BYTE_CLASS, PCRE_PREFIX
from .models import (
    RegexSyntaxError,
    RuleFileError,
    RuleSet,
    UnsupportedRegexError,
)

logger = logging.getLogger(__name__)

_DIGIT = byte_range(0x30, 0x39)
_WORD = _DIGIT | byte_range(0x41, 0x5a) | byte_range(0x61, 0x7a) | byte_class([0x5f])
_SPACE = byte_class([0x20, 0x09, 0x0a, 0x0b, 0x0c, 0x0d])
_CLASS_ESCAPES = {
    'd': _DIGIT, 'D': FULL_BYTE_CLASS ^ _DIGIT,
    'w': _WORD, 'W': FULL_BYTE_CLASS ^ _WORD,
    's': _SPACE, 'S': FULL_BYTE_CLASS ^ _SPACE,
}
_CONTROL_ESCAPES = {'n': 0x0a, 'r': 0x0d, 't': 0x09, 'f': 0x0c, 'v': 0x0b,
                    'e': 0x1b, 'a': 0x07, '0': 0x00}
_ASSERTION_ESCAPES = {'b': 'word boundary \\b', 'B': 'word boundary \\B',
                      'A': 'anchor \\A', 'Z': 'anchor \\Z', 'z': 'anchor \\z',
                      'G': 'anchor \\G'}
_HEX = '0123456789abcdefABCDEF'
_PCRE_FLAGS = 'imsxADSUXJu'


def _fold_case(bitmap: int) -> int:
    """Add the other case of every ASCII letter in the class."""
    for a in class_symbols(bitmap & (byte_range(0x41, 0x5a) | byte_range(0x61, 0x7a))):
        bitmap |= 1 << (a ^ 0x20)
    return bitmap


# AST: ('sym', bitmap) | ('cat', [nodes]) | ('alt', [nodes]) | ('rep', node, min, max|None)
Node = tuple
EPSILON: Node = ('cat', [])


class _Parser:
    def __init__(self, pattern: str, text: str, offset: int, ignore_case: bool):
        self.pattern = pattern
        self.text = text
        self.offset = offset
        self.pos = 0
        self.ignore_case = ignore_case

    # helpers
    def error(self, message: str) -> RegexSyntaxError:
        return RegexSyntaxError(message, self.pattern, self.offset + self.pos)

    def unsupported(self, construct: str) -> UnsupportedRegexError:
        return UnsupportedRegexError(construct, self.pattern, self.offset + self.pos)

    def peek(self, ahead: int = 0) -> Optional[str]:
        i = self.pos + ahead
        return self.text[i] if i < len(self.text) else None

    def take(self) -> str:
        c = self.text[self.pos]
        self.pos += 1
        return c

    def sym(self, bitmap: int) -> Node:
        return ('sym', _fold_case(bitmap) if self.ignore_case else bitmap)

    # grammar
    def parse_top(self) -> List[Tuple[bool, Node]]:
        """Top-level alternatives as (anchored, node)."""
        branches = []
        while True:
            anchored = False
            if self.peek() == '^':
                self.take()
                anchored = True
            branches.append((anchored, self.parse_concat()))
            if self.peek() == '|':
                self.take()
                continue
            if self.peek() == ')':
                raise self.error('unbalanced )')
            return branches

    def parse_alt(self) -> Node:
        branches = [self.parse_concat()]
        while self.peek() == '|':
            self.take()
            branches.append(self.parse_concat())
        return branches[0] if len(branches) == 1 else ('alt', branches)

    def parse_concat(self) -> Node:
        items = []
        while self.peek() is not None and self.peek() not in '|)':
            items.append(self.parse_repeat())
        return items[0] if len(items) == 1 else ('cat', items)

    def parse_repeat(self) -> Node:
        node = self.parse_atom()
        while True:
            c = self.peek()
            if c == '*':
                self.take()
                node = ('rep', node, 0, None)
            elif c == '+':
                self.take()
                node = ('rep', node, 1, None)
            elif c == '?':
                self.take()
                node = ('rep', node, 0, 1)
            elif c == '{' and self._bounds_ahead() is not None:
                low, high, length = self._bounds_ahead()
                self.pos += length
                node = ('rep', node, low, high)
            else:
                return node
            if self.peek() == '?':
                raise self.unsupported('lazy quantifier')
            if self.peek() == '+':
                raise self.unsupported('possessive quantifier')

    def _bounds_ahead(self):
        """Parse ``{m}``, ``{m,}`` or ``{m,n}`` at pos; None if it is a literal brace."""
        end = self.text.find('}', self.pos)
        if end < 0:
            return None
        body = self.text[self.pos + 1:end]
        low_text, comma, high_text = body.partition(',')
        if not low_text.isdigit() or (high_text and not high_text.isdigit()):
            return None
        low = int(low_text)
        high = low if not comma else (int(high_text) if high_text else None)
        if high is not None and high < low:
            raise self.error(f'repetition bounds out of order {{{body}}}')
        return low, high, end - self.pos + 1

    def parse_atom(self) -> Node:
        c = self.take()
        if c == '(':
            if self.peek() == '?':
                self._group_extension()
            node = self.parse_alt()
            if self.peek() != ')':
                raise self.error('missing )')
            self.take()
            return node
        if c == '[':
            return ('sym', self._parse_class())
        if c == '.':
            return ('sym', FULL_BYTE_CLASS)
        if c == '\\':
            return self._parse_escape(in_class=False)
        if c in '*+?':
            raise self.error('nothing to repeat')
        if c == '^':
            raise self.unsupported('anchor ^ inside the pattern')
        if c == '$':
            raise self.unsupported('end anchor $')
        return self._literal(c)

    def _group_extension(self):
        self.take()  # '?'
        rest = self.text[self.pos:]
        if rest.startswith(':'):
            self.take()
            return
        for prefix, construct in (('=', 'lookahead'), ('!', 'negative lookahead'),
                                  ('<=', 'lookbehind'), ('<!', 'negative lookbehind'),
                                  ('P=', 'backreference'), ('P<', 'named group'),
                                  ('<', 'named group'), ("'", 'named group'),
                                  ('#', 'comment group'), ('>', 'atomic group'),
                                  ('|', 'branch reset group'), ('R', 'recursion')):
            if rest.startswith(prefix):
                raise self.unsupported(construct)
        raise self.unsupported('inline flags inside the pattern')

    def _literal(self, c: str) -> Node:
        data = c.encode('utf-8')
        if len(data) == 1:
            return self.sym(1 << data[0])
        return ('cat', [('sym', 1 << b) for b in data])

    def _parse_hex(self) -> int:
        if self.peek() == '{':
            end = self.text.find('}', self.pos)
            digits = self.text[self.pos + 1:end] if end > 0 else ''
            if not digits or any(d not in _HEX for d in digits) or int(digits, 16) > 0xff:
                raise self.error('bad \\x{..} escape')
            self.pos = end + 1
            return int(digits, 16)
        digits = self.text[self.pos:self.pos + 2]
        if len(digits) != 2 or any(d not in _HEX for d in digits):
            raise self.error('\\x needs two hex digits')
        self.pos += 2
        return int(digits, 16)

    def _escape_bitmap(self, in_class: bool) -> int:
        if self.peek() is None:
            raise self.error('trailing backslash')
        c = self.take()
        if c == 'x':
            return 1 << self._parse_hex()
        if c in _CLASS_ESCAPES:
            return _CLASS_ESCAPES[c]
        if in_class and c == 'b':
            return 1 << 0x08
        if c in _CONTROL_ESCAPES:
            return 1 << _CONTROL_ESCAPES[c]
        if c.isdigit():
            self.pos -= 1
            raise self.unsupported(f'backreference \\{c}')
        if c in _ASSERTION_ESCAPES:
            self.pos -= 1
            raise self.unsupported(_ASSERTION_ESCAPES[c])
        if c.isalnum() or ord(c) > 0x7f:
            self.pos -= 1
            raise self.unsupported(f'escape \\{c}')
        return 1 << ord(c)

    def _parse_escape(self, in_class: bool) -> Node:
        # \d \w \s and their negations are closed under case folding
        return self.sym(self._escape_bitmap(in_class))

    def _class_item(self) -> Tuple[int, Optional[int]]:
        """One class member: (bitmap, single byte value or None for multi-byte escapes)."""
        c = self.take()
        if c == '\\':
            bitmap = self._escape_bitmap(in_class=True)
            single = bitmap.bit_length() - 1 if bitmap & (bitmap - 1) == 0 else None
            return bitmap, single
        if c == '[' and self.peek() in (':', '=', '.'):
            raise self.unsupported('POSIX character class')
        if ord(c) > 0x7f:
            raise self.unsupported('non-ASCII character in a class')
        return 1 << ord(c), ord(c)

    def _parse_class(self) -> int:
        negated = False
        if self.peek() == '^':
            self.take()
            negated = True
        bitmap = 0
        first = True
        while True:
            if self.peek() is None:
                raise self.error('missing ]')
            if self.peek() == ']' and not first:
                self.take()
                break
            first = False
            low_bitmap, low = self._class_item()
            if self.peek() == '-' and self.peek(1) not in (']', None):
                self.take()
                high_bitmap, high = self._class_item()
                if low is None or high is None:
                    raise self.error('class escape used as a range endpoint')
                if high < low:
                    raise self.error('descending range in class')
                bitmap |= byte_range(low, high)
            else:
                bitmap |= low_bitmap
        if self.ignore_case:
            bitmap = _fold_case(bitmap)
        if negated:
            bitmap = FULL_BYTE_CLASS ^ bitmap
        return bitmap


def _split_flags(pattern: str) -> Tuple[str, int, bool, bool]:
    """Strip ``pcre:/.../flags`` and leading ``(?flags)``; return (pattern, body offset, i, m).

    Without the ``pcre:`` prefix slashes are literal, so ``/admin/`` matches the
    seven bytes ``/admin/``.
    """
    offset = 0
    body = pattern
    ignore_case = multiline = False
    flags = ''
    if pattern.startswith(PCRE_PREFIX):
        literal = pattern[len(PCRE_PREFIX):]
        offset = len(PCRE_PREFIX)
        if len(literal) >= 2 and literal[0] == literal[-1] == '"':
            literal = literal[1:-1]
            offset += 1
        end = literal.rfind('/')
        if not literal.startswith('/') or end <= 0:
            raise RegexSyntaxError('expected /pattern/flags after pcre:', pattern, offset)
        flags = literal[end + 1:]
        body = literal[1:end]
        offset += 1
    while body.startswith('(?'):
        close = body.find(')')
        inline = body[2:close] if close > 0 else ''
        if not inline or not inline.isalpha():
            break
        flags += inline
        body = body[close + 1:]
        offset += close + 1
    for flag in flags:
        if flag == 'i':
            ignore_case = True
        elif flag == 'm':
            multiline = True
        elif flag in _PCRE_FLAGS:
            if flag != 's':
                raise UnsupportedRegexError(f'flag {flag}', pattern, 0)
        else:
            raise RegexSyntaxError(f'unknown flag {flag!r}', pattern, 0)
    return body, offset, ignore_case, multiline


def parse_regex(pattern: str) -> Tuple[List[Tuple[bool, Node]], bool]:
    """Parse to top-level (anchored, AST) alternatives; also returns the ignore-case flag."""
    body, offset, ignore_case, multiline = _split_flags(pattern)
    parser = _Parser(pattern, body, offset, ignore_case)
    branches = parser.parse_top()
    if multiline and any(anchored for anchored, _ in branches):
        raise UnsupportedRegexError('anchor ^ with the m flag', pattern, 0)
    return branches, ignore_case


class _EpsilonNfa:
    """Thompson construction target: symbol edges plus epsilon edges."""

    def __init__(self, pattern: str, expansion_cap: int):
        self.pattern = pattern
        self.expansion_cap = expansion_cap
        self.scale = 1  # copies of the fragment being built, across enclosing repetitions
        self.count = 0
        self.eps: Dict[int, List[int]] = {}
        self.edges: List[Tuple[int, int, int]] = []

    def new_state(self) -> int:
        self.count += 1
        return self.count - 1

    def epsilon(self, src: int, dst: int) -> None:
        self.eps.setdefault(src, []).append(dst)

    def fragment(self, node: Node) -> Tuple[int, int]:
        kind = node[0]
        if kind == 'sym':
            s, e = self.new_state(), self.new_state()
            self.edges.append((s, node[1], e))
            return s, e
        if kind == 'cat':
            if not node[1]:
                s = self.new_state()
                return s, s
            start, end = self.fragment(node[1][0])
            for item in node[1][1:]:
                s, e = self.fragment(item)
                self.epsilon(end, s)
                end = e
            return start, end
        if kind == 'alt':
            s, e = self.new_state(), self.new_state()
            for item in node[1]:
                a, b = self.fragment(item)
                self.epsilon(s, a)
                self.epsilon(b, e)
            return s, e
        return self._repeat(node[1], node[2], node[3])

    def _repeat(self, item: Node, low: int, high: Optional[int]) -> Tuple[int, int]:
        copies = max(low + (high - low if high is not None else (0 if low else 1)), 1)
        outer = self.scale
        if outer * copies > self.expansion_cap:
            raise UnsupportedRegexError(
                f'repetition of {outer * copies} copies above the expansion cap {self.expansion_cap}',
                self.pattern, 0)
        self.scale = outer * copies
        try:
            return self._expand(item, low, high)
        finally:
            self.scale = outer

    def _expand(self, item: Node, low: int, high: Optional[int]) -> Tuple[int, int]:
        start = end = self.new_state()
        mandatory = low if high is not None else max(low - 1, 0)
        for _ in range(mandatory):
            s, e = self.fragment(item)
            self.epsilon(end, s)
            end = e
        if high is None:
            # x* loop (or the last copy of x+ looping on itself)
            s, e = self.fragment(item)
            self.epsilon(end, s)
            self.epsilon(e, s)
            exit_state = self.new_state()
            self.epsilon(e, exit_state)
            if low == 0:
                self.epsilon(end, exit_state)
            return start, exit_state
        exit_state = self.new_state()
        for _ in range(high - low):
            self.epsilon(end, exit_state)
            s, e = self.fragment(item)
            self.epsilon(end, s)
            end = e
        self.epsilon(end, exit_state)
        return start, exit_state

    def closure(self, state: int, memo: Dict[int, FrozenSet[int]]) -> FrozenSet[int]:
        if state in memo:
            return memo[state]
        seen = {state}
        stack = [state]
        while stack:
            for nxt in self.eps.get(stack.pop(), ()):
                if nxt not in seen:
                    seen.add(nxt)
                    stack.append(nxt)
        memo[state] = frozenset(seen)
        return memo[state]

    def eliminate(self, initial: int, accepts: Dict[int, Set[str]]) -> Nfa:
        memo: Dict[int, FrozenSet[int]] = {}
        outgoing: Dict[int, List[Tuple[int, int]]] = {}
        for src, bitmap, dst in self.edges:
            outgoing.setdefault(src, []).append((bitmap, dst))
        edges = []
        finals = []
        rules: Dict[int, Set[str]] = {}
        for p in range(self.count):
            closure = self.closure(p, memo)
            for q in closure:
                for bitmap, dst in outgoing.get(q, ()):
                    edges.append((p, bitmap, dst))
                if q in accepts:
                    if p not in finals:
                        finals.append(p)
                    rules.setdefault(p, set()).update(accepts[q])
        nfa = Nfa.build(self.count, initial, finals, edges, rules)
        return dataclasses.replace(nfa.trim(), names=None)


def _assemble(pieces: Sequence[Tuple[Optional[str], bool, Node]], pattern: str,
              expansion_cap: int) -> Nfa:
    """Union of (rule id, anchored, AST) pieces; unanchored ones share the ``.*`` hub."""
    enfa = _EpsilonNfa(pattern, expansion_cap)
    has_anchored = any(anchored for _, anchored, _ in pieces)
    has_floating = any(not anchored for _, anchored, _ in pieces)
    initial = enfa.new_state()
    hub = None
    if has_floating:
        hub = initial if not has_anchored else enfa.new_state()
        enfa.edges.append((hub, FULL_BYTE_CLASS, hub))
        if hub != initial:
            enfa.epsilon(initial, hub)
    accepts: Dict[int, Set[str]] = {}
    for rule_id, anchored, node in pieces:
        start, end = enfa.fragment(node)
        enfa.epsilon(initial if anchored else hub, start)
        accepts.setdefault(end, set())
        if rule_id is not None:
            accepts[end].add(rule_id)
    return enfa.eliminate(initial, accepts)


def compile_regex(pattern: str, expansion_cap: int = DEFAULT_EXPANSION_CAP) -> Nfa:
    """Compile one pattern; the NFA accepts packets with a match inside some prefix."""
    branches, _ = parse_regex(pattern)
    return _assemble([(None, anchored, node) for anchored, node in branches],
                     pattern, expansion_cap)


def compile_ruleset(rules: RuleSet, expansion_cap: int = DEFAULT_EXPANSION_CAP) -> Nfa:
    """Union automaton of a rule set; finals carry the ids of the rules they complete."""
    pieces = []
    for rule_id, pattern in rules:
        try:
            branches, _ = parse_regex(pattern)
            # catch cap violations per rule so the error is tagged with its id
            _assemble([(rule_id, a, n) for a, n in branches], pattern, expansion_cap)
        except RegexSyntaxError as e:
            e.rule_id = rule_id  # type: ignore[attr-defined]
            e.args = (f'rule {rule_id}: {e}',)
            raise
        pieces.extend((rule_id, anchored, node) for anchored, node in branches)
    nfa = _assemble(pieces, '<ruleset>', expansion_cap)
    logger.debug('Compiled %d rules into %d states, %d transition classes',
                 len(rules), nfa.num_states, nfa.transition_count)
    return nfa


def read_rules(path: str) -> RuleSet:
    """Rule file: one ``id<TAB>pattern`` per line; ``#`` starts a comment line."""
    rules = []
    with open(path, encoding='utf-8') as f:
        for number, raw in enumerate(f, start=1):
            line = raw.rstrip('\r\n')
            if not line.strip() or line.lstrip().startswith('#'):
                continue
            rule_id, tab, pattern = line.partition('\t')
            if not tab or not rule_id.strip() or not pattern:
                raise RuleFileError(f'{path}:{number}: expected "id<TAB>pattern"')
            rules.append((rule_id.strip(), pattern))
    return RuleSet(tuple(rules))


def rule_matches(nfa: Nfa, packet: bytes, stepper: Optional[Stepper] = None) -> FrozenSet[str]:
    """Ids of rules whose final states are reached over some prefix of the packet."""
    if not nfa.final_rules:
        return frozenset()
    stepper = stepper or Stepper(nfa)
    matched: Set[str] = set()
    for frontier in stepper.frontiers(packet):
        for q in frontier:
            matched.update(nfa.final_rules.get(q, ()))
    return frozenset(matched)
