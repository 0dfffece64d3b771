"""NFA representation, text/DOT formats and prefix-acceptance execution.

Symbol sets are byte classes: a Python int used as a 256-bit bitmap, bit ``a``
set iff byte ``a`` is in the class. Transitions are keyed by (src, dst) so two
edges between the same pair of states always share one class.
"""

import hashlib
import math
from dataclasses import dataclass, field
from functools import cached_property
from typing import (
    Dict,
    FrozenSet,
    Iterable,
    Iterator,
    List,
    Mapping,
    Optional,
    Sequence,
    Tuple,
)

import networkx as nx
from networkx.algorithms.isomorphism import DiGraphMatcher

from .constants import ALPHABET_SIZE, FULL_BYTE_CLASS
from .models import Labeling, NfaParseError, UsageError

StateSet = FrozenSet[int]
EMPTY: StateSet = frozenset()


# -- byte classes -------------------------------------------------------------

def byte_class(symbols: Iterable[int]) -> int:
    bitmap = 0
    for symbol in symbols:
        bitmap |= 1 << symbol
    return bitmap


def byte_range(lo: int, hi: int) -> int:
    return ((1 << (hi + 1)) - 1) ^ ((1 << lo) - 1)


def class_symbols(bitmap: int) -> List[int]:
    return [a for a in range(ALPHABET_SIZE) if bitmap >> a & 1]


def class_ranges(bitmap: int) -> List[Tuple[int, int]]:
    """Maximal runs of consecutive bytes in the class, ascending."""
    ranges = []
    start = None
    for a in range(ALPHABET_SIZE + 1):
        inside = a < ALPHABET_SIZE and bitmap >> a & 1
        if inside and start is None:
            start = a
        elif not inside and start is not None:
            ranges.append((start, a - 1))
            start = None
    return ranges


def format_symspec(bitmap: int) -> str:
    parts = []
    for lo, hi in class_ranges(bitmap):
        parts.append(f'0x{lo:02x}' if lo == hi else f'0x{lo:02x}-0x{hi:02x}')
    return ','.join(parts)


def parse_symspec(text: str) -> int:
    bitmap = 0
    for token in text.split(','):
        token = token.strip()
        if not token:
            raise ValueError('empty symbol in symspec')
        lo_text, _, hi_text = token.partition('-')
        lo = _parse_byte(lo_text)
        hi = _parse_byte(hi_text) if hi_text else lo
        if hi < lo:
            raise ValueError(f'descending range {token}')
        bitmap |= byte_range(lo, hi)
    return bitmap


def _parse_byte(text: str) -> int:
    if not text.lower().startswith('0x'):
        raise ValueError(f'symbol {text!r} is not of the form 0xNN')
    value = int(text, 16)
    if not 0 <= value < ALPHABET_SIZE:
        raise ValueError(f'symbol {text} outside 0x00-0xff')
    return value


def _display_byte(a: int) -> str:
    if 0x21 <= a <= 0x7e and chr(a) not in '"\\-^[]':
        return chr(a)
    return f'\\\\x{a:02x}'


def display_class(bitmap: int) -> str:
    """Short human label for DOT edges: ``a-c,x``, ``^[...]`` or ``any``."""
    if bitmap == FULL_BYTE_CLASS:
        return 'any'
    negated = bin(bitmap).count('1') > ALPHABET_SIZE // 2
    ranges = class_ranges(FULL_BYTE_CLASS ^ bitmap if negated else bitmap)
    parts = []
    for lo, hi in ranges:
        if lo == hi:
            parts.append(_display_byte(lo))
        else:
            parts.append(f'{_display_byte(lo)}-{_display_byte(hi)}')
    text = ','.join(parts)
    return f'^[{text}]' if negated else text


# -- automaton ----------------------------------------------------------------

@dataclass(frozen=True)
class Nfa:
    """Quadruple (Q, delta, q_I, F) over bytes, with Q = 0..num_states-1.

    ``final_rules`` annotates final states with the ids of the rules they
    report; ``names`` keeps the identifiers states had before re-indexing and
    is ignored by equality.
    """

    num_states: int
    initial: int
    finals: FrozenSet[int]
    transitions: Mapping[Tuple[int, int], int]
    final_rules: Mapping[int, FrozenSet[str]] = field(default_factory=dict)
    names: Optional[Tuple[str, ...]] = field(default=None, compare=False)

    def __post_init__(self):
        n = self.num_states
        if n < 1:
            raise UsageError('an NFA needs at least one state')
        if not 0 <= self.initial < n:
            raise UsageError(f'initial state {self.initial} outside 0..{n - 1}')
        for q in self.finals:
            if not 0 <= q < n:
                raise UsageError(f'final state {q} outside 0..{n - 1}')
        for (src, dst), bitmap in self.transitions.items():
            if not (0 <= src < n and 0 <= dst < n):
                raise UsageError(f'transition {src}->{dst} outside 0..{n - 1}')
            if not 0 < bitmap <= FULL_BYTE_CLASS:
                raise UsageError(f'transition {src}->{dst} has an empty or invalid byte class')
        for q in self.final_rules:
            if q not in self.finals:
                raise UsageError(f'rule annotation on non-final state {q}')
        if self.names is not None and len(self.names) != n:
            raise UsageError('name map does not cover every state')

    @classmethod
    def build(cls, num_states: int, initial: int, finals: Iterable[int],
              edges: Iterable[Tuple[int, int, int]],
              final_rules: Optional[Mapping[int, Iterable[str]]] = None,
              names: Optional[Sequence[str]] = None) -> 'Nfa':
        """Build from (src, byte class, dst) triples, merging classes per (src, dst)."""
        transitions: Dict[Tuple[int, int], int] = {}
        for src, bitmap, dst in edges:
            if bitmap:
                transitions[(src, dst)] = transitions.get((src, dst), 0) | bitmap
        rules = {q: frozenset(ids) for q, ids in (final_rules or {}).items() if ids}
        return cls(num_states, initial, frozenset(finals), transitions, rules,
                   tuple(names) if names is not None else None)

    @property
    def states(self) -> range:
        return range(self.num_states)

    @property
    def transition_count(self) -> int:
        """Number of distinct (src, dst) transition classes."""
        return len(self.transitions)

    def state_name(self, q: int) -> str:
        return self.names[q] if self.names is not None else str(q)

    def edges(self) -> Iterator[Tuple[int, int, int]]:
        """(src, byte class, dst) in (src, dst) order."""
        for (src, dst) in sorted(self.transitions):
            yield src, self.transitions[(src, dst)], dst

    @cached_property
    def _successors(self) -> List[Dict[int, Tuple[int, ...]]]:
        table: List[Dict[int, List[int]]] = [{} for _ in self.states]
        for src, bitmap, dst in self.edges():
            row = table[src]
            for a in class_symbols(bitmap):
                row.setdefault(a, []).append(dst)
        return [{a: tuple(dsts) for a, dsts in row.items()} for row in table]

    def successors(self, q: int, symbol: int) -> Tuple[int, ...]:
        return self._successors[q].get(symbol, ())

    def step(self, current: Iterable[int], symbol: int) -> StateSet:
        succ = self._successors
        result = set()
        for q in current:
            result.update(succ[q].get(symbol, ()))
        return frozenset(result)

    def accepts_prefix(self, packet: bytes) -> bool:
        finals = self.finals
        frontier: StateSet = frozenset((self.initial,))
        if self.initial in finals:
            return True
        for symbol in packet:
            frontier = self.step(frontier, symbol)
            if not frontier:
                return False
            if not finals.isdisjoint(frontier):
                return True
        return False

    def to_graph(self) -> nx.DiGraph:
        graph = nx.DiGraph()
        for q in self.states:
            graph.add_node(q, initial=q == self.initial, final=q in self.finals)
        for src, bitmap, dst in self.edges():
            graph.add_edge(src, dst, symbols=bitmap)
        return graph

    def restrict(self, keep: Sequence[int], extra_finals: Iterable[int] = ()) -> 'Nfa':
        """Sub-automaton on ``keep`` (renumbered in the given order).

        Transitions touching dropped states disappear; ``extra_finals`` (old ids)
        become final without a rule annotation. The initial state must be kept.
        """
        index = {old: new for new, old in enumerate(keep)}
        if self.initial not in index:
            raise UsageError('the initial state cannot be removed')
        finals = {index[q] for q in self.finals if q in index}
        finals.update(index[q] for q in extra_finals)
        edges = [(index[src], bitmap, index[dst]) for src, bitmap, dst in self.edges()
                 if src in index and dst in index]
        rules = {index[q]: ids for q, ids in self.final_rules.items() if q in index}
        names = [self.state_name(q) for q in keep]
        return Nfa.build(len(keep), index[self.initial], finals, edges, rules, names)

    def trim(self) -> 'Nfa':
        """Drop states unreachable from q_I or unable to reach a final state.

        Language-preserving; keeps surviving states in breadth-first order from
        q_I so compiled automata get stable numbering.
        """
        graph = self.to_graph()
        reachable = _bfs_order(graph, self.initial)
        reverse = graph.reverse(copy=False)
        useful = set()
        for f in self.finals:
            useful.update(nx.descendants(reverse, f))
            useful.add(f)
        keep = [q for q in reachable if q in useful or q == self.initial]
        return self.restrict(keep)


def _bfs_order(graph: nx.DiGraph, source: int) -> List[int]:
    order = [source]
    seen = {source}
    i = 0
    while i < len(order):
        for succ in sorted(graph.successors(order[i])):
            if succ not in seen:
                seen.add(succ)
                order.append(succ)
        i += 1
    return order


def step(nfa: Nfa, current: Iterable[int], symbol: int) -> StateSet:
    """delta(S, a): every state some q in S moves to on ``symbol``."""
    return nfa.step(current, symbol)


def accepts_prefix(nfa: Nfa, packet: bytes) -> bool:
    """True iff some prefix of ``packet`` (the empty one included) reaches a final state."""
    return nfa.accepts_prefix(packet)


class Stepper:
    """Subset stepping with a (frontier, byte) -> frontier memo.

    Frontiers are interned frozensets, so stepping a packet costs one dict
    lookup per byte once the traffic's frontiers have been seen. The memo is
    cleared when it exceeds ``max_cache`` entries.
    """

    def __init__(self, nfa: Nfa, max_cache: int = 1 << 20):
        self.nfa = nfa
        self.max_cache = max_cache
        self.initial: StateSet = frozenset((nfa.initial,))
        self._cache: Dict[Tuple[StateSet, int], StateSet] = {}

    def step(self, frontier: StateSet, symbol: int) -> StateSet:
        key = (frontier, symbol)
        nxt = self._cache.get(key)
        if nxt is None:
            if len(self._cache) >= self.max_cache:
                self._cache.clear()
            nxt = self.nfa.step(frontier, symbol)
            self._cache[key] = nxt
        return nxt

    def accepts(self, packet: bytes) -> bool:
        finals = self.nfa.finals
        frontier = self.initial
        if self.nfa.initial in finals:
            return True
        cache = self._cache
        for symbol in packet:
            nxt = cache.get((frontier, symbol))
            if nxt is None:
                nxt = self.step(frontier, symbol)
            frontier = nxt
            if not frontier:
                return False
            if not finals.isdisjoint(frontier):
                return True
        return False

    def frontiers(self, packet: bytes) -> List[StateSet]:
        """Distinct frontiers Q^0, Q^1, ... met over the whole packet (no early exit)."""
        frontier = self.initial
        seen = {frontier}
        cache = self._cache
        for symbol in packet:
            nxt = cache.get((frontier, symbol))
            if nxt is None:
                nxt = self.step(frontier, symbol)
            frontier = nxt
            if not frontier:
                break
            seen.add(frontier)
        return list(seen)

    def reached(self, packet: bytes) -> StateSet:
        """Union of all frontiers over the packet."""
        return frozenset().union(*self.frontiers(packet))


# -- text format --------------------------------------------------------------

def format_nfa(nfa: Nfa) -> str:
    lines = [f'initial {nfa.initial}', f'states {nfa.num_states}']
    for src, bitmap, dst in nfa.edges():
        lines.append(f'{src} {dst} {format_symspec(bitmap)}')
    for q in sorted(nfa.final_rules):
        for rule_id in sorted(nfa.final_rules[q]):
            lines.append(f'match {q} {rule_id}')
    lines.append(' '.join(['final'] + [str(q) for q in sorted(nfa.finals)]))
    return '\n'.join(lines) + '\n'


def parse_nfa(text: str, path: Optional[str] = None) -> Nfa:
    initial = None
    declared = None
    finals = None
    edges: List[Tuple[int, int, int]] = []
    rules: Dict[int, set] = {}
    referenced: List[Tuple[int, int]] = []  # (state, line)

    def state_id(token: str, line: int) -> int:
        try:
            value = int(token)
        except ValueError:
            raise NfaParseError(f'bad state id {token!r}', line, path) from None
        if value < 0:
            raise NfaParseError(f'negative state id {value}', line, path)
        referenced.append((value, line))
        return value

    for number, raw in enumerate(text.splitlines(), start=1):
        line = raw.split('#', 1)[0].strip()
        if not line:
            continue
        if finals is not None:
            raise NfaParseError("content after the 'final' line", number, path)
        words = line.split()
        keyword = words[0]
        if initial is None:
            if keyword != 'initial' or len(words) != 2:
                raise NfaParseError("expected 'initial <id>' as the first line", number, path)
            initial = state_id(words[1], number)
        elif keyword == 'initial':
            raise NfaParseError('multiple initial states are not supported', number, path)
        elif keyword == 'states':
            if declared is not None or edges or rules or len(words) != 2:
                raise NfaParseError("'states <n>' must directly follow 'initial'", number, path)
            try:
                declared = int(words[1])
            except ValueError:
                raise NfaParseError(f'bad state count {words[1]!r}', number, path) from None
            if declared < 1:
                raise NfaParseError('state count must be positive', number, path)
        elif keyword == 'match':
            if len(words) < 3:
                raise NfaParseError("expected 'match <state> <rule-id>'", number, path)
            q = state_id(words[1], number)
            rules.setdefault(q, set()).add(line.split(None, 2)[2])
        elif keyword == 'final':
            finals = [state_id(w, number) for w in words[1:]]
        else:
            if len(words) != 3:
                raise NfaParseError("expected '<src> <dst> <symspec>'", number, path)
            src = state_id(words[0], number)
            dst = state_id(words[1], number)
            try:
                bitmap = parse_symspec(words[2])
            except ValueError as e:
                raise NfaParseError(f'bad symspec {words[2]!r}: {e}', number, path) from None
            edges.append((src, bitmap, dst))

    if initial is None:
        raise NfaParseError('empty NFA file', None, path)
    if finals is None:
        raise NfaParseError("missing 'final' line", None, path)
    if declared is None:
        declared = max(q for q, _ in referenced) + 1
    for q, line in referenced:
        if q >= declared:
            raise NfaParseError(f'undeclared state {q} (states 0..{declared - 1})', line, path)
    for q in rules:
        if q not in finals:
            raise NfaParseError(f'rule annotation on non-final state {q}', None, path)
    return Nfa.build(declared, initial, finals, edges, rules)


def read_nfa(path: str) -> Nfa:
    with open(path, encoding='utf-8') as f:
        return parse_nfa(f.read(), path=str(path))


def write_nfa(nfa: Nfa, path: str) -> None:
    with open(path, 'w', encoding='utf-8') as f:
        f.write(format_nfa(nfa))


def nfa_hash(nfa: Nfa) -> str:
    return hashlib.sha256(format_nfa(nfa).encode('utf-8')).hexdigest()


def is_isomorphic(a: Nfa, b: Nfa) -> bool:
    """Equal up to state renaming (initial/final flags and byte classes must match)."""
    if (a.num_states, len(a.finals), a.transition_count) != (
            b.num_states, len(b.finals), b.transition_count):
        return False
    matcher = DiGraphMatcher(
        a.to_graph(), b.to_graph(),
        node_match=lambda x, y: x['initial'] == y['initial'] and x['final'] == y['final'],
        edge_match=lambda x, y: x['symbols'] == y['symbols'])
    return matcher.is_isomorphic()


# -- DOT export ---------------------------------------------------------------

def _heat_color(count: int, hottest: int) -> str:
    # hue 0.667 (blue, cold) .. 0.0 (red, hot) on a log scale
    heat = math.log1p(count) / math.log1p(hottest) if hottest > 0 else 0.0
    return f'{0.667 * (1.0 - heat):.3f} 0.600 1.000'


def dot_lines(nfa: Nfa, labeling: Optional[Labeling] = None) -> Iterator[str]:
    if labeling is not None and len(labeling) != nfa.num_states:
        raise UsageError(
            f'labeling covers {len(labeling)} states, NFA has {nfa.num_states}')
    hottest = max(labeling.counts) if labeling is not None else 0
    yield 'digraph nfa {'
    yield '  rankdir=LR;'
    yield '  node [shape=circle];'
    yield '  __start [shape=point];'
    for q in nfa.states:
        attrs = [f'label="{nfa.state_name(q)}"']
        if q in nfa.finals:
            attrs.append('shape=doublecircle')
        if labeling is not None:
            attrs.append('style=filled')
            attrs.append(f'fillcolor="{_heat_color(labeling[q], hottest)}"')
            attrs.append(f'tooltip="l={labeling[q]}"')
        yield f'  {q} [{", ".join(attrs)}];'
    yield f'  __start -> {nfa.initial};'
    for src, bitmap, dst in nfa.edges():
        yield f'  {src} -> {dst} [label="{display_class(bitmap)}"];'
    yield '}'


def export_dot(nfa: Nfa, labeling: Optional[Labeling], path: str) -> None:
    with open(path, 'w', encoding='utf-8') as f:
        for line in dot_lines(nfa, labeling):
            f.write(line + '\n')
