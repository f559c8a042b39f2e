"""CKY-style chart parsing for QCFGs without binarization.

Source sides have at most two nonterminals and are never unary, so every rule
source has the shape ``a NT b NT c`` or ``a NT b`` or ``a`` with terminal runs
a, b, c.  A rule application over span [i, j) is fixed by its child spans, so
charts are built bottom-up over spans by increasing length.

Source tokens may also be ints ("anchors"): an anchor derives itself on both
sides.  This lets the parser decide membership of rules that still contain
nonterminals, by treating each link as a fresh token.
"""

from __future__ import annotations

from collections import defaultdict
from itertools import product
from typing import Iterable, Sequence

from nqg.grammar.forest import ANCHOR, Edge, Node, ParseForest
from nqg.grammar.rules import Rule, canonicalize, substitute


class Grammar:
    """An immutable, deduplicated rule set with a matching index."""

    def __init__(self, rules: Iterable[Rule] = ()):
        seen = {}
        for rule in rules:
            rule = canonicalize(*rule)
            seen.setdefault(rule, None)
        self.rules: tuple[Rule, ...] = tuple(seen)
        self._ids = {r: k for k, r in enumerate(self.rules)}
        self._build_index()

    def __len__(self):
        return len(self.rules)

    def __iter__(self):
        return iter(self.rules)

    def __contains__(self, rule):
        return rule in self._ids

    def __repr__(self):
        return f"Grammar({len(self.rules)} rules)"

    def rule_id(self, rule: Rule) -> int:
        return self._ids[rule]

    def with_rules(self, add: Iterable[Rule] = (), remove: Iterable[Rule] = ()) -> "Grammar":
        remove = set(remove)
        return Grammar([r for r in self.rules if r not in remove] + list(add))

    def _build_index(self):
        self.lexical = defaultdict(list)
        self.unary_prefix = defaultdict(list)
        self.unary_suffix = defaultdict(list)
        self.binary_prefix = defaultdict(list)
        self.binary_suffix = defaultdict(list)
        self.binary_middle = defaultdict(list)
        self.binary_bare = []
        for rid, rule in enumerate(self.rules):
            src = rule.source
            nts = [k for k, s in enumerate(src) if type(s) is int]
            if not nts:
                self.lexical[src].append(rid)
            elif len(nts) == 1:
                p = nts[0]
                a, b = src[:p], src[p + 1:]
                if a:
                    self.unary_prefix[a[0]].append((rid, a, b))
                else:
                    self.unary_suffix[b[-1]].append((rid, a, b))
            else:
                p, q = nts
                a, m, c = src[:p], src[p + 1:q], src[q + 1:]
                entry = (rid, a, m, c)
                if a:
                    self.binary_prefix[a[0]].append(entry)
                elif c:
                    self.binary_suffix[c[-1]].append(entry)
                elif m:
                    self.binary_middle[m[0]].append(entry)
                else:
                    self.binary_bare.append(entry)

    def applications(self, x: Sequence, i: int, j: int, filled) -> list:
        """All (rule id, child spans) applying to span [i, j) of ``x``.

        ``filled(a, b)`` tells whether span [a, b) has at least one item.
        """
        out = []
        lexical = self.lexical.get(tuple(x[i:j]))
        if lexical:
            out.extend((rid, ()) for rid in lexical)
        length = j - i
        if length < 2:
            return out
        first, last = x[i], x[j - 1]
        for table, key in ((self.unary_prefix, first), (self.unary_suffix, last)):
            for rid, a, b in table.get(key, ()):
                la, lb = len(a), len(b)
                if la + lb >= length:
                    continue
                if la and tuple(x[i:i + la]) != a:
                    continue
                if lb and tuple(x[j - lb:j]) != b:
                    continue
                if filled(i + la, j - lb):
                    out.append((rid, ((i + la, j - lb),)))
        if length < 2:
            return out
        candidates = []
        if first in self.binary_prefix:
            candidates.extend(self.binary_prefix[first])
        if last in self.binary_suffix:
            candidates.extend(self.binary_suffix[last])
        if self.binary_middle:
            seen_keys = set(x[i + 1:j - 1])
            for key in seen_keys:
                if key in self.binary_middle:
                    candidates.extend(self.binary_middle[key])
        candidates.extend(self.binary_bare)
        for rid, a, m, c in candidates:
            la, lm, lc = len(a), len(m), len(c)
            if la + lm + lc + 2 > length:
                continue
            if la and tuple(x[i:i + la]) != a:
                continue
            if lc and tuple(x[j - lc:j]) != c:
                continue
            s1, e2 = i + la, j - lc
            for k in range(s1 + 1, e2 - lm):
                if lm and (x[k] != m[0] or tuple(x[k:k + lm]) != m):
                    continue
                if filled(s1, k) and filled(k + lm, e2):
                    out.append((rid, ((s1, k), (k + lm, e2))))
        return out


def parse_source(grammar: Grammar, source: Sequence) -> ParseForest:
    """Packed forest of every derivation whose source yield is ``source``."""
    x = tuple(source)
    n = len(x)
    node_of: dict[tuple[int, int], int] = {}
    nodes: list[Node] = []
    edges: list[list[Edge]] = []
    filled = lambda a, b: (a, b) in node_of
    for length in range(1, n + 1):
        for i in range(n - length + 1):
            j = i + length
            found = []
            if length == 1 and type(x[i]) is int:
                found.append(Edge(ANCHOR, ()))
            for rid, spans in grammar.applications(x, i, j, filled):
                found.append(Edge(rid, tuple(node_of[s] for s in spans)))
            if found:
                node_of[(i, j)] = len(nodes)
                nodes.append(Node(i, j, None))
                edges.append(found)
    roots = [node_of[(0, n)]] if (0, n) in node_of else []
    return ParseForest(grammar.rules, x, None, nodes, edges, roots).pruned()


def _fragment_chart(grammar: Grammar, x: tuple, y: tuple | None, want_edges: bool,
                    limit: int | None = None):
    """Bottom-up chart whose items carry the target fragment they yield.

    With ``y`` given, fragments are restricted to substrings of ``y`` (and to
    ``y`` itself over the full span).  Returns ``(cells, capped)`` where
    ``cells[(i, j)]`` maps fragment -> list of (rule id, child keys).
    """
    n = len(x)
    if y is not None:
        m = len(y)
        allowed = {y[a:b] for a in range(m) for b in range(a + 1, m + 1)}
    cells: dict[tuple[int, int], dict] = {}
    filled = lambda a, b: (a, b) in cells
    capped = False
    for length in range(1, n + 1):
        for i in range(n - length + 1):
            j = i + length
            full = length == n
            cell: dict = {}
            if length == 1 and type(x[i]) is int:
                frag = (x[i],)
                if y is None or (frag == y if full else frag in allowed):
                    cell[frag] = [(ANCHOR, ())]
            for rid, spans in grammar.applications(x, i, j, filled):
                tgt = grammar.rules[rid].target
                child_cells = [cells[s] for s in spans]
                for frags in product(*child_cells):
                    frag = substitute(tgt, frags)
                    if y is not None:
                        if full:
                            if frag != y:
                                continue
                        elif frag not in allowed:
                            continue
                    entry = cell.get(frag)
                    if entry is None:
                        if limit is not None and len(cell) >= limit:
                            capped = True
                            continue
                        entry = cell[frag] = []
                    if want_edges:
                        entry.append((rid, tuple(zip(spans, frags))))
            if cell:
                cells[(i, j)] = cell
    return cells, capped


def parse_constrained(grammar: Grammar, source: Sequence, target: Sequence) -> ParseForest:
    """Packed forest of the derivations yielding exactly ``(source, target)``."""
    x, y = tuple(source), tuple(target)
    n = len(x)
    cells, _ = _fragment_chart(grammar, x, y, want_edges=True)
    root_key = (0, n, y)
    if not x or not y or (0, n) not in cells or y not in cells[(0, n)]:
        return ParseForest(grammar.rules, x, y, [], [], [])
    # Collect items reachable from the root, then number them children-first.
    order: list[tuple] = []
    state: dict[tuple, int] = {}
    stack = [(root_key, False)]
    while stack:
        key, done = stack.pop()
        if done:
            if state[key] == 1:
                state[key] = 2
                order.append(key)
            continue
        if key in state:
            continue
        state[key] = 1
        stack.append((key, True))
        i, j, frag = key
        for _, children in cells[(i, j)][frag]:
            for (a, b), f in children:
                if (a, b, f) not in state:
                    stack.append(((a, b, f), False))
    ids = {key: k for k, key in enumerate(order)}
    nodes = [Node(i, j, frag) for i, j, frag in order]
    edges = []
    for i, j, frag in order:
        edges.append([Edge(rid, tuple(ids[(a, b, f)] for (a, b), f in children))
                      for rid, children in cells[(i, j)][frag]])
    return ParseForest(grammar.rules, x, y, nodes, edges, [ids[root_key]])


def can_derive(grammar: Grammar, source: Sequence, target: Sequence) -> bool:
    x, y = tuple(source), tuple(target)
    if not x or not y:
        return False
    cells, _ = _fragment_chart(grammar, x, y, want_edges=False)
    return y in cells.get((0, len(x)), ())


def enumerate_targets(grammar: Grammar, source: Sequence, limit: int = 1000) -> tuple[set, bool]:
    """Unique targets derivable from ``source``, and whether the set was capped.

    Each chart item keeps at most ``limit`` fragments; when any item hits the
    cap the result is a lower bound and the flag is set.
    """
    if limit < 1:
        raise ValueError("limit must be >= 1")
    x = tuple(source)
    if not x:
        return set(), False
    cells, capped = _fragment_chart(grammar, x, None, want_edges=False, limit=limit)
    return set(cells.get((0, len(x)), ())), capped


def count_targets(grammar: Grammar, source: Sequence, limit: int = 1000) -> tuple[int, bool]:
    targets, capped = enumerate_targets(grammar, source, limit)
    return len(targets), capped
