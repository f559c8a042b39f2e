"""Packed parse forests (hypergraphs over anchored chart items)."""

from __future__ import annotations

from itertools import product
from typing import Iterator, NamedTuple, Sequence

from nqg.grammar.rules import Rule, substitute

# Rule id of the implicit self-deriving rule for anchor tokens.
ANCHOR = -1


class Node(NamedTuple):
    start: int
    end: int  # exclusive
    fragment: tuple | None  # target fragment, constrained forests only


class Edge(NamedTuple):
    rule: int
    children: tuple[int, ...]


class Derivation(NamedTuple):
    """A derivation tree; each node is a rule anchored at [start, end)."""

    rule: int
    start: int
    end: int
    children: tuple["Derivation", ...] = ()

    def anchored_rules(self) -> Iterator[tuple[int, int, int]]:
        """(rule, start, end) triples, end exclusive; anchors skipped."""
        stack = [self]
        while stack:
            d = stack.pop()
            if d.rule != ANCHOR:
                yield d.rule, d.start, d.end
            stack.extend(d.children)


def derivation_target(rules: Sequence[Rule], derivation: Derivation, source: Sequence) -> tuple:
    if derivation.rule == ANCHOR:
        return (source[derivation.start],)
    frags = [derivation_target(rules, c, source) for c in derivation.children]
    return substitute(rules[derivation.rule].target, frags)


class ParseForest:
    """Nodes are listed children-first, so index order is a topological order."""

    def __init__(self, rules: Sequence[Rule], source: tuple, target: tuple | None,
                 nodes: list[Node], edges: list[list[Edge]], roots: list[int]):
        self.rules = tuple(rules)
        self.source = source
        self.target = target
        self.nodes = nodes
        self.edges = edges
        self.roots = roots

    def __bool__(self):
        return bool(self.roots)

    def __repr__(self):
        return (f"ParseForest({len(self.nodes)} nodes, "
                f"{sum(map(len, self.edges))} edges, {len(self.roots)} roots)")

    @property
    def num_edges(self) -> int:
        return sum(len(e) for e in self.edges)

    def pruned(self) -> "ParseForest":
        """Drop nodes not reachable from a root."""
        keep = set()
        stack = list(self.roots)
        while stack:
            k = stack.pop()
            if k in keep:
                continue
            keep.add(k)
            for e in self.edges[k]:
                stack.extend(e.children)
        if len(keep) == len(self.nodes):
            return self
        old = sorted(keep)
        remap = {k: n for n, k in enumerate(old)}
        nodes = [self.nodes[k] for k in old]
        edges = [[Edge(e.rule, tuple(remap[c] for c in e.children)) for e in self.edges[k]]
                 for k in old]
        return ParseForest(self.rules, self.source, self.target, nodes, edges,
                           [remap[r] for r in self.roots])

    def count_derivations(self) -> int:
        counts = []
        for k in range(len(self.nodes)):
            total = 0
            for e in self.edges[k]:
                c = 1
                for ch in e.children:
                    c *= counts[ch]
                total += c
            counts.append(total)
        return sum(counts[r] for r in self.roots)

    def derivations(self) -> list[Derivation]:
        """Unpack every derivation.  Exponential in general; for small forests."""
        memo: list[list[Derivation]] = []
        for k, node in enumerate(self.nodes):
            out = []
            for e in self.edges[k]:
                options = [memo[c] for c in e.children]
                for combo in product(*options):
                    out.append(Derivation(e.rule, node.start, node.end, combo))
            memo.append(out)
        return [d for r in self.roots for d in memo[r]]

    def targets(self, limit: int | None = None) -> tuple[set, bool]:
        """Distinct targets over all derivations (capped per node at ``limit``)."""
        memo: list[dict] = []  # dicts as insertion-ordered sets
        capped = False
        for k, node in enumerate(self.nodes):
            out: dict = {}
            for e in self.edges[k]:
                if e.rule == ANCHOR:
                    out[(self.source[node.start],)] = None
                    continue
                tgt = self.rules[e.rule].target
                for frags in product(*[memo[c] for c in e.children]):
                    frag = substitute(tgt, frags)
                    if limit is not None and len(out) >= limit and frag not in out:
                        capped = True
                        break
                    out[frag] = None
            memo.append(out)
        result = set()
        for r in self.roots:
            result.update(memo[r])
        return result, capped

    def target_of(self, derivation: Derivation) -> tuple:
        return derivation_target(self.rules, derivation, self.source)

