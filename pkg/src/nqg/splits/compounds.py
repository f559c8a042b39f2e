"""Atoms, compounds, and compound divergence between two sets of targets."""

from __future__ import annotations

import math
from collections import Counter
from dataclasses import dataclass
from typing import Iterable, Mapping, Sequence

from nqg.splits.funql import Tree, parse_bracketed, parse_funql

EXTRACTOR_KINDS = ("funql", "tree", "token")
ALPHA = 0.1
NORMALIZATION_TOLERANCE = 1e-9


@dataclass(frozen=True)
class Extractor:
    """``funql``: FunQL function trees; ``tree``: bracketed trees; ``token``: flat tokens.

    Tree compounds of order 1 are parent/child edges, written as the parent
    with one child filled in (the child shown with its own arity) and the
    other arguments as ``_``: ``longest(river)``, ``exclude(longest(_), _)``.
    Order 2 adds grandparent/parent/child chains such as
    ``exclude(longest(river), _)``.  Token compounds are adjacent token pairs.
    """

    kind: str = "funql"
    order: int = 1

    def __post_init__(self):
        if self.kind not in EXTRACTOR_KINDS:
            raise ValueError(f"extractor kind must be one of {EXTRACTOR_KINDS}")
        if self.order not in (1, 2):
            raise ValueError("order must be 1 or 2")

    def tree(self, target: Sequence[str]) -> Tree:
        return parse_funql(target) if self.kind == "funql" else parse_bracketed(target)


def _fill(parent: Tree, position: int, shown: str) -> str:
    args = ["_"] * len(parent.children)
    args[position] = shown
    return f"{parent.symbol}({', '.join(args)})"


def extract_atoms(target: Sequence[str], extractor: Extractor) -> Counter:
    if extractor.kind == "token":
        return Counter(target)
    return Counter(t.symbol for t in extractor.tree(target).nodes())


def extract_compounds(target: Sequence[str], extractor: Extractor) -> Counter:
    if extractor.kind == "token":
        return Counter(f"{a} {b}" for a, b in zip(target, target[1:]))
    out: Counter = Counter()
    for node in extractor.tree(target).nodes():
        for k, child in enumerate(node.children):
            out[_fill(node, k, child.skeleton())] += 1
            if extractor.order == 2:
                for m, grandchild in enumerate(child.children):
                    out[_fill(node, k, _fill(child, m, grandchild.skeleton()))] += 1
    return out


@dataclass
class CompoundProfile:
    atom_freqs: dict[str, float]
    compound_freqs: dict[str, float]


def normalize(counts: Mapping[str, float]) -> dict[str, float]:
    total = sum(counts.values())
    if total <= 0:
        return {}
    return {k: v / total for k, v in counts.items() if v > 0}


def profile(targets: Iterable[Sequence[str]], extractor: Extractor) -> CompoundProfile:
    atoms: Counter = Counter()
    compounds: Counter = Counter()
    for t in targets:
        atoms.update(extract_atoms(t, extractor))
        compounds.update(extract_compounds(t, extractor))
    return CompoundProfile(normalize(atoms), normalize(compounds))


def _check_distribution(p: Mapping[str, float], name: str) -> None:
    if any(v < 0 for v in p.values()):
        raise ValueError(f"{name} has negative weights")
    total = math.fsum(p.values())
    if abs(total - 1.0) > NORMALIZATION_TOLERANCE:
        raise ValueError(f"{name} is not normalized (sums to {total})")


def chernoff(p: Mapping[str, float], q: Mapping[str, float], alpha: float = ALPHA) -> float:
    """Chernoff coefficient sum_k p_k^alpha q_k^(1-alpha) over the shared support."""
    if not 0 < alpha < 1:
        raise ValueError("alpha must be in (0, 1)")
    _check_distribution(p, "P")
    _check_distribution(q, "Q")
    if len(q) < len(p):
        small, large, a = q, p, 1 - alpha
    else:
        small, large, a = p, q, alpha
    terms = [small[k] ** a * large[k] ** (1 - a)
             for k in small if small[k] > 0 and large.get(k, 0) > 0]
    return math.fsum(terms)


def divergence(p: Mapping[str, float], q: Mapping[str, float], alpha: float = ALPHA) -> float:
    return min(1.0, max(0.0, 1.0 - chernoff(p, q, alpha)))


def compound_divergence(train_targets, test_targets, extractor: Extractor) -> float:
    """1 - C_0.1(F_train || F_test) over compound distributions."""
    train_targets, test_targets = list(train_targets), list(test_targets)
    if not train_targets or not test_targets:
        raise ValueError("both halves must be non-empty")
    p = profile(train_targets, extractor).compound_freqs
    q = profile(test_targets, extractor).compound_freqs
    if not p and not q:
        return 0.0
    if not p or not q:
        return 1.0
    return divergence(p, q)

