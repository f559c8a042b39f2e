"""SPLIT: factor one rule into an outer rule and an inner rule."""

from __future__ import annotations

from typing import NamedTuple

from nqg.grammar.rules import DEFAULT_MAX_TARGET_REPEATS, Rule, apply_rule, canonicalize


class Split(NamedTuple):
    """``outer`` with ``inner`` substituted at link ``link`` gives back the rule."""

    outer: Rule
    inner: Rule
    link: int

    def recompose(self) -> Rule:
        return Rule(*apply_rule((self.outer.source, self.outer.target), self.link, self.inner))


def balanced(seq) -> bool:
    depth = 0
    for s in seq:
        if s == "(":
            depth += 1
        elif s == ")":
            depth -= 1
            if depth < 0:
                return False
    return depth == 0


def _occurrences(seq: tuple, sub: tuple) -> list[int]:
    n, k = len(seq), len(sub)
    return [i for i in range(n - k + 1) if seq[i:i + k] == sub]


def split_rule(rule: Rule, allow_repeated_target_nt: bool = False,
               max_target_repeats: int | None = DEFAULT_MAX_TARGET_REPEATS,
               balance_parens: bool = True) -> list[Split]:
    """All ways to replace one (source substring, target substring) pair by a fresh link.

    A target substring that occurs more than once is replaced at every
    occurrence when ``allow_repeated_target_nt`` is set, and skipped otherwise.
    The inner rule's source may not be a lone nonterminal, the outer rule's
    source may not be the lone fresh nonterminal, and both sources keep at most
    two nonterminals.  Links must not be cut: a link inside the source
    substring must have every target occurrence inside the replaced target
    pieces, and vice versa.
    """
    src, tgt = rule
    n, m = len(src), len(tgt)
    nt_positions: dict[int, list[int]] = {}
    for pos, s in enumerate(tgt):
        if type(s) is int:
            nt_positions.setdefault(s, []).append(pos)
    total_nts = sum(1 for s in src if type(s) is int)
    fresh = max([s for s in src if type(s) is int], default=0) + 1

    # Target pieces: content -> (occurrences, links inside, covered positions).
    pieces = []
    seen = set()
    for c in range(m):
        for d in range(c + 1, m + 1):
            sub = tgt[c:d]
            if sub in seen:
                continue
            seen.add(sub)
            if balance_parens and not balanced(sub):
                continue
            occ = _occurrences(tgt, sub)
            width = d - c
            if len(occ) > 1:
                if not allow_repeated_target_nt:
                    continue
                if max_target_repeats is not None and len(occ) > max_target_repeats:
                    continue
                if any(b - a < width for a, b in zip(occ, occ[1:])):
                    continue
            covered = {p for a in occ for p in range(a, a + width)}
            links = frozenset(s for s in sub if type(s) is int)
            pieces.append((sub, occ, links, covered))

    out = []
    for a in range(n):
        for b in range(a + 1, n + 1):
            if a == 0 and b == n:
                continue
            ssub = src[a:b]
            if len(ssub) == 1 and type(ssub[0]) is int:
                continue
            inside = frozenset(s for s in ssub if type(s) is int)
            if total_nts - len(inside) + 1 > 2:
                continue
            outer_src = src[:a] + (fresh,) + src[b:]
            for sub, occ, links, covered in pieces:
                if not links <= inside:
                    continue
                if any(p not in covered for k in inside for p in nt_positions.get(k, ())):
                    continue
                width = len(sub)
                outer_tgt = []
                pos = 0
                for start in occ:
                    outer_tgt.extend(tgt[pos:start])
                    outer_tgt.append(fresh)
                    pos = start + width
                outer_tgt.extend(tgt[pos:])
                outer = canonicalize(outer_src, outer_tgt)
                inner = canonicalize(ssub, sub)
                # Position of the fresh link in the outer source fixes its index.
                link = 1 + sum(1 for s in src[:a] if type(s) is int)
                out.append(Split(outer, inner, link))
    return out


def split_pairs(rule: Rule, **kwargs) -> set[tuple[Rule, Rule]]:
    """SPLIT as unordered (g, h) pairs."""
    return {(s.outer, s.inner) for s in split_rule(rule, **kwargs)}
