"""Target-side CFG used to filter predicted targets.

File format, one production per line::

    LHS -> rhs tokens

Alternatives may be joined with ``|``.  Symbols that appear on some left-hand
side are nonterminals; everything else is a terminal.  The start symbol is the
LHS of the first production.  The reserved terminal ``<any>`` matches a single
token that is not a literal terminal of the grammar, which keeps symbol
vocabularies out of generic grammars such as balanced FunQL.
"""

from __future__ import annotations

from collections import defaultdict
from pathlib import Path
from typing import Iterable, Sequence

ANY = "<any>"
EPSILON = "<eps>"


class CfgError(ValueError):
    pass


class TargetCfg:
    def __init__(self, productions: Iterable[tuple[str, Sequence[str]]], start: str | None = None):
        self.productions = [(lhs, tuple(rhs)) for lhs, rhs in productions]
        if not self.productions:
            raise CfgError("no productions")
        self.start = start or self.productions[0][0]
        self.nonterminals = {lhs for lhs, _ in self.productions}
        self.by_lhs = defaultdict(list)
        for lhs, rhs in self.productions:
            self.by_lhs[lhs].append(rhs)
        self.literals = {s for _, rhs in self.productions for s in rhs
                         if s not in self.nonterminals and s != ANY}
        self.nullable = self._nullable()

    @classmethod
    def parse(cls, text: str) -> "TargetCfg":
        prods = []
        for lineno, line in enumerate(text.splitlines(), 1):
            line = line.strip()
            if not line or line.startswith("#"):
                continue
            if "->" not in line:
                raise CfgError(f"line {lineno}: missing '->'")
            lhs, rhs = line.split("->", 1)
            lhs = lhs.strip()
            if not lhs or len(lhs.split()) != 1:
                raise CfgError(f"line {lineno}: bad left-hand side {lhs!r}")
            for alt in rhs.split(" | "):
                toks = [t for t in alt.split() if t != EPSILON]
                prods.append((lhs, toks))
        return cls(prods)

    @classmethod
    def load(cls, path: str | Path) -> "TargetCfg":
        return cls.parse(Path(path).read_text(encoding="utf-8"))

    def _nullable(self) -> set:
        nullable = set()
        changed = True
        while changed:
            changed = False
            for lhs, rhs in self.productions:
                if lhs not in nullable and all(s in nullable for s in rhs):
                    nullable.add(lhs)
                    changed = True
        return nullable

    def _matches(self, symbol: str, token: str) -> bool:
        if symbol == ANY:
            return token not in self.literals
        return symbol == token

    def accepts(self, tokens: Sequence[str]) -> bool:
        """Earley recognition."""
        n = len(tokens)
        # item: (lhs, rhs, dot, origin)
        chart = [dict() for _ in range(n + 1)]
        for rhs in self.by_lhs[self.start]:
            chart[0][(self.start, rhs, 0, 0)] = None
        for k in range(n + 1):
            agenda = list(chart[k])
            while agenda:
                lhs, rhs, dot, origin = item = agenda.pop()
                if dot < len(rhs):
                    sym = rhs[dot]
                    if sym in self.nonterminals:
                        for alt in self.by_lhs[sym]:
                            new = (sym, alt, 0, k)
                            if new not in chart[k]:
                                chart[k][new] = None
                                agenda.append(new)
                        if sym in self.nullable:
                            new = (lhs, rhs, dot + 1, origin)
                            if new not in chart[k]:
                                chart[k][new] = None
                                agenda.append(new)
                    elif k < n and self._matches(sym, tokens[k]):
                        chart[k + 1][(lhs, rhs, dot + 1, origin)] = None
                else:
                    for plhs, prhs, pdot, porigin in list(chart[origin]):
                        if pdot < len(prhs) and prhs[pdot] == lhs:
                            new = (plhs, prhs, pdot + 1, porigin)
                            if new not in chart[k]:
                                chart[k][new] = None
                                agenda.append(new)
        return any(lhs == self.start and dot == len(rhs) and origin == 0
                   for lhs, rhs, dot, origin in chart[n])


def cfg_accepts(cfg: TargetCfg, target: Sequence[str]) -> bool:
    return cfg.accepts(tuple(target))


def load_builtin(name: str) -> TargetCfg:
    """Load a shipped CFG: ``scan`` or ``funql``."""
    from importlib import resources
    text = resources.files("nqg.resources").joinpath(f"{name}.cfg").read_text(encoding="utf-8")
    return TargetCfg.parse(text)
