"""Function trees from FunQL and bracketed (s-expression) token sequences."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence


class FunqlError(ValueError):
    def __init__(self, message: str, position: int):
        self.position = position
        super().__init__(f"token {position}: {message}")


@dataclass(frozen=True)
class Tree:
    symbol: str
    children: tuple["Tree", ...] = ()

    def __str__(self):
        if not self.children:
            return self.symbol
        return f"{self.symbol}({', '.join(map(str, self.children))})"

    def nodes(self):
        stack = [self]
        while stack:
            t = stack.pop()
            yield t
            stack.extend(reversed(t.children))

    def skeleton(self) -> str:
        """Symbol with its arity shown as wildcards: ``longest(_)``."""
        if not self.children:
            return self.symbol
        return f"{self.symbol}({', '.join('_' for _ in self.children)})"


_SPECIAL = {"(", ")", ","}


def parse_funql(tokens: Sequence[str]) -> Tree:
    """Parse ``sym ( arg , arg ... )`` token sequences, e.g. ``longest ( river )``."""
    toks = list(tokens)
    if not toks:
        raise FunqlError("empty target", 0)
    pos = 0

    def term() -> Tree:
        nonlocal pos
        if pos >= len(toks):
            raise FunqlError("unexpected end of input", pos)
        sym = toks[pos]
        if sym in _SPECIAL:
            raise FunqlError(f"expected a symbol, found {sym!r}", pos)
        pos += 1
        if pos < len(toks) and toks[pos] == "(":
            pos += 1
            args = [term()]
            while pos < len(toks) and toks[pos] == ",":
                pos += 1
                args.append(term())
            if pos >= len(toks) or toks[pos] != ")":
                raise FunqlError("expected ')' or ','", pos)
            pos += 1
            return Tree(sym, tuple(args))
        return Tree(sym)

    tree = term()
    if pos != len(toks):
        raise FunqlError(f"trailing input {toks[pos]!r}", pos)
    return tree


def parse_bracketed(tokens: Sequence[str]) -> Tree:
    """Parse s-expressions ``( label child ... )``; a bare token is a leaf."""
    toks = list(tokens)
    if not toks:
        raise FunqlError("empty target", 0)
    pos = 0

    def node() -> Tree:
        nonlocal pos
        if pos >= len(toks):
            raise FunqlError("unexpected end of input", pos)
        tok = toks[pos]
        if tok == ")":
            raise FunqlError("unexpected ')'", pos)
        if tok != "(":
            pos += 1
            return Tree(tok)
        pos += 1
        if pos >= len(toks) or toks[pos] in ("(", ")"):
            raise FunqlError("expected a label after '('", pos)
        label = toks[pos]
        pos += 1
        children = []
        while pos < len(toks) and toks[pos] != ")":
            children.append(node())
        if pos >= len(toks):
            raise FunqlError("missing ')'", pos)
        pos += 1
        return Tree(label, tuple(children))

    tree = node()
    if pos != len(toks):
        raise FunqlError(f"trailing input {toks[pos]!r}", pos)
    return tree
