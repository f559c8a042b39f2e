"""QCFG rules over a single nonterminal.

A symbol is either a terminal, stored as a ``str`` token, or a linked
nonterminal, stored as an ``int`` holding its link index.  So::

    Rule((1, "thrice"), (1, 1, 1))

is NT -> <NT_1 thrice, NT_1 NT_1 NT_1>.  Rules are always kept in canonical
form: link indices are numbered 1, 2 by first occurrence in the source.
"""

from __future__ import annotations

from pathlib import Path
from typing import Iterable, NamedTuple, Sequence

NT_PREFIX = "NT_"
SEPARATOR = "###"
MAX_SOURCE_NTS = 2
DEFAULT_MAX_TARGET_REPEATS = 4


class RuleError(ValueError):
    pass


class NoSuchNonterminal(KeyError):
    pass


def is_nt(symbol) -> bool:
    return type(symbol) is int


class Rule(NamedTuple):
    source: tuple
    target: tuple

    def __str__(self) -> str:
        return format_rule(self)

    @property
    def num_nts(self) -> int:
        return sum(1 for s in self.source if type(s) is int)

    @property
    def num_terminals(self) -> int:
        return sum(1 for s in self.source if type(s) is not int) + sum(
            1 for s in self.target if type(s) is not int)

    @property
    def num_nt_occurrences(self) -> int:
        return sum(1 for s in self.source if type(s) is int) + sum(
            1 for s in self.target if type(s) is int)

    @property
    def size(self) -> int:
        return len(self.source) + len(self.target)


def canonicalize(source: Sequence, target: Sequence) -> Rule:
    """Renumber links 1, 2, ... by first occurrence in ``source``."""
    mapping = {}
    for s in source:
        if type(s) is int and s not in mapping:
            mapping[s] = len(mapping) + 1
    if all(k == v for k, v in mapping.items()):
        return Rule(tuple(source), tuple(target))
    src = tuple(mapping[s] if type(s) is int else s for s in source)
    try:
        tgt = tuple(mapping[s] if type(s) is int else s for s in target)
    except KeyError as e:
        raise RuleError(f"target nonterminal {e.args[0]} missing from source") from None
    return Rule(src, tgt)


def check_rule(rule: Rule, allow_empty_target: bool = False,
               max_target_repeats: int | None = DEFAULT_MAX_TARGET_REPEATS) -> None:
    """Raise RuleError unless ``rule`` satisfies the QCFG constraints."""
    src, tgt = rule
    if not src:
        raise RuleError("empty source")
    if not tgt and not allow_empty_target:
        raise RuleError("empty target")
    for s in src + tgt:
        if type(s) is str:
            if not s or s == SEPARATOR or any(c.isspace() for c in s):
                raise RuleError(f"bad terminal {s!r}")
        elif type(s) is not int or s < 1:
            raise RuleError(f"bad symbol {s!r}")
    src_nts = [s for s in src if type(s) is int]
    if len(src_nts) != len(set(src_nts)):
        raise RuleError("source nonterminal index repeated")
    if len(src_nts) > MAX_SOURCE_NTS:
        raise RuleError(f"more than {MAX_SOURCE_NTS} source nonterminals")
    if len(src) == 1 and src_nts:
        raise RuleError("unary source production")
    for s in tgt:
        if type(s) is int and s not in src_nts:
            raise RuleError(f"target nonterminal {s} not linked to source")
    if max_target_repeats is not None:
        for k in src_nts:
            if tgt.count(k) > max_target_repeats:
                raise RuleError(f"NT_{k} repeated more than {max_target_repeats} times")


def make_rule(source: Sequence, target: Sequence, **kwargs) -> Rule:
    rule = canonicalize(source, target)
    check_rule(rule, **kwargs)
    return rule


def apply_rule(pair: tuple[Sequence, Sequence], link: int, rule: Rule) -> tuple[tuple, tuple]:
    """One step of the derives relation.

    Substitutes ``rule`` for the nonterminal with index ``link``: once on the
    source side and at every target occurrence.  The rule's own links are
    renumbered past the pair's links before substitution and the result is
    re-canonicalized.
    """
    src, tgt = tuple(pair[0]), tuple(pair[1])
    if link not in src:
        raise NoSuchNonterminal(link)
    offset = max(s for s in src + tgt if type(s) is int)
    r_src = tuple(s + offset if type(s) is int else s for s in rule.source)
    r_tgt = tuple(s + offset if type(s) is int else s for s in rule.target)
    new_src = []
    for s in src:
        if s == link and type(s) is int:
            new_src.extend(r_src)
        else:
            new_src.append(s)
    new_tgt = []
    for s in tgt:
        if s == link and type(s) is int:
            new_tgt.extend(r_tgt)
        else:
            new_tgt.append(s)
    out = canonicalize(new_src, new_tgt)
    return out.source, out.target


def substitute(target: tuple, fragments: Sequence[tuple]) -> tuple:
    """Fill link ``k`` of a rule target with ``fragments[k - 1]``."""
    out = []
    for s in target:
        if type(s) is int:
            out.extend(fragments[s - 1])
        else:
            out.append(s)
    return tuple(out)


def terminal_runs(seq: Sequence) -> list[tuple]:
    """Maximal runs of terminals, e.g. (1, 'after', 2) -> [('after',)]."""
    runs, cur = [], []
    for s in seq:
        if type(s) is int:
            if cur:
                runs.append(tuple(cur))
                cur = []
        else:
            cur.append(s)
    if cur:
        runs.append(tuple(cur))
    return runs


def contains_run(tokens: Sequence, run: tuple) -> bool:
    n = len(run)
    first = run[0]
    for i in range(len(tokens) - n + 1):
        if tokens[i] == first and tuple(tokens[i:i + n]) == run:
            return True
    return False


# Text format

def _format_symbols(seq: Iterable) -> str:
    return " ".join(f"{NT_PREFIX}{s}" if type(s) is int else s for s in seq)


def format_rule(rule: Rule) -> str:
    return f"{_format_symbols(rule.source)} {SEPARATOR} {_format_symbols(rule.target)}".strip()


def _parse_symbols(text: str) -> tuple:
    out = []
    for tok in text.split():
        if tok.startswith(NT_PREFIX) and tok[len(NT_PREFIX):].isdigit():
            out.append(int(tok[len(NT_PREFIX):]))
        else:
            out.append(tok)
    return tuple(out)


def parse_rule(line: str, **kwargs) -> Rule:
    if line.count(SEPARATOR) != 1:
        raise RuleError(f"expected exactly one {SEPARATOR!r} in {line!r}")
    left, right = line.split(SEPARATOR)
    return make_rule(_parse_symbols(left), _parse_symbols(right), **kwargs)


def read_rules(path: str | Path) -> list[Rule]:
    rules = []
    with open(path, encoding="utf-8") as f:
        for lineno, line in enumerate(f, 1):
            line = line.strip()
            if not line or line.startswith("#") and not line.startswith(SEPARATOR):
                continue
            try:
                rules.append(parse_rule(line, max_target_repeats=None))
            except RuleError as e:
                raise RuleError(f"{path}:{lineno}: {e}") from None
    return rules


def write_rules(rules: Iterable[Rule], path: str | Path) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as f:
        for rule in rules:
            f.write(format_rule(rule) + "\n")
