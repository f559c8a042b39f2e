"""Corpus generators: the SCAN command language and small synthetic FunQL grammars.

SCAN is a closed language of 20,910 commands; generating it from its phrase
grammar gives exactly the published command/action pairs, so the standard
splits can be rebuilt offline.
"""

from __future__ import annotations

import random
from itertools import product

from nqg.data import Dataset
from nqg.grammar import Rule, parse_rule

# SCAN ---------------------------------------------------------------------

PRIMITIVES = {"walk": "I_WALK", "look": "I_LOOK", "run": "I_RUN", "jump": "I_JUMP"}
DIRECTIONS = {"left": "I_TURN_LEFT", "right": "I_TURN_RIGHT"}
SCAN_SPLITS = ("simple", "jump", "turn_left", "length")


def _verb_phrases():
    """(words, actions) for every V."""
    out = []
    for u, act in PRIMITIVES.items():
        out.append(([u], [act]))
    for u, act in PRIMITIVES.items():
        for d, turn in DIRECTIONS.items():
            out.append(([u, d], [turn, act]))
    for d, turn in DIRECTIONS.items():
        out.append((["turn", d], [turn]))
    for u, act in PRIMITIVES.items():
        for d, turn in DIRECTIONS.items():
            out.append(([u, "opposite", d], [turn, turn, act]))
            out.append(([u, "around", d], [turn, act] * 4))
    for d, turn in DIRECTIONS.items():
        out.append((["turn", "opposite", d], [turn, turn]))
        out.append((["turn", "around", d], [turn] * 4))
    return out


def _sentences():
    out = []
    for words, acts in _verb_phrases():
        out.append((words, acts))
        out.append((words + ["twice"], acts * 2))
        out.append((words + ["thrice"], acts * 3))
    return out


def generate_scan() -> Dataset:
    """Every SCAN command with its action sequence, in a fixed order."""
    s = _sentences()
    pairs = [(w, a) for w, a in s]
    for (w1, a1), (w2, a2) in product(s, s):
        pairs.append((w1 + ["and"] + w2, a1 + a2))
        pairs.append((w1 + ["after"] + w2, a2 + a1))
    return Dataset.from_pairs(pairs)


def _contains(seq, sub) -> bool:
    n = len(sub)
    return any(tuple(seq[i:i + n]) == sub for i in range(len(seq) - n + 1))


def scan_split(name: str, dataset: Dataset | None = None) -> tuple[Dataset, Dataset]:
    """(train, test) for a standard SCAN split.

    ``jump`` / ``turn_left``: every command using the primitive in context is
    held out and the bare primitive stays in training.  ``length``: train on
    action sequences of at most 22 actions, test on the longer ones.
    ``simple``: a seeded 80/20 random split.
    """
    data = dataset or generate_scan()
    if name in ("jump", "turn_left"):
        sub = ("jump",) if name == "jump" else ("turn", "left")
        test = [ex.pair for ex in data if _contains(ex.source, sub) and ex.source != sub]
        train = [ex.pair for ex in data if not _contains(ex.source, sub) or ex.source == sub]
    elif name == "length":
        train = [ex.pair for ex in data if len(ex.target) <= 22]
        test = [ex.pair for ex in data if len(ex.target) > 22]
    elif name == "simple":
        ids = list(range(len(data)))
        random.Random(0).shuffle(ids)
        cut = int(0.8 * len(ids))
        train = [data[k].pair for k in sorted(ids[:cut])]
        test = [data[k].pair for k in sorted(ids[cut:])]
    else:
        raise ValueError(f"unknown SCAN split {name!r}; expected one of {SCAN_SPLITS}")
    return Dataset.from_pairs(train), Dataset.from_pairs(test)


# Synthetic FunQL ---------------------------------------------------------

# A synchronous generator over nonterminals Q (question), P (phrase) and
# N (noun).  Each line is ``LHS -> source ### target`` with the right-hand
# nonterminals written in angle brackets.  Every complex phrase opens with a
# keyword, so the language stays unambiguous even with one nonterminal.
FUNQL_GENERATOR = """\
Q -> what is <P> ### answer ( <P> )
Q -> how many <P> ### answer ( count ( <P> ) )
P -> <N> ### <N>
P -> the largest <P> ### largest ( <P> )
P -> the <N> in <P> ### intersection ( <N> , loc ( <P> ) )
P -> the <N> next to <P> ### intersection ( <N> , next_to ( <P> ) )
N -> rivers ### river
N -> cities ### city
N -> states ### state
N -> lakes ### lake
N -> mountains ### mountain
N -> m0 ### m0
"""

TOY_GENERATOR = """\
Q -> largest <Q> ### largest ( <Q> )
Q -> count <Q> ### count ( <Q> )
Q -> next to <Q> ### next_to ( <Q> )
Q -> rivers ### river
Q -> states ### state
Q -> cities ### city
"""


class SyncGenerator:
    """Sample paired strings from a small synchronous grammar."""

    def __init__(self, text: str):
        self.productions: dict[str, list[tuple[list[str], list[str]]]] = {}
        self.start = None
        for line in text.strip().splitlines():
            lhs, rhs = line.split("->", 1)
            src, tgt = rhs.split("###")
            lhs = lhs.strip()
            self.start = self.start or lhs
            self.productions.setdefault(lhs, []).append((src.split(), tgt.split()))

    @property
    def num_rules(self) -> int:
        return sum(len(v) for v in self.productions.values())

    def qcfg_rules(self) -> list[Rule]:
        """The generator written with a single nonterminal (chain rules collapse)."""
        rules = []
        for alts in self.productions.values():
            for src, tgt in alts:
                if len(src) == 1 and src[0].startswith("<"):
                    continue
                # Nonterminals appear once per side and in the same order.
                sides = []
                for seq in (src, tgt):
                    k = 0
                    out = []
                    for tok in seq:
                        if tok.startswith("<"):
                            k += 1
                            out.append(f"NT_{k}")
                        else:
                            out.append(tok)
                    sides.append(" ".join(out))
                rules.append(parse_rule(" ### ".join(sides)))
        return rules

    def sample(self, rng: random.Random, symbol: str | None = None, depth: int = 0,
               max_depth: int = 3, recurse_p: float = 0.45):
        symbol = symbol or self.start
        alts = self.productions[symbol]
        recursive = [a for a in alts if any(t == f"<{symbol}>" for t in a[0])]
        flat = [a for a in alts if a not in recursive]
        if recursive and depth < max_depth and rng.random() < recurse_p:
            src, tgt = rng.choice(recursive)
        else:
            src, tgt = rng.choice(flat or alts)
        src_out, fills = [], []
        for tok in src:
            if tok.startswith("<"):
                s, t = self.sample(rng, tok[1:-1], depth + 1 if tok == f"<{symbol}>" else depth,
                                   max_depth, recurse_p)
                src_out.extend(s)
                fills.append(t)
            else:
                src_out.append(tok)
        tgt_out, k = [], 0
        for tok in tgt:
            if tok.startswith("<"):
                tgt_out.extend(fills[k])
                k += 1
            else:
                tgt_out.append(tok)
        return src_out, tgt_out

    def generate(self, n: int, seed: int = 0, max_depth: int = 3) -> Dataset:
        """``n`` distinct examples in sampling order."""
        rng = random.Random(seed)
        seen: dict = {}
        attempts = 0
        while len(seen) < n:
            attempts += 1
            if attempts > 200 * n:
                raise ValueError(f"could not draw {n} distinct examples")
            s, t = self.sample(rng, max_depth=max_depth)
            seen.setdefault((tuple(s), tuple(t)), None)
        return Dataset.from_pairs(list(seen))


def funql_generator() -> SyncGenerator:
    return SyncGenerator(FUNQL_GENERATOR)


def toy_generator() -> SyncGenerator:
    return SyncGenerator(TOY_GENERATOR)


def synthetic_funql(n: int = 1000, seed: int = 0) -> Dataset:
    return funql_generator().generate(n, seed)
