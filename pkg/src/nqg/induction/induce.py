"""Greedy MDL induction of a QCFG from string pairs.

The loop keeps, for every rule ``p`` in the current rule set R, the candidate
rules produced by splitting ``p`` whose sibling is already derivable from R.
That map gives NEW(R) (its keys) and ELIM(R, f) (the parents of f) at once.
Derivability only grows as the loop runs, so after adding a rule f the only
entries to refresh are those whose source contains every terminal run of f.
"""

from __future__ import annotations

import json
import logging
import math
import random
from collections import defaultdict
from dataclasses import dataclass, field
from typing import Iterable, Sequence

from nqg.grammar import Grammar, Rule, can_derive, count_targets, enumerate_targets, format_rule
from nqg.grammar.rules import contains_run, make_rule, terminal_runs, RuleError
from nqg.induction.codelength import InductionConfig, codelength, rule_bits, symbol_counts
from nqg.induction.splitting import balanced, split_rule

log = logging.getLogger(__name__)

Pair = tuple[tuple, tuple]


@dataclass
class TraceStep:
    step: int
    rule: str
    delta_bits: float
    total_bits: float
    removed: list[str]

    def to_json(self) -> dict:
        return {"step": self.step, "rule": self.rule, "delta_bits": self.delta_bits,
                "total_bits": self.total_bits, "removed": self.removed}


@dataclass
class InductionTrace:
    initial_rules: list[str] = field(default_factory=list)
    initial_bits: float = 0.0
    steps: list[TraceStep] = field(default_factory=list)
    added_for_long_examples: list[str] = field(default_factory=list)

    def write_jsonl(self, path) -> None:
        with open(path, "w", encoding="utf-8", newline="\n") as f:
            for s in self.steps:
                f.write(json.dumps(s.to_json(), sort_keys=True) + "\n")


# Initialization

def _maximal_common_substrings(x: tuple, y: tuple) -> list[tuple]:
    found = set()
    for i in range(len(x)):
        for k in range(len(y)):
            if x[i] != y[k] or (i > 0 and k > 0 and x[i - 1] == y[k - 1]):
                continue
            n = 0
            while i + n < len(x) and k + n < len(y) and x[i + n] == y[k + n]:
                n += 1
            found.add(x[i:i + n])
    subs = sorted(found, key=lambda s: (-len(s), s))
    out = []
    for s in subs:
        if not any(len(t) > len(s) and _is_substring(s, t) for t in out):
            out.append(s)
    return out


def _is_substring(s: tuple, t: tuple) -> bool:
    return any(t[i:i + len(s)] == s for i in range(len(t) - len(s) + 1))


def initialize_rules(pairs: Iterable[Pair], balance_parens: bool = True) -> list[Rule]:
    """Example rules plus identity rules for maximal shared substrings."""
    rules: dict[Rule, None] = {}
    identities: dict[Rule, None] = {}
    for x, y in pairs:
        x, y = tuple(x), tuple(y)
        if not x or not y:
            raise ValueError("empty source or target")
        rules.setdefault(make_rule(x, y, max_target_repeats=None), None)
        for k in _maximal_common_substrings(x, y):
            if balance_parens and not balanced(k):
                continue
            identities.setdefault(Rule(k, k), None)
    for r in identities:
        rules.setdefault(r, None)
    return list(rules)


# Standalone NEW / ELIM / delta (the loop below uses the same definitions
# incrementally).

def rule_derivable(grammar: Grammar, rule: Rule) -> bool:
    """Membership in d(R): links act as fresh tokens on both sides."""
    return can_derive(grammar, rule.source, rule.target)


def candidate_new_rules(rules: Iterable[Rule], config: InductionConfig | None = None) -> list[Rule]:
    config = config or InductionConfig()
    grammar = Grammar(rules)
    out: dict[Rule, None] = {}
    for p in grammar.rules:
        for s in split_rule(p, **config.split_kwargs):
            if s.outer not in grammar and rule_derivable(grammar, s.inner):
                out.setdefault(s.outer, None)
            if s.inner not in grammar and rule_derivable(grammar, s.outer):
                out.setdefault(s.inner, None)
    return list(out)


def eliminated_rules(rules: Iterable[Rule], f: Rule, config: InductionConfig | None = None) -> list[Rule]:
    config = config or InductionConfig()
    grammar = Grammar(rules)
    if f in grammar:
        return []
    out = []
    for h in grammar.rules:
        for s in split_rule(h, **config.split_kwargs):
            if (s.outer == f and rule_derivable(grammar, s.inner)) or \
                    (s.inner == f and rule_derivable(grammar, s.outer)):
                out.append(h)
                break
    return out


def _matches(source: Sequence, runs: list[tuple]) -> bool:
    return all(contains_run(source, r) for r in runs)


def _sample(matching: list[int], f: Rule, config: InductionConfig) -> list[int]:
    if len(matching) <= config.sample_k:
        return matching
    rng = random.Random(f"{config.seed}:{format_rule(f)}")
    return sorted(rng.sample(matching, config.sample_k))


def codelength_delta(rules: Iterable[Rule], f: Rule, sources: Sequence[Sequence[str]],
                     config: InductionConfig) -> float:
    """L(R) - L(R') with R' = (R + f) - ELIM(R, f); positive means shorter.

    The change in the spurious-target term is estimated on up to ``sample_k``
    sources that contain every terminal run of ``f`` and scaled by the number
    of such sources.
    """
    rules = list(rules)
    elim = eliminated_rules(rules, f, config)
    gain = sum(rule_bits(h, config) for h in elim) - (0.0 if f in rules else rule_bits(f, config))
    runs = terminal_runs(f.source)
    matching = [k for k, x in enumerate(sources) if _matches(x, runs)]
    if not matching:
        return gain
    sample = _sample(matching, f, config)
    before, after = Grammar(rules), Grammar(rules + [f])
    inc = 0.0
    for k in sample:
        c0, _ = count_targets(before, sources[k], config.target_limit)
        c1, _ = count_targets(after, sources[k], config.target_limit)
        inc += math.log2(max(c1, 1)) - math.log2(max(c0, 1))
    return gain - inc * len(matching) / len(sample)


# The greedy loop

class _Inducer:
    def __init__(self, pairs: list[Pair], config: InductionConfig):
        self.config = config
        self.pairs = pairs
        self.sources = [x for x, _ in pairs]
        self.rules: dict[Rule, None] = dict.fromkeys(initialize_rules(pairs, config.balance_parens))
        self.grammar = Grammar(self.rules)
        self.by_token: dict[str, set[int]] = defaultdict(set)
        for k, x in enumerate(self.sources):
            for t in x:
                self.by_token[t].add(k)
        self._splits: dict[Rule, list] = {}
        self._contrib: dict[Rule, list[Rule]] = {}
        self._parents: dict[Rule, dict[Rule, None]] = defaultdict(dict)
        self._targets: dict[tuple, tuple[frozenset, bool]] = {}
        self._base_count: dict[int, int] = {}
        self._cost: dict[Rule, tuple[float, list[int]]] = {}
        self._cost_users: dict[int, set[Rule]] = defaultdict(set)
        for p in list(self.rules):
            self._add_contrib(p)

    # -- derivability with caching -------------------------------------
    def _derivable(self, rule: Rule) -> bool:
        entry = self._targets.get(rule.source)
        if entry is None:
            targets, capped = enumerate_targets(self.grammar, rule.source, self.config.target_limit)
            entry = self._targets[rule.source] = (frozenset(targets), capped)
        targets, capped = entry
        if rule.target in targets:
            return True
        return capped and can_derive(self.grammar, rule.source, rule.target)

    def _splits_of(self, p: Rule):
        s = self._splits.get(p)
        if s is None:
            s = self._splits[p] = split_rule(p, **self.config.split_kwargs)
        return s

    def _add_contrib(self, p: Rule):
        cands = []
        for s in self._splits_of(p):
            if self._derivable(s.inner):
                cands.append(s.outer)
            if self._derivable(s.outer):
                cands.append(s.inner)
        cands = list(dict.fromkeys(cands))
        self._contrib[p] = cands
        for c in cands:
            self._parents[c][p] = None

    def _drop_contrib(self, p: Rule):
        for c in self._contrib.pop(p, ()):
            parents = self._parents.get(c)
            if parents is not None:
                parents.pop(p, None)
                if not parents:
                    del self._parents[c]

    # -- scoring ---------------------------------------------------------
    def _matching(self, f: Rule) -> list[int]:
        runs = terminal_runs(f.source)
        if not runs:
            return list(range(len(self.sources)))
        tokens = {t for r in runs for t in r}
        ids = set.intersection(*(self.by_token.get(t, set()) for t in tokens))
        return sorted(k for k in ids if _matches(self.sources[k], runs))

    def _count(self, grammar: Grammar, k: int) -> int:
        c, _ = count_targets(grammar, self.sources[k], self.config.target_limit)
        return max(c, 1)

    def _spurious_cost(self, f: Rule) -> float:
        cached = self._cost.get(f)
        if cached is not None:
            return cached[0]
        matching = self._matching(f)
        if not matching:
            cost, sample = 0.0, []
        else:
            sample = _sample(matching, f, self.config)
            extended = Grammar(list(self.rules) + [f])
            inc = 0.0
            for k in sample:
                base = self._base_count.get(k)
                if base is None:
                    base = self._base_count[k] = self._count(self.grammar, k)
                inc += math.log2(self._count(extended, k)) - math.log2(base)
            cost = inc * len(matching) / len(sample)
        self._cost[f] = (cost, sample)
        for k in sample:
            self._cost_users[k].add(f)
        return cost

    def _symbol_gain(self, f: Rule, elim) -> float:
        dn = -f.num_nt_occurrences + sum(h.num_nt_occurrences for h in elim)
        dt = -f.num_terminals + sum(h.num_terminals for h in elim)
        return self.config.l_nt * dn + self.config.l_t * dt

    def best_candidate(self):
        """MAX_deltaL with ties broken by fewer symbols, then rule text."""
        scored = []
        for f, parents in self._parents.items():
            if f in self.rules:
                continue
            scored.append((self._symbol_gain(f, parents), f))
        if not scored:
            return None
        scored.sort(key=lambda t: -t[0])
        best = None
        for gain, f in scored:
            # The spurious-target term never lowers the codelength, so the
            # symbol gain bounds delta from above.
            if best is not None and gain < best[0]:
                break
            delta = gain - self._spurious_cost(f)
            key = (-delta, f.size, format_rule(f))
            if best is None or key < best[1]:
                best = (delta, key, f)
        return best[2], best[0]

    # -- applying a step ---------------------------------------------------
    def accept(self, f: Rule) -> tuple[list[Rule], float]:
        elim = sorted(self._parents.get(f, {}), key=format_rule)
        new_rules = [r for r in self.rules if r not in set(elim)] + [f]
        grammar = Grammar(new_rules)
        # Keep any rule that turns out not to be derivable without itself.
        removed = []
        for h in elim:
            if rule_derivable(grammar, h):
                removed.append(h)
            else:
                log.debug("keeping %s: not derivable after adding %s", format_rule(h), format_rule(f))
                grammar = grammar.with_rules(add=[h])
        # Rules that the new rule makes derivable without themselves are now
        # redundant; dropping them only shortens the grammar.
        if self.config.prune:
            runs = terminal_runs(f.source)
            for h in sorted(grammar.rules, key=lambda r: (-r.size, format_rule(r))):
                if runs and not _matches(h.source, runs):
                    continue
                rest = grammar.with_rules(remove=[h])
                if rule_derivable(rest, h):
                    removed.append(h)
                    grammar = rest
        if f in removed:
            # f is itself derivable: the step reduces to dropping rules.
            removed.remove(f)
            gain = self._symbol_gain(f, removed) + rule_bits(f, self.config)
            delta = gain
        else:
            gain = self._symbol_gain(f, removed)
            delta = gain - self._spurious_cost(f)
        removed_set = set(removed)
        for h in removed:
            self._drop_contrib(h)
            self._splits.pop(h, None)
            del self.rules[h]
        if f in grammar:
            self.rules[f] = None
        self.grammar = Grammar(self.rules)

        runs = terminal_runs(f.source)
        for src in [s for s in self._targets if not runs or _matches(s, runs)]:
            del self._targets[src]
        touched = set(self._matching(f))
        for k in touched:
            self._base_count.pop(k, None)
            for g in self._cost_users.pop(k, ()):
                self._cost.pop(g, None)
        for p in list(self.rules):
            if p == f or not runs or _matches(p.source, runs):
                self._drop_contrib(p)
                self._add_contrib(p)
        assert not removed_set & set(self.rules)
        return removed, delta


def select_shortest(pairs: Sequence[Pair], n: int) -> list[int]:
    order = sorted(range(len(pairs)), key=lambda k: (len(pairs[k][0]), len(pairs[k][1]), k))
    return order[:n]


def induce(pairs: Iterable[Pair], config: InductionConfig | None = None,
           on_step=None) -> tuple[Grammar, InductionTrace]:
    """Induce a QCFG deriving every pair.

    Induction runs over the ``config.max_examples`` shortest distinct pairs;
    afterwards, example rules are added for longer pairs the result cannot
    derive.  Rules in the returned grammar are sorted by their text form.
    ``on_step(step, rules, subset)`` is called after initialization (step 0)
    and after every accepted step.
    """
    config = config or InductionConfig()
    all_pairs = list(dict.fromkeys((tuple(x), tuple(y)) for x, y in pairs))
    if not all_pairs:
        raise ValueError("empty dataset")
    chosen = select_shortest(all_pairs, config.max_examples)
    subset = [all_pairs[k] for k in chosen]

    inducer = _Inducer(subset, config)
    trace = InductionTrace(initial_rules=[format_rule(r) for r in inducer.rules])
    start = codelength(inducer.rules, inducer.sources, config, mode="exact")
    trace.initial_bits = total = start.total
    log.info("initial: %d rules, %.1f bits", len(inducer.rules), total)
    if on_step is not None:
        on_step(0, list(inducer.rules), subset)

    for step in range(1, config.max_iterations + 1):
        best = inducer.best_candidate()
        if best is None:
            break
        f, delta = best
        if delta < 0:
            break
        removed, delta = inducer.accept(f)
        total -= delta
        trace.steps.append(TraceStep(step, format_rule(f), delta, total,
                                     [format_rule(h) for h in removed]))
        log.info("step %d: %s (delta %.2f bits, %d removed, %d rules)", step, format_rule(f),
                 delta, len(removed), len(inducer.rules))
        if on_step is not None:
            on_step(step, list(inducer.rules), subset)

    rules = list(inducer.rules)
    grammar = Grammar(rules)
    chosen_set = set(chosen)
    for k, (x, y) in enumerate(all_pairs):
        if k in chosen_set or can_derive(grammar, x, y):
            continue
        try:
            rule = make_rule(x, y, max_target_repeats=None)
        except RuleError:
            continue
        rules.append(rule)
        trace.added_for_long_examples.append(format_rule(rule))
    if trace.added_for_long_examples:
        grammar = Grammar(rules)
    return Grammar(sorted(grammar.rules, key=format_rule)), trace
