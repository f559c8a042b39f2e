"""Two-part codelength of a rule set over a dataset."""

from __future__ import annotations

import math
import random
from dataclasses import dataclass
from typing import Iterable, Sequence

from nqg.grammar import Grammar, Rule, count_targets


@dataclass
class InductionConfig:
    l_nt: float = 1.0  # bits per nonterminal symbol
    l_t: float = 8.0  # bits per terminal symbol
    sample_k: int = 10
    max_examples: int = 500
    allow_repeated_target_nt: bool = False
    seed: int = 0
    max_target_repeats: int = 4
    balance_parens: bool = True
    target_limit: int = 1000  # cap on C_beta enumeration
    max_iterations: int = 100_000
    prune: bool = True  # drop rules made derivable without themselves

    def __post_init__(self):
        if not (self.l_nt > 0 and self.l_t > 0):
            raise ValueError("l_nt and l_t must be positive")
        if self.sample_k < 1 or self.max_examples < 1:
            raise ValueError("sample_k and max_examples must be >= 1")

    @property
    def split_kwargs(self) -> dict:
        return dict(allow_repeated_target_nt=self.allow_repeated_target_nt,
                    max_target_repeats=self.max_target_repeats,
                    balance_parens=self.balance_parens)


@dataclass
class CodelengthReport:
    nonterminal_count: int
    terminal_count: int
    log_targets_sum: float
    total: float
    capped: bool = False  # some C_beta hit the enumeration cap: lower bound


def symbol_counts(rules: Iterable[Rule]) -> tuple[int, int]:
    """(C_N, C_T): symbol occurrences over both sides of every rule."""
    c_n = c_t = 0
    for r in rules:
        c_n += r.num_nt_occurrences
        c_t += r.num_terminals
    return c_n, c_t


def rule_bits(rule: Rule, config: InductionConfig) -> float:
    return config.l_nt * rule.num_nt_occurrences + config.l_t * rule.num_terminals


def codelength(rules: Iterable[Rule], sources: Sequence[Sequence[str]], config: InductionConfig,
               mode: str = "exact") -> CodelengthReport:
    """L(R) = l_N C_N + l_T C_T + sum over sources of log2 C_beta.

    ``sources`` are the example sources of the dataset.  In ``sampled`` mode
    the last term is estimated from ``config.sample_k`` sources and scaled to
    the full dataset.
    """
    rules = list(rules)
    grammar = Grammar(rules)
    c_n, c_t = symbol_counts(grammar.rules)
    if mode == "exact":
        chosen, scale = list(sources), 1.0
    elif mode == "sampled":
        rng = random.Random(config.seed)
        k = min(config.sample_k, len(sources))
        chosen = rng.sample(list(sources), k)
        scale = len(sources) / k if k else 0.0
    else:
        raise ValueError(f"unknown mode {mode!r}")
    log_sum = 0.0
    capped = False
    for x in chosen:
        count, hit_cap = count_targets(grammar, x, config.target_limit)
        capped |= hit_cap
        if count == 0:
            raise ValueError(f"source not derivable under rules: {' '.join(x)}")
        log_sum += math.log2(count)
    log_sum *= scale
    total = config.l_nt * c_n + config.l_t * c_t + log_sum
    return CodelengthReport(c_n, c_t, log_sum, total, capped)
