"""QCFG representation, chart parsing and target-side validity checks."""

from nqg.grammar.cfg import CfgError, TargetCfg, cfg_accepts, load_builtin
from nqg.grammar.chart import (Grammar, can_derive, count_targets, enumerate_targets,
                               parse_constrained, parse_source)
from nqg.grammar.forest import ANCHOR, Derivation, Edge, Node, ParseForest, derivation_target
from nqg.grammar.rules import (NoSuchNonterminal, Rule, RuleError, apply_rule, canonicalize,
                               check_rule, format_rule, is_nt, make_rule, parse_rule, read_rules,
                               substitute, write_rules)


def load_grammar(path) -> Grammar:
    return Grammar(read_rules(path))


def save_grammar(grammar: Grammar, path) -> None:
    write_rules(grammar.rules, path)
