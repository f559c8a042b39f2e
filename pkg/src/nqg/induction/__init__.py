"""Grammar induction by greedy codelength minimization."""

from nqg.induction.codelength import (CodelengthReport, InductionConfig, codelength, rule_bits,
                                      symbol_counts)
from nqg.induction.induce import (InductionTrace, TraceStep, candidate_new_rules,
                                  codelength_delta, eliminated_rules, induce, initialize_rules,
                                  rule_derivable)
from nqg.induction.splitting import Split, balanced, split_pairs, split_rule
