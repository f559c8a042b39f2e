import sys

import pytest

from nqg.data import DataError, Dataset
from nqg.grammar import Grammar, parse_rule
from nqg.hybrid_eval import FallbackError, FallbackPredictor, evaluate, grammar_stats, hybrid_predict


def T(s):
    return tuple(s.split())


class TestHybridPredict:
    def test_nqg_wins(self):
        fb = FallbackPredictor.from_mapping({T("x"): T("U")})
        assert hybrid_predict(lambda s: T("T"), fb, T("x")) == T("T")

    def test_fallback(self):
        fb = FallbackPredictor.from_mapping({T("x"): T("U")})
        assert hybrid_predict(lambda s: None, fb, T("x")) == T("U")

    def test_echo(self):
        assert hybrid_predict(lambda s: None, FallbackPredictor.echo(), T("a b")) == T("a b")

    def test_missing(self):
        with pytest.raises(FallbackError):
            hybrid_predict(lambda s: None, FallbackPredictor.from_mapping({}), T("x"))


class TestFallbackSources:
    def test_file_coverage(self, tmp_path):
        p = tmp_path / "fb.tsv"
        p.write_text("a b\tX\n", encoding="utf-8")
        assert FallbackPredictor.from_file(p, [T("a b")])(T("a b")) == T("X")
        with pytest.raises(DataError):
            FallbackPredictor.from_file(p, [T("c")])

    def test_command(self):
        cmd = f"{sys.executable} -c \"import sys; [print(l.strip().upper()) for l in sys.stdin]\""
        fb = FallbackPredictor.from_command(cmd)
        fb.prepare([T("a b"), T("c")])
        assert fb(T("a b")) == T("A B") and fb(T("c")) == T("C")

    def test_command_failure(self):
        fb = FallbackPredictor.from_command(f"{sys.executable} -c \"import sys; sys.exit(3)\"")
        with pytest.raises(FallbackError):
            fb.prepare([T("a")])


def gold(n):
    return Dataset.from_pairs([([f"s{k}"], [f"t{k}"]) for k in range(n)])


class TestEvaluate:
    def test_all_correct(self):
        g = gold(3)
        preds = [ex.target for ex in g]
        rep, records = evaluate(g, preds, preds)
        assert (rep.exact_match, rep.coverage, rep.precision) == (1, 1, 1)
        assert len(records) == 3

    def test_all_abstain(self):
        g = gold(2)
        rep, _ = evaluate(g, [None, None], [T("x"), T("y")])
        assert rep.coverage == 0 and rep.precision is None
        assert rep.to_json()["precision"] is None

    def test_worked_arithmetic(self):
        g = gold(10)
        nqg = [g[0].target, g[1].target, g[2].target, T("wrong")] + [None] * 6
        hybrid = [nqg[k] if nqg[k] is not None else g[k].target for k in range(4)]
        hybrid += [g[k].target for k in range(4, 8)] + [T("wrong")] * 2
        rep, records = evaluate(g, nqg, hybrid)
        assert (rep.coverage, rep.precision, rep.exact_match) == (0.4, 0.75, 0.7)
        # Fractions are recomputable from the per-example records.
        assert sum(r["correct"] for r in records) / len(records) == rep.exact_match
        assert rep.coverage * rep.counts["examples"] == rep.counts["nqg_outputs"]

    def test_id_alignment(self):
        g = gold(2)
        rep, _ = evaluate(g, {1: g[1].target, 0: None}, {0: T("x"), 1: g[1].target})
        assert rep.exact_match == 0.5
        with pytest.raises(ValueError):
            evaluate(g, {0: None}, {0: T("x"), 1: T("y")})
        with pytest.raises(ValueError):
            evaluate(g, [None], [T("x")])

    def test_grammar_fields(self):
        g = gold(2)
        grammar = Grammar([parse_rule("s0 ### t0")])
        rep, _ = evaluate(g, [None, None], [T("x")] * 2, grammar, train_size=8)
        assert (rep.grammar_rule_count, rep.dataset_size, rep.rule_ratio) == (1, 8, 8.0)


class TestGrammarStats:
    def test_ratio(self):
        grammar = Grammar([parse_rule(f"w{k} ### W{k}") for k in range(20)])
        assert grammar_stats(grammar, 16727) == (16727, 20, 836.35)

    def test_one_to_one(self):
        assert grammar_stats(Grammar([parse_rule("a ### A")]), gold(1)) == (1, 1, 1.0)

    def test_uncompressed(self):
        grammar = Grammar([parse_rule(f"w{k} ### W{k}") for k in range(5)])
        assert grammar_stats(grammar, 4)[2] < 1
