import math
import random
from collections import Counter

import pytest
from hypothesis import given, settings, strategies as st

from nqg.data import Dataset
from nqg.generators import synthetic_funql
from nqg.splits import (Extractor, FunqlError, SplitError, Tree, chernoff, compound_divergence,
                        default_anonymizer, divergence, extract_atoms, extract_compounds,
                        length_split, parse_bracketed, parse_funql, random_split, template_split,
                        tmcd_split)

FUNQL = Extractor("funql")


def toks(s):
    return s.split()


def random_distribution(rng, keys="abcdefg"):
    chosen = rng.sample(keys, rng.randint(1, len(keys)))
    w = [rng.random() + 1e-3 for _ in chosen]
    total = sum(w)
    return {k: v / total for k, v in zip(chosen, w)}


class TestFunql:
    def test_longest_river(self):
        assert parse_funql(toks("longest ( river )")) == Tree("longest", (Tree("river"),))

    def test_exclude(self):
        t = parse_funql(toks("exclude ( longest ( x ) , y )"))
        assert str(t) == "exclude(longest(x), y)"
        assert [c.symbol for c in t.children] == ["longest", "y"]

    def test_leaf(self):
        assert parse_funql(["state"]) == Tree("state")

    @pytest.mark.parametrize("bad", ["longest ( river", "( river )", "a b", "a ( )", ""])
    def test_malformed(self, bad):
        with pytest.raises(FunqlError) as e:
            parse_funql(toks(bad))
        assert e.value.position >= 0

    def test_bracketed(self):
        t = parse_bracketed(toks("( S ( NP a ) ( VP b ) )"))
        assert str(t) == "S(NP(a), VP(b))"


class TestCompounds:
    def test_atoms(self):
        assert extract_atoms(toks("longest ( river )"), FUNQL) == Counter({"longest": 1, "river": 1})
        assert extract_atoms(toks("a b a"), Extractor("token")) == Counter({"a": 2, "b": 1})
        assert extract_atoms(["state"], FUNQL) == Counter({"state": 1})

    def test_compounds(self):
        assert extract_compounds(toks("longest ( river )"), FUNQL) == Counter({"longest(river)": 1})
        assert extract_compounds(["state"], FUNQL) == Counter()

    def test_order_two(self):
        c = extract_compounds(toks("exclude ( longest ( a ) , b )"), Extractor("funql", order=2))
        assert "exclude(longest(_), _)" in c
        assert "exclude(longest(a), _)" in c
        assert "exclude(_, b)" in c

    def test_bad_extractor(self):
        with pytest.raises(ValueError):
            Extractor("sql")
        with pytest.raises(ValueError):
            Extractor("funql", order=3)


class TestChernoff:
    def test_identity(self):
        p = {"a": 0.2, "b": 0.8}
        assert chernoff(p, p, 0.1) == pytest.approx(1.0, abs=1e-12)

    def test_disjoint(self):
        assert chernoff({"a": 1.0}, {"b": 1.0}) == 0.0
        assert divergence({"a": 1.0}, {"b": 1.0}) == 1.0

    def test_worked_value(self):
        assert chernoff({"a": 1.0}, {"a": 0.5, "b": 0.5}, 0.1) == pytest.approx(0.5 ** 0.9, abs=1e-12)
        assert 0.5 ** 0.9 == pytest.approx(0.53589, abs=1e-5)

    def test_unnormalized(self):
        with pytest.raises(ValueError):
            chernoff({"a": 0.5}, {"a": 1.0})
        with pytest.raises(ValueError):
            chernoff({"a": 1.0}, {"a": 1.0}, alpha=1.0)

    @settings(max_examples=100, deadline=None)
    @given(st.integers(0, 10**9), st.floats(0.01, 0.99))
    def test_bounds_and_symmetry(self, seed, alpha):
        rng = random.Random(seed)
        p, q = random_distribution(rng), random_distribution(rng)
        c = chernoff(p, q, alpha)
        assert -1e-12 <= c <= 1 + 1e-12
        assert c == pytest.approx(chernoff(q, p, 1 - alpha), abs=1e-12)
        assert chernoff(p, p, alpha) == pytest.approx(1.0, abs=1e-12)

    def test_compound_divergence(self):
        a = [toks("longest ( river )")]
        assert compound_divergence(a, a, FUNQL) == 0.0
        assert compound_divergence(a, [toks("largest ( state )")], FUNQL) == 1.0
        with pytest.raises(ValueError):
            compound_divergence([], a, FUNQL)


def funql_dataset(n, seed=0):
    return synthetic_funql(n, seed)


class TestSplits:
    def test_random(self):
        data = funql_dataset(100)
        a = random_split(data, 50, 50, seed=3)
        b = random_split(data, 50, 50, seed=3)
        assert a.train_ids == b.train_ids
        assert set(a.train_ids).isdisjoint(a.test_ids)
        assert set(a.train_ids) | set(a.test_ids) == set(range(100))
        assert len(random_split(data, 100, 0).test) == 0
        with pytest.raises(SplitError):
            random_split(data, 80, 30)

    def test_length(self):
        data = Dataset.from_pairs([(["a"] * n, ["A"] * n) for n in (1, 2, 3, 4)])
        r = length_split(data, "target", 0.5)
        assert [len(e.target) for e in r.test] == [3, 4]

    def test_length_all_equal(self, caplog):
        data = Dataset.from_pairs([(["a"], ["A"]), (["b"], ["B"])])
        r = length_split(data, "source", 0.5)
        assert len(r.test) == 0 and len(r.train) == 2
        assert "empty" in caplog.text

    def test_length_ties_go_to_train(self):
        data = Dataset.from_pairs([(["a"] * n, ["A"]) for n in (1, 2, 2, 2, 3)])
        r = length_split(data, "source", 0.5)
        assert sorted(len(e.source) for e in r.test) == [3]

    @settings(max_examples=20, deadline=None)
    @given(st.lists(st.integers(1, 6), min_size=1, max_size=30), st.floats(0, 1))
    def test_length_boundary(self, lengths, fraction):
        data = Dataset.from_pairs([(["a"] * n, ["A"]) for n in lengths])
        r = length_split(data, "source", fraction)
        if len(r.test):
            assert max((len(e.source) for e in r.train), default=0) <= min(len(e.source) for e in r.test)
        assert len(r.train) + len(r.test) == len(data)

    def test_template(self):
        pairs = [(["what", "is", f"m{k}"], ["answer", "(", f"m{k}", ")"]) for k in range(3)]
        pairs += [(["how", "many", f"m{k}"], ["count", "(", f"m{k}", ")"]) for k in range(3)]
        data = Dataset.from_pairs(pairs)
        for seed in range(5):
            r = template_split(data, seed=seed, extractor=FUNQL)
            tr = {default_anonymizer(e.target) for e in r.train}
            te = {default_anonymizer(e.target) for e in r.test}
            assert tr.isdisjoint(te)
            assert len(r.train) + len(r.test) == len(data)

    def test_tmcd_identical_targets(self):
        data = Dataset.from_pairs([([f"w{k}"], toks("longest ( river )")) for k in range(20)])
        r = tmcd_split(data, FUNQL, 10, 10, seed=0)
        assert r.divergence == 0.0 and r.missing_atom_fraction == 0.0

    def test_tmcd_beats_random(self):
        data = funql_dataset(500, seed=2)
        t = tmcd_split(data, FUNQL, 250, 250, seed=1, candidates=200)
        r = random_split(data, 250, 250, seed=1, extractor=FUNQL)
        assert t.divergence > r.divergence
        assert t.missing_atom_fraction == 0
        assert (len(t.train), len(t.test)) == (250, 250)
        divs = [s["divergence"] for s in t.trace]
        assert all(b > a for a, b in zip(divs, divs[1:]))

    def test_tmcd_unsatisfiable(self):
        data = Dataset.from_pairs([(["a"], ["x"]), (["b"], ["y"])])
        with pytest.raises(SplitError, match="atom"):
            tmcd_split(data, Extractor("token"), 1, 1)

    def test_report(self):
        r = tmcd_split(funql_dataset(60), FUNQL, 30, 30, seed=0, candidates=50)
        rep = r.report()
        assert set(rep) >= {"divergence", "atom_divergence_note", "missing_atom_fraction", "sizes",
                            "iterations", "seed"}
