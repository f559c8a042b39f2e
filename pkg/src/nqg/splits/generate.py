"""Train/test split generators: random, length, template and TMCD."""

from __future__ import annotations

import logging
import math
import random
import re
from collections import Counter
from dataclasses import dataclass, field
from typing import Callable, Sequence

from nqg.data import Dataset
from nqg.splits.compounds import ALPHA, Extractor, compound_divergence, extract_atoms, extract_compounds

log = logging.getLogger(__name__)

LENGTH_MEASURES = ("source", "target")
# Strict improvement margin for accepted TMCD swaps.
MIN_GAIN = 1e-9


class SplitError(ValueError):
    pass


@dataclass
class SplitResult:
    train: Dataset
    test: Dataset
    divergence: float | None
    missing_atom_fraction: float | None
    kind: str = ""
    seed: int | None = None
    iterations: int = 0
    train_ids: list[int] = field(default_factory=list)
    test_ids: list[int] = field(default_factory=list)
    trace: list[dict] = field(default_factory=list)  # TMCD: one entry per accepted swap

    def report(self) -> dict:
        return {
            "kind": self.kind,
            "divergence": self.divergence,
            "atom_divergence_note": "atom divergence is not computed; TMCD instead requires "
                                    "every test atom to occur in train (see missing_atom_fraction)",
            "missing_atom_fraction": self.missing_atom_fraction,
            "sizes": {"train": len(self.train), "test": len(self.test)},
            "iterations": self.iterations,
            "seed": self.seed,
        }


def missing_atom_fraction(train_targets, test_targets, extractor: Extractor) -> float:
    test_targets = list(test_targets)
    if not test_targets:
        return 0.0
    seen = set()
    for t in train_targets:
        seen.update(extract_atoms(t, extractor))
    missing = sum(1 for t in test_targets if any(a not in seen for a in extract_atoms(t, extractor)))
    return missing / len(test_targets)


def _result(dataset: Dataset, train_ids, test_ids, kind, extractor, seed=None, **kw) -> SplitResult:
    train_ids, test_ids = sorted(train_ids), sorted(test_ids)
    train = dataset.subset(train_ids)
    test = dataset.subset(test_ids)
    div = maf = None
    if extractor is not None and train_ids and test_ids:
        div = compound_divergence([e.target for e in train], [e.target for e in test], extractor)
        maf = missing_atom_fraction([e.target for e in train], [e.target for e in test], extractor)
    return SplitResult(train, test, div, maf, kind, seed, train_ids=train_ids, test_ids=test_ids, **kw)


def _sizes(n: int, train_size: int | None, test_size: int | None) -> tuple[int, int]:
    if train_size is None and test_size is None:
        train_size = n // 2
    if train_size is None:
        train_size = n - test_size
    if test_size is None:
        test_size = n - train_size
    if train_size < 0 or test_size < 0 or train_size + test_size > n:
        raise SplitError(f"sizes {train_size}+{test_size} exceed dataset of {n} examples")
    return train_size, test_size


def random_split(dataset: Dataset, train_size: int | None = None, test_size: int | None = None,
                 seed: int = 0, extractor: Extractor | None = None) -> SplitResult:
    """Shuffle, then take the first ``train_size`` and next ``test_size`` examples.

    Examples beyond ``train_size + test_size`` are left out of both halves.
    """
    n_train, n_test = _sizes(len(dataset), train_size, test_size)
    ids = list(range(len(dataset)))
    random.Random(seed).shuffle(ids)
    return _result(dataset, ids[:n_train], ids[n_train:n_train + n_test], "random", extractor, seed)


def length_split(dataset: Dataset, measure: str = "target", test_fraction: float = 0.5,
                 extractor: Extractor | None = None) -> SplitResult:
    """The longest ``test_fraction`` of examples form the test set.

    A group of equal-length examples straddling the boundary goes wholly to
    train, so every train example is at most as long as every test example.
    """
    if measure not in LENGTH_MEASURES:
        raise SplitError(f"measure must be one of {LENGTH_MEASURES}")
    if not 0 <= test_fraction <= 1:
        raise SplitError("test_fraction must be in [0, 1]")
    if not len(dataset):
        raise SplitError("empty dataset")
    lengths = [len(e.source if measure == "source" else e.target) for e in dataset]
    order = sorted(range(len(dataset)), key=lambda k: (lengths[k], k))
    n_test = int(round(test_fraction * len(dataset)))
    b = len(order) - n_test
    if n_test == 0:
        cutoff = math.inf
    elif b > 0 and lengths[order[b - 1]] == lengths[order[b]]:
        cutoff = lengths[order[b]] + 1  # tie group straddles the boundary: keep it in train
    else:
        cutoff = lengths[order[b]]
    train_ids = [k for k in range(len(dataset)) if lengths[k] < cutoff]
    test_ids = [k for k in range(len(dataset)) if lengths[k] >= cutoff]
    if n_test and not test_ids:
        log.warning("length split: all examples tie at the boundary, test set is empty")
    return _result(dataset, train_ids, test_ids, "length", extractor)


_VALUE = re.compile(r"^(m\d+|-?\d+(\.\d+)?|'.*'|\".*\")$")


def default_anonymizer(target: Sequence[str]) -> tuple[str, ...]:
    """Replace placeholders (``m0``), numbers and quoted values with ``_``."""
    return tuple("_" if _VALUE.match(t) else t for t in target)


def template_split(dataset: Dataset, anonymizer: Callable | None = None,
                   train_size: int | None = None, seed: int = 0,
                   extractor: Extractor | None = None) -> SplitResult:
    """Assign whole templates to one half, in a seeded random order.

    Templates go to train until it holds at least ``train_size`` examples
    (default: half the dataset); the remaining templates go to test.
    """
    anonymizer = anonymizer or default_anonymizer
    groups: dict[tuple, list[int]] = {}
    for k, e in enumerate(dataset):
        groups.setdefault(tuple(anonymizer(e.target)), []).append(k)
    templates = list(groups)
    random.Random(seed).shuffle(templates)
    target = len(dataset) // 2 if train_size is None else train_size
    train_ids, test_ids = [], []
    for t in templates:
        (train_ids if len(train_ids) < target else test_ids).extend(groups[t])
    return _result(dataset, train_ids, test_ids, "template", extractor, seed)


# TMCD -------------------------------------------------------------------------

class _SwapState:
    """Compound counts of both halves with an incremental Chernoff sum.

    With train counts c, test counts d and totals N, M, the coefficient is
    sum_k c_k^a d_k^(1-a) / (N^a M^(1-a)); only keys touched by a swap change
    the numerator.
    """

    def __init__(self, compounds: list[Counter], atoms: list[Counter], train: set, test: set,
                 alpha: float = ALPHA):
        self.compounds, self.atoms, self.alpha = compounds, atoms, alpha
        self.train, self.test = train, test
        self.c: Counter = Counter()
        self.d: Counter = Counter()
        self.train_atoms: Counter = Counter()
        for k in train:
            self.c.update(compounds[k])
            self.train_atoms.update(atoms[k])
        for k in test:
            self.d.update(compounds[k])
        self.recompute()

    def _term(self, c: float, d: float) -> float:
        return c ** self.alpha * d ** (1 - self.alpha) if c > 0 and d > 0 else 0.0

    def recompute(self):
        self.n = sum(self.c.values())
        self.m = sum(self.d.values())
        self.numerator = math.fsum(self._term(self.c[k], self.d[k]) for k in self.c if k in self.d)

    def _coefficient(self, numerator: float, n: float, m: float) -> float:
        if n <= 0 or m <= 0:
            return 0.0
        return numerator / (n ** self.alpha * m ** (1 - self.alpha))

    @property
    def divergence(self) -> float:
        return 1.0 - self._coefficient(self.numerator, self.n, self.m)

    def swap_divergence(self, a: int, b: int) -> float:
        """Divergence after moving ``a`` (train) to test and ``b`` (test) to train."""
        ca, cb = self.compounds[a], self.compounds[b]
        num = self.numerator
        for k in set(ca) | set(cb):
            delta = cb.get(k, 0) - ca.get(k, 0)
            c, d = self.c.get(k, 0), self.d.get(k, 0)
            num += self._term(c + delta, d - delta) - self._term(c, d)
        size_a, size_b = sum(ca.values()), sum(cb.values())
        return 1.0 - self._coefficient(num, self.n - size_a + size_b, self.m - size_b + size_a)

    def swap_keeps_atoms(self, a: int, b: int) -> bool:
        gained = self.atoms[b]
        return all(self.train_atoms[x] - n + gained.get(x, 0) > 0 for x, n in self.atoms[a].items())

    def apply(self, a: int, b: int):
        self.train.remove(a)
        self.test.add(a)
        self.test.remove(b)
        self.train.add(b)
        self.c.subtract(self.compounds[a])
        self.c.update(self.compounds[b])
        self.d.subtract(self.compounds[b])
        self.d.update(self.compounds[a])
        self.train_atoms.subtract(self.atoms[a])
        self.train_atoms.update(self.atoms[b])
        self.c = +self.c
        self.d = +self.d
        self.train_atoms = +self.train_atoms
        self.recompute()

    def missing_atoms(self) -> list[str]:
        out = {}
        for k in sorted(self.test):
            for x in self.atoms[k]:
                if self.train_atoms[x] <= 0:
                    out[x] = None
        return list(out)


def tmcd_split(dataset: Dataset, extractor: Extractor | None = None, train_size: int | None = None,
               test_size: int | None = None, seed: int = 0, max_iterations: int = 1000,
               candidates: int = 1000, patience: int = 3) -> SplitResult:
    """Maximize compound divergence subject to every test atom occurring in train.

    1. Random split of the requested sizes.
    2. While some test example has an atom missing from train, swap it with
       a train example whose atoms all stay covered.
    3. Repeatedly sample ``candidates`` (train, test) pairs and apply the
       one that raises compound divergence most while keeping the atom
       constraint.  Stops after ``patience`` consecutive samples without an
       improving pair, or after ``max_iterations`` accepted swaps.
    """
    extractor = extractor or Extractor()
    n_train, n_test = _sizes(len(dataset), train_size, test_size)
    if not n_train or not n_test:
        raise SplitError("both halves must be non-empty")
    rng = random.Random(seed)
    ids = list(range(len(dataset)))
    rng.shuffle(ids)
    compounds = [extract_compounds(e.target, extractor) for e in dataset]
    atoms = [extract_atoms(e.target, extractor) for e in dataset]
    state = _SwapState(compounds, atoms, set(ids[:n_train]), set(ids[n_train:n_train + n_test]))

    # Phase 2: repair the atom constraint.
    repairs = 0
    while True:
        missing = state.missing_atoms()
        if not missing:
            break
        atom = missing[0]
        b = min(k for k in state.test if atom in atoms[k])
        partners = [a for a in sorted(state.train) if state.swap_keeps_atoms(a, b)
                    and atom not in atoms[a]]
        if not partners:
            raise SplitError(f"cannot satisfy the atom constraint for atom {atom!r}")
        state.apply(rng.choice(partners), b)
        repairs += 1
        if repairs > len(dataset) * 4:
            raise SplitError(f"atom constraint repair did not converge (atom {atom!r})")

    # Phase 3: greedy divergence-increasing swaps.
    trace = [{"iteration": 0, "divergence": state.divergence, "swap": None}]
    iterations = 0
    misses = 0
    while iterations < max_iterations and misses < patience:
        train_list, test_list = sorted(state.train), sorted(state.test)
        current = state.divergence
        best = None
        for _ in range(candidates):
            a, b = rng.choice(train_list), rng.choice(test_list)
            value = state.swap_divergence(a, b)
            if value > current + MIN_GAIN and (best is None or value > best[0]):
                if state.swap_keeps_atoms(a, b):
                    best = (value, a, b)
        if best is None:
            misses += 1
            continue
        misses = 0
        _, a, b = best
        state.apply(a, b)
        iterations += 1
        trace.append({"iteration": iterations, "divergence": state.divergence, "swap": [a, b]})
    log.info("tmcd: %d repairs, %d swaps, divergence %.4f", repairs, iterations, state.divergence)
    return _result(dataset, state.train, state.test, "tmcd", extractor, seed,
                   iterations=iterations, trace=trace)
