"""Hybrid inference (grammar parser first, fallback when it abstains) and evaluation."""

from __future__ import annotations

import json
import shlex
import subprocess
from dataclasses import asdict, dataclass, field
from typing import Callable, Iterable, Mapping, Sequence

from nqg.data import DataError, Dataset, load_tsv

Target = tuple[str, ...]


class FallbackError(RuntimeError):
    pass


class FallbackPredictor:
    """Source -> target predictions used when the grammar parser abstains.

    Kinds: ``file`` (TSV of source and prediction), ``command`` (an external
    program reading one source per line on stdin and writing one prediction
    per line), ``echo`` (returns the source) and ``mapping`` (in-memory).
    """

    def __init__(self, kind: str, mapping: Mapping[Target, Target] | None = None,
                 command: str | None = None, fn: Callable[[Target], Target] | None = None):
        self.kind = kind
        self.mapping = dict(mapping or {})
        self.command = command
        self.fn = fn

    @classmethod
    def echo(cls) -> "FallbackPredictor":
        return cls("echo")

    @classmethod
    def from_mapping(cls, mapping: Mapping) -> "FallbackPredictor":
        return cls("mapping", {tuple(k): tuple(v) for k, v in mapping.items()})

    @classmethod
    def from_function(cls, fn: Callable[[Target], Sequence[str]]) -> "FallbackPredictor":
        return cls("function", fn=lambda s: tuple(fn(s)))

    @classmethod
    def from_file(cls, path, required: Iterable[Sequence[str]] = ()) -> "FallbackPredictor":
        """Load a predictions TSV; every source in ``required`` must be covered."""
        mapping = {ex.source: ex.target for ex in load_tsv(path)}
        for src in required:
            if tuple(src) not in mapping:
                raise DataError(f"fallback predictions do not cover source: {' '.join(src)}",
                                path=path)
        return cls("file", mapping)

    @classmethod
    def from_command(cls, command: str) -> "FallbackPredictor":
        return cls("command", command=command)

    def prepare(self, sources: Iterable[Sequence[str]]) -> None:
        """Run an external command once over every source that may need it."""
        if self.kind != "command":
            return
        todo = list(dict.fromkeys(tuple(s) for s in sources if tuple(s) not in self.mapping))
        if not todo:
            return
        text = "".join(" ".join(s) + "\n" for s in todo)
        try:
            proc = subprocess.run(shlex.split(self.command), input=text, capture_output=True,
                                  text=True, check=True)
        except (OSError, subprocess.CalledProcessError) as e:
            raise FallbackError(f"fallback command failed: {e}") from e
        lines = proc.stdout.splitlines()
        if len(lines) != len(todo):
            raise FallbackError(f"fallback command returned {len(lines)} lines for {len(todo)} sources")
        for src, line in zip(todo, lines):
            self.mapping[src] = tuple(line.split())

    def __call__(self, source: Sequence[str]) -> Target:
        src = tuple(source)
        if self.kind == "echo":
            return src
        if self.kind == "function":
            return self.fn(src)
        if self.kind == "command" and src not in self.mapping:
            self.prepare([src])
        try:
            return self.mapping[src]
        except KeyError:
            raise FallbackError(f"no fallback prediction for source: {' '.join(src)}") from None


def hybrid_predict(nqg: Callable[[Target], Target | None], fallback: Callable[[Target], Target],
                   source: Sequence[str]) -> Target:
    """The grammar parser's output when it produces one, else the fallback's, verbatim."""
    out = nqg(tuple(source))
    if out is not None:
        return tuple(out)
    return tuple(fallback(tuple(source)))


@dataclass
class EvalReport:
    exact_match: float
    coverage: float
    precision: float | None  # None when the parser never produced an output
    counts: dict = field(default_factory=dict)
    grammar_rule_count: int | None = None
    dataset_size: int | None = None
    rule_ratio: float | None = None

    def to_json(self) -> dict:
        return asdict(self)


def _aligned(dataset: Dataset, predictions, name: str) -> list:
    if isinstance(predictions, Mapping):
        ids = {ex.id for ex in dataset}
        if set(predictions) != ids:
            raise ValueError(f"{name} ids do not match the gold dataset")
        return [predictions[ex.id] for ex in dataset]
    predictions = list(predictions)
    if len(predictions) != len(dataset):
        raise ValueError(f"{name}: {len(predictions)} predictions for {len(dataset)} examples")
    return predictions


def evaluate(gold: Dataset, nqg_predictions, hybrid_predictions, grammar=None,
             train_size: int | None = None) -> tuple[EvalReport, list[dict]]:
    """Exact match of the hybrid output, plus coverage and precision of the parser.

    Predictions are aligned with ``gold`` by position (lists) or example id
    (mappings); ``None`` in ``nqg_predictions`` marks an abstention.
    """
    nqg = _aligned(gold, nqg_predictions, "nqg predictions")
    hybrid = _aligned(gold, hybrid_predictions, "hybrid predictions")
    records = []
    n_out = n_out_correct = n_correct = 0
    for ex, p, h in zip(gold, nqg, hybrid):
        p = tuple(p) if p is not None else None
        h = tuple(h)
        nqg_correct = p is not None and p == ex.target
        correct = h == ex.target
        n_out += p is not None
        n_out_correct += nqg_correct
        n_correct += correct
        records.append({
            "id": ex.id,
            "source": " ".join(ex.source),
            "gold": " ".join(ex.target),
            "nqg": None if p is None else " ".join(p),
            "prediction": " ".join(h),
            "nqg_correct": nqg_correct,
            "correct": correct,
        })
    n = len(gold)
    report = EvalReport(
        exact_match=n_correct / n if n else 0.0,
        coverage=n_out / n if n else 0.0,
        precision=n_out_correct / n_out if n_out else None,
        counts={"examples": n, "nqg_outputs": n_out, "nqg_correct": n_out_correct,
                "fallback_used": n - n_out, "correct": n_correct},
    )
    if grammar is not None:
        size = train_size if train_size is not None else n
        examples, rules, ratio = grammar_stats(grammar, size)
        report.grammar_rule_count, report.dataset_size, report.rule_ratio = rules, examples, ratio
    return report, records


def grammar_stats(grammar, dataset) -> tuple[int, int, float | None]:
    """(examples, rules, examples / rules)."""
    examples = dataset if isinstance(dataset, int) else len(dataset)
    rules = len(grammar)
    return examples, rules, (examples / rules if rules else None)


def write_jsonl(records: Iterable[dict], path) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as f:
        for r in records:
            f.write(json.dumps(r, sort_keys=True) + "\n")
