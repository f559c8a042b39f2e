"""Datasets of (source, target) token sequences, TSV and SCAN-format I/O."""

from __future__ import annotations

import re
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Iterator, Sequence

FNV_OFFSET = 0xCBF29CE484222325
FNV_PRIME = 0x100000001B3
PLACEHOLDER = re.compile(r"^m\d+$")


class DataError(ValueError):
    """Malformed input; carries the 1-based line number when known."""

    def __init__(self, message: str, line: int | None = None, path=None):
        self.line = line
        self.path = path
        where = ""
        if path is not None:
            where += f"{path}:"
        if line is not None:
            where += f"{line}:"
        super().__init__(f"{where} {message}" if where else message)


@dataclass(frozen=True)
class Example:
    source: tuple[str, ...]
    target: tuple[str, ...]
    id: int = 0

    def __post_init__(self):
        if not self.source or not self.target:
            raise DataError("empty source or target")
        for tok in self.source + self.target:
            if not tok or any(c in tok for c in "\t\n\r "):
                raise DataError(f"bad token {tok!r}")

    @property
    def pair(self) -> tuple[tuple[str, ...], tuple[str, ...]]:
        return self.source, self.target


def fnv1a64(data: bytes) -> int:
    h = FNV_OFFSET
    for b in data:
        h ^= b
        h = (h * FNV_PRIME) & 0xFFFFFFFFFFFFFFFF
    return h


@dataclass
class Dataset:
    examples: list[Example]
    path: str | None = None
    _hash: int | None = field(default=None, repr=False, compare=False)

    def __post_init__(self):
        for k, ex in enumerate(self.examples):
            if ex.id != k:
                self.examples[k] = Example(ex.source, ex.target, k)

    @classmethod
    def from_pairs(cls, pairs: Iterable[tuple[Sequence[str], Sequence[str]]], path=None) -> "Dataset":
        return cls([Example(tuple(x), tuple(y), k) for k, (x, y) in enumerate(pairs)], path)

    def __len__(self):
        return len(self.examples)

    def __iter__(self) -> Iterator[Example]:
        return iter(self.examples)

    def __getitem__(self, k):
        return self.examples[k]

    @property
    def pairs(self) -> list[tuple[tuple[str, ...], tuple[str, ...]]]:
        return [ex.pair for ex in self.examples]

    def subset(self, ids: Iterable[int]) -> "Dataset":
        return Dataset.from_pairs([self.examples[k].pair for k in ids])

    def serialize(self) -> str:
        return "".join(f"{' '.join(ex.source)}\t{' '.join(ex.target)}\n" for ex in self.examples)

    @property
    def hash(self) -> int:
        if self._hash is None:
            self._hash = fnv1a64(self.serialize().encode("utf-8"))
        return self._hash

    @property
    def hash_hex(self) -> str:
        return f"{self.hash:016x}"


def _read_text(path) -> str:
    try:
        raw = Path(path).read_bytes()
    except OSError as e:
        raise DataError(f"cannot read: {e.strerror}", path=path) from e
    try:
        return raw.decode("utf-8")
    except UnicodeDecodeError as e:
        line = raw[:e.start].count(b"\n") + 1
        raise DataError("invalid UTF-8", line, path) from e


def parse_tsv(text: str, path=None) -> Dataset:
    pairs = []
    for lineno, line in enumerate(text.split("\n"), 1):
        if line.endswith("\r"):
            line = line[:-1]
        if not line:
            continue
        fields = line.split("\t")
        if len(fields) != 2:
            raise DataError(f"expected 2 tab-separated fields, got {len(fields)}", lineno, path)
        src, tgt = fields[0].split(), fields[1].split()
        if not src or not tgt:
            raise DataError("empty source or target", lineno, path)
        pairs.append((src, tgt))
    return Dataset.from_pairs(pairs, path=str(path) if path else None)


def load_tsv(path) -> Dataset:
    """One ``source<TAB>target`` example per line; blank lines are skipped."""
    return parse_tsv(_read_text(path), path)


def store_tsv(dataset: Dataset, path) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as f:
        f.write(dataset.serialize())


_SCAN_LINE = re.compile(r"^IN:\s+(.*?)\s+OUT:\s+(.*)$")


def scan_loader(*paths) -> Dataset:
    """Load SCAN ``IN: ... OUT: ...`` files (or TSV files) into one dataset."""
    pairs = []
    for path in paths:
        text = _read_text(path)
        lines = [l for l in text.splitlines() if l.strip()]
        if lines and "\t" in lines[0] and not lines[0].startswith("IN:"):
            pairs.extend(parse_tsv(text, path).pairs)
            continue
        for lineno, line in enumerate(text.splitlines(), 1):
            if not line.strip():
                continue
            m = _SCAN_LINE.match(line.strip())
            if not m:
                raise DataError("expected 'IN: ... OUT: ...'", lineno, path)
            src, tgt = m.group(1).split(), m.group(2).split()
            if not src or not tgt:
                raise DataError("empty command or actions", lineno, path)
            pairs.append((src, tgt))
    if not pairs:
        raise DataError("empty dataset", path=paths[0] if paths else None)
    return Dataset.from_pairs(pairs)


def store_scan(dataset: Dataset, path) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as f:
        for ex in dataset:
            f.write(f"IN: {' '.join(ex.source)} OUT: {' '.join(ex.target)}\n")


@dataclass
class ValidationReport:
    total: int
    failures: list[tuple[int, str]]  # (example id, message)
    placeholders: int = 0

    @property
    def ok(self) -> bool:
        return not self.failures

    def to_json(self) -> dict:
        return {"total": self.total, "placeholders": self.placeholders,
                "failures": [{"id": i, "error": m} for i, m in self.failures]}


def validate_funql(dataset: Dataset) -> ValidationReport:
    """Check every target parses as FunQL; count anonymized ``m<digits>`` leaves."""
    from nqg.splits.funql import FunqlError, parse_funql

    failures = []
    placeholders = 0
    for ex in dataset:
        try:
            parse_funql(ex.target)
        except FunqlError as e:
            failures.append((ex.id, str(e)))
        placeholders += sum(1 for t in ex.target if PLACEHOLDER.match(t))
    return ValidationReport(len(dataset), failures, placeholders)
