"""Labeled-corpus loading, structural cleanup, and seeded splitting.

A corpus comes from a CSV file with a mandatory header row. Loading drops
rows whose text cell is empty or whitespace, skips rows that are too short
to index (counted, not fatal), and parses labels case-insensitively.
Deduplication and the train/test split are separate, pure steps so the
cleanup report and the split determinism can be tested on their own.
"""

from __future__ import annotations

import csv
import random
import re
import time
from dataclasses import dataclass, field

from .errors import DegenerateSplit, EmptyCorpus, MissingColumn, UnknownLabel

SUICIDE = "suicide"
NON_SUICIDE = "non-suicide"

LABEL_TO_INT = {SUICIDE: 1, NON_SUICIDE: 0}
INT_TO_LABEL = {1: SUICIDE, 0: NON_SUICIDE}

_WS_RE = re.compile(r"\s+")


@dataclass(frozen=True)
class Document:
    """One post: a stable id, the raw text, and an optional gold label."""

    id: str
    text: str
    label: str | None = None


@dataclass
class LoadReport:
    rows_read: int = 0
    dropped_empty: int = 0
    dropped_malformed: int = 0


@dataclass
class CleanupReport:
    duplicates_removed: int = 0
    empty_removed: int = 0

    def total_removed(self) -> int:
        return self.duplicates_removed + self.empty_removed


@dataclass
class Corpus:
    documents: list[Document]
    source: str = "<memory>"
    loaded_at: float = field(default_factory=time.time)
    load_report: LoadReport | None = None

    def __len__(self) -> int:
        return len(self.documents)

    def label_counts(self) -> dict[str, int]:
        counts: dict[str, int] = {}
        for doc in self.documents:
            if doc.label is not None:
                counts[doc.label] = counts.get(doc.label, 0) + 1
        return counts


@dataclass(frozen=True)
class SplitSpec:
    train_fraction: float = 0.8
    seed: int = 13

    def __post_init__(self) -> None:
        if not 0.0 < self.train_fraction < 1.0:
            raise ValueError(f"train_fraction must be in (0,1), got {self.train_fraction}")


def _parse_label(raw: str, row_num: int) -> str:
    key = raw.strip().lower()
    if key == SUICIDE:
        return SUICIDE
    if key == NON_SUICIDE:
        return NON_SUICIDE
    raise UnknownLabel(f"row {row_num}: unknown label {raw!r} (expected 'suicide' or 'non-suicide')")


def load_csv(path, text_column: str, label_column: str | None = None) -> Corpus:
    """Load one Document per usable CSV row.

    Rows with an empty/whitespace text cell are dropped and counted; rows
    too short to contain the named columns are skipped as malformed. Any
    label string other than the two known classes is a hard error.
    """
    with open(path, "r", encoding="utf-8", errors="replace", newline="") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise EmptyCorpus(f"{path}: file has no header row") from None

        try:
            text_idx = header.index(text_column)
        except ValueError:
            raise MissingColumn(f"{path}: no column named {text_column!r} in header {header}") from None
        label_idx: int | None = None
        if label_column is not None:
            try:
                label_idx = header.index(label_column)
            except ValueError:
                raise MissingColumn(f"{path}: no column named {label_column!r} in header {header}") from None

        report = LoadReport()
        documents: list[Document] = []
        needed = text_idx if label_idx is None else max(text_idx, label_idx)
        for row_num, row in enumerate(reader, start=1):
            report.rows_read += 1
            if len(row) <= needed:
                report.dropped_malformed += 1
                continue
            text = row[text_idx]
            if not text.strip():
                report.dropped_empty += 1
                continue
            label = _parse_label(row[label_idx], row_num) if label_idx is not None else None
            documents.append(Document(id=f"r{row_num:06d}", text=text, label=label))

    if not documents:
        raise EmptyCorpus(f"{path}: zero usable rows")
    return Corpus(documents=documents, source=str(path), load_report=report)


def save_csv(corpus: Corpus, path, text_column: str = "text", label_column: str = "class") -> None:
    """Inverse of load_csv for fixtures and round-trips (RFC-4180 quoting)."""
    with open(path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow([text_column, label_column])
        for doc in corpus.documents:
            writer.writerow([doc.text, doc.label if doc.label is not None else ""])


def normalized_text_key(text: str) -> str:
    """Duplicate-detection key: case-folded, whitespace-collapsed text."""
    return _WS_RE.sub(" ", text.casefold()).strip()


def dedupe_and_clean(corpus: Corpus) -> tuple[Corpus, CleanupReport]:
    """Remove exact duplicates (normalized text, first occurrence wins) and
    any empty rows that slipped past loading. Idempotent."""
    report = CleanupReport()
    seen: set[str] = set()
    kept: list[Document] = []
    for doc in corpus.documents:
        key = normalized_text_key(doc.text)
        if not key:
            report.empty_removed += 1
            continue
        if key in seen:
            report.duplicates_removed += 1
            continue
        seen.add(key)
        kept.append(doc)
    cleaned = Corpus(documents=kept, source=corpus.source, loaded_at=corpus.loaded_at,
                     load_report=corpus.load_report)
    return cleaned, report


def split(corpus: Corpus, spec: SplitSpec) -> tuple[Corpus, Corpus]:
    """Seeded uniform shuffle, then a size-round(train_fraction * N) prefix.

    Every document lands in exactly one side; the same corpus and seed
    always produce the same split.
    """
    n = len(corpus.documents)
    if n == 0:
        raise EmptyCorpus("cannot split an empty corpus")
    n_train = round(spec.train_fraction * n)
    if n_train <= 0 or n_train >= n:
        raise DegenerateSplit(
            f"fraction {spec.train_fraction} over {n} rows leaves an empty side "
            f"(train={n_train}, test={n - n_train})"
        )
    order = list(range(n))
    random.Random(spec.seed).shuffle(order)
    train_docs = [corpus.documents[i] for i in order[:n_train]]
    test_docs = [corpus.documents[i] for i in order[n_train:]]
    train = Corpus(documents=train_docs, source=corpus.source, loaded_at=corpus.loaded_at)
    test = Corpus(documents=test_docs, source=corpus.source, loaded_at=corpus.loaded_at)
    return train, test
