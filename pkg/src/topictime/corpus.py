"""Corpus ingestion: tokenization, vocabulary, sparse TF-IDF features, day axis.

A corpus is an immutable collection of timestamped documents loaded from a
newline-delimited record file. Ingestion owns the vocabulary (document
frequencies, dense term indices) and the time axis that maps timestamps to
UTC day columns.
"""

from __future__ import annotations

import datetime as dt
import json
import math
import unicodedata
from collections import Counter
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Iterator

SECONDS_PER_DAY = 86400

# Terms must appear in at least this many documents to enter the vocabulary;
# hapax terms bloat it and cannot help row labels.
DEFAULT_MIN_DOC_FREQ = 2


class IngestError(ValueError):
    """A corpus file could not be parsed into a valid document collection."""


@dataclass
class Document:
    """One timestamped text item.

    tokens are derived deterministically from text at ingestion time;
    timestamp is integer seconds since the Unix epoch.
    """

    id: str
    timestamp: int
    text: str
    tokens: tuple[str, ...]
    source: str | None = None

    def day(self) -> int:
        return self.timestamp // SECONDS_PER_DAY


@dataclass
class TimeAxis:
    """Day-bucket axis: column j covers UTC day epoch_day0 + j."""

    epoch_day0: int
    num_days: int


@dataclass
class Vocabulary:
    """Term -> (dense index, document frequency) over one corpus."""

    index: dict[str, int]
    doc_freq: dict[str, int]

    def __len__(self) -> int:
        return len(self.index)

    def __contains__(self, term: str) -> bool:
        return term in self.index

    def terms(self) -> list[str]:
        """Terms ordered by their dense index."""
        return sorted(self.index, key=self.index.__getitem__)


# Sparse TF-IDF vector: (term index, weight) pairs with strictly increasing
# indices; exact-zero weights are omitted.
SparseVector = list[tuple[int, float]]


@dataclass
class Corpus:
    """Immutable after ingestion; safe for concurrent readers."""

    documents: tuple[Document, ...]
    vocabulary: Vocabulary
    axis: TimeAxis
    _by_id: dict[str, Document] = field(repr=False)

    def __len__(self) -> int:
        return len(self.documents)

    def __iter__(self) -> Iterator[Document]:
        return iter(self.documents)

    def __contains__(self, doc_id: str) -> bool:
        return doc_id in self._by_id

    def document(self, doc_id: str) -> Document:
        return self._by_id[doc_id]

    def ids(self) -> list[str]:
        return [d.id for d in self.documents]


def tokenize(text: str) -> list[str]:
    """Lowercase, treat unicode punctuation as separators, split on whitespace.

    Deterministic and idempotent on its own output; empty text gives an
    empty list.
    """
    lowered = text.lower()
    cleaned = "".join(
        " " if unicodedata.category(ch).startswith("P") else ch for ch in lowered
    )
    return cleaned.split()


def build_vocabulary(
    documents: Iterable[Document], min_doc_freq: int = DEFAULT_MIN_DOC_FREQ
) -> Vocabulary:
    """Collect document frequencies and assign dense indices by sorted term."""
    doc_freq: Counter[str] = Counter()
    for doc in documents:
        doc_freq.update(set(doc.tokens))
    kept = sorted(t for t, df in doc_freq.items() if df >= min_doc_freq)
    return Vocabulary(
        index={t: i for i, t in enumerate(kept)},
        doc_freq={t: doc_freq[t] for t in kept},
    )


def featurize_sparse(doc: Document, vocab: Vocabulary, n_docs: int) -> SparseVector:
    """TF-IDF weights: tf(t, doc) * ln((1 + N) / (1 + df(t))).

    Out-of-vocabulary tokens are ignored; terms present in every document
    get weight 0 and are omitted from the vector.
    """
    counts = Counter(t for t in doc.tokens if t in vocab.index)
    entries: SparseVector = []
    for term, tf in counts.items():
        weight = tf * math.log((1 + n_docs) / (1 + vocab.doc_freq[term]))
        if weight > 0.0:
            entries.append((vocab.index[term], weight))
    entries.sort()
    return entries


def day_index(timestamp: int, axis: TimeAxis) -> int:
    """Column of a timestamp on the axis, using UTC day boundaries."""
    day = timestamp // SECONDS_PER_DAY - axis.epoch_day0
    if not 0 <= day < axis.num_days:
        raise ValueError(
            f"timestamp {timestamp} falls on day offset {day}, "
            f"outside the corpus range [0, {axis.num_days})"
        )
    return int(day)


def _parse_timestamp(value: object) -> int:
    """Accept integer epoch seconds or an RFC-3339 string (converted to UTC)."""
    if isinstance(value, bool):
        raise ValueError("timestamp must be epoch seconds or an RFC-3339 string")
    if isinstance(value, int):
        return value
    if isinstance(value, float):
        if not value.is_integer():
            raise ValueError("timestamp must be whole epoch seconds")
        return int(value)
    if isinstance(value, str):
        text = value.strip()
        try:
            return int(text)
        except ValueError:
            pass
        iso = text[:-1] + "+00:00" if text.endswith(("Z", "z")) else text
        try:
            parsed = dt.datetime.fromisoformat(iso)
        except ValueError as exc:
            raise ValueError(f"unparseable timestamp {value!r}") from exc
        if parsed.tzinfo is None:
            parsed = parsed.replace(tzinfo=dt.timezone.utc)
        return math.floor(parsed.timestamp())
    raise ValueError("timestamp must be epoch seconds or an RFC-3339 string")


def _parse_record(line: str, line_no: int) -> Document:
    try:
        raw = json.loads(line)
    except json.JSONDecodeError as exc:
        raise IngestError(f"line {line_no}: invalid JSON record ({exc.msg})") from exc
    if not isinstance(raw, dict):
        raise IngestError(f"line {line_no}: record must be a JSON object")

    doc_id = raw.get("id")
    if not isinstance(doc_id, str) or not doc_id:
        raise IngestError(f"line {line_no}: missing or invalid 'id'")
    if "timestamp" not in raw:
        raise IngestError(f"line {line_no}: missing 'timestamp'")
    try:
        timestamp = _parse_timestamp(raw["timestamp"])
    except ValueError as exc:
        raise IngestError(f"line {line_no}: {exc}") from exc
    text = raw.get("text")
    if not isinstance(text, str):
        raise IngestError(f"line {line_no}: missing or invalid 'text'")
    source = raw.get("source")
    if source is not None and not isinstance(source, str):
        raise IngestError(f"line {line_no}: 'source' must be a string")

    return Document(
        id=doc_id,
        timestamp=timestamp,
        text=text,
        tokens=tuple(tokenize(text)),
        source=source,
    )


def ingest_lines(
    lines: Iterable[str], min_doc_freq: int = DEFAULT_MIN_DOC_FREQ
) -> Corpus:
    """Parse newline-delimited records into a corpus.

    Documents are sorted by (timestamp, id); duplicate ids and malformed
    records are rejected with the offending line number or id named.
    """
    docs: list[Document] = []
    seen: set[str] = set()
    for line_no, line in enumerate(lines, start=1):
        if not line.strip():
            continue
        doc = _parse_record(line, line_no)
        if doc.id in seen:
            raise IngestError(f"duplicate document id {doc.id!r} (line {line_no})")
        seen.add(doc.id)
        docs.append(doc)
    if not docs:
        raise IngestError("no documents found in input")

    docs.sort(key=lambda d: (d.timestamp, d.id))
    days = [d.day() for d in docs]
    axis = TimeAxis(epoch_day0=min(days), num_days=max(days) - min(days) + 1)
    vocab = build_vocabulary(docs, min_doc_freq=min_doc_freq)
    return Corpus(
        documents=tuple(docs),
        vocabulary=vocab,
        axis=axis,
        _by_id={d.id: d for d in docs},
    )


def ingest_corpus(path: str | Path, min_doc_freq: int = DEFAULT_MIN_DOC_FREQ) -> Corpus:
    """Load a corpus from a newline-delimited record file."""
    with open(path, "r", encoding="utf-8") as handle:
        return ingest_lines(handle, min_doc_freq=min_doc_freq)
