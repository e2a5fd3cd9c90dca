"""Synthetic corpora with gold event labels, plus a simulated annotator.

Each event gets a contiguous date window and a topical word set disjoint from
every other event's; documents mix topical words with shared background
words. Generation is deterministic per seed, which makes end-to-end loop runs
reproducible bit for bit.
"""

from __future__ import annotations

import json
from dataclasses import dataclass

import numpy as np

from .corpus import SECONDS_PER_DAY, Corpus, ingest_lines
from .training import LABEL_DIFFERENT, LABEL_SAME


@dataclass
class SyntheticSpec:
    num_events: int = 10
    docs_per_event: tuple[int, int] = (15, 30)
    num_days: int = 60
    event_duration: tuple[int, int] = (3, 10)
    vocab_size: int = 400
    topic_words_per_event: int = 8
    background_word_rate: float = 0.5
    tokens_per_doc: tuple[int, int] = (20, 40)
    seed: int = 0

    def validate(self) -> None:
        if self.num_events < 1:
            raise ValueError("num_events must be positive")
        if self.docs_per_event[0] < 1 or self.docs_per_event[0] > self.docs_per_event[1]:
            raise ValueError("docs_per_event range is invalid")
        if self.num_days < 1:
            raise ValueError("num_days must be positive")
        lo, hi = self.event_duration
        if lo < 1 or lo > hi or hi > self.num_days:
            raise ValueError("event_duration range is invalid")
        if not 0.0 <= self.background_word_rate < 1.0:
            raise ValueError("background_word_rate must lie in [0, 1)")
        needed = self.num_events * self.topic_words_per_event
        if self.vocab_size <= needed:
            raise ValueError(
                f"vocab_size {self.vocab_size} cannot hold {self.num_events} disjoint "
                f"topical sets of {self.topic_words_per_event} words plus background"
            )


def generate_records(spec: SyntheticSpec) -> tuple[list[str], dict[str, int]]:
    """Newline-delimited corpus records and the gold doc -> event assignment."""
    spec.validate()
    rng = np.random.default_rng(spec.seed)

    words = [f"w{idx:04d}" for idx in range(spec.vocab_size)]
    per_event = spec.topic_words_per_event
    topical = [
        words[e * per_event : (e + 1) * per_event] for e in range(spec.num_events)
    ]
    background = words[spec.num_events * per_event :]

    lines: list[str] = []
    gold: dict[str, int] = {}
    counter = 0
    for event in range(spec.num_events):
        duration = int(rng.integers(spec.event_duration[0], spec.event_duration[1] + 1))
        start = int(rng.integers(0, spec.num_days - duration + 1))
        num_docs = int(rng.integers(spec.docs_per_event[0], spec.docs_per_event[1] + 1))
        for _ in range(num_docs):
            doc_id = f"doc-{counter:05d}"
            counter += 1
            day = start + int(rng.integers(duration))
            timestamp = day * SECONDS_PER_DAY + int(rng.integers(SECONDS_PER_DAY))
            length = int(rng.integers(spec.tokens_per_doc[0], spec.tokens_per_doc[1] + 1))
            tokens = []
            for _ in range(length):
                if background and rng.random() < spec.background_word_rate:
                    tokens.append(background[int(rng.integers(len(background)))])
                else:
                    tokens.append(topical[event][int(rng.integers(per_event))])
            if not any(tok in topical[event] for tok in tokens):
                tokens[0] = topical[event][int(rng.integers(per_event))]
            lines.append(
                json.dumps(
                    {
                        "id": doc_id,
                        "timestamp": timestamp,
                        "text": " ".join(tokens),
                        "source": f"event-{event}",
                    },
                    sort_keys=True,
                )
            )
            gold[doc_id] = event
    return lines, gold


def generate_corpus(spec: SyntheticSpec) -> tuple[Corpus, dict[str, int]]:
    lines, gold = generate_records(spec)
    return ingest_lines(lines), gold


def generate_background_records(
    num_docs: int,
    num_days: int,
    vocab_size: int = 300,
    tokens_per_doc: tuple[int, int] = (20, 40),
    seed: int = 0,
) -> tuple[list[str], dict[str, int]]:
    """Topically diffuse documents, one singleton gold event per document.

    Useful as the backdrop for burst-detection scenarios: nothing here forms
    a cluster, so any structure in a heatmap built over it comes from what
    was injected on top.
    """
    rng = np.random.default_rng(seed)
    words = [f"bg{idx:04d}" for idx in range(vocab_size)]
    lines = []
    gold = {}
    for i in range(num_docs):
        doc_id = f"noise-{i:05d}"
        day = int(rng.integers(num_days))
        timestamp = day * SECONDS_PER_DAY + int(rng.integers(SECONDS_PER_DAY))
        length = int(rng.integers(tokens_per_doc[0], tokens_per_doc[1] + 1))
        tokens = [words[int(rng.integers(vocab_size))] for _ in range(length)]
        lines.append(
            json.dumps(
                {"id": doc_id, "timestamp": timestamp, "text": " ".join(tokens),
                 "source": "background"},
                sort_keys=True,
            )
        )
        gold[doc_id] = i
    return lines, gold


@dataclass
class BurstSpec:
    """One extra event concentrated in a few consecutive days with its own words."""

    start_day: int
    duration: int = 3
    num_docs: int = 20
    num_words: int = 8
    background_rate: float = 0.5
    tokens_per_doc: tuple[int, int] = (20, 40)
    seed: int = 0


def inject_burst(
    lines: list[str],
    gold: dict[str, int],
    spec: BurstSpec,
    background_words: list[str] | None = None,
) -> tuple[list[str], dict[str, int], list[str]]:
    """Append a burst event to existing records; returns the new burst doc ids.

    Burst topical words (burst00, burst01, ...) never occur in the base
    corpus; optional background words are shared with it.
    """
    rng = np.random.default_rng(spec.seed)
    words = [f"burst{idx:02d}" for idx in range(spec.num_words)]
    background = background_words or []
    event_id = max(gold.values(), default=-1) + 1

    out_lines = list(lines)
    out_gold = dict(gold)
    burst_ids = []
    for i in range(spec.num_docs):
        doc_id = f"burst-{i:04d}"
        day = spec.start_day + int(rng.integers(spec.duration))
        timestamp = day * SECONDS_PER_DAY + int(rng.integers(SECONDS_PER_DAY))
        length = int(rng.integers(spec.tokens_per_doc[0], spec.tokens_per_doc[1] + 1))
        tokens = []
        for _ in range(length):
            if background and rng.random() < spec.background_rate:
                tokens.append(background[int(rng.integers(len(background)))])
            else:
                tokens.append(words[int(rng.integers(spec.num_words))])
        if not any(tok in words for tok in tokens):
            tokens[0] = words[int(rng.integers(spec.num_words))]
        out_lines.append(
            json.dumps(
                {
                    "id": doc_id,
                    "timestamp": timestamp,
                    "text": " ".join(tokens),
                    "source": "burst",
                },
                sort_keys=True,
            )
        )
        out_gold[doc_id] = event_id
        burst_ids.append(doc_id)
    return out_lines, out_gold, burst_ids


def background_word_pool(spec: SyntheticSpec) -> list[str]:
    """The background (non-topical) words a spec's corpus draws from."""
    start = spec.num_events * spec.topic_words_per_event
    return [f"w{idx:04d}" for idx in range(start, spec.vocab_size)]


@dataclass
class SimAnnotator:
    """Answers pair questions from gold labels, flipping with noise_rate."""

    gold: dict[str, int]
    noise_rate: float = 0.0
    name: str = "sim"

    def __post_init__(self) -> None:
        if not 0.0 <= self.noise_rate < 0.5:
            raise ValueError("noise_rate must lie in [0, 0.5)")

    def answer(self, doc_a: str, doc_b: str, seed: int) -> str:
        for doc_id in (doc_a, doc_b):
            if doc_id not in self.gold:
                raise ValueError(f"unknown document id {doc_id!r}")
        truth = LABEL_SAME if self.gold[doc_a] == self.gold[doc_b] else LABEL_DIFFERENT
        if self.noise_rate > 0.0 and np.random.default_rng(seed).random() < self.noise_rate:
            return LABEL_DIFFERENT if truth == LABEL_SAME else LABEL_SAME
        return truth
