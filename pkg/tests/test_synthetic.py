"""Synthetic corpus generation and simulated annotator tests."""

import numpy as np
import pytest

from topictime.synthetic import SimAnnotator, SyntheticSpec, generate_corpus, generate_records
from topictime.training import LABEL_DIFFERENT, LABEL_SAME


def small_spec(**overrides):
    defaults = dict(
        num_events=2,
        docs_per_event=(5, 5),
        num_days=10,
        event_duration=(2, 4),
        vocab_size=60,
        topic_words_per_event=6,
        background_word_rate=0.4,
        seed=1,
    )
    defaults.update(overrides)
    return SyntheticSpec(**defaults)


def test_counts_match_spec():
    corpus, gold = generate_corpus(small_spec())
    assert len(corpus) == 10
    assert len(set(gold.values())) == 2
    assert set(gold) == set(corpus.ids())


def test_cross_event_docs_share_only_background_words():
    spec = small_spec()
    corpus, gold = generate_corpus(spec)
    topical_span = spec.num_events * spec.topic_words_per_event
    background = {f"w{idx:04d}" for idx in range(topical_span, spec.vocab_size)}
    by_event = {}
    for doc in corpus:
        by_event.setdefault(gold[doc.id], set()).update(doc.tokens)
    shared = (by_event[0] & by_event[1]) - background
    assert shared == set()


def test_same_seed_reproduces_lines():
    lines_a, gold_a = generate_records(small_spec())
    lines_b, gold_b = generate_records(small_spec())
    assert lines_a == lines_b
    assert gold_a == gold_b


def test_different_seed_changes_corpus():
    lines_a, _ = generate_records(small_spec(seed=1))
    lines_b, _ = generate_records(small_spec(seed=2))
    assert lines_a != lines_b


def test_vocab_too_small_rejected():
    with pytest.raises(ValueError, match="vocab_size"):
        generate_records(small_spec(vocab_size=12, topic_words_per_event=6))


def test_every_document_window_fits_axis():
    spec = small_spec(num_days=7, event_duration=(3, 7))
    corpus, _ = generate_corpus(spec)
    assert corpus.axis.num_days <= spec.num_days


def test_annotator_noise_free_oracle():
    gold = {"a": 0, "b": 0, "c": 1}
    annotator = SimAnnotator(gold=gold, noise_rate=0.0)
    assert annotator.answer("a", "b", seed=0) == LABEL_SAME
    assert annotator.answer("a", "c", seed=0) == LABEL_DIFFERENT


def test_annotator_unknown_doc():
    annotator = SimAnnotator(gold={"a": 0, "b": 1})
    with pytest.raises(ValueError):
        annotator.answer("a", "zzz", seed=0)


def test_annotator_noise_rate_bounds():
    with pytest.raises(ValueError):
        SimAnnotator(gold={}, noise_rate=0.5)


def test_annotator_flip_fraction_concentrates():
    # binomial concentration: 10_000 seeded answers at noise 0.1
    gold = {"a": 0, "b": 0}
    annotator = SimAnnotator(gold=gold, noise_rate=0.1)
    flips = sum(
        annotator.answer("a", "b", seed=i) == LABEL_DIFFERENT for i in range(10_000)
    )
    assert abs(flips / 10_000 - 0.1) <= 0.01
