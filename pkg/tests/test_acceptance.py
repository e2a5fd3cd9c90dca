"""Acceptance suite: one test per criterion, one printed verdict line each.

Run with `pytest tests/test_acceptance.py -s` to see the verdict lines.
Thresholds are fixed here and in the criteria themselves; nothing is tuned at
test time.
"""

import json
import time
from collections import Counter

import numpy as np
import pytest

from topictime.clustering import bcubed
from topictime.corpus import ingest_lines
from topictime.heatmap import build_heatmap
from topictime.loop import LoopConfig, run_loop
from topictime.model import RandomProjectionEmbedder, encode_corpus, init_params
from topictime.service import Session, SessionConfig
from topictime.synthetic import (
    BurstSpec,
    SimAnnotator,
    SyntheticSpec,
    generate_background_records,
    generate_records,
    inject_burst,
)
from topictime.training import TrainConfig, build_triplets, mine_batch_hard

from .test_clustering import bcubed_oracle, set_partitions
from .test_training import (
    check_gradients_at_random_points,
    enumerate_triplets_oracle,
    mine_oracle,
    random_batch,
    random_log,
)

DAY = 86400


def report(name: str, ok: bool, detail: str = "") -> None:
    print(f"\nACCEPTANCE {name}: {'PASS' if ok else 'FAIL'} {detail}".rstrip())
    assert ok, f"{name} failed: {detail}"


def test_hitl_improvement():
    """Final BCubed F1 beats the untrained baseline by >= 0.10; purity rises."""
    started = time.monotonic()
    spec = SyntheticSpec(
        num_events=20,
        docs_per_event=(15, 30),
        num_days=60,
        event_duration=(3, 10),
        vocab_size=400,
        topic_words_per_event=8,
        background_word_rate=0.75,
        seed=2024,
    )
    lines, gold = generate_records(spec)
    config = SessionConfig(
        default_m=20,
        tau=0.6,
        train=TrainConfig(margin=0.5, learning_rate=0.1, epochs=20,
                          mining_mode="batch-hard"),
    )
    session = Session(config)
    session.load_corpus_text("\n".join(lines))
    annotator = SimAnnotator(gold=gold, noise_rate=0.0)
    baseline, curve = run_loop(
        session, gold, annotator, LoopConfig(budget=200, retrain_every=25, seed=5)
    )
    elapsed = time.monotonic() - started
    final = curve[-1]
    gain = final.f1 - baseline.f1
    purity_up = final.row_purity > baseline.row_purity
    detail = (
        f"(f1 {baseline.f1:.4f} -> {final.f1:.4f}, gain {gain:+.4f} >= 0.10; "
        f"purity {baseline.row_purity:.4f} -> {final.row_purity:.4f}; {elapsed:.1f}s)"
    )
    report("hitl-improvement", gain >= 0.10 and purity_up and elapsed < 300, detail)


def test_heatmap_normalization():
    """Non-empty day columns sum to 1 within 1e-9; counts partition the corpus."""
    rng = np.random.default_rng(17)
    checked = 0
    attempts = 0
    while checked < 100:
        attempts += 1
        assert attempts < 500, "could not generate enough usable corpora"
        n = int(rng.integers(4, 40))
        words = [f"w{k}" for k in range(10)]
        lines = [
            json.dumps({
                "id": f"d{i:03d}",
                "timestamp": int(rng.integers(0, 20)) * DAY + i,
                "text": " ".join(rng.choice(words, size=int(rng.integers(1, 7)))),
            })
            for i in range(n)
        ]
        corpus = ingest_lines(lines, min_doc_freq=1)
        embedder = RandomProjectionEmbedder(corpus, dim=16, seed=1)
        features = encode_corpus(corpus, embedder)
        params = init_params(num_days=corpus.axis.num_days, dim=16, time_k=4, head_m=8)
        num_rows = int(rng.integers(1, 10))
        try:
            grid = build_heatmap(corpus, features, params, num_rows=num_rows)
        except ValueError:
            continue  # degenerate corpus (all representations identical)
        for day in range(grid.num_days):
            column = [grid.cells[row][day] for row in range(grid.num_rows)]
            total = sum(cell.count for cell in column)
            if total == 0:
                assert all(cell.intensity == 0.0 for cell in column)
            else:
                assert abs(sum(cell.intensity for cell in column) - 1.0) <= 1e-9
        assert sum(cell.count for row in grid.cells for cell in row) == len(corpus)
        checked += 1
    report("heatmap-normalization", checked >= 100, f"({checked} random corpora)")


def test_gradient_correctness():
    """Analytic gradients match central differences (h=1e-5) within 1e-4."""
    checked = check_gradients_at_random_points(num_points=50, seed=20240)
    report("gradient-correctness", checked == 50, f"({checked} non-degenerate points)")


def test_mining_oracle_equivalence():
    """mine_batch_hard and build_triplets match brute-force oracles."""
    rng = np.random.default_rng(31)
    for _ in range(200):
        batch, reprs = random_batch(rng)
        assert mine_batch_hard(batch, reprs) == mine_oracle(batch, reprs)
    rng = np.random.default_rng(37)
    for _ in range(200):
        log = random_log(rng, max_judgments=50)
        assert build_triplets(log) == enumerate_triplets_oracle(log)
    report(
        "mining-oracle-equivalence",
        True,
        "(200 batches <= 32 docs; 200 logs <= 50 judgments)",
    )


def test_bcubed_correctness():
    """Worked examples exact; exhaustive per-item oracle on all partitions <= 6."""
    gold = {"a": 0, "b": 0, "c": 1}
    giant = bcubed({"a": 9, "b": 9, "c": 9}, gold)
    assert giant.precision == pytest.approx(5 / 9, abs=1e-15)
    assert giant.recall == 1.0
    assert giant.f1 == pytest.approx(10 / 14, abs=1e-15)
    singles = bcubed({"a": 1, "b": 2, "c": 3}, gold)
    assert singles.precision == 1.0
    assert singles.recall == pytest.approx(2 / 3, abs=1e-15)
    assert singles.f1 == pytest.approx(0.8, abs=1e-15)

    pairs_checked = 0
    for n in range(1, 7):
        items = [f"x{i}" for i in range(n)]
        partitions = list(set_partitions(items))
        for pred in partitions:
            for gold_part in partitions:
                score = bcubed(pred, gold_part)
                p, r, f1 = bcubed_oracle(pred, gold_part)
                assert score.precision == pytest.approx(p, abs=1e-12)
                assert score.recall == pytest.approx(r, abs=1e-12)
                assert score.f1 == pytest.approx(f1, abs=1e-12)
                pairs_checked += 1
    report("bcubed-correctness", True, f"({pairs_checked} partition pairs)")


def test_burst_visibility():
    """An injected 3-day burst ends up >= 70% in one row at >= 3x median intensity."""
    days = 45
    start = (days - 3) // 2
    lines, gold = generate_background_records(420, days, vocab_size=300, seed=2024)
    burst = BurstSpec(start_day=start, duration=3, num_docs=24, num_words=8,
                      background_rate=0.0, seed=2025)
    lines, gold, burst_ids = inject_burst(lines, gold, burst)

    config = SessionConfig(
        default_m=10,
        tau=0.6,
        train=TrainConfig(margin=0.5, learning_rate=0.1, epochs=10,
                          mining_mode="offline"),
    )
    session = Session(config)
    session.load_corpus_text("\n".join(lines))
    annotator = SimAnnotator(gold=gold, noise_rate=0.0)
    run_loop(
        session, gold, annotator,
        LoopConfig(budget=400, retrain_every=50, questions_per_region=8, seed=5),
    )

    export = session.heatmap_export()
    rows = {
        doc_id: row
        for row in range(export["num_rows"])
        for day in range(export["num_days"])
        for doc_id in export["cells"][row][day]["doc_ids"]
    }
    occupancy = Counter(rows[i] for i in burst_ids)
    top_row, top_count = occupancy.most_common(1)[0]
    concentration = top_count / len(burst_ids)
    mean_intensity = float(np.mean(
        [export["cells"][top_row][d]["intensity"] for d in (start, start + 1, start + 2)]
    ))
    nonzero = [
        cell["intensity"] for row in export["cells"] for cell in row
        if cell["intensity"] > 0
    ]
    median = float(np.median(nonzero))
    ratio = mean_intensity / median
    detail = (
        f"(concentration {concentration:.2f} >= 0.70; burst-row intensity "
        f"{mean_intensity:.3f} vs median {median:.3f}, ratio {ratio:.2f}x >= 3x)"
    )
    report("burst-visibility", concentration >= 0.70 and ratio >= 3.0, detail)


def test_replay_determinism(tmp_path):
    """Replaying the recorded event log reproduces final parameters bit-exactly."""
    spec = SyntheticSpec(
        num_events=5, docs_per_event=(8, 12), num_days=15, event_duration=(2, 6),
        vocab_size=150, topic_words_per_event=6, background_word_rate=0.5, seed=10,
    )
    lines, gold = generate_records(spec)
    text = "\n".join(lines)
    config = SessionConfig(
        default_m=5, tau=0.6, embed_dim=24, time_k=4, head_m=8,
        train=TrainConfig(epochs=3, margin=0.5, learning_rate=0.1),
        data_dir=str(tmp_path / "state"),
    )
    session = Session(config)
    session.load_corpus_text(text)
    annotator = SimAnnotator(gold=gold, noise_rate=0.0)
    run_loop(session, gold, annotator, LoopConfig(budget=60, retrain_every=20, seed=3))
    recorded = (tmp_path / "state" / "events.jsonl").read_text().splitlines()

    fresh_config = SessionConfig(
        default_m=5, tau=0.6, embed_dim=24, time_k=4, head_m=8,
        train=TrainConfig(epochs=3, margin=0.5, learning_rate=0.1),
    )
    fresh = Session(fresh_config)
    fresh.load_corpus_text(text)
    fresh.replay_events(recorded)

    same_version = fresh.model_version == session.model_version
    bit_exact = fresh.model_snapshot_json() == session.model_snapshot_json()
    report(
        "replay-determinism",
        same_version and bit_exact,
        f"(version {fresh.model_version}, snapshot bit-exact: {bit_exact})",
    )
