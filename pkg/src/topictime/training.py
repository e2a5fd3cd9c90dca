"""Pair feedback, triplet construction, mining, and metric training.

Judgments are unordered same-event/different-event labels on document pairs.
Offline training consumes triplets built from shared anchors; batch-hard
training needs provisional event labels, which during feedback collection are
the transitive closures of positively-judged pairs.
"""

from __future__ import annotations

import json
from collections import Counter, defaultdict
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Mapping, Sequence

import numpy as np

from .model import (
    CorpusFeatures,
    EventModelParams,
    ParamGrads,
    backward,
    bump_version,
    forward,
    sgd_step,
)

LABEL_SAME = "same-event"
LABEL_DIFFERENT = "different-event"
VALID_LABELS = (LABEL_SAME, LABEL_DIFFERENT)

Pair = tuple[str, str]


def canonical_pair(doc_a: str, doc_b: str) -> Pair:
    """Unordered pairs are stored in lexicographic id order."""
    return (doc_a, doc_b) if doc_a < doc_b else (doc_b, doc_a)


@dataclass(frozen=True)
class PairJudgment:
    doc_a: str
    doc_b: str
    label: str
    annotator: str
    created_at: int

    @classmethod
    def make(
        cls, doc_a: str, doc_b: str, label: str, annotator: str, created_at: int
    ) -> "PairJudgment":
        """Validate and canonicalize (ids in lexicographic order)."""
        if doc_a == doc_b:
            raise ValueError(f"judgment pairs a document with itself: {doc_a!r}")
        if label not in VALID_LABELS:
            raise ValueError(f"label must be one of {VALID_LABELS}, got {label!r}")
        a, b = canonical_pair(doc_a, doc_b)
        return cls(doc_a=a, doc_b=b, label=label, annotator=annotator,
                   created_at=created_at)

    @property
    def pair(self) -> Pair:
        return (self.doc_a, self.doc_b)

    def to_record(self) -> dict:
        return {
            "doc_a": self.doc_a,
            "doc_b": self.doc_b,
            "label": self.label,
            "annotator": self.annotator,
            "created_at": self.created_at,
        }

    @classmethod
    def from_record(cls, record: Mapping) -> "PairJudgment":
        return cls.make(
            doc_a=record["doc_a"],
            doc_b=record["doc_b"],
            label=record["label"],
            annotator=record["annotator"],
            created_at=int(record["created_at"]),
        )


@dataclass(frozen=True)
class Triplet:
    anchor: str
    positive: str
    negative: str


class JudgmentLog:
    """Append-only judgment store with per-annotator current labels.

    A re-label by the same annotator on the same pair replaces that
    annotator's current label; the full history is retained. When an optional
    file path is given, every record is appended as one JSON line, and an
    existing file is replayed on construction.
    """

    def __init__(self, known_ids: set[str] | None = None, path: str | Path | None = None):
        self._known_ids = known_ids
        self._records: list[PairJudgment] = []
        self._current: dict[Pair, dict[str, str]] = defaultdict(dict)
        self._path = Path(path) if path is not None else None
        if self._path is not None and self._path.exists():
            for line in self._path.read_text(encoding="utf-8").splitlines():
                if line.strip():
                    self._apply(PairJudgment.from_record(json.loads(line)))

    def __len__(self) -> int:
        return len(self._records)

    def record(self, judgment: PairJudgment) -> None:
        if self._known_ids is not None:
            for doc_id in judgment.pair:
                if doc_id not in self._known_ids:
                    raise ValueError(f"unknown document id {doc_id!r}")
        self._apply(judgment)
        if self._path is not None:
            with open(self._path, "a", encoding="utf-8") as handle:
                handle.write(json.dumps(judgment.to_record(), sort_keys=True) + "\n")

    def _apply(self, judgment: PairJudgment) -> None:
        self._records.append(judgment)
        self._current[judgment.pair][judgment.annotator] = judgment.label

    def history(self, doc_a: str, doc_b: str) -> list[PairJudgment]:
        pair = canonical_pair(doc_a, doc_b)
        return [r for r in self._records if r.pair == pair]

    def records(self) -> list[PairJudgment]:
        return list(self._records)

    def annotator_labels(self) -> dict[Pair, dict[str, str]]:
        """Current label per (pair, annotator), after re-label replacement."""
        return {pair: dict(labels) for pair, labels in self._current.items()}

    def current_labels(self) -> dict[Pair, str]:
        """Majority label per pair across annotators; ties are excluded."""
        resolved: dict[Pair, str] = {}
        for pair, by_annotator in self._current.items():
            counts = Counter(by_annotator.values())
            same = counts.get(LABEL_SAME, 0)
            different = counts.get(LABEL_DIFFERENT, 0)
            if same > different:
                resolved[pair] = LABEL_SAME
            elif different > same:
                resolved[pair] = LABEL_DIFFERENT
        return resolved


def record_judgment(judgment: PairJudgment, log: JudgmentLog) -> JudgmentLog:
    log.record(judgment)
    return log


def build_triplets(log: JudgmentLog) -> list[Triplet]:
    """All (anchor, positive, negative) combinations sharing an anchor.

    For every document with at least one current same-event pair and one
    current different-event pair, every positive x negative combination is
    emitted, sorted by (anchor, positive, negative) ids.
    """
    positives: dict[str, set[str]] = defaultdict(set)
    negatives: dict[str, set[str]] = defaultdict(set)
    for (a, b), label in log.current_labels().items():
        if label == LABEL_SAME:
            positives[a].add(b)
            positives[b].add(a)
        else:
            negatives[a].add(b)
            negatives[b].add(a)
    triplets = []
    for anchor in sorted(set(positives) & set(negatives)):
        for pos in sorted(positives[anchor]):
            for neg in sorted(negatives[anchor]):
                triplets.append(Triplet(anchor, pos, neg))
    return triplets


def positive_closure_groups(log: JudgmentLog) -> dict[str, int]:
    """Provisional event labels: connected components of current positive pairs.

    Bridges pair feedback to batch-hard mining, which needs per-document
    labels rather than pairwise ones.
    """
    parent: dict[str, str] = {}

    def find(x: str) -> str:
        while parent[x] != x:
            parent[x] = parent[parent[x]]
            x = parent[x]
        return x

    for (a, b), label in log.current_labels().items():
        if label != LABEL_SAME:
            continue
        parent.setdefault(a, a)
        parent.setdefault(b, b)
        ra, rb = find(a), find(b)
        if ra != rb:
            parent[max(ra, rb)] = min(ra, rb)

    roots = sorted({find(x) for x in parent})
    root_ids = {root: i for i, root in enumerate(roots)}
    return {doc: root_ids[find(doc)] for doc in sorted(parent)}


def mine_batch_hard(
    batch: Sequence[tuple[str, object]], reprs: Mapping[str, np.ndarray]
) -> list[Triplet]:
    """Hardest positive / hardest negative per anchor within one batch.

    positive = same-label document at maximum distance, negative =
    different-label document at minimum distance; exact distance ties go to
    the smaller document id. Anchors without both a positive and a negative
    are skipped; degenerate (zero) representations are excluded entirely.
    """
    items = [(doc_id, label) for doc_id, label in batch if np.any(reprs[doc_id])]
    if not items:
        return []
    ids = [doc_id for doc_id, _ in items]
    labels = [label for _, label in items]
    vecs = np.stack([reprs[doc_id] for doc_id in ids])
    vecs = vecs / np.linalg.norm(vecs, axis=1, keepdims=True)
    dist = 1.0 - vecs @ vecs.T

    triplets = []
    for i, (anchor, label) in enumerate(items):
        best_pos = None
        best_neg = None
        for j in range(len(items)):
            if j == i:
                continue
            d = dist[i, j]
            if labels[j] == label:
                if (
                    best_pos is None
                    or d > dist[i, best_pos]
                    or (d == dist[i, best_pos] and ids[j] < ids[best_pos])
                ):
                    best_pos = j
            else:
                if (
                    best_neg is None
                    or d < dist[i, best_neg]
                    or (d == dist[i, best_neg] and ids[j] < ids[best_neg])
                ):
                    best_neg = j
        if best_pos is not None and best_neg is not None:
            triplets.append(Triplet(anchor, ids[best_pos], ids[best_neg]))
    return triplets


def triplet_loss(
    anchor: np.ndarray, positive: np.ndarray, negative: np.ndarray, alpha: float
) -> float:
    """max(0, dist(a, p) - dist(a, n) + alpha) with dist = 1 - cosine."""
    from .model import distance

    return max(0.0, distance(anchor, positive) - distance(anchor, negative) + alpha)


@dataclass
class TrainConfig:
    margin: float = 0.2
    learning_rate: float = 0.05
    epochs: int = 20
    batch_size: int = 16
    mining_mode: str = "offline"  # "offline" | "batch-hard"
    seed: int = 0

    def __post_init__(self) -> None:
        if self.margin <= 0:
            raise ValueError("margin must be positive")
        if self.learning_rate <= 0:
            raise ValueError("learning_rate must be positive")
        if self.epochs < 1:
            raise ValueError("epochs must be at least 1")
        if self.batch_size < 4:
            raise ValueError("batch_size must be at least 4")
        if self.mining_mode not in ("offline", "batch-hard"):
            raise ValueError(f"unknown mining_mode {self.mining_mode!r}")

    def to_dict(self) -> dict:
        return {
            "margin": self.margin,
            "learning_rate": self.learning_rate,
            "epochs": self.epochs,
            "batch_size": self.batch_size,
            "mining_mode": self.mining_mode,
            "seed": self.seed,
        }


@dataclass
class BatchLossResult:
    loss: float
    grads: ParamGrads
    active: int


def triplet_batch_loss(
    params: EventModelParams,
    features: CorpusFeatures,
    triplets: Sequence[Triplet],
    margin: float,
    with_grads: bool = True,
) -> BatchLossResult:
    """Mean hinge loss over active triplets, with analytic parameter gradients.

    Active means hinge > 0; the mean is taken over active triplets only, so a
    batch with no violations has zero loss and zero gradient. Triplets with a
    degenerate member are skipped.
    """
    doc_ids = sorted({d for t in triplets for d in (t.anchor, t.positive, t.negative)})
    caches = {
        doc_id: forward(features.base_of(doc_id), features.t_of(doc_id), params)
        for doc_id in doc_ids
    }

    grad_repr: dict[str, np.ndarray] = {}
    total = 0.0
    active = 0
    for t in triplets:
        ca, cp, cn = caches[t.anchor], caches[t.positive], caches[t.negative]
        if ca.degenerate or cp.degenerate or cn.degenerate:
            continue
        ra, rp, rn = ca.repr, cp.repr, cn.repr
        hinge = float(ra @ rn - ra @ rp) + margin  # (1 - a.p) - (1 - a.n) + margin
        if hinge <= 0.0:
            continue
        total += hinge
        active += 1
        if with_grads:
            grad_repr.setdefault(t.anchor, np.zeros_like(ra))
            grad_repr.setdefault(t.positive, np.zeros_like(rp))
            grad_repr.setdefault(t.negative, np.zeros_like(rn))
            grad_repr[t.anchor] += rn - rp
            grad_repr[t.positive] -= ra
            grad_repr[t.negative] += ra

    grads = ParamGrads.zeros_like(params)
    if active == 0:
        return BatchLossResult(loss=0.0, grads=grads, active=0)
    if with_grads:
        inv = 1.0 / active
        for doc_id, g in grad_repr.items():
            backward(caches[doc_id], g * inv, params, grads)
    return BatchLossResult(loss=total / active, grads=grads, active=active)


def _batches(order: np.ndarray, batch_size: int) -> Iterable[np.ndarray]:
    for start in range(0, len(order), batch_size):
        yield order[start : start + batch_size]


def train(
    params: EventModelParams,
    features: CorpusFeatures,
    config: TrainConfig,
    triplets: Sequence[Triplet] | None = None,
    labeled: Sequence[tuple[str, object]] | None = None,
) -> EventModelParams:
    """Mini-batch gradient descent on the triplet hinge loss.

    Offline mode consumes a fixed triplet list; batch-hard mode shuffles
    labeled documents into batches and mines the hardest triplets with the
    representations current at each step. Gradients flow to the time, fusion,
    and head parameters only (the base embedding is frozen). Deterministic
    given the seed; returns a snapshot with version incremented.
    """
    rng = np.random.default_rng(config.seed)

    if config.mining_mode == "offline":
        if not triplets:
            raise ValueError("no training data: offline mode needs at least one triplet")
        triplet_list = list(triplets)
        order = np.arange(len(triplet_list))
        for _ in range(config.epochs):
            rng.shuffle(order)
            for batch_idx in _batches(order, config.batch_size):
                batch = [triplet_list[i] for i in batch_idx]
                result = triplet_batch_loss(params, features, batch, config.margin)
                if result.active:
                    params = sgd_step(params, result.grads, config.learning_rate)
        return bump_version(params)

    if not labeled:
        raise ValueError(
            "no training data: batch-hard mode needs labeled documents"
        )
    labeled_list = list(labeled)
    if len({label for _, label in labeled_list}) < 2:
        raise ValueError("no training data: batch-hard mode needs at least two labels")
    order = np.arange(len(labeled_list))
    for _ in range(config.epochs):
        rng.shuffle(order)
        for batch_idx in _batches(order, config.batch_size):
            batch = [labeled_list[i] for i in batch_idx]
            reprs = {
                doc_id: forward(features.base_of(doc_id), features.t_of(doc_id), params).repr
                for doc_id, _ in batch
            }
            mined = mine_batch_hard(batch, reprs)
            if not mined:
                continue
            result = triplet_batch_loss(params, features, mined, config.margin)
            if result.active:
                params = sgd_step(params, result.grads, config.learning_rate)
    return bump_version(params)
