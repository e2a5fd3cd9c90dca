"""Online event clustering and clustering evaluation (BCubed, row purity)."""

from __future__ import annotations

import json
from collections import Counter, defaultdict
from dataclasses import dataclass
from typing import Hashable, Mapping, Sequence

import numpy as np

from .corpus import Corpus
from .heatmap import HeatmapGrid
from .model import CorpusFeatures, EventModelParams, batch_event_reprs

# Reserved event id for documents whose representation is degenerate.
UNCLUSTERED = -1


@dataclass
class EventClustering:
    assignment: dict[str, int]
    centroids: dict[int, np.ndarray]
    tau: float
    model_version: int


@dataclass(frozen=True)
class BCubedScore:
    precision: float
    recall: float
    f1: float


def cluster_vectors(
    items: Sequence[tuple[str, np.ndarray]], tau: float, model_version: int = 0
) -> EventClustering:
    """Single-pass nearest-centroid clustering over unit vectors.

    Items are processed in the given order. A document joins the existing
    event with the highest centroid similarity when that similarity reaches
    tau (equal similarities go to the lower event id); otherwise it opens a
    new event. Centroids are running means of member representations,
    renormalized. Zero vectors get the reserved unclustered id.
    """
    if not -1.0 < tau < 1.0:
        raise ValueError(f"tau must lie in (-1, 1), got {tau}")

    assignment: dict[str, int] = {}
    sums: list[np.ndarray] = []
    counts: list[int] = []
    centroids: list[np.ndarray | None] = []  # None marks a zero-norm mean

    for doc_id, vec in items:
        norm = np.linalg.norm(vec)
        if norm == 0.0:
            assignment[doc_id] = UNCLUSTERED
            continue
        unit = vec / norm

        best_event = None
        best_sim = None
        for event_id, centroid in enumerate(centroids):
            if centroid is None:
                continue
            sim = float(unit @ centroid)
            if best_sim is None or sim > best_sim:
                best_event = event_id
                best_sim = sim

        if best_event is not None and best_sim >= tau:
            assignment[doc_id] = best_event
            sums[best_event] = sums[best_event] + unit
            counts[best_event] += 1
            mean_norm = np.linalg.norm(sums[best_event])
            centroids[best_event] = (
                sums[best_event] / mean_norm if mean_norm > 0.0 else None
            )
        else:
            assignment[doc_id] = len(sums)
            sums.append(unit.copy())
            counts.append(1)
            centroids.append(unit.copy())

    centroid_map = {
        event_id: centroid
        for event_id, centroid in enumerate(centroids)
        if centroid is not None
    }
    return EventClustering(
        assignment=assignment,
        centroids=centroid_map,
        tau=tau,
        model_version=model_version,
    )


def cluster_online(
    corpus: Corpus,
    features: CorpusFeatures,
    params: EventModelParams,
    tau: float,
) -> EventClustering:
    """Cluster the corpus in timestamp order under the current model."""
    reprs = batch_event_reprs(features, params)
    items = [(doc.id, reprs[i]) for i, doc in enumerate(corpus.documents)]
    return cluster_vectors(items, tau, model_version=params.version)


def bcubed(
    pred: Mapping[str, Hashable], gold: Mapping[str, Hashable]
) -> BCubedScore:
    """Mean per-item precision/recall of cluster co-membership.

    precision(i) = |pred-cluster(i) ∩ gold-cluster(i)| / |pred-cluster(i)|,
    recall swaps the denominator; f1 is the harmonic mean (0 if either is 0).
    """
    if set(pred) != set(gold):
        raise ValueError("pred and gold must cover the same document set")
    if not pred:
        raise ValueError("assignments are empty")

    pred_groups: dict[Hashable, set[str]] = defaultdict(set)
    gold_groups: dict[Hashable, set[str]] = defaultdict(set)
    for doc_id, label in pred.items():
        pred_groups[label].add(doc_id)
    for doc_id, label in gold.items():
        gold_groups[label].add(doc_id)

    precision_sum = 0.0
    recall_sum = 0.0
    for doc_id in pred:
        cluster = pred_groups[pred[doc_id]]
        truth = gold_groups[gold[doc_id]]
        overlap = len(cluster & truth)
        precision_sum += overlap / len(cluster)
        recall_sum += overlap / len(truth)

    n = len(pred)
    precision = precision_sum / n
    recall = recall_sum / n
    f1 = 0.0 if precision + recall == 0.0 else 2 * precision * recall / (precision + recall)
    return BCubedScore(precision=precision, recall=recall, f1=f1)


def row_purity(grid: HeatmapGrid, gold: Mapping[str, Hashable]) -> float:
    """Mean over gold events of the largest single-row fraction of the event.

    1.0 when every event sits entirely within one heatmap row.
    """
    if not gold:
        raise ValueError("gold assignment is empty")
    doc_rows = grid.doc_rows()
    events: dict[Hashable, list[str]] = defaultdict(list)
    for doc_id, label in gold.items():
        events[label].append(doc_id)

    total = 0.0
    for members in events.values():
        rows = Counter()
        for doc_id in members:
            if doc_id not in doc_rows:
                raise ValueError(f"grid does not cover gold-labeled document {doc_id!r}")
            rows[doc_rows[doc_id]] += 1
        total += max(rows.values()) / len(members)
    return total / len(events)


def clustering_export(clustering: EventClustering) -> dict:
    return {
        "model_version": clustering.model_version,
        "tau": clustering.tau,
        "assignment": dict(sorted(clustering.assignment.items())),
    }


def clustering_export_json(clustering: EventClustering) -> bytes:
    return json.dumps(clustering_export(clustering), sort_keys=True).encode("utf-8")
