"""Topic-time heatmap: 1-D topic projection, quantile rows, day columns.

The grid positions every document by (topic row, day column). Rows come from
quantile-bucketing the first principal component of the event-space
representations; cell intensity is the fraction of that day's documents in
the cell; rows are labeled with their most informative words by smoothed
log-odds against the rest of the corpus.
"""

from __future__ import annotations

import json
import math
from collections import Counter
from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np

from .corpus import Corpus, day_index
from .model import CorpusFeatures, EventModelParams, batch_event_reprs

LABEL_SMOOTHING = 0.01
POWER_ITER_TOL = 1e-8
POWER_ITER_MAX = 1000


@dataclass
class Cell:
    count: int
    intensity: float
    doc_ids: list[str]


@dataclass(frozen=True)
class Region:
    """Inclusive rectangle of grid cells."""

    row_lo: int
    row_hi: int
    day_lo: int
    day_hi: int

    def validate(self, num_rows: int, num_days: int) -> None:
        if not (0 <= self.row_lo <= self.row_hi < num_rows):
            raise ValueError(f"row range [{self.row_lo}, {self.row_hi}] invalid for {num_rows} rows")
        if not (0 <= self.day_lo <= self.day_hi < num_days):
            raise ValueError(f"day range [{self.day_lo}, {self.day_hi}] invalid for {num_days} days")


@dataclass
class HeatmapGrid:
    """num_rows x num_days cells; row 0 renders at the bottom of the y-axis."""

    num_rows: int
    num_days: int
    epoch_day0: int
    cells: list[list[Cell]]  # [row][day]
    row_labels: list[list[tuple[str, float]]]
    model_version: int

    def row_of(self, doc_id: str) -> int:
        for row in range(self.num_rows):
            for day in range(self.num_days):
                if doc_id in self.cells[row][day].doc_ids:
                    return row
        raise KeyError(doc_id)

    def doc_rows(self) -> dict[str, int]:
        rows: dict[str, int] = {}
        for row in range(self.num_rows):
            for day in range(self.num_days):
                for doc_id in self.cells[row][day].doc_ids:
                    rows[doc_id] = row
        return rows

    def region_doc_ids(self, region: Region) -> list[str]:
        region.validate(self.num_rows, self.num_days)
        ids: list[str] = []
        for row in range(region.row_lo, region.row_hi + 1):
            for day in range(region.day_lo, region.day_hi + 1):
                ids.extend(self.cells[row][day].doc_ids)
        return sorted(ids)


def _top_principal_component(rows: np.ndarray) -> np.ndarray:
    """Dominant eigenvector of the covariance of mean-centered rows.

    Power iteration with a fixed seeded start; sign fixed so the
    largest-magnitude loading is positive.
    """
    centered = rows - rows.mean(axis=0)
    if not np.any(centered):
        raise ValueError("zero variance: all representations are identical")
    cov = centered.T @ centered / rows.shape[0]

    rng = np.random.default_rng(0)
    v = rng.standard_normal(rows.shape[1])
    v /= np.linalg.norm(v)
    for _ in range(POWER_ITER_MAX):
        w = cov @ v
        norm = np.linalg.norm(w)
        if norm == 0.0:
            # start vector landed in the nullspace; re-draw
            v = rng.standard_normal(rows.shape[1])
            v /= np.linalg.norm(v)
            continue
        w /= norm
        if np.linalg.norm(w - v) < POWER_ITER_TOL:
            v = w
            break
        v = w

    pivot = int(np.argmax(np.abs(v)))
    if v[pivot] < 0:
        v = -v
    return v


def project_topic_axis(reprs: np.ndarray) -> np.ndarray:
    """One scalar per document: dot product with the first principal component.

    The component is fit on non-degenerate (non-zero) representations only;
    degenerate rows score 0 so every document still receives a scalar.
    """
    reprs = np.asarray(reprs, dtype=float)
    nondegenerate = np.any(reprs != 0.0, axis=1)
    if int(nondegenerate.sum()) < 2:
        raise ValueError("need at least 2 non-degenerate representations")
    component = _top_principal_component(reprs[nondegenerate])
    return reprs @ component


def bucketize(
    scalars: Sequence[float], num_rows: int, ids: Sequence[str] | None = None
) -> np.ndarray:
    """Quantile rows: sorted scalars split into contiguous near-equal groups.

    The remainder spreads to the lowest rows, so row sizes differ by at most
    one. Ties order by (scalar, id) — positions when ids are absent — making
    the assignment deterministic and monotone in the scalar.
    """
    if num_rows < 1:
        raise ValueError("num_rows must be at least 1")
    n = len(scalars)
    keys: Sequence = ids if ids is not None else range(n)
    order = sorted(range(n), key=lambda i: (scalars[i], keys[i]))
    base, remainder = divmod(n, num_rows)
    rows = np.empty(n, dtype=int)
    position = 0
    for row in range(num_rows):
        size = base + 1 if row < remainder else base
        for i in order[position : position + size]:
            rows[i] = row
        position += size
    return rows


def label_rows(
    row_token_counts: list[Counter[str]],
    vocabulary_terms: Iterable[str],
    words_per_row: int,
) -> list[list[tuple[str, float]]]:
    """Most informative words per row by smoothed log-odds of row vs rest.

    score(w, r) = ln((c_r + b) / (T_r + b|V|)) - ln((c_rest + b) / (T_rest + b|V|))
    with b = 0.01, c = in-vocabulary token counts and T their row totals.
    Ties break lexicographically; rows without documents get no labels.
    """
    terms = sorted(vocabulary_terms)
    vocab_size = len(terms)
    totals = [sum(counts.values()) for counts in row_token_counts]
    grand_counts: Counter[str] = Counter()
    for counts in row_token_counts:
        grand_counts.update(counts)
    grand_total = sum(totals)

    beta = LABEL_SMOOTHING
    labels: list[list[tuple[str, float]]] = []
    for counts, row_total in zip(row_token_counts, totals):
        if not counts:
            labels.append([])
            continue
        rest_total = grand_total - row_total
        scored = []
        for term in terms:
            c_row = counts.get(term, 0)
            c_rest = grand_counts.get(term, 0) - c_row
            score = math.log((c_row + beta) / (row_total + beta * vocab_size)) - math.log(
                (c_rest + beta) / (rest_total + beta * vocab_size)
            )
            scored.append((term, score))
        scored.sort(key=lambda item: (-item[1], item[0]))
        labels.append(scored[:words_per_row])
    return labels


def build_heatmap(
    corpus: Corpus,
    features: CorpusFeatures,
    params: EventModelParams,
    num_rows: int,
    words_per_row: int = 5,
) -> HeatmapGrid:
    """Pure function of (corpus, model snapshot, row count).

    Composes event representations -> topic projection -> quantile rows with
    day columns, then normalizes per-day intensities and labels rows.
    """
    if len(corpus) == 0:
        raise ValueError("corpus is empty")
    reprs = batch_event_reprs(features, params)
    scalars = project_topic_axis(reprs)
    rows = bucketize(scalars, num_rows, ids=features.ids)

    axis = corpus.axis
    cells = [
        [Cell(count=0, intensity=0.0, doc_ids=[]) for _ in range(axis.num_days)]
        for _ in range(num_rows)
    ]
    row_token_counts: list[Counter[str]] = [Counter() for _ in range(num_rows)]
    vocab = corpus.vocabulary
    for doc, row in zip(corpus.documents, rows):
        day = day_index(doc.timestamp, axis)
        cell = cells[row][day]
        cell.doc_ids.append(doc.id)
        cell.count += 1
        row_token_counts[row].update(t for t in doc.tokens if t in vocab)

    for day in range(axis.num_days):
        column_total = sum(cells[row][day].count for row in range(num_rows))
        if column_total == 0:
            continue
        for row in range(num_rows):
            cells[row][day].intensity = cells[row][day].count / column_total

    labels = label_rows(row_token_counts, vocab.index.keys(), words_per_row)
    return HeatmapGrid(
        num_rows=num_rows,
        num_days=axis.num_days,
        epoch_day0=axis.epoch_day0,
        cells=cells,
        row_labels=labels,
        model_version=params.version,
    )


def sample_cell(cell: Cell, n: int, seed: int) -> list[str]:
    """Uniform sample of cell documents without replacement, per-seed deterministic."""
    if n <= 0:
        return []
    ids = sorted(cell.doc_ids)
    if n >= len(ids):
        return ids
    rng = np.random.default_rng(seed)
    picked = rng.choice(len(ids), size=n, replace=False)
    return [ids[i] for i in sorted(picked)]


def sample_region_pair(
    region: Region,
    grid: HeatmapGrid,
    asked: set[tuple[str, str]],
    seed: int,
) -> tuple[str, str] | None:
    """Uniform draw over unasked unordered document pairs within a region.

    Returns None when every pair has been asked (exhausted); raises when the
    region holds fewer than two documents.
    """
    docs = grid.region_doc_ids(region)
    if len(docs) < 2:
        raise ValueError("region contains fewer than 2 documents")
    unasked = [
        (docs[i], docs[j])
        for i in range(len(docs))
        for j in range(i + 1, len(docs))
        if (docs[i], docs[j]) not in asked
    ]
    if not unasked:
        return None
    rng = np.random.default_rng(seed)
    return unasked[int(rng.integers(len(unasked)))]


# --- grid export -------------------------------------------------------------


def grid_export(grid: HeatmapGrid) -> dict:
    """The structured document consumed by the UI and the CLI plot emitter."""
    return {
        "num_rows": grid.num_rows,
        "num_days": grid.num_days,
        "epoch_day0": grid.epoch_day0,
        "model_version": grid.model_version,
        "row_labels": [
            [[word, score] for word, score in labels] for labels in grid.row_labels
        ],
        "cells": [
            [
                {
                    "count": cell.count,
                    "intensity": cell.intensity,
                    "doc_ids": list(cell.doc_ids),
                }
                for cell in row
            ]
            for row in grid.cells
        ],
    }


def grid_export_json(grid: HeatmapGrid) -> bytes:
    return json.dumps(grid_export(grid), sort_keys=True).encode("utf-8")
