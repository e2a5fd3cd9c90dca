"""End-to-end feedback loop driver: ask, judge, retrain, re-plot, measure.

Drives a Session through the same operations the wire API exposes, with a
simulated annotator answering pair questions. The region policy walks the
darkest unexplored cells of the current heatmap (events tend to show up as
dark rectangles), expanding each by one cell in every direction. Produces an
efficiency curve of clustering quality versus judgments spent.
"""

from __future__ import annotations

import io
from dataclasses import dataclass

import numpy as np

from .heatmap import Region
from .service import Session
from .synthetic import SimAnnotator


@dataclass
class LoopConfig:
    budget: int = 200
    retrain_every: int = 25
    questions_per_region: int = 5
    num_rows: int | None = None  # session default when None
    tau: float | None = None
    seed: int = 0


@dataclass(frozen=True)
class CurvePoint:
    judgments: int
    f1: float
    row_purity: float
    model_version: int


def _metrics(session: Session, judgments: int, config: LoopConfig) -> CurvePoint:
    report = session.evaluation_report(tau=config.tau, m=config.num_rows)
    return CurvePoint(
        judgments=judgments,
        f1=report["f1"],
        row_purity=report["row_purity"],
        model_version=report["model_version"],
    )


def _darkest_unexplored(export: dict, explored: set[tuple[int, int]]) -> tuple[int, int] | None:
    best = None
    best_key = None
    for row in range(export["num_rows"]):
        for day in range(export["num_days"]):
            cell = export["cells"][row][day]
            if cell["count"] == 0 or (row, day) in explored:
                continue
            key = (-cell["intensity"], row, day)
            if best_key is None or key < best_key:
                best_key = key
                best = (row, day)
    return best


def run_loop(
    session: Session,
    gold: dict[str, int],
    annotator: SimAnnotator,
    config: LoopConfig,
) -> tuple[CurvePoint, list[CurvePoint]]:
    """Run the feedback loop and return (baseline point, retrain curve).

    Retrains every `retrain_every` judgments plus once at the end for any
    remainder; a scheduled retrain is skipped (version unchanged) if no
    triplet can be built yet. Deterministic given the session seeds and
    config.seed.
    """
    if config.budget < 1:
        raise ValueError("budget must be at least 1")
    session.set_gold(gold)
    rng = np.random.default_rng(config.seed)
    baseline = _metrics(session, 0, config)

    curve: list[CurvePoint] = []
    # explored cells persist across retrains so the walk sweeps the whole
    # grid instead of circling the few darkest cells; it clears only when
    # every non-empty cell has been visited
    explored: set[tuple[int, int]] = set()
    judgments = 0
    progress_since_sweep = True  # guards against spinning once every pair is asked

    def retrain_and_record() -> None:
        try:
            session.retrain()
        except ValueError:
            pass  # feedback so far cannot train yet; record the point unchanged
        curve.append(_metrics(session, judgments, config))

    while judgments < config.budget:
        export = session.heatmap_export(m=config.num_rows)
        cell = _darkest_unexplored(export, explored)
        if cell is None:
            if not progress_since_sweep:
                break  # every reachable pair has been asked
            explored.clear()
            progress_since_sweep = False
            continue
        explored.add(cell)
        row, day = cell
        region = Region(
            row_lo=max(0, row - 1),
            row_hi=min(export["num_rows"] - 1, row + 1),
            day_lo=max(0, day - 1),
            day_hi=min(export["num_days"] - 1, day + 1),
        )
        asked_here = 0
        while asked_here < config.questions_per_region and judgments < config.budget:
            try:
                question = session.region_question(region, m=config.num_rows)
            except ValueError:
                break  # fewer than two documents in the region
            if question["status"] != "ok":
                break
            doc_a, doc_b = (d["id"] for d in question["documents"])
            label = annotator.answer(doc_a, doc_b, seed=int(rng.integers(2**31)))
            session.submit_judgment(question["token"], label, annotator.name)
            judgments += 1
            asked_here += 1
            progress_since_sweep = True
            if judgments % config.retrain_every == 0:
                retrain_and_record()
    if judgments % config.retrain_every != 0:
        retrain_and_record()
    return baseline, curve


def curve_to_csv(baseline: CurvePoint, curve: list[CurvePoint]) -> str:
    """Delimited rows: judgments, f1, row_purity, model_version."""
    out = io.StringIO()
    out.write("judgments,f1,row_purity,model_version\n")
    for point in [baseline, *curve]:
        out.write(
            f"{point.judgments},{point.f1:.6f},{point.row_purity:.6f},{point.model_version}\n"
        )
    return out.getvalue()
