#!/usr/bin/env python3
"""Desk-scale feedback-loop experiment: quality vs judgments spent.

Generates a synthetic labeled corpus, runs the simulated annotation loop with
periodic retraining, writes the efficiency curve as CSV, and prints the final
heatmap so the event structure is visible in the terminal.
"""

import argparse
from pathlib import Path

from topictime.cli import render_grid
from topictime.loop import LoopConfig, curve_to_csv, run_loop
from topictime.service import Session, SessionConfig
from topictime.synthetic import SimAnnotator, SyntheticSpec, generate_records
from topictime.training import TrainConfig


def parse_args():
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--events", type=int, default=20)
    parser.add_argument("--docs-per-event", type=int, nargs=2, default=[15, 30])
    parser.add_argument("--days", type=int, default=60)
    parser.add_argument("--background-rate", type=float, default=0.75)
    parser.add_argument("--corpus-seed", type=int, default=2024)
    parser.add_argument("--budget", type=int, default=200)
    parser.add_argument("--retrain-every", type=int, default=25)
    parser.add_argument("--m", type=int, default=20)
    parser.add_argument("--tau", type=float, default=0.6)
    parser.add_argument("--noise", type=float, default=0.0)
    parser.add_argument("--loop-seed", type=int, default=5)
    parser.add_argument("--mining-mode", choices=["offline", "batch-hard"],
                        default="batch-hard")
    parser.add_argument("--margin", type=float, default=0.5)
    parser.add_argument("--learning-rate", type=float, default=0.1)
    parser.add_argument("--epochs", type=int, default=20)
    parser.add_argument("--out", default="hitl_curve.csv")
    return parser.parse_args()


def main():
    args = parse_args()
    spec = SyntheticSpec(
        num_events=args.events,
        docs_per_event=tuple(args.docs_per_event),
        num_days=args.days,
        event_duration=(3, 10),
        vocab_size=400,
        topic_words_per_event=8,
        background_word_rate=args.background_rate,
        seed=args.corpus_seed,
    )
    lines, gold = generate_records(spec)
    print(f"corpus: {len(gold)} documents, {args.events} events, {args.days} days")

    train = TrainConfig(
        margin=args.margin,
        learning_rate=args.learning_rate,
        epochs=args.epochs,
        mining_mode=args.mining_mode,
    )
    session = Session(SessionConfig(default_m=args.m, tau=args.tau, train=train))
    session.load_corpus_text("\n".join(lines))
    annotator = SimAnnotator(gold=gold, noise_rate=args.noise)

    baseline, curve = run_loop(
        session,
        gold,
        annotator,
        LoopConfig(budget=args.budget, retrain_every=args.retrain_every,
                   seed=args.loop_seed),
    )
    Path(args.out).write_text(curve_to_csv(baseline, curve), encoding="utf-8")
    print(f"curve written to {args.out}")
    for point in [baseline, *curve]:
        print(f"  {point.judgments:4d} judgments: f1={point.f1:.4f} "
              f"purity={point.row_purity:.4f} (v{point.model_version})")
    print()
    print(render_grid(session.heatmap_export()))


if __name__ == "__main__":
    main()
