"""Command-line entry points: serve, gen-corpus, loop, render.

`render` is the terminal plot emitter for grid exports: rows are printed with
their label words, shaded by cell intensity, row 0 at the bottom.
"""

from __future__ import annotations

import argparse
import datetime as dt
import json
import logging
import sys
import urllib.request
from pathlib import Path

from .loop import LoopConfig, curve_to_csv, run_loop
from .server import serve
from .service import Session, SessionConfig
from .synthetic import SimAnnotator, SyntheticSpec, generate_records
from .training import TrainConfig

SHADES = " .:-=+*#%@"


def _cmd_serve(args) -> int:
    config = (
        SessionConfig.from_file(args.config) if args.config else SessionConfig()
    ).with_env_overrides()
    if args.port is not None:
        config.port = args.port
    if args.data_dir is not None:
        config.data_dir = args.data_dir
    logging.basicConfig(level=logging.INFO, format="%(asctime)s %(levelname)s %(message)s")
    serve(config)
    return 0


def _cmd_gen_corpus(args) -> int:
    spec = SyntheticSpec(
        num_events=args.events,
        docs_per_event=(args.docs_per_event[0], args.docs_per_event[1]),
        num_days=args.days,
        event_duration=(args.duration[0], args.duration[1]),
        vocab_size=args.vocab_size,
        topic_words_per_event=args.topic_words,
        background_word_rate=args.background_rate,
        seed=args.seed,
    )
    lines, gold = generate_records(spec)
    Path(args.out).write_text("\n".join(lines) + "\n", encoding="utf-8")
    if args.gold_out:
        Path(args.gold_out).write_text(json.dumps(gold, sort_keys=True), encoding="utf-8")
    print(f"wrote {len(lines)} documents to {args.out}")
    return 0


def _cmd_loop(args) -> int:
    corpus_text = Path(args.corpus).read_text(encoding="utf-8")
    gold = json.loads(Path(args.gold).read_text(encoding="utf-8"))

    train = TrainConfig(
        margin=args.margin,
        learning_rate=args.learning_rate,
        epochs=args.epochs,
        batch_size=args.batch_size,
        mining_mode=args.mining_mode,
        seed=args.train_seed,
    )
    session = Session(SessionConfig(default_m=args.m, tau=args.tau, train=train))
    session.load_corpus_text(corpus_text)
    annotator = SimAnnotator(gold=gold, noise_rate=args.noise)
    baseline, curve = run_loop(
        session,
        gold,
        annotator,
        LoopConfig(
            budget=args.budget,
            retrain_every=args.retrain_every,
            questions_per_region=args.questions_per_region,
            seed=args.seed,
        ),
    )
    csv_text = curve_to_csv(baseline, curve)
    if args.out:
        Path(args.out).write_text(csv_text, encoding="utf-8")
        print(f"wrote curve to {args.out}")
    else:
        sys.stdout.write(csv_text)
    final = curve[-1]
    print(
        f"f1 {baseline.f1:.4f} -> {final.f1:.4f} ({final.f1 - baseline.f1:+.4f}); "
        f"row purity {baseline.row_purity:.4f} -> {final.row_purity:.4f}"
    )
    return 0


def _load_grid(args) -> dict:
    if args.url:
        url = args.url.rstrip("/") + "/api/heatmap"
        if args.m:
            url += f"?m={args.m}"
        with urllib.request.urlopen(url, timeout=30) as resp:
            payload = json.loads(resp.read())
        return payload["grid"]
    payload = json.loads(Path(args.grid).read_text(encoding="utf-8"))
    return payload.get("grid", payload)


def render_grid(grid: dict, label_words: int = 3) -> str:
    """ASCII heatmap: one line per row, top row printed first, row 0 at bottom."""
    num_rows = grid["num_rows"]
    num_days = grid["num_days"]
    peak = max(
        (cell["intensity"] for row in grid["cells"] for cell in row), default=0.0
    )
    lines = []
    day0 = dt.datetime.fromtimestamp(
        grid["epoch_day0"] * 86400, tz=dt.timezone.utc
    ).date()
    lines.append(
        f"model version {grid['model_version']}; {num_rows} rows x {num_days} days "
        f"from {day0.isoformat()}"
    )
    label_width = 0
    labels = []
    for row_labels in grid["row_labels"]:
        text = " ".join(word for word, _ in row_labels[:label_words])
        labels.append(text)
        label_width = max(label_width, len(text))
    for row in range(num_rows - 1, -1, -1):
        cells = grid["cells"][row]
        shades = []
        for cell in cells:
            if peak <= 0 or cell["intensity"] <= 0:
                shades.append(SHADES[0])
            else:
                idx = min(len(SHADES) - 1, int(cell["intensity"] / peak * (len(SHADES) - 1) + 0.5))
                shades.append(SHADES[idx])
        lines.append(f"{labels[row]:>{label_width}} |{''.join(shades)}|")
    return "\n".join(lines) + "\n"


def _cmd_render(args) -> int:
    grid = _load_grid(args)
    sys.stdout.write(render_grid(grid, label_words=args.label_words))
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="topictime",
        description="Human-in-the-loop event detection over timestamped corpora",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p_serve = sub.add_parser("serve", help="run the HTTP service")
    p_serve.add_argument("--config", help="JSON config file")
    p_serve.add_argument("--port", type=int)
    p_serve.add_argument("--data-dir")
    p_serve.set_defaults(func=_cmd_serve)

    p_gen = sub.add_parser("gen-corpus", help="generate a synthetic labeled corpus")
    p_gen.add_argument("--events", type=int, default=10)
    p_gen.add_argument("--docs-per-event", type=int, nargs=2, default=[15, 30],
                       metavar=("LO", "HI"))
    p_gen.add_argument("--days", type=int, default=60)
    p_gen.add_argument("--duration", type=int, nargs=2, default=[3, 10],
                       metavar=("LO", "HI"))
    p_gen.add_argument("--vocab-size", type=int, default=400)
    p_gen.add_argument("--topic-words", type=int, default=8)
    p_gen.add_argument("--background-rate", type=float, default=0.5)
    p_gen.add_argument("--seed", type=int, default=0)
    p_gen.add_argument("--out", required=True)
    p_gen.add_argument("--gold-out")
    p_gen.set_defaults(func=_cmd_gen_corpus)

    p_loop = sub.add_parser("loop", help="run the simulated feedback loop")
    p_loop.add_argument("--corpus", required=True)
    p_loop.add_argument("--gold", required=True)
    p_loop.add_argument("--budget", type=int, default=200)
    p_loop.add_argument("--retrain-every", type=int, default=25)
    p_loop.add_argument("--questions-per-region", type=int, default=5)
    p_loop.add_argument("--m", type=int, default=20)
    p_loop.add_argument("--tau", type=float, default=0.6)
    p_loop.add_argument("--noise", type=float, default=0.0)
    p_loop.add_argument("--seed", type=int, default=0)
    p_loop.add_argument("--margin", type=float, default=0.2)
    p_loop.add_argument("--learning-rate", type=float, default=0.05)
    p_loop.add_argument("--epochs", type=int, default=20)
    p_loop.add_argument("--batch-size", type=int, default=16)
    p_loop.add_argument("--mining-mode", choices=["offline", "batch-hard"],
                        default="offline")
    p_loop.add_argument("--train-seed", type=int, default=0)
    p_loop.add_argument("--out", help="curve CSV path (stdout when omitted)")
    p_loop.set_defaults(func=_cmd_loop)

    p_render = sub.add_parser("render", help="print a grid export as an ASCII heatmap")
    source = p_render.add_mutually_exclusive_group(required=True)
    source.add_argument("--grid", help="grid export JSON file")
    source.add_argument("--url", help="server base URL to fetch the heatmap from")
    p_render.add_argument("--m", type=int, help="row count when fetching from a server")
    p_render.add_argument("--label-words", type=int, default=3)
    p_render.set_defaults(func=_cmd_render)

    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
