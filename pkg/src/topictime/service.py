"""Session state behind the wire API: corpus, model snapshots, feedback, caches.

The HTTP layer in `server` is a thin adapter over this class, and the loop
driver in `loop` calls it directly in-process. Readers (heatmap, samples,
reports) may run concurrently; judgment writes serialize through one lock;
at most one training run executes at a time, and requests that arrive during
a run wait for it and observe its resulting version.
"""

from __future__ import annotations

import datetime as dt
import json
import os
import threading
import time
import uuid
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Callable

from .clustering import (
    UNCLUSTERED,
    EventClustering,
    bcubed,
    cluster_online,
    clustering_export,
    row_purity,
)
from .corpus import Corpus, ingest_lines
from .heatmap import HeatmapGrid, Region, build_heatmap, grid_export, sample_cell, sample_region_pair
from .model import (
    CorpusFeatures,
    EventModelParams,
    RandomProjectionEmbedder,
    encode_corpus,
    init_params,
    snapshot_to_json,
)
from .training import (
    LABEL_SAME,
    VALID_LABELS,
    JudgmentLog,
    PairJudgment,
    TrainConfig,
    build_triplets,
    positive_closure_groups,
    train,
)

CORPUS_FILENAME = "corpus.jsonl"
EVENTS_FILENAME = "events.jsonl"
MODEL_FILENAME = "model.json"

_ENV_PREFIX = "TOPICTIME_"


@dataclass
class SessionConfig:
    """Service configuration; a JSON file plus environment overrides."""

    port: int = 8747
    data_dir: str | None = None
    default_m: int = 20
    tau: float = 0.6
    embed_dim: int = 64
    time_k: int = 8
    head_m: int = 32
    words_per_row: int = 5
    provider_seed: int = 7
    model_seed: int = 11
    question_seed: int = 13
    sample_seed: int = 17
    token_ttl_seconds: int = 86400
    train: TrainConfig = field(default_factory=TrainConfig)

    @classmethod
    def from_file(cls, path: str | Path) -> "SessionConfig":
        raw = json.loads(Path(path).read_text(encoding="utf-8"))
        train_cfg = TrainConfig(**raw.pop("train", {}))
        return cls(train=train_cfg, **raw)

    def with_env_overrides(self, env=os.environ) -> "SessionConfig":
        config = self
        simple = {
            "PORT": ("port", int),
            "DATA_DIR": ("data_dir", str),
            "DEFAULT_M": ("default_m", int),
            "TAU": ("tau", float),
            "EMBED_DIM": ("embed_dim", int),
            "PROVIDER_SEED": ("provider_seed", int),
            "MODEL_SEED": ("model_seed", int),
            "QUESTION_SEED": ("question_seed", int),
        }
        for key, (attr, cast) in simple.items():
            value = env.get(_ENV_PREFIX + key)
            if value is not None:
                config = replace(config, **{attr: cast(value)})
        train_cfg = config.train
        train_env = {
            "MARGIN": ("margin", float),
            "LEARNING_RATE": ("learning_rate", float),
            "EPOCHS": ("epochs", int),
            "BATCH_SIZE": ("batch_size", int),
            "MINING_MODE": ("mining_mode", str),
            "TRAIN_SEED": ("seed", int),
        }
        updates = {}
        for key, (attr, cast) in train_env.items():
            value = env.get(_ENV_PREFIX + key)
            if value is not None:
                updates[attr] = cast(value)
        if updates:
            merged = {**train_cfg.to_dict(), **updates}
            config = replace(config, train=TrainConfig(**merged))
        return config


def _render_document(doc) -> dict:
    date = dt.datetime.fromtimestamp(doc.timestamp, tz=dt.timezone.utc)
    return {
        "id": doc.id,
        "text": doc.text,
        "date": date.isoformat(),
        "timestamp": doc.timestamp,
        "source": doc.source,
    }


class Session:
    """One corpus, one model lineage, one judgment history.

    State is reconstructible from the corpus file plus the append-only event
    log (judgment and retrain records), which `restore` replays.
    """

    def __init__(self, config: SessionConfig, clock: Callable[[], float] = time.time):
        self._config = config
        self._clock = clock
        self._lock = threading.RLock()
        self._train_done = threading.Condition(self._lock)
        self._training = False
        self._replaying = False

        self._corpus: Corpus | None = None
        self._features: CorpusFeatures | None = None
        self._embedder: RandomProjectionEmbedder | None = None
        self._model: EventModelParams | None = None
        self._log: JudgmentLog | None = None
        self._gold: dict[str, int] | None = None

        self._answered: set[tuple[str, str]] = set()
        self._pending: dict[str, tuple[tuple[str, str], float]] = {}
        self._question_counter = 0

        self._grid_cache: dict[tuple[int, int], tuple[HeatmapGrid, bytes]] = {}
        self._cluster_cache: dict[tuple[int, float], EventClustering] = {}

        if config.data_dir is not None:
            Path(config.data_dir).mkdir(parents=True, exist_ok=True)

    # --- persistence ---------------------------------------------------------

    def _data_path(self, name: str) -> Path:
        assert self._config.data_dir is not None
        return Path(self._config.data_dir) / name

    def _append_event(self, record: dict) -> None:
        if self._replaying or self._config.data_dir is None:
            return
        with open(self._data_path(EVENTS_FILENAME), "a", encoding="utf-8") as handle:
            handle.write(json.dumps(record, sort_keys=True) + "\n")

    def _save_model(self) -> None:
        if self._replaying or self._config.data_dir is None or self._model is None:
            return
        assert self._embedder is not None
        self._data_path(MODEL_FILENAME).write_text(
            snapshot_to_json(self._model, self._embedder.identifier), encoding="utf-8"
        )

    @classmethod
    def restore(cls, config: SessionConfig, clock: Callable[[], float] = time.time) -> "Session":
        """Rebuild a session from its data directory by replaying the event log."""
        if config.data_dir is None:
            raise ValueError("restore requires a data_dir")
        session = cls(config, clock=clock)
        corpus_path = session._data_path(CORPUS_FILENAME)
        if not corpus_path.exists():
            return session
        session.load_corpus_text(corpus_path.read_text(encoding="utf-8"), _persist=False)
        events_path = session._data_path(EVENTS_FILENAME)
        if events_path.exists():
            session.replay_events(events_path.read_text(encoding="utf-8").splitlines())
        return session

    # --- corpus --------------------------------------------------------------

    def load_corpus_text(self, text: str, _persist: bool = True) -> dict:
        """Ingest a newline-delimited corpus; resets model, log, and caches."""
        corpus = ingest_lines(text.splitlines())
        with self._lock:
            if self._training:
                raise ValueError("cannot replace the corpus while training")
            embedder = RandomProjectionEmbedder(
                corpus, dim=self._config.embed_dim, seed=self._config.provider_seed
            )
            self._corpus = corpus
            self._embedder = embedder
            self._features = encode_corpus(corpus, embedder)
            self._model = init_params(
                num_days=corpus.axis.num_days,
                dim=self._config.embed_dim,
                time_k=self._config.time_k,
                head_m=self._config.head_m,
                seed=self._config.model_seed,
            )
            self._log = JudgmentLog(known_ids=set(corpus.ids()))
            self._gold = None
            self._answered = set()
            self._pending = {}
            self._question_counter = 0
            self._grid_cache = {}
            self._cluster_cache = {}
            if _persist and self._config.data_dir is not None:
                self._data_path(CORPUS_FILENAME).write_text(text, encoding="utf-8")
                events_path = self._data_path(EVENTS_FILENAME)
                if events_path.exists():
                    events_path.unlink()
            self._save_model()
            return {
                "status": "ok",
                "num_documents": len(corpus),
                "num_days": corpus.axis.num_days,
                "vocabulary_size": len(corpus.vocabulary),
                "model_version": self._model.version,
            }

    def _require_corpus(self) -> Corpus:
        if self._corpus is None:
            raise ValueError("no corpus loaded")
        return self._corpus

    def set_gold(self, assignment: dict[str, int]) -> dict:
        corpus = self._require_corpus()
        unknown = [doc_id for doc_id in assignment if doc_id not in corpus]
        if unknown:
            raise ValueError(f"gold names unknown document ids, e.g. {unknown[0]!r}")
        with self._lock:
            self._gold = dict(assignment)
        return {"status": "ok", "num_labeled": len(assignment)}

    # --- introspection ---------------------------------------------------------

    @property
    def model_version(self) -> int:
        with self._lock:
            return -1 if self._model is None else self._model.version

    def status(self) -> dict:
        with self._lock:
            if self._corpus is None:
                return {"status": "ok", "corpus_loaded": False}
            assert self._log is not None and self._model is not None
            return {
                "status": "ok",
                "corpus_loaded": True,
                "num_documents": len(self._corpus),
                "num_days": self._corpus.axis.num_days,
                "model_version": self._model.version,
                "judgment_count": len(self._log),
                "triplet_count": len(build_triplets(self._log)),
                "training": self._training,
                "has_gold": self._gold is not None,
            }

    # --- heatmap ----------------------------------------------------------------

    def _grid(self, m: int | None = None) -> tuple[HeatmapGrid, bytes]:
        corpus = self._require_corpus()
        assert self._model is not None and self._features is not None
        num_rows = self._config.default_m if m is None else int(m)
        if num_rows < 1:
            raise ValueError("m must be at least 1")
        key = (self._model.version, num_rows)
        with self._lock:
            cached = self._grid_cache.get(key)
            if cached is not None:
                return cached
            grid = build_heatmap(
                corpus,
                self._features,
                self._model,
                num_rows=num_rows,
                words_per_row=self._config.words_per_row,
            )
            payload = json.dumps(
                {"status": "ok", "grid": grid_export(grid)}, sort_keys=True
            ).encode("utf-8")
            self._grid_cache[key] = (grid, payload)
            return grid, payload

    def heatmap_payload(self, m: int | None = None) -> bytes:
        """Serialized grid export; byte-identical across calls at one version."""
        return self._grid(m)[1]

    def heatmap_export(self, m: int | None = None) -> dict:
        return grid_export(self._grid(m)[0])

    def cell_sample(self, row: int, day: int, n: int, m: int | None = None,
                    seed: int | None = None) -> dict:
        corpus = self._require_corpus()
        grid, _ = self._grid(m)
        if not 0 <= row < grid.num_rows:
            raise ValueError(f"row {row} outside [0, {grid.num_rows})")
        if not 0 <= day < grid.num_days:
            raise ValueError(f"day {day} outside [0, {grid.num_days})")
        ids = sample_cell(
            grid.cells[row][day], n, self._config.sample_seed if seed is None else seed
        )
        return {
            "status": "ok",
            "doc_ids": ids,
            "documents": [_render_document(corpus.document(i)) for i in ids],
            "model_version": grid.model_version,
        }

    # --- question / judgment flow --------------------------------------------------

    def _expire_tokens(self) -> None:
        now = self._clock()
        ttl = self._config.token_ttl_seconds
        expired = [tok for tok, (_, issued) in self._pending.items() if issued + ttl <= now]
        for tok in expired:
            del self._pending[tok]

    def region_question(self, region: Region | dict, m: int | None = None) -> dict:
        """A pair question over an unasked pair in the region, or an exhausted signal."""
        corpus = self._require_corpus()
        if isinstance(region, dict):
            region = Region(
                row_lo=int(region["row_lo"]),
                row_hi=int(region["row_hi"]),
                day_lo=int(region["day_lo"]),
                day_hi=int(region["day_hi"]),
            )
        grid, _ = self._grid(m)
        with self._lock:
            self._expire_tokens()
            asked = self._answered | {pair for pair, _ in self._pending.values()}
            seed = self._config.question_seed + 1000003 * self._question_counter
            self._question_counter += 1
            pair = sample_region_pair(region, grid, asked, seed)
            if pair is None:
                return {"status": "exhausted", "model_version": grid.model_version}
            token = uuid.uuid4().hex
            self._pending[token] = (pair, self._clock())
            return {
                "status": "ok",
                "token": token,
                "documents": [
                    _render_document(corpus.document(pair[0])),
                    _render_document(corpus.document(pair[1])),
                ],
                "model_version": grid.model_version,
            }

    def submit_judgment(self, token: str, label: str, annotator: str) -> dict:
        self._require_corpus()
        if label not in VALID_LABELS:
            raise ValueError(f"label must be one of {VALID_LABELS}, got {label!r}")
        if not annotator:
            raise ValueError("annotator must be non-empty")
        with self._lock:
            assert self._log is not None
            self._expire_tokens()
            if token not in self._pending:
                raise ValueError("unknown, expired, or already-answered question token")
            pair, _ = self._pending.pop(token)
            judgment = PairJudgment.make(
                pair[0], pair[1], label, annotator, created_at=int(self._clock())
            )
            self._log.record(judgment)
            self._answered.add(pair)
            self._append_event({"kind": "judgment", **judgment.to_record()})
            return {
                "status": "ok",
                "judgment_count": len(self._log),
                "triplet_count": len(build_triplets(self._log)),
            }

    # --- training --------------------------------------------------------------------

    def _resolve_train_config(self, overrides: dict | None) -> dict:
        base = self._config.train.to_dict()
        if overrides:
            unknown = set(overrides) - set(base)
            if unknown:
                raise ValueError(f"unknown training overrides: {sorted(unknown)}")
            base.update(overrides)
        if overrides is None or "seed" not in overrides:
            assert self._model is not None
            base["seed"] = self._config.train.seed + self._model.version
        return base

    def retrain(self, overrides: dict | None = None) -> dict:
        """Train on current feedback and install the new snapshot atomically.

        A request arriving while a run is in flight waits for that run and
        observes its version: overlapping requests produce exactly one run.
        """
        self._require_corpus()
        with self._lock:
            assert self._log is not None and self._model is not None
            if self._training:
                while self._training:
                    self._train_done.wait()
                return {"status": "ok", "model_version": self._model.version}
            resolved = self._resolve_train_config(overrides)
            if resolved["mining_mode"] == "offline":
                triplets = build_triplets(self._log)
                if not triplets:
                    raise ValueError(
                        "no triplets to train on: need judgments where a shared anchor "
                        "has both a same-event and a different-event pair"
                    )
                labeled = None
            else:
                groups = positive_closure_groups(self._log)
                labeled = sorted(groups.items())
                if len(set(groups.values())) < 2:
                    raise ValueError(
                        "batch-hard mining needs positive pairs forming at least two groups"
                    )
                triplets = None
            params = self._model
            features = self._features
            self._training = True
        try:
            config = TrainConfig(**resolved)
            new_params = train(params, features, config, triplets=triplets, labeled=labeled)
        except BaseException:
            with self._lock:
                self._training = False
                self._train_done.notify_all()
            raise
        with self._lock:
            self._model = new_params
            self._grid_cache = {}
            self._cluster_cache = {}
            self._append_event({"kind": "retrain", "config": resolved})
            self._save_model()
            self._training = False
            self._train_done.notify_all()
            return {"status": "ok", "model_version": new_params.version}

    def model_snapshot_json(self) -> str:
        with self._lock:
            self._require_corpus()
            assert self._model is not None and self._embedder is not None
            return snapshot_to_json(self._model, self._embedder.identifier)

    # --- clustering / reports -----------------------------------------------------

    def clustering(self, tau: float | None = None) -> EventClustering:
        corpus = self._require_corpus()
        assert self._model is not None and self._features is not None
        tau_value = self._config.tau if tau is None else float(tau)
        key = (self._model.version, tau_value)
        with self._lock:
            cached = self._cluster_cache.get(key)
            if cached is not None:
                return cached
            clustering = cluster_online(corpus, self._features, self._model, tau_value)
            self._cluster_cache[key] = clustering
            return clustering

    def clustering_report(self, tau: float | None = None) -> dict:
        clustering = self.clustering(tau)
        return {"status": "ok", **clustering_export(clustering)}

    def evaluation_report(self, tau: float | None = None, m: int | None = None) -> dict:
        """BCubed against the gold assignment plus the heatmap row-purity diagnostic."""
        with self._lock:
            if self._gold is None:
                raise ValueError("no gold assignment uploaded")
            gold = dict(self._gold)
        clustering = self.clustering(tau)
        pred = {doc_id: clustering.assignment[doc_id] for doc_id in gold}
        score = bcubed(pred, gold)
        grid, _ = self._grid(m)
        purity = row_purity(grid, gold)
        return {
            "status": "ok",
            "precision": score.precision,
            "recall": score.recall,
            "f1": score.f1,
            "row_purity": purity,
            "num_documents": len(gold),
            "model_version": clustering.model_version,
            "tau": clustering.tau,
        }

    def feedback_report(self, tau: float | None = None) -> dict:
        """How well the current clustering agrees with each recorded judgment."""
        self._require_corpus()
        with self._lock:
            assert self._log is not None
            entries = self._log.annotator_labels()
        if not entries:
            return {"status": "ok", "num_judgments": 0, "satisfied": 0, "fraction": None}
        clustering = self.clustering(tau)
        assignment = clustering.assignment
        total = 0
        satisfied = 0
        for (doc_a, doc_b), by_annotator in entries.items():
            event_a = assignment.get(doc_a, UNCLUSTERED)
            event_b = assignment.get(doc_b, UNCLUSTERED)
            together = event_a == event_b and event_a != UNCLUSTERED
            for label in by_annotator.values():
                total += 1
                if (label == LABEL_SAME) == together:
                    satisfied += 1
        return {
            "status": "ok",
            "num_judgments": total,
            "satisfied": satisfied,
            "fraction": satisfied / total,
            "model_version": clustering.model_version,
        }

    # --- replay ----------------------------------------------------------------------

    def replay_events(self, lines) -> int:
        """Re-apply logged judgment and retrain events against the loaded corpus."""
        self._require_corpus()
        count = 0
        self._replaying = True
        try:
            for line in lines:
                if not line.strip():
                    continue
                record = json.loads(line)
                kind = record.get("kind")
                if kind == "judgment":
                    judgment = PairJudgment.from_record(record)
                    with self._lock:
                        assert self._log is not None
                        self._log.record(judgment)
                        self._answered.add(judgment.pair)
                elif kind == "retrain":
                    self.retrain(record["config"])
                else:
                    raise ValueError(f"unknown event kind {kind!r}")
                count += 1
        finally:
            self._replaying = False
        return count
