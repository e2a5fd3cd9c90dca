"""Time-aware document representation and its learnable parameters.

A document is embedded in three stages: a frozen base text embedding
(pluggable provider; the default projects TF-IDF through a seeded random
matrix), a sinusoidal time embedding with one linear component, and a
single-head self-attention fusion over the two tokens (text, time) followed
by a linear metric head. The head output, L2-normalized, is the event-space
representation that similarity, clustering, and the heatmap all operate on.

Everything here is plain numpy; the backward pass through the whole stack is
written out by hand so training (see `training`) can check its gradients
against finite differences.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, replace
from pathlib import Path
from typing import Protocol

import numpy as np

from .corpus import Corpus, Document, day_index, featurize_sparse


class EmbeddingError(RuntimeError):
    """Base embedding provider failed for a specific document."""


@dataclass(frozen=True)
class TimeEmbedParams:
    """Frequencies and phases; index 0 is the linear component, the rest sinusoidal."""

    omega: np.ndarray  # (k,)
    phi: np.ndarray  # (k,)

    @property
    def k(self) -> int:
        return self.omega.shape[0]


@dataclass(frozen=True)
class FusionParams:
    """Single-head attention over the 2-token sequence plus the time lift."""

    wq: np.ndarray  # (d, d)
    wk: np.ndarray  # (d, d)
    wv: np.ndarray  # (d, d)
    p_t: np.ndarray  # (k, d), lifts the time embedding to dimension d


@dataclass(frozen=True)
class MetricHead:
    a: np.ndarray  # (d, m)


@dataclass(frozen=True)
class EventModelParams:
    """Immutable snapshot of all learnable parameters.

    version increments on every retrain; readers may hold any snapshot
    concurrently and switch atomically.
    """

    time: TimeEmbedParams
    fusion: FusionParams
    head: MetricHead
    version: int = 0

    @property
    def dim(self) -> int:
        return self.fusion.wq.shape[0]

    @property
    def time_k(self) -> int:
        return self.time.k

    @property
    def head_m(self) -> int:
        return self.head.a.shape[1]


def init_params(
    num_days: int,
    dim: int = 64,
    time_k: int = 8,
    head_m: int = 32,
    seed: int = 0,
) -> EventModelParams:
    """Seeded initialization.

    Attention matrices, the time lift, and the head draw from
    uniform(-1/sqrt(d), 1/sqrt(d)); sinusoid frequencies are log-spaced over
    periods from 2 days to 2 * num_days so multiple time scales are covered
    from the start; phases start at zero.
    """
    if time_k < 2:
        raise ValueError("time_k must be at least 2")
    if not 2 <= head_m <= dim:
        raise ValueError("head_m must lie in [2, dim]")
    rng = np.random.default_rng(seed)
    bound = 1.0 / math.sqrt(dim)
    wq = rng.uniform(-bound, bound, size=(dim, dim))
    wk = rng.uniform(-bound, bound, size=(dim, dim))
    wv = rng.uniform(-bound, bound, size=(dim, dim))
    p_t = rng.uniform(-bound, bound, size=(time_k, dim))
    a = rng.uniform(-bound, bound, size=(dim, head_m))

    # Time input is the day index scaled by 1/num_days, so a period of P days
    # corresponds to omega = 2*pi*num_days / P.
    periods = np.logspace(math.log10(2.0), math.log10(2.0 * num_days), time_k - 1)
    omega = np.concatenate(([1.0], 2.0 * np.pi * num_days / periods))
    phi = np.zeros(time_k)

    return EventModelParams(
        time=TimeEmbedParams(omega=omega, phi=phi),
        fusion=FusionParams(wq=wq, wk=wk, wv=wv, p_t=p_t),
        head=MetricHead(a=a),
        version=0,
    )


def time_embed(t: float, params: TimeEmbedParams) -> np.ndarray:
    """out[0] = omega[0]*t + phi[0]; out[i] = sin(omega[i]*t + phi[i]) for i >= 1."""
    args = params.omega * t + params.phi
    out = np.empty_like(args)
    out[0] = args[0]
    out[1:] = np.sin(args[1:])
    return out


def similarity(a: np.ndarray, b: np.ndarray) -> float:
    """Cosine similarity in [-1, 1]; symmetric; rejects zero-norm inputs."""
    if a.shape != b.shape:
        raise ValueError(f"dimension mismatch: {a.shape} vs {b.shape}")
    na = np.linalg.norm(a)
    nb = np.linalg.norm(b)
    if na == 0.0 or nb == 0.0:
        raise ValueError("similarity undefined for zero-norm input")
    return float(np.clip(np.dot(a, b) / (na * nb), -1.0, 1.0))


def distance(a: np.ndarray, b: np.ndarray) -> float:
    """1 - cosine; the single geometry used for training and clustering."""
    return 1.0 - similarity(a, b)


def is_degenerate(vec: np.ndarray) -> bool:
    """A zero vector marks a document the model cannot place."""
    return not np.any(vec)


@dataclass
class ForwardCache:
    """All intermediates of one document forward pass, kept for backprop."""

    base: np.ndarray  # (d,) frozen text embedding
    t: float
    args: np.ndarray  # (k,) omega*t + phi
    tau: np.ndarray  # (k,) time embedding
    x_mat: np.ndarray  # (2, d) token matrix [text; lifted time]
    q: np.ndarray  # (2, d)
    k: np.ndarray  # (2, d)
    v: np.ndarray  # (2, d)
    attn: np.ndarray  # (2, 2) row-softmax weights
    fused: np.ndarray  # (d,) attention text row + residual
    z: np.ndarray  # (m,) head output before normalization
    z_norm: float
    repr: np.ndarray  # (m,) unit vector, or zeros when degenerate
    degenerate: bool


def fuse(text_vec: np.ndarray, time_vec: np.ndarray, params: FusionParams) -> np.ndarray:
    """Attend over the two-token sequence and read out the text row + residual."""
    d = params.wq.shape[0]
    if text_vec.shape != (d,):
        raise ValueError(f"text vector has shape {text_vec.shape}, expected ({d},)")
    if time_vec.shape != (params.p_t.shape[0],):
        raise ValueError(
            f"time vector has shape {time_vec.shape}, expected ({params.p_t.shape[0]},)"
        )
    x_mat = np.stack([text_vec, time_vec @ params.p_t])
    q = x_mat @ params.wq
    k = x_mat @ params.wk
    v = x_mat @ params.wv
    scores = (q @ k.T) / math.sqrt(d)
    attn = _row_softmax(scores)
    return attn[0] @ v + text_vec


def _row_softmax(scores: np.ndarray) -> np.ndarray:
    shifted = scores - scores.max(axis=-1, keepdims=True)
    e = np.exp(shifted)
    return e / e.sum(axis=-1, keepdims=True)


def forward(base_vec: np.ndarray, t: float, params: EventModelParams) -> ForwardCache:
    """Full per-document forward pass with cached intermediates.

    A degenerate base embedding propagates to a degenerate (zero) output, as
    does an exactly-zero head output.
    """
    d = params.dim
    m = params.head_m
    args = params.time.omega * t + params.time.phi
    tau = np.empty_like(args)
    tau[0] = args[0]
    tau[1:] = np.sin(args[1:])

    if is_degenerate(base_vec):
        zero2 = np.zeros((2, 2))
        return ForwardCache(
            base=base_vec, t=t, args=args, tau=tau,
            x_mat=np.zeros((2, d)), q=np.zeros((2, d)), k=np.zeros((2, d)),
            v=np.zeros((2, d)), attn=zero2, fused=np.zeros(d),
            z=np.zeros(m), z_norm=0.0, repr=np.zeros(m), degenerate=True,
        )

    x_mat = np.stack([base_vec, tau @ params.fusion.p_t])
    q = x_mat @ params.fusion.wq
    k = x_mat @ params.fusion.wk
    v = x_mat @ params.fusion.wv
    scores = (q @ k.T) / math.sqrt(d)
    attn = _row_softmax(scores)
    fused = attn[0] @ v + base_vec
    z = fused @ params.head.a
    z_norm = float(np.linalg.norm(z))
    if z_norm == 0.0:
        rep = np.zeros(m)
        degenerate = True
    else:
        rep = z / z_norm
        degenerate = False
    return ForwardCache(
        base=base_vec, t=t, args=args, tau=tau, x_mat=x_mat, q=q, k=k, v=v,
        attn=attn, fused=fused, z=z, z_norm=z_norm, repr=rep, degenerate=degenerate,
    )


@dataclass
class ParamGrads:
    """Gradient accumulator mirroring the trained parameter arrays."""

    omega: np.ndarray
    phi: np.ndarray
    p_t: np.ndarray
    wq: np.ndarray
    wk: np.ndarray
    wv: np.ndarray
    a: np.ndarray

    @classmethod
    def zeros_like(cls, params: EventModelParams) -> "ParamGrads":
        return cls(
            omega=np.zeros_like(params.time.omega),
            phi=np.zeros_like(params.time.phi),
            p_t=np.zeros_like(params.fusion.p_t),
            wq=np.zeros_like(params.fusion.wq),
            wk=np.zeros_like(params.fusion.wk),
            wv=np.zeros_like(params.fusion.wv),
            a=np.zeros_like(params.head.a),
        )

    def scale(self, factor: float) -> None:
        for arr in (self.omega, self.phi, self.p_t, self.wq, self.wk, self.wv, self.a):
            arr *= factor


def backward(
    cache: ForwardCache,
    grad_repr: np.ndarray,
    params: EventModelParams,
    grads: ParamGrads,
) -> None:
    """Accumulate d(loss)/d(params) for one document given d(loss)/d(repr).

    Degenerate documents contribute nothing (their representation is a
    constant zero).
    """
    if cache.degenerate:
        return
    d = params.dim

    # r = z / ||z||
    r = cache.repr
    gz = (grad_repr - r * float(r @ grad_repr)) / cache.z_norm
    # z = fused @ A
    grads.a += np.outer(cache.fused, gz)
    g_fused = params.head.a @ gz
    # fused = attn[0] @ V + base (base frozen)
    g_out = np.zeros((2, d))
    g_out[0] = g_fused
    g_attn = g_out @ cache.v.T
    g_v = cache.attn.T @ g_out
    # row softmax
    g_scores = cache.attn * (g_attn - (g_attn * cache.attn).sum(axis=1, keepdims=True))
    scale = 1.0 / math.sqrt(d)
    g_q = (g_scores @ cache.k) * scale
    g_k = (g_scores.T @ cache.q) * scale
    # projections
    grads.wq += cache.x_mat.T @ g_q
    grads.wk += cache.x_mat.T @ g_k
    grads.wv += cache.x_mat.T @ g_v
    g_x = (
        g_q @ params.fusion.wq.T
        + g_k @ params.fusion.wk.T
        + g_v @ params.fusion.wv.T
    )
    # row 0 feeds the frozen base embedding; row 1 is the lifted time token
    g_u = g_x[1]
    grads.p_t += np.outer(cache.tau, g_u)
    g_tau = params.fusion.p_t @ g_u
    # tau[0] = args[0]; tau[i] = sin(args[i])
    g_args = np.empty_like(g_tau)
    g_args[0] = g_tau[0]
    g_args[1:] = g_tau[1:] * np.cos(cache.args[1:])
    grads.omega += g_args * cache.t
    grads.phi += g_args


def sgd_step(params: EventModelParams, grads: ParamGrads, lr: float) -> EventModelParams:
    """One gradient-descent step; returns a new snapshot, version unchanged."""
    return EventModelParams(
        time=TimeEmbedParams(
            omega=params.time.omega - lr * grads.omega,
            phi=params.time.phi - lr * grads.phi,
        ),
        fusion=FusionParams(
            wq=params.fusion.wq - lr * grads.wq,
            wk=params.fusion.wk - lr * grads.wk,
            wv=params.fusion.wv - lr * grads.wv,
            p_t=params.fusion.p_t - lr * grads.p_t,
        ),
        head=MetricHead(a=params.head.a - lr * grads.a),
        version=params.version,
    )


def bump_version(params: EventModelParams) -> EventModelParams:
    return replace(params, version=params.version + 1)


# --- flat parameter vector helpers (used by gradient checks) ---------------


def _param_arrays(params: EventModelParams) -> list[np.ndarray]:
    return [
        params.time.omega, params.time.phi, params.fusion.p_t,
        params.fusion.wq, params.fusion.wk, params.fusion.wv, params.head.a,
    ]


def params_to_vector(params: EventModelParams) -> np.ndarray:
    return np.concatenate([arr.ravel() for arr in _param_arrays(params)])


def grads_to_vector(grads: ParamGrads) -> np.ndarray:
    return np.concatenate(
        [arr.ravel() for arr in (grads.omega, grads.phi, grads.p_t,
                                 grads.wq, grads.wk, grads.wv, grads.a)]
    )


def vector_to_params(vec: np.ndarray, template: EventModelParams) -> EventModelParams:
    arrays = []
    offset = 0
    for arr in _param_arrays(template):
        size = arr.size
        arrays.append(vec[offset : offset + size].reshape(arr.shape).copy())
        offset += size
    omega, phi, p_t, wq, wk, wv, a = arrays
    return EventModelParams(
        time=TimeEmbedParams(omega=omega, phi=phi),
        fusion=FusionParams(wq=wq, wk=wk, wv=wv, p_t=p_t),
        head=MetricHead(a=a),
        version=template.version,
    )


# --- base embedding providers ----------------------------------------------


class BaseEmbedder(Protocol):
    """Pluggable frozen text encoder: document -> d-dimensional vector."""

    dim: int

    @property
    def identifier(self) -> str: ...

    def embed(self, doc: Document) -> np.ndarray: ...


class RandomProjectionEmbedder:
    """Default provider: TF-IDF projected through a fixed seeded random matrix.

    Self-contained and deterministic; a real text encoder can replace it via
    the same interface. Documents without in-vocabulary tokens embed to the
    zero vector (degenerate).
    """

    def __init__(self, corpus: Corpus, dim: int = 64, seed: int = 7):
        self.dim = dim
        self.seed = seed
        self._vocab = corpus.vocabulary
        self._n_docs = len(corpus)
        rng = np.random.default_rng(seed)
        self._projection = rng.standard_normal((len(self._vocab), dim)) / math.sqrt(dim)

    @property
    def identifier(self) -> str:
        return (
            f"tfidf-random-projection/dim={self.dim}/seed={self.seed}"
            f"/vocab={len(self._vocab)}"
        )

    @property
    def projection(self) -> np.ndarray:
        """Read-only view of the projection matrix (vocab size x dim)."""
        return self._projection

    def embed(self, doc: Document) -> np.ndarray:
        sparse = featurize_sparse(doc, self._vocab, self._n_docs)
        if not sparse:
            return np.zeros(self.dim)
        idxs = np.fromiter((i for i, _ in sparse), dtype=int, count=len(sparse))
        weights = np.fromiter((w for _, w in sparse), dtype=float, count=len(sparse))
        vec = weights @ self._projection[idxs]
        norm = np.linalg.norm(vec)
        if norm == 0.0:
            return np.zeros(self.dim)
        return vec / norm


@dataclass
class CorpusFeatures:
    """Frozen per-document model inputs, precomputed once per corpus.

    Rows follow corpus (timestamp, id) order. `t` is the day index scaled by
    1/num_days so sinusoid arguments stay well-conditioned.
    """

    ids: list[str]
    base: np.ndarray  # (n, d)
    t: np.ndarray  # (n,)
    row_of: dict[str, int]

    def base_of(self, doc_id: str) -> np.ndarray:
        return self.base[self.row_of[doc_id]]

    def t_of(self, doc_id: str) -> float:
        return float(self.t[self.row_of[doc_id]])

    def __len__(self) -> int:
        return len(self.ids)


def encode_corpus(corpus: Corpus, embedder: BaseEmbedder) -> CorpusFeatures:
    """Embed every document with the frozen provider and scale its day index."""
    n = len(corpus)
    base = np.empty((n, embedder.dim))
    t = np.empty(n)
    ids = []
    for row, doc in enumerate(corpus):
        try:
            base[row] = embedder.embed(doc)
        except Exception as exc:
            raise EmbeddingError(
                f"base embedding failed for document {doc.id!r}"
            ) from exc
        t[row] = day_index(doc.timestamp, corpus.axis) / corpus.axis.num_days
        ids.append(doc.id)
    return CorpusFeatures(ids=ids, base=base, t=t, row_of={d: i for i, d in enumerate(ids)})


def event_repr(base_vec: np.ndarray, t: float, params: EventModelParams) -> np.ndarray:
    """Event-space representation of one document (unit norm or degenerate zero)."""
    return forward(base_vec, t, params).repr


def batch_event_reprs(features: CorpusFeatures, params: EventModelParams) -> np.ndarray:
    """Vectorized event representations for a whole corpus, rows in corpus order.

    Matches the per-document `forward` path exactly (cross-checked in tests).
    """
    base = features.base  # (n, d)
    d = params.dim
    args = np.outer(features.t, params.time.omega) + params.time.phi  # (n, k)
    tau = np.empty_like(args)
    tau[:, 0] = args[:, 0]
    tau[:, 1:] = np.sin(args[:, 1:])

    x = np.stack([base, tau @ params.fusion.p_t], axis=1)  # (n, 2, d)
    q = x @ params.fusion.wq
    k = x @ params.fusion.wk
    v = x @ params.fusion.wv
    scores = q @ k.transpose(0, 2, 1) / math.sqrt(d)  # (n, 2, 2)
    attn = _row_softmax(scores)
    fused = np.einsum("nj,njd->nd", attn[:, 0, :], v) + base
    z = fused @ params.head.a  # (n, m)
    norms = np.linalg.norm(z, axis=1)

    degenerate = ~np.any(base, axis=1) | (norms == 0.0)
    safe = np.where(norms == 0.0, 1.0, norms)
    reprs = z / safe[:, None]
    reprs[degenerate] = 0.0
    return reprs


# --- model snapshot serialization -------------------------------------------

SNAPSHOT_FORMAT = "event-model/1"


def snapshot_to_json(params: EventModelParams, provider_id: str) -> str:
    """Serialize a model snapshot; floats round-trip bit-exactly via repr."""
    payload = {
        "format": SNAPSHOT_FORMAT,
        "version": params.version,
        "provider": provider_id,
        "omega": params.time.omega.tolist(),
        "phi": params.time.phi.tolist(),
        "p_t": params.fusion.p_t.tolist(),
        "wq": params.fusion.wq.tolist(),
        "wk": params.fusion.wk.tolist(),
        "wv": params.fusion.wv.tolist(),
        "a": params.head.a.tolist(),
    }
    return json.dumps(payload, sort_keys=True)


def snapshot_from_json(text: str) -> tuple[EventModelParams, str]:
    payload = json.loads(text)
    if payload.get("format") != SNAPSHOT_FORMAT:
        raise ValueError(f"unsupported snapshot format {payload.get('format')!r}")
    params = EventModelParams(
        time=TimeEmbedParams(
            omega=np.array(payload["omega"], dtype=float),
            phi=np.array(payload["phi"], dtype=float),
        ),
        fusion=FusionParams(
            wq=np.array(payload["wq"], dtype=float),
            wk=np.array(payload["wk"], dtype=float),
            wv=np.array(payload["wv"], dtype=float),
            p_t=np.array(payload["p_t"], dtype=float),
        ),
        head=MetricHead(a=np.array(payload["a"], dtype=float)),
        version=int(payload["version"]),
    )
    return params, payload["provider"]


def save_snapshot(params: EventModelParams, provider_id: str, path: str | Path) -> None:
    Path(path).write_text(snapshot_to_json(params, provider_id), encoding="utf-8")


def load_snapshot(path: str | Path) -> tuple[EventModelParams, str]:
    return snapshot_from_json(Path(path).read_text(encoding="utf-8"))
