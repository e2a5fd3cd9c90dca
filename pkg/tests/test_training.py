"""Judgment log, triplet construction, mining, loss, and gradient tests."""

import itertools
import json

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from topictime.corpus import ingest_lines
from topictime.model import (
    CorpusFeatures,
    RandomProjectionEmbedder,
    encode_corpus,
    grads_to_vector,
    init_params,
    params_to_vector,
    vector_to_params,
)
from topictime.training import (
    LABEL_DIFFERENT,
    LABEL_SAME,
    JudgmentLog,
    PairJudgment,
    TrainConfig,
    Triplet,
    build_triplets,
    mine_batch_hard,
    positive_closure_groups,
    record_judgment,
    train,
    triplet_batch_loss,
    triplet_loss,
)

DAY = 86400


def judge(a, b, label, annotator="ann", created_at=0):
    return PairJudgment.make(a, b, label, annotator, created_at)


def log_with(*judgments, known_ids=None):
    log = JudgmentLog(known_ids=known_ids)
    for j in judgments:
        log.record(j)
    return log


# --- judgment log -------------------------------------------------------------


def test_record_appends():
    log = log_with(judge("a", "b", LABEL_SAME))
    assert len(log) == 1


def test_relabel_replaces_and_keeps_history():
    log = log_with(
        judge("a", "b", LABEL_SAME, created_at=1),
        judge("a", "b", LABEL_DIFFERENT, created_at=2),
    )
    assert log.current_labels()[("a", "b")] == LABEL_DIFFERENT
    assert len(log.history("a", "b")) == 2


def test_self_pair_rejected():
    with pytest.raises(ValueError):
        judge("a", "a", LABEL_SAME)


def test_unknown_id_rejected():
    log = JudgmentLog(known_ids={"a", "b"})
    with pytest.raises(ValueError, match="zzz"):
        log.record(judge("a", "zzz", LABEL_SAME))


def test_pair_stored_canonically():
    log = log_with(judge("b", "a", LABEL_SAME))
    assert ("a", "b") in log.current_labels()


def test_invalid_label_rejected():
    with pytest.raises(ValueError):
        judge("a", "b", "maybe")


def test_majority_vote_across_annotators():
    log = log_with(
        judge("a", "b", LABEL_SAME, annotator="p"),
        judge("a", "b", LABEL_SAME, annotator="q"),
        judge("a", "b", LABEL_DIFFERENT, annotator="r"),
    )
    assert log.current_labels()[("a", "b")] == LABEL_SAME


def test_tied_annotators_excluded():
    log = log_with(
        judge("a", "b", LABEL_SAME, annotator="p"),
        judge("a", "b", LABEL_DIFFERENT, annotator="q"),
    )
    assert ("a", "b") not in log.current_labels()


def test_log_file_replay(tmp_path):
    path = tmp_path / "log.jsonl"
    log = JudgmentLog(path=path)
    log.record(judge("a", "b", LABEL_SAME, created_at=5))
    log.record(judge("a", "c", LABEL_DIFFERENT, created_at=6))
    replayed = JudgmentLog(path=path)
    assert len(replayed) == 2
    assert replayed.current_labels() == log.current_labels()


def test_record_judgment_function():
    log = JudgmentLog()
    record_judgment(judge("a", "b", LABEL_SAME), log)
    assert len(log) == 1


# --- build_triplets -------------------------------------------------------------


def enumerate_triplets_oracle(log):
    """Brute force over all ordered id triples consistent with current labels."""
    labels = log.current_labels()
    ids = sorted({d for pair in labels for d in pair})
    out = []
    for anchor, pos, neg in itertools.permutations(ids, 3):
        pair_p = tuple(sorted((anchor, pos)))
        pair_n = tuple(sorted((anchor, neg)))
        if labels.get(pair_p) == LABEL_SAME and labels.get(pair_n) == LABEL_DIFFERENT:
            out.append(Triplet(anchor, pos, neg))
    out.sort(key=lambda t: (t.anchor, t.positive, t.negative))
    return out


def test_build_triplets_shared_anchor():
    log = log_with(judge("a", "b", LABEL_SAME), judge("a", "c", LABEL_DIFFERENT))
    assert build_triplets(log) == [Triplet("a", "b", "c")]


def test_build_triplets_no_shared_anchor():
    log = log_with(judge("a", "b", LABEL_SAME), judge("c", "d", LABEL_DIFFERENT))
    assert build_triplets(log) == []


def test_build_triplets_matches_enumeration():
    log = log_with(
        judge("a", "b", LABEL_SAME),
        judge("a", "c", LABEL_DIFFERENT),
        judge("a", "d", LABEL_DIFFERENT),
    )
    got = build_triplets(log)
    assert got == [Triplet("a", "b", "c"), Triplet("a", "b", "d")]
    assert got == enumerate_triplets_oracle(log)


def random_log(rng, max_judgments=50):
    ids = [f"d{i}" for i in range(rng.integers(3, 10))]
    log = JudgmentLog()
    for _ in range(int(rng.integers(1, max_judgments + 1))):
        a, b = rng.choice(len(ids), size=2, replace=False)
        label = LABEL_SAME if rng.random() < 0.5 else LABEL_DIFFERENT
        log.record(judge(ids[a], ids[b], label, annotator=f"ann{rng.integers(3)}"))
    return log


def test_build_triplets_random_logs_smoke():
    rng = np.random.default_rng(42)
    for _ in range(40):
        log = random_log(rng)
        assert build_triplets(log) == enumerate_triplets_oracle(log)


# --- batch-hard mining -----------------------------------------------------------


def mine_oracle(batch, reprs):
    """Scan the full in-batch distance matrix, loops and explicit ties only."""
    items = [(i, lab) for i, lab in batch if np.any(reprs[i])]
    units = {
        i: reprs[i] / np.linalg.norm(reprs[i]) for i, _ in items
    }

    def dist(x, y):
        return 1.0 - float(units[x] @ units[y])

    out = []
    for anchor, label in items:
        same = [i for i, lab in items if i != anchor and lab == label]
        diff = [i for i, lab in items if lab != label]
        if not same or not diff:
            continue
        pos = sorted(same, key=lambda i: (-dist(anchor, i), i))[0]
        neg = sorted(diff, key=lambda i: (dist(anchor, i), i))[0]
        out.append(Triplet(anchor, pos, neg))
    return out


def test_mine_batch_hard_worked_example():
    # unit vectors with cosines .6/.8/.1 => distances .4/.2/.9 (Cholesky of the Gram)
    reprs = {
        "1": np.array([1.0, 0.0, 0.0]),
        "2": np.array([0.6, 0.8, 0.0]),
        "3": np.array([0.8, -0.475, 0.3665719574653794]),
    }
    batch = [("1", "A"), ("2", "A"), ("3", "B")]
    got = mine_batch_hard(batch, reprs)
    assert got == [Triplet("1", "2", "3"), Triplet("2", "1", "3")]
    assert got == mine_oracle(batch, reprs)


def test_mine_batch_hard_single_label():
    reprs = {"1": np.array([1.0, 0.0]), "2": np.array([0.0, 1.0])}
    assert mine_batch_hard([("1", "A"), ("2", "A")], reprs) == []


def test_mine_batch_hard_tie_goes_to_smaller_id():
    # two negatives exactly symmetric around the anchor
    reprs = {
        "a": np.array([1.0, 0.0]),
        "b": np.array([1.0, 0.0]),
        "n2": np.array([0.0, 1.0]),
        "n1": np.array([0.0, -1.0]),
    }
    batch = [("a", "X"), ("b", "X"), ("n1", "Y"), ("n2", "Y")]
    got = mine_batch_hard(batch, reprs)
    assert Triplet("a", "b", "n1") in got


def random_batch(rng):
    size = int(rng.integers(2, 33))
    num_labels = int(rng.integers(1, 5))
    batch = []
    reprs = {}
    for i in range(size):
        doc_id = f"d{i:02d}"
        batch.append((doc_id, f"L{rng.integers(num_labels)}"))
        vec = rng.normal(size=5)
        reprs[doc_id] = vec / np.linalg.norm(vec)
    return batch, reprs


def test_mine_batch_hard_random_batches_smoke():
    rng = np.random.default_rng(7)
    for _ in range(40):
        batch, reprs = random_batch(rng)
        assert mine_batch_hard(batch, reprs) == mine_oracle(batch, reprs)


# --- triplet loss -----------------------------------------------------------------


def test_triplet_loss_zero_at_boundary():
    # d(a,p) = 0, d(a,n) = alpha -> exactly zero; norms and the cosine 0.5
    # are all exactly representable here
    a = np.array([1.0, 0.0, 0.0, 0.0])
    p = np.array([1.0, 0.0, 0.0, 0.0])
    n = np.array([2.0, 2.0, 2.0, 2.0])  # cos = 2/4 = .5 -> dist .5
    assert triplet_loss(a, p, n, alpha=0.5) == 0.0


def test_triplet_loss_symmetric_distances():
    a = np.array([1.0, 0.0, 0.0])
    p = np.array([0.6, 0.8, 0.0])
    n = np.array([0.6, 0.0, 0.8])
    assert triplet_loss(a, p, n, alpha=0.35) == pytest.approx(0.35)


def test_triplet_loss_hand_evaluated():
    # cosines .5/.6 -> distances .5/.4; hinge = .5 - .4 + .2 = .3
    a = np.array([1.0, 0.0, 0.0])
    p = np.array([0.5, 0.8660254037844386, 0.0])
    n = np.array([0.6, 0.0, 0.8])
    assert triplet_loss(a, p, n, alpha=0.2) == pytest.approx(0.3)


@given(st.integers(min_value=0, max_value=2**31), st.floats(min_value=0.01, max_value=1.0))
@settings(max_examples=150)
def test_triplet_loss_nonnegative_and_zero_condition(seed, alpha):
    rng = np.random.default_rng(seed)
    a, p, n = (rng.normal(size=4) for _ in range(3))
    from topictime.model import distance

    loss = triplet_loss(a, p, n, alpha)
    assert loss >= 0.0
    hinge = distance(a, p) - distance(a, n) + alpha
    if loss == 0.0:
        assert hinge <= 1e-12
    else:
        assert loss == pytest.approx(hinge)


# --- gradients ---------------------------------------------------------------------


def random_features(rng, n_docs, d):
    base = rng.normal(size=(n_docs, d))
    base /= np.linalg.norm(base, axis=1, keepdims=True)
    ids = [f"d{i}" for i in range(n_docs)]
    return CorpusFeatures(
        ids=ids,
        base=base,
        t=rng.uniform(0.0, 1.0, size=n_docs),
        row_of={doc_id: i for i, doc_id in enumerate(ids)},
    )


def random_triplets(rng, ids, count):
    triplets = []
    for _ in range(count):
        a, p, n = rng.choice(len(ids), size=3, replace=False)
        triplets.append(Triplet(ids[a], ids[p], ids[n]))
    return triplets


def away_from_kink(params, features, triplets, margin, gap=1e-3):
    """True when every triplet's hinge is at least `gap` from zero and one is active."""
    from topictime.model import forward

    reprs = {
        i: forward(features.base_of(i), features.t_of(i), params).repr
        for i in features.ids
    }
    hinges = [
        float(reprs[t.anchor] @ reprs[t.negative] - reprs[t.anchor] @ reprs[t.positive])
        + margin
        for t in triplets
    ]
    return all(abs(h) > gap for h in hinges) and any(h > 0 for h in hinges)


def fd_gradient(params, features, triplets, margin, h=1e-5):
    vec = params_to_vector(params)
    grad = np.empty_like(vec)
    for i in range(vec.size):
        up = vec.copy()
        up[i] += h
        down = vec.copy()
        down[i] -= h
        loss_up = triplet_batch_loss(
            vector_to_params(up, params), features, triplets, margin, with_grads=False
        ).loss
        loss_down = triplet_batch_loss(
            vector_to_params(down, params), features, triplets, margin, with_grads=False
        ).loss
        grad[i] = (loss_up - loss_down) / (2 * h)
    return grad


def check_gradients_at_random_points(num_points, seed, rel_tol=1e-4):
    """Shared by the unit smoke test and the acceptance criterion."""
    rng = np.random.default_rng(seed)
    margin = 0.2
    checked = 0
    attempts = 0
    while checked < num_points:
        attempts += 1
        assert attempts < num_points * 30, "could not find enough non-degenerate points"
        d, k, m = 6, 3, 4
        params = init_params(num_days=20, dim=d, time_k=k, head_m=m,
                             seed=int(rng.integers(2**31)))
        # spread parameters out so gradients are not tiny
        vec = params_to_vector(params) + rng.normal(scale=0.3, size=params_to_vector(params).size)
        params = vector_to_params(vec, params)
        features = random_features(rng, n_docs=int(rng.integers(4, 8)), d=d)
        triplets = random_triplets(rng, features.ids, count=int(rng.integers(1, 5)))
        if not away_from_kink(params, features, triplets, margin):
            continue
        analytic = grads_to_vector(
            triplet_batch_loss(params, features, triplets, margin).grads
        )
        numeric = fd_gradient(params, features, triplets, margin)
        # compare per parameter array
        sizes = [k, k, k * d, d * d, d * d, d * d, d * m]
        names = ["omega", "phi", "p_t", "wq", "wk", "wv", "a"]
        offset = 0
        for name, size in zip(names, sizes):
            got = analytic[offset : offset + size]
            ref = numeric[offset : offset + size]
            denom = max(np.linalg.norm(got), np.linalg.norm(ref), 1e-10)
            rel = np.linalg.norm(got - ref) / denom
            assert rel < rel_tol, f"{name}: relative gradient error {rel:.2e}"
            offset += size
        checked += 1
    return checked


def test_gradients_match_finite_differences_smoke():
    assert check_gradients_at_random_points(num_points=5, seed=123) == 5


def test_single_step_descends_on_active_triplet():
    rng = np.random.default_rng(77)
    from topictime.model import sgd_step

    found = 0
    for _ in range(50):
        params = init_params(num_days=20, dim=6, time_k=3, head_m=4,
                             seed=int(rng.integers(2**31)))
        features = random_features(rng, n_docs=3, d=6)
        triplet = Triplet(*features.ids)
        result = triplet_batch_loss(params, features, [triplet], margin=0.2)
        if result.loss <= 0.01:
            continue
        stepped = sgd_step(params, result.grads, lr=1e-3)
        after = triplet_batch_loss(stepped, features, [triplet], margin=0.2).loss
        assert after < result.loss
        found += 1
    assert found >= 10


# --- train ---------------------------------------------------------------------------


def separable_corpus():
    texts_a = ["storm flood rain", "flood rain river", "storm river rain"]
    texts_b = ["match goal score", "goal score final", "match final score"]
    lines = []
    for i, text in enumerate(texts_a):
        lines.append(json.dumps({"id": f"a{i}", "timestamp": i * DAY, "text": text}))
    for i, text in enumerate(texts_b):
        lines.append(json.dumps({"id": f"b{i}", "timestamp": (i + 20) * DAY, "text": text}))
    corpus = ingest_lines(lines, min_doc_freq=1)
    embedder = RandomProjectionEmbedder(corpus, dim=8, seed=2)
    return corpus, encode_corpus(corpus, embedder)


def separable_log():
    log = JudgmentLog()
    for x, y in [("a0", "a1"), ("a1", "a2"), ("b0", "b1"), ("b1", "b2")]:
        log.record(judge(x, y, LABEL_SAME))
    for x, y in [("a0", "b0"), ("a1", "b1"), ("a2", "b2"), ("a0", "b2")]:
        log.record(judge(x, y, LABEL_DIFFERENT))
    return log


def test_train_requires_data():
    _, features = separable_corpus()
    params = init_params(num_days=30, dim=8, time_k=3, head_m=4)
    with pytest.raises(ValueError, match="no training data"):
        train(params, features, TrainConfig(), triplets=[])


def test_train_is_deterministic():
    _, features = separable_corpus()
    params = init_params(num_days=30, dim=8, time_k=3, head_m=4)
    triplets = build_triplets(separable_log())
    config = TrainConfig(epochs=3, seed=5)
    first = train(params, features, config, triplets=triplets)
    second = train(params, features, config, triplets=triplets)
    assert np.array_equal(params_to_vector(first), params_to_vector(second))


def test_train_zero_active_triplets_only_bumps_version():
    # anchor and positive share identical features; negative is far away,
    # so with a small margin every hinge is already satisfied
    base = np.array([[1.0, 0.0], [1.0, 0.0], [-1.0, 0.0]])
    features = CorpusFeatures(
        ids=["a", "p", "n"],
        base=base,
        t=np.array([0.1, 0.1, 0.9]),
        row_of={"a": 0, "p": 1, "n": 2},
    )
    params = init_params(num_days=10, dim=2, time_k=2, head_m=2, seed=1)
    triplets = [Triplet("a", "p", "n")]
    result = triplet_batch_loss(params, features, triplets, margin=0.05)
    assert result.loss == 0.0
    trained = train(params, features, TrainConfig(margin=0.05, epochs=2), triplets=triplets)
    assert trained.version == params.version + 1
    assert np.array_equal(params_to_vector(trained), params_to_vector(params))


def test_train_version_increments():
    _, features = separable_corpus()
    params = init_params(num_days=30, dim=8, time_k=3, head_m=4)
    trained = train(params, features, TrainConfig(epochs=1),
                    triplets=build_triplets(separable_log()))
    assert trained.version == params.version + 1


def test_converged_training_orders_every_triplet():
    corpus, features = separable_corpus()
    log = separable_log()
    triplets = build_triplets(log)
    params = init_params(num_days=30, dim=8, time_k=3, head_m=4, seed=3)
    config = TrainConfig(epochs=120, learning_rate=0.1, seed=1)
    trained = train(params, features, config, triplets=triplets)

    from topictime.model import distance, event_repr

    reprs = {
        i: event_repr(features.base_of(i), features.t_of(i), trained)
        for i in features.ids
    }
    for t in triplets:
        assert distance(reprs[t.anchor], reprs[t.positive]) < distance(
            reprs[t.anchor], reprs[t.negative]
        )


def test_positive_closure_groups():
    log = log_with(
        judge("a", "b", LABEL_SAME),
        judge("b", "c", LABEL_SAME),
        judge("x", "y", LABEL_SAME),
        judge("a", "x", LABEL_DIFFERENT),
    )
    groups = positive_closure_groups(log)
    assert groups["a"] == groups["b"] == groups["c"]
    assert groups["x"] == groups["y"]
    assert groups["a"] != groups["x"]


def test_train_batch_hard_mode_runs():
    corpus, features = separable_corpus()
    log = separable_log()
    labeled = sorted(positive_closure_groups(log).items())
    params = init_params(num_days=30, dim=8, time_k=3, head_m=4, seed=3)
    config = TrainConfig(epochs=30, learning_rate=0.1, mining_mode="batch-hard",
                         batch_size=6, seed=2)
    trained = train(params, features, config, labeled=labeled)
    assert trained.version == params.version + 1

    from topictime.model import distance, event_repr

    reprs = {
        i: event_repr(features.base_of(i), features.t_of(i), trained)
        for i in features.ids
    }
    within = distance(reprs["a0"], reprs["a1"])
    across = distance(reprs["a0"], reprs["b0"])
    assert within < across


def test_train_batch_hard_requires_two_labels():
    _, features = separable_corpus()
    params = init_params(num_days=30, dim=8, time_k=3, head_m=4)
    with pytest.raises(ValueError, match="no training data"):
        train(params, features, TrainConfig(mining_mode="batch-hard"),
              labeled=[("a0", 0), ("a1", 0)])
