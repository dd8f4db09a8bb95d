"""Downstream evaluation of embeddings.

Node classification: one-versus-rest L2-regularized logistic regression
fit by full-batch gradient descent on a stratified label split, scored
with Micro-F1 and Macro-F1 over repeated runs. Link prediction: hold
out a fraction of one view's edges, retrain on the reduced graph, then
rank held-out edges against non-edges with a logistic classifier over
Hadamard pair features (AUC with average-rank ties, AP with pessimistic
ties). Projection: top-2 principal components by power iteration.
"""

import warnings
from dataclasses import dataclass

import numpy as np

from .errors import ArgumentError, ShapeError, SplitError
from .graph import remove_edges, sample_nonedges
from .numkernel import sigmoid
from .seeding import STREAM_EVAL, STREAM_SPLIT, derive_rng

LOGISTIC_TOL = 1e-6
LOGISTIC_MAX_ITER = 5000
POWER_TOL = 1e-9
POWER_MAX_ITER = 10000


# ---------------------------------------------------------------------------
# metrics


def micro_macro_f1(y_true, y_pred):
    """(micro_f1, macro_f1) for single-label multi-class predictions.

    Micro aggregates TP/FP/FN over all classes (for single-label argmax
    prediction this equals accuracy). Macro averages per-class F1 over
    the classes present in y_true.
    """
    y_true = np.asarray(y_true)
    y_pred = np.asarray(y_pred)
    if y_true.shape != y_pred.shape:
        raise ShapeError("label arrays differ in length")
    classes = np.unique(y_true)
    tp_total = fp_total = fn_total = 0
    per_class = []
    for c in classes:
        tp = int(np.sum((y_pred == c) & (y_true == c)))
        fp = int(np.sum((y_pred == c) & (y_true != c)))
        fn = int(np.sum((y_pred != c) & (y_true == c)))
        tp_total += tp
        fp_total += fp
        fn_total += fn
        denom = 2 * tp + fp + fn
        per_class.append(2 * tp / denom if denom else 0.0)
    micro_denom = 2 * tp_total + fp_total + fn_total
    micro = 2 * tp_total / micro_denom if micro_denom else 0.0
    return micro, float(np.mean(per_class))


def ranking_auc(scores, labels):
    """Probability a random positive outranks a random negative; tied
    scores get their average rank."""
    scores = np.asarray(scores, dtype=np.float64)
    labels = np.asarray(labels)
    n_pos = int(np.sum(labels == 1))
    n_neg = len(labels) - n_pos
    if n_pos == 0 or n_neg == 0:
        raise ArgumentError("AUC needs at least one positive and one negative")
    order = np.argsort(scores, kind="mergesort")
    sorted_scores = scores[order]
    ranks = np.empty(len(scores))
    i = 0
    while i < len(scores):
        j = i
        while j < len(scores) and sorted_scores[j] == sorted_scores[i]:
            j += 1
        ranks[order[i:j]] = 0.5 * ((i + 1) + j)
        i = j
    rank_sum_pos = float(ranks[labels == 1].sum())
    return (rank_sum_pos - n_pos * (n_pos + 1) / 2.0) / (n_pos * n_neg)


def average_precision(scores, labels):
    """Mean of precision at each positive's rank, scores descending.

    Ties are broken pessimistically: a negative with the same score
    ranks ahead of a positive.
    """
    scores = np.asarray(scores, dtype=np.float64)
    labels = np.asarray(labels)
    n_pos = int(np.sum(labels == 1))
    if n_pos == 0:
        raise ArgumentError("AP needs at least one positive")
    order = np.lexsort((labels, -scores))
    hits = labels[order] == 1
    positions = np.flatnonzero(hits) + 1
    precisions = np.cumsum(hits)[positions - 1] / positions
    return float(precisions.mean())


# ---------------------------------------------------------------------------
# logistic regression (shared by node classification and link prediction)


def logistic_loss_and_grad(theta, features, target, lam):
    """Binary logistic loss and gradient for packed theta = [w, b].

    loss = mean cross-entropy + lam/(2m) * ||w||^2 (bias unregularized).
    """
    features = np.asarray(features, dtype=np.float64)
    target = np.asarray(target, dtype=np.float64)
    m, d = features.shape
    if theta.shape != (d + 1,):
        raise ShapeError(f"theta length {theta.shape} != {(d + 1,)}")
    w, b = theta[:d], theta[d]
    z = features @ w + b
    p = sigmoid(z)
    eps = 1e-12
    loss = -np.mean(target * np.log(p + eps) + (1 - target) * np.log(1 - p + eps))
    loss += lam / (2 * m) * float(w @ w)
    residual = p - target
    grad = np.concatenate([(features.T @ residual) / m + (lam / m) * w, [residual.mean()]])
    return float(loss), grad


def _lipschitz_lr(features, lam):
    m = features.shape[0]
    gram = features.T @ features
    sigma_max = float(np.linalg.eigvalsh(gram)[-1]) if gram.size else 0.0
    lip = 0.25 * (sigma_max + m) / m + lam / m  # +m covers the bias column
    return 1.0 / max(lip, 1e-12)


def fit_logistic(features, targets, lam=1.0, tol=LOGISTIC_TOL, max_iter=LOGISTIC_MAX_ITER):
    """Fit independent binary logistic classifiers by full-batch GD.

    targets: (m, C) 0/1 matrix, one column per classifier. Stops when
    every gradient entry is below tol or after max_iter iterations.
    Returns (W (C, d), b (C,)).
    """
    features = np.asarray(features, dtype=np.float64)
    targets = np.asarray(targets, dtype=np.float64)
    m, d = features.shape
    if targets.shape[0] != m:
        raise ShapeError("features and targets disagree on sample count")
    n_cls = targets.shape[1]
    weights = np.zeros((n_cls, d))
    bias = np.zeros(n_cls)
    lr = _lipschitz_lr(features, lam)
    for _ in range(max_iter):
        probs = sigmoid(features @ weights.T + bias)
        residual = probs - targets
        grad_w = (residual.T @ features) / m + (lam / m) * weights
        grad_b = residual.mean(axis=0)
        if max(np.abs(grad_w).max(), np.abs(grad_b).max()) <= tol:
            break
        weights -= lr * grad_w
        bias -= lr * grad_b
    return weights, bias


# ---------------------------------------------------------------------------
# node classification


@dataclass
class ClassificationResult:
    micro_f1_mean: float
    micro_f1_std: float
    macro_f1_mean: float
    macro_f1_std: float
    per_seed: list  # (seed, micro, macro)


def _stratified_split(nodes_by_class, train_frac, rng):
    """Per-class shuffle and split; every class keeps >= 1 training node."""
    train, test = [], []
    for nodes in nodes_by_class:
        nodes = np.asarray(nodes)
        perm = rng.permutation(len(nodes))
        n_train = int(round(train_frac * len(nodes)))
        if len(nodes) >= 2:
            n_train = min(max(n_train, 1), len(nodes) - 1)
        else:
            n_train = 1
        train.extend(nodes[perm[:n_train]])
        test.extend(nodes[perm[n_train:]])
    return np.array(sorted(train)), np.array(sorted(test))


def node_classification(embedding, labels, train_frac, seeds, lam=1.0):
    """Repeated stratified classification runs; mean/std of both F1 scores.

    labels maps node id -> class id; every labeled node carries exactly
    one label. train_frac is the fraction of labeled nodes used to fit
    the classifier in each run.
    """
    if not 0.0 < train_frac < 1.0:
        raise ArgumentError(f"train fraction must be in (0,1), got {train_frac}")
    if not labels:
        raise ArgumentError("no labeled nodes")
    embedding = np.asarray(embedding, dtype=np.float64)
    nodes = np.array(sorted(labels))
    if nodes[-1] >= embedding.shape[0]:
        raise ShapeError(
            f"label references node {nodes[-1]} but embedding has {embedding.shape[0]} rows"
        )
    node_labels = np.array([labels[v] for v in nodes])
    classes = np.unique(node_labels)
    nodes_by_class = [nodes[node_labels == c] for c in classes]
    lab_of = dict(zip(nodes, node_labels))
    per_seed = []
    for seed in seeds:
        rng = derive_rng(seed, STREAM_EVAL)
        train_nodes, test_nodes = _stratified_split(nodes_by_class, train_frac, rng)
        y_train = np.array([lab_of[v] for v in train_nodes])
        y_test = np.array([lab_of[v] for v in test_nodes])
        targets = (y_train[:, None] == classes[None, :]).astype(np.float64)
        weights, bias = fit_logistic(embedding[train_nodes], targets, lam=lam)
        scores = embedding[test_nodes] @ weights.T + bias
        y_pred = classes[np.argmax(scores, axis=1)]
        micro, macro = micro_macro_f1(y_test, y_pred)
        per_seed.append((seed, micro, macro))
    micros = np.array([r[1] for r in per_seed])
    macros = np.array([r[2] for r in per_seed])
    return ClassificationResult(
        float(micros.mean()), float(micros.std()), float(macros.mean()), float(macros.std()),
        per_seed,
    )


# ---------------------------------------------------------------------------
# link prediction


@dataclass
class LinkSplit:
    view: int
    kept: np.ndarray  # (a, 2) canonical edges still in the view
    removed: np.ndarray  # (b, 2) held-out edges, the test positives
    negatives: np.ndarray  # (b, 2) pairs absent from every view, the test negatives


def link_split(graph, view, fraction, rng):
    """Hold out floor(fraction * |view|) edges plus matched non-edge negatives."""
    if not (0 <= view < graph.k):
        raise ArgumentError(f"view {view} outside [0,{graph.k})")
    if not 0.0 < fraction < 1.0:
        raise ArgumentError(f"holdout fraction must be in (0,1), got {fraction}")
    edges = np.array(sorted(graph.views[view]), dtype=np.int64)
    if len(edges) < 2:
        raise SplitError(f"view {view} has {len(edges)} edges; need at least 2 to split")
    n_remove = int(fraction * len(edges))
    if n_remove < 1 or n_remove >= len(edges):
        raise SplitError(f"holdout of {n_remove} edges leaves no test or no train set")
    perm = rng.permutation(len(edges))
    removed = edges[np.sort(perm[:n_remove])]
    kept = edges[np.sort(perm[n_remove:])]
    neg_a, neg_p = sample_nonedges(graph, n_remove, rng, distinct=True)
    negatives = np.stack([np.minimum(neg_a, neg_p), np.maximum(neg_a, neg_p)], axis=1)
    return LinkSplit(view=view, kept=kept, removed=removed, negatives=negatives)


def _pair_features(embedding, pairs):
    return embedding[pairs[:, 0]] * embedding[pairs[:, 1]]


def link_prediction(embedding, graph, split, rng, lam=1.0):
    """Score held-out edges against sampled non-edges; returns (auc, ap).

    The embedding must come from a model trained on the reduced graph
    (split.removed excluded). Training positives are the kept edges;
    training negatives are fresh non-edges of the full graph, disjoint
    from the test negatives.
    """
    embedding = np.asarray(embedding, dtype=np.float64)
    if embedding.shape[0] < graph.n:
        raise ShapeError(f"embedding has {embedding.shape[0]} rows, graph has {graph.n} nodes")
    train_neg_a, train_neg_p = sample_nonedges(
        graph, len(split.kept), rng, exclude=[tuple(p) for p in split.negatives], distinct=True
    )
    train_pairs = np.concatenate(
        [split.kept, np.stack([train_neg_a, train_neg_p], axis=1)], axis=0
    )
    train_y = np.concatenate([np.ones(len(split.kept)), np.zeros(len(split.kept))])
    weights, bias = fit_logistic(
        _pair_features(embedding, train_pairs), train_y[:, None], lam=lam
    )
    test_pairs = np.concatenate([split.removed, split.negatives], axis=0)
    test_y = np.concatenate([np.ones(len(split.removed)), np.zeros(len(split.negatives))])
    scores = _pair_features(embedding, test_pairs) @ weights[0] + bias[0]
    return ranking_auc(scores, test_y), average_precision(scores, test_y)


def link_prediction_experiment(graph, view, fraction, train_fn, seed, lam=1.0):
    """Full holdout protocol: split, retrain on the reduced graph, score.

    train_fn maps the reduced graph to an (n, d) embedding. Returns
    (auc, ap, split).
    """
    split = link_split(graph, view, fraction, derive_rng(seed, STREAM_SPLIT))
    reduced = remove_edges(graph, view, [tuple(e) for e in split.removed])
    embedding = train_fn(reduced)
    auc, ap = link_prediction(embedding, graph, split, derive_rng(seed, STREAM_EVAL), lam=lam)
    return auc, ap, split


# ---------------------------------------------------------------------------
# 2-D projection


def _power_iterate(matrix, rng):
    v = rng.standard_normal(matrix.shape[0])
    v /= np.linalg.norm(v)
    for _ in range(POWER_MAX_ITER):
        w = matrix @ v
        norm = np.linalg.norm(w)
        if norm <= 1e-300:
            return np.zeros_like(v), 0.0
        w /= norm
        if np.linalg.norm(w - v) < POWER_TOL:
            v = w
            break
        v = w
    return v, float(v @ matrix @ v)


def project_2d(embedding, seed=0):
    """Center and project onto the top-2 principal components.

    Components come from power iteration with deflation. If the second
    component is numerically absent (rank-deficient input), the second
    coordinate is zero and a warning is emitted.
    """
    embedding = np.asarray(embedding, dtype=np.float64)
    if embedding.ndim != 2 or embedding.shape[1] < 2:
        raise ShapeError("projection needs an (n, d) embedding with d >= 2")
    centered = embedding - embedding.mean(axis=0)
    cov = centered.T @ centered
    rng = derive_rng(seed, STREAM_EVAL)
    v1, lam1 = _power_iterate(cov, rng)
    if lam1 <= 0.0:
        warnings.warn("embedding has no variance; projection is all zeros")
        return np.zeros((embedding.shape[0], 2))
    v2, lam2 = _power_iterate(cov - lam1 * np.outer(v1, v1), rng)
    coords = np.empty((embedding.shape[0], 2))
    coords[:, 0] = centered @ v1
    if lam2 <= lam1 * 1e-12:
        warnings.warn("embedding is effectively rank-1; second coordinate is zero")
        coords[:, 1] = 0.0
    else:
        coords[:, 1] = centered @ v2
    return coords
