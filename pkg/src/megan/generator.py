"""Multi-view generator.

The generator owns the trainable node embedding matrix. For a node pair
it concatenates the two embedding rows, runs the fusing MLP to get a
shared pair representation, and feeds that through k per-view sigmoid
heads. The product of per-view factors (p for a 1-bit, 1-p for a 0-bit)
is the modeled probability of a full connectivity pattern, so the 2^k
pattern probabilities of a pair always sum to one.

Negative selection for a positive pair (i, j) scores every candidate c
in i's union neighborhood by the probability the generator assigns to c
reproducing the pair's pattern, then takes the argmax (greedy) or
samples proportionally.
"""

from dataclasses import dataclass
from typing import NamedTuple

import numpy as np

from .errors import ArgumentError, BoundsError, CannotSampleError, NumericError, ShapeError
from .graph import connectivity
from .numkernel import MlpGrads, MlpParams, init_mlp, mlp_backward, mlp_forward, sigmoid

PROB_EPS = 1e-7


@dataclass
class GeneratorParams:
    """Embedding table plus fusing MLP and k per-view head MLPs."""

    embed: np.ndarray  # (n, d)
    fuse: MlpParams  # 2d -> fused_dim
    heads: list  # k MLPs, fused_dim -> 1

    def __post_init__(self):
        if self.fuse.in_dim != 2 * self.embed.shape[1]:
            raise ShapeError(
                f"fuse input width {self.fuse.in_dim} != 2 * embedding dim {self.embed.shape[1]}"
            )
        for l, head in enumerate(self.heads):
            if head.in_dim != self.fuse.out_dim:
                raise ShapeError(f"head {l} input width {head.in_dim} != fused width")
            if head.out_dim != 1:
                raise ShapeError(f"head {l} must emit one logit, got {head.out_dim}")

    @property
    def n(self):
        return self.embed.shape[0]

    @property
    def d(self):
        return self.embed.shape[1]

    @property
    def k(self):
        return len(self.heads)

    def copy(self):
        return GeneratorParams(
            self.embed.copy(), self.fuse.copy(), [h.copy() for h in self.heads]
        )

    def param_dict(self):
        """Named views of every trainable array (no copies)."""
        out = {"embed": self.embed}
        for name, arr in zip(("fuse.W1", "fuse.b1", "fuse.W2", "fuse.b2"), self.fuse.arrays()):
            out[name] = arr
        for l, head in enumerate(self.heads):
            for name, arr in zip(("W1", "b1", "W2", "b2"), head.arrays()):
                out[f"head{l}.{name}"] = arr
        return out


@dataclass
class GeneratorGrads:
    embed: np.ndarray
    fuse: MlpGrads
    heads: list

    def param_dict(self):
        out = {"embed": self.embed}
        for name, arr in zip(("fuse.W1", "fuse.b1", "fuse.W2", "fuse.b2"), self.fuse.arrays()):
            out[name] = arr
        for l, head in enumerate(self.heads):
            for name, arr in zip(("W1", "b1", "W2", "b2"), head.arrays()):
                out[f"head{l}.{name}"] = arr
        return out


class FusedRep(NamedTuple):
    """Fused pair representation plus the (i, j) it came from."""

    vec: np.ndarray
    i: int
    j: int


def init_generator_params(n, d, k, rng, fused_dim=None, hidden_dim=None):
    """Fresh generator parameters.

    Embedding rows are uniform in +/- sqrt(3/d) (unit expected row norm);
    fused and hidden widths default to d.
    """
    fused_dim = d if fused_dim is None else fused_dim
    hidden_dim = d if hidden_dim is None else hidden_dim
    scale = np.sqrt(3.0 / d)
    embed = rng.uniform(-scale, scale, size=(n, d))
    fuse_mlp = init_mlp(2 * d, hidden_dim, fused_dim, rng)
    heads = [init_mlp(fused_dim, hidden_dim, 1, rng) for _ in range(k)]
    return GeneratorParams(embed, fuse_mlp, heads)


def _check_nodes(params, *nodes):
    for v in nodes:
        if not (0 <= v < params.n):
            raise BoundsError(f"node {v} outside [0,{params.n})")


def fuse(params, i, j):
    """Fused representation of the ordered pair (i, j)."""
    _check_nodes(params, i, j)
    z = np.concatenate([params.embed[i], params.embed[j]])
    vec, _ = mlp_forward(params.fuse, z)
    return FusedRep(vec, int(i), int(j))


def view_probs(params, fused):
    """Per-view link probabilities for a fused pair, clipped away from {0, 1}."""
    vec = fused.vec if isinstance(fused, FusedRep) else np.asarray(fused, dtype=np.float64)
    if vec.shape != (params.fuse.out_dim,):
        raise ShapeError(f"fused width {vec.shape} != ({params.fuse.out_dim},)")
    logits = np.array([mlp_forward(head, vec)[0][0] for head in params.heads])
    return np.clip(sigmoid(logits), PROB_EPS, 1.0 - PROB_EPS)


def joint_prob(params, i, j, pattern):
    """Probability the generator assigns to the full pattern for (i, j)."""
    pattern = np.asarray(pattern)
    if pattern.shape != (params.k,):
        raise ShapeError(f"pattern length {pattern.shape} != view count {params.k}")
    probs = view_probs(params, fuse(params, i, j))
    return float(np.prod(np.where(pattern == 1, probs, 1.0 - probs)))


def _forward_pairs(params, anchors, partners):
    """Batched fuse + heads. Returns (q (B,k) clipped, raw sigmoid, caches)."""
    z = np.concatenate([params.embed[anchors], params.embed[partners]], axis=1)
    fused, fuse_cache = mlp_forward(params.fuse, z)
    logits = np.empty((len(anchors), params.k))
    head_caches = []
    for l, head in enumerate(params.heads):
        out, cache = mlp_forward(head, fused)
        logits[:, l] = out[:, 0]
        head_caches.append(cache)
    raw = sigmoid(logits)
    clipped = np.clip(raw, PROB_EPS, 1.0 - PROB_EPS)
    return clipped, raw, (fuse_cache, head_caches)


def joint_prob_batch(params, anchors, partners, patterns):
    """Vectorized joint_prob over aligned arrays of pairs and patterns."""
    anchors = np.asarray(anchors, dtype=np.int64)
    partners = np.asarray(partners, dtype=np.int64)
    patterns = np.asarray(patterns)
    if patterns.shape != (len(anchors), params.k):
        raise ShapeError(f"patterns shape {patterns.shape} != ({len(anchors)}, {params.k})")
    probs, _, _ = _forward_pairs(params, anchors, partners)
    return np.prod(np.where(patterns == 1, probs, 1.0 - probs), axis=1)


def log_joint_prob_batch(params, anchors, partners, patterns):
    """Vectorized log joint probability (clipped factors, hence finite)."""
    anchors = np.asarray(anchors, dtype=np.int64)
    partners = np.asarray(partners, dtype=np.int64)
    patterns = np.asarray(patterns)
    probs, _, _ = _forward_pairs(params, anchors, partners)
    return np.sum(np.where(patterns == 1, np.log(probs), np.log1p(-probs)), axis=1)


def generator_gradient(params, batch):
    """Gradient of mean(reward * log joint_prob) over a batch.

    `batch` holds (anchor, chosen, pattern, reward) tuples. Gradients
    flow into the two touched embedding rows of every item, the fusing
    MLP, and all head MLPs. Reward must be finite.
    """
    if not batch:
        raise ArgumentError("empty gradient batch")
    anchors = np.array([item[0] for item in batch], dtype=np.int64)
    chosen = np.array([item[1] for item in batch], dtype=np.int64)
    patterns = np.array([item[2] for item in batch], dtype=np.int64)
    rewards = np.array([item[3] for item in batch], dtype=np.float64)
    if patterns.shape != (len(batch), params.k):
        raise ShapeError(f"patterns shape {patterns.shape} != ({len(batch)}, {params.k})")
    if not np.isfinite(rewards).all():
        raise NumericError("non-finite reward in gradient batch")
    return _log_joint_backward(params, anchors, chosen, patterns, rewards / len(batch))


def _log_joint_backward(params, anchors, partners, patterns, weights):
    """d/dtheta of sum_b weights[b] * log joint_prob(anchors[b], partners[b], patterns[b])."""
    clipped, raw, (fuse_cache, head_caches) = _forward_pairs(params, anchors, partners)
    # d log G / d logit_l is (bit - p) where the clip is inactive, 0 where it
    # saturated (the clipped factor is then constant in the logit).
    active = (raw > PROB_EPS) & (raw < 1.0 - PROB_EPS)
    dlogits = weights[:, None] * np.where(active, patterns - raw, 0.0)
    d = params.d
    dfused = None
    head_grads = []
    for l, head in enumerate(params.heads):
        dvec, hg = mlp_backward(head, head_caches[l], dlogits[:, l : l + 1])
        head_grads.append(hg)
        dfused = dvec if dfused is None else dfused + dvec
    dz, fuse_grads = mlp_backward(params.fuse, fuse_cache, dfused)
    dembed = np.zeros_like(params.embed)
    np.add.at(dembed, anchors, dz[:, :d])
    np.add.at(dembed, partners, dz[:, d:])
    return GeneratorGrads(dembed, fuse_grads, head_grads)


def _expand_candidates(idx, anchors, partners):
    """Flatten N(anchor) \\ {anchor, partner} for a batch of pairs.

    Returns (pair_idx, cand) aligned flat arrays; pairs can be absent
    entirely when they have no remaining candidate.
    """
    starts = idx.indptr[anchors]
    lengths = idx.indptr[anchors + 1] - starts
    total = int(lengths.sum())
    pair_idx = np.repeat(np.arange(len(anchors)), lengths)
    offsets = np.concatenate([[0], np.cumsum(lengths)])[:-1]
    within = np.arange(total) - np.repeat(offsets, lengths)
    cand = idx.indices[np.repeat(starts, lengths) + within]
    keep = (cand != partners[pair_idx]) & (cand != anchors[pair_idx])
    return pair_idx[keep], cand[keep]


def _segment_argmax_lowest_id(pair_idx, cand, scores, n_pairs):
    """Per segment: candidate with the highest score, ties to the lowest id.

    Segments with no entries get -1.
    """
    out = np.full(n_pairs, -1, dtype=np.int64)
    if len(pair_idx) == 0:
        return out
    order = np.lexsort((cand, -scores, pair_idx))
    seg = pair_idx[order]
    first = np.ones(len(seg), dtype=bool)
    first[1:] = seg[1:] != seg[:-1]
    out[seg[first]] = cand[order][first]
    return out


def _uniform_excluding(rng, n, i, j):
    """Uniform node id, excluding the two given distinct nodes."""
    r = int(rng.integers(0, n - 2))
    lo, hi = (i, j) if i < j else (j, i)
    if r >= lo:
        r += 1
    if r >= hi:
        r += 1
    return r


def select_negatives(params, graph, idx, anchors, partners, patterns, mode, rng, draws=1):
    """Choose negative partner nodes for a batch of positive pairs.

    Candidates for pair b are the union neighbors of anchors[b], minus
    the pair itself, scored by the probability of reproducing
    patterns[b]. greedy: the argmax (lowest id on ties), replicated
    across draws. proportional: `draws` independent samples with
    probability proportional to the score. Pairs with no candidate fall
    back to a uniform node outside the pair. Returns (B, draws) ids.
    """
    if graph.n < 3:
        raise CannotSampleError(f"need at least 3 nodes to pick a negative, have {graph.n}")
    if mode not in ("greedy", "proportional"):
        raise ArgumentError(f"unknown selection mode {mode!r}")
    anchors = np.asarray(anchors, dtype=np.int64)
    partners = np.asarray(partners, dtype=np.int64)
    patterns = np.asarray(patterns, dtype=np.int64)
    n_pairs = len(anchors)
    pair_idx, cand = _expand_candidates(idx, anchors, partners)
    scores = joint_prob_batch(params, anchors[pair_idx], cand, patterns[pair_idx])
    out = np.empty((n_pairs, draws), dtype=np.int64)
    if mode == "greedy":
        chosen = _segment_argmax_lowest_id(pair_idx, cand, scores, n_pairs)
        out[:] = chosen[:, None]
        for b in np.flatnonzero(chosen < 0):
            out[b, :] = _uniform_excluding(rng, graph.n, int(anchors[b]), int(partners[b]))
        return out
    # proportional: inverse-CDF sampling within each pair's contiguous segment
    counts = np.bincount(pair_idx, minlength=n_pairs)
    ends = np.cumsum(counts)
    starts = ends - counts
    valid = np.flatnonzero(counts > 0)
    csum = np.cumsum(scores)
    if len(valid):
        base = np.where(starts[valid] > 0, csum[np.maximum(starts[valid] - 1, 0)], 0.0)
        totals = csum[ends[valid] - 1] - base
        u = rng.random((len(valid), draws))
        targets = base[:, None] + u * totals[:, None]
        flat = np.searchsorted(csum, targets, side="right")
        flat = np.clip(flat, starts[valid][:, None], (ends[valid] - 1)[:, None])
        out[valid] = cand[flat]
    for b in np.flatnonzero(counts == 0):
        for s in range(draws):
            out[b, s] = _uniform_excluding(rng, graph.n, int(anchors[b]), int(partners[b]))
    return out


def select_negative(params, graph, idx, i, j, mode, rng):
    """Negative partner for one positive pair; see select_negatives."""
    _check_nodes(params, i, j)
    pattern = connectivity(graph, i, j)
    chosen = select_negatives(
        params, graph, idx, np.array([i]), np.array([j]), pattern[None, :], mode, rng
    )
    return int(chosen[0, 0])


def generator_param_arrays(params):
    """Fixed-order list of every trainable array (embed, fuse, heads)."""
    return [params.embed, *params.fuse.arrays()] + [a for h in params.heads for a in h.arrays()]


def generator_grad_arrays(grads):
    """Same ordering as generator_param_arrays, for gradients."""
    return [grads.embed, *grads.fuse.arrays()] + [a for h in grads.heads for a in h.arrays()]


def rebuild_generator_params(template, arrays):
    """GeneratorParams from a fixed-order array list (see generator_param_arrays)."""
    embed = arrays[0]
    fuse_mlp = MlpParams(*arrays[1:5], activation=template.fuse.activation)
    heads = []
    pos = 5
    for head in template.heads:
        heads.append(MlpParams(*arrays[pos : pos + 4], activation=head.activation))
        pos += 4
    return GeneratorParams(embed, fuse_mlp, heads)
