"""Adversarial training loop.

Training runs in two phases. Pre-training fits the generator by maximum
likelihood (true pairs toward their observed patterns, random
non-adjacent pairs toward the all-zero pattern) and the discriminator on
true pairs versus uniform random non-adjacent pairs. The adversarial
phase then alternates: each epoch runs g_steps generator updates (one
shuffled sweep over the union edges each, with s generated negatives per
positive pair, policy-gradient weighted by log(1 - D) of the fake pair)
followed by d_steps discriminator updates (t positives and t generated
negatives per node, ascending the real-vs-fake objective).

Everything is deterministic given (graph, config): all randomness
derives from config.seed via fixed per-phase streams.
"""

from dataclasses import dataclass, field

import numpy as np

from .discriminator import (
    DiscriminatorParams,
    clipped_score_batch,
    discriminator_gradient,
    init_discriminator_params,
)
from .errors import ArgumentError, CannotSampleError, NumericError, ShapeError
from .generator import (
    GeneratorParams,
    _log_joint_backward,
    init_generator_params,
    log_joint_prob_batch,
    select_negatives,
)
from .graph import neighbor_union, patterns_for_pairs, sample_nonedges
from .numkernel import AdamOptimizer, MlpParams, SgdOptimizer, load_tensors, save_tensors
from .seeding import STREAM_EVAL, STREAM_INIT, STREAM_PRETRAIN, STREAM_TRAIN, derive_rng

EARLY_STOP_TOL = 1e-5
EARLY_STOP_PATIENCE = 5
VALUE_SAMPLE_CAP = 2048


@dataclass
class TrainConfig:
    """Training hyperparameters.

    d: embedding dimension. t: positives (and generated negatives) per
    node per discriminator step. s: generated negatives per positive
    pair per generator step. One generator step sweeps the union edge
    set once in minibatches of batch_pairs pairs; one discriminator step
    visits every non-isolated node once.

    Learning rates and the optimizer choice are calibration values: with
    plain SGD the generator's MLP weights soak up the base rates while
    the embedding rows (which each see only a sliver of the batch) never
    move, so the default is adam with the dense MLP weights slowed by
    mlp_lr_scale relative to the embedding table.
    """

    d: int = 128
    t: int = 5
    s: int = 5
    g_steps: int = 1
    d_steps: int = 1
    epochs: int = 100
    lr_g: float = 0.05
    lr_d: float = 0.02
    mode: str = "greedy"
    seed: int = 0
    pretrain_epochs: int = 150
    eval_every: int = 0
    batch_pairs: int = 128
    momentum: float = 0.9
    optimizer: str = "adam"
    mlp_lr_scale: float = 0.05
    early_stop: bool = False
    d_step_per_edge: bool = False
    reward_baseline: bool = False

    def validate(self):
        if self.d < 1:
            raise ArgumentError(f"embedding dimension must be >= 1, got {self.d}")
        if self.t < 1 or self.s < 1:
            raise ArgumentError(f"sample sizes must be >= 1, got t={self.t} s={self.s}")
        if self.g_steps < 1 or self.d_steps < 1:
            raise ArgumentError("step counts must be >= 1")
        if self.epochs < 0 or self.pretrain_epochs < 0:
            raise ArgumentError("epoch counts must be >= 0")
        if self.lr_g < 0 or self.lr_d < 0:
            raise ArgumentError("learning rates must be >= 0")
        if self.mode not in ("greedy", "proportional"):
            raise ArgumentError(f"unknown mode {self.mode!r}")
        if self.optimizer not in ("adam", "sgd"):
            raise ArgumentError(f"unknown optimizer {self.optimizer!r}")
        if self.mlp_lr_scale <= 0:
            raise ArgumentError("mlp_lr_scale must be > 0")
        if self.batch_pairs < 1:
            raise ArgumentError("batch_pairs must be >= 1")


@dataclass
class TrainState:
    gen: GeneratorParams
    disc: DiscriminatorParams
    opt_g: SgdOptimizer
    opt_d: SgdOptimizer
    epoch: int = 0
    history: list = field(default_factory=list)  # rows (epoch, v_d, v_g)


def _make_optimizers(cfg, gen):
    if cfg.optimizer == "sgd":
        return SgdOptimizer(cfg.lr_g, cfg.momentum), SgdOptimizer(cfg.lr_d, cfg.momentum)
    scales = {name: cfg.mlp_lr_scale for name in gen.param_dict() if name != "embed"}
    return AdamOptimizer(cfg.lr_g, lr_scales=scales), AdamOptimizer(cfg.lr_d)


def _init_state(graph, cfg):
    rng = derive_rng(cfg.seed, STREAM_INIT)
    gen = init_generator_params(graph.n, cfg.d, graph.k, rng)
    disc = init_discriminator_params(graph.n, cfg.d, rng)
    opt_g, opt_d = _make_optimizers(cfg, gen)
    return TrainState(gen=gen, disc=disc, opt_g=opt_g, opt_d=opt_d)


def _chunks(total, size):
    for start in range(0, total, size):
        yield slice(start, min(start + size, total))


def _oriented_edges(graph, rng, rows=None):
    """Union edges with independently randomized anchor/partner order."""
    edges = graph.union_edges()
    pats = graph.union_patterns()
    if rows is not None:
        edges = edges[rows]
        pats = pats[rows]
    flip = rng.random(len(edges)) < 0.5
    anchors = np.where(flip, edges[:, 1], edges[:, 0])
    partners = np.where(flip, edges[:, 0], edges[:, 1])
    return anchors, partners, pats


def _ascend(opt, params_dict, grads_dict):
    opt.step(params_dict, {name: -g for name, g in grads_dict.items()})


def pretrain(graph, cfg, rng=None):
    """Initialize parameters and run the maximum-likelihood warm-up."""
    cfg.validate()
    state = _init_state(graph, cfg)
    if rng is None:
        rng = derive_rng(cfg.seed, STREAM_PRETRAIN)
    m = len(graph.union_edges())
    for _ in range(cfg.pretrain_epochs):
        # generator: observed patterns on edges, zero pattern on non-edges
        pos_a, pos_p, pos_pat = _oriented_edges(graph, rng)
        neg_a, neg_p = sample_nonedges(graph, m, rng)
        anchors = np.concatenate([pos_a, neg_a])
        partners = np.concatenate([pos_p, neg_p])
        patterns = np.concatenate([pos_pat, np.zeros((m, graph.k), dtype=np.int64)])
        perm = rng.permutation(len(anchors))
        gen_params = state.gen.param_dict()
        for sl in _chunks(len(perm), cfg.batch_pairs):
            rows = perm[sl]
            weights = np.full(len(rows), 1.0 / len(rows))
            grads = _log_joint_backward(
                state.gen, anchors[rows], partners[rows], patterns[rows], weights
            )
            _ascend(state.opt_g, gen_params, grads.param_dict())
        # discriminator: true pairs vs uniform random non-adjacent pairs
        pos_a, pos_p, _ = _oriented_edges(graph, rng)
        neg_a, neg_p = sample_nonedges(graph, m, rng)
        disc_params = state.disc.param_dict()
        for sl in _chunks(m, cfg.batch_pairs):
            grad = discriminator_gradient(
                state.disc,
                np.stack([pos_a[sl], pos_p[sl]], axis=1),
                np.stack([neg_a[sl], neg_p[sl]], axis=1),
            )
            _ascend(state.opt_d, disc_params, {"vectors": grad})
    return state


def _g_step(state, graph, idx, cfg, rng):
    """One sweep over union edges; returns (reward_sum, item_count)."""
    m = len(graph.union_edges())
    perm = rng.permutation(m)
    gen_params = state.gen.param_dict()
    reward_sum = 0.0
    items = 0
    for sl in _chunks(m, cfg.batch_pairs):
        rows = perm[sl]
        anchors, partners, pats = _oriented_edges(graph, rng, rows=rows)
        negs = select_negatives(state.gen, graph, idx, anchors, partners, pats, cfg.mode, rng, draws=cfg.s)
        rep_anchors = np.repeat(anchors, cfg.s)
        rep_pats = np.repeat(pats, cfg.s, axis=0)
        flat_negs = negs.ravel()
        rewards = np.log1p(-clipped_score_batch(state.disc, rep_anchors, flat_negs))
        reward_sum += float(rewards.sum())
        items += len(rewards)
        if cfg.reward_baseline:
            rewards = rewards - rewards.mean()
        grads = _log_joint_backward(
            state.gen, rep_anchors, flat_negs, rep_pats, rewards / len(rewards)
        )
        # G minimizes the value function: descend the policy gradient
        state.opt_g.step(gen_params, grads.param_dict())
    return reward_sum, items


def _d_step(state, graph, idx, cfg, rng):
    """One discriminator update pass; returns log-score sums for the epoch record."""
    if cfg.d_step_per_edge:
        anchors, partners, pats = _oriented_edges(graph, rng)
        order = rng.permutation(len(anchors))
        anchors, partners, pats = anchors[order], partners[order], pats[order]
    else:
        active = np.flatnonzero(idx.indptr[1:] > idx.indptr[:-1])
        nodes = active[rng.permutation(len(active))]
        anchors = np.repeat(nodes, cfg.t)
        degrees = idx.indptr[anchors + 1] - idx.indptr[anchors]
        offsets = (rng.random(len(anchors)) * degrees).astype(np.int64)
        partners = idx.indices[idx.indptr[anchors] + offsets]
        pats = patterns_for_pairs(graph, anchors, partners)
    disc_params = state.disc.param_dict()
    pos_log_sum = neg_log_sum = 0.0
    count = 0
    for sl in _chunks(len(anchors), cfg.batch_pairs):
        a, p, pt = anchors[sl], partners[sl], pats[sl]
        negs = select_negatives(state.gen, graph, idx, a, p, pt, cfg.mode, rng, draws=1)[:, 0]
        pos_log_sum += float(np.sum(np.log(clipped_score_batch(state.disc, a, p))))
        neg_log_sum += float(np.sum(np.log1p(-clipped_score_batch(state.disc, a, negs))))
        count += len(a)
        grad = discriminator_gradient(
            state.disc, np.stack([a, p], axis=1), np.stack([a, negs], axis=1)
        )
        _ascend(state.opt_d, disc_params, {"vectors": grad})
    return pos_log_sum, neg_log_sum, count


def _value_estimate(state, graph, idx, cfg):
    """Deterministic per-epoch estimates: (v_d, v_g, mean positive log-likelihood).

    Uses a fixed subsample of edges and a freshly restarted stream, so
    the estimate depends only on the current parameters.
    """
    rng = derive_rng(cfg.seed, STREAM_EVAL)
    m = len(graph.union_edges())
    rows = rng.choice(m, size=min(m, VALUE_SAMPLE_CAP), replace=False)
    anchors, partners, pats = _oriented_edges(graph, rng, rows=rows)
    negs = select_negatives(state.gen, graph, idx, anchors, partners, pats, cfg.mode, rng, draws=1)[:, 0]
    pos_scores = clipped_score_batch(state.disc, anchors, partners)
    neg_scores = clipped_score_batch(state.disc, anchors, negs)
    v_d = float(np.mean(np.log(pos_scores)) + np.mean(np.log1p(-neg_scores)))
    v_g = float(np.mean(np.log1p(-neg_scores)))
    loglik = float(np.mean(log_joint_prob_batch(state.gen, anchors, partners, pats)))
    return v_d, v_g, loglik


def train(graph, cfg, callback=None):
    """Run pre-training plus the adversarial loop; returns the final state.

    callback, when given, is invoked as callback(state, epoch) every
    eval_every epochs (if eval_every > 0).
    """
    cfg.validate()
    if graph.n < 3:
        raise CannotSampleError(f"training needs at least 3 nodes, got {graph.n}")
    state = pretrain(graph, cfg)
    # fresh optimizers: warm-up state should not leak into the game
    state.opt_g, state.opt_d = _make_optimizers(cfg, state.gen)
    rng = derive_rng(cfg.seed, STREAM_TRAIN)
    idx = neighbor_union(graph)
    prev_loglik = None
    flat_streak = 0
    for epoch in range(1, cfg.epochs + 1):
        try:
            reward_sum = 0.0
            reward_items = 0
            for _ in range(cfg.g_steps):
                rs, ri = _g_step(state, graph, idx, cfg, rng)
                reward_sum += rs
                reward_items += ri
            pos_sum = neg_sum = 0.0
            pair_count = 0
            for _ in range(cfg.d_steps):
                ps, ns, cnt = _d_step(state, graph, idx, cfg, rng)
                pos_sum += ps
                neg_sum += ns
                pair_count += cnt
        except NumericError as err:
            raise NumericError(f"epoch {epoch}: {err}") from err
        v_d, v_g, loglik = _value_estimate(state, graph, idx, cfg)
        state.history.append((epoch, v_d, v_g))
        state.epoch = epoch
        if callback is not None and cfg.eval_every > 0 and epoch % cfg.eval_every == 0:
            callback(state, epoch)
        if cfg.early_stop:
            if prev_loglik is not None and abs(loglik - prev_loglik) < EARLY_STOP_TOL:
                flat_streak += 1
                if flat_streak >= EARLY_STOP_PATIENCE:
                    break
            else:
                flat_streak = 0
            prev_loglik = loglik
    return state


def export_embedding(state_or_params, which, path):
    """Write an embedding text file: header "n d", then "node v1 .. vd" rows.

    which selects the generator-side table (the learned embedding) or
    the discriminator-side table (for comparison runs).
    """
    if isinstance(state_or_params, TrainState):
        gen, disc = state_or_params.gen, state_or_params.disc
    else:
        gen, disc = state_or_params
    if which == "generator":
        mat = gen.embed
    elif which == "discriminator":
        mat = disc.vectors
    else:
        raise ArgumentError(f"unknown side {which!r}")
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(f"{mat.shape[0]} {mat.shape[1]}\n")
        for i, row in enumerate(mat):
            fh.write(f"{i} " + " ".join(f"{v:.17g}" for v in row) + "\n")


def load_embedding(path):
    """Parse an embedding file back into an (n, d) array."""
    with open(path, encoding="utf-8") as fh:
        header = fh.readline().split()
        if len(header) != 2:
            raise ShapeError(f"{path}: bad embedding header")
        n, d = int(header[0]), int(header[1])
        mat = np.full((n, d), np.nan)
        for line in fh:
            parts = line.split()
            if not parts:
                continue
            node = int(parts[0])
            if not (0 <= node < n) or len(parts) != d + 1:
                raise ShapeError(f"{path}: bad embedding row for node {parts[0]}")
            mat[node] = [float(v) for v in parts[1:]]
    if np.isnan(mat).any():
        raise ShapeError(f"{path}: missing embedding rows")
    return mat


def save_history(history, path):
    """Loss history CSV: epoch,v_d,v_g."""
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("epoch,v_d,v_g\n")
        for epoch, v_d, v_g in history:
            fh.write(f"{epoch},{v_d:.17g},{v_g:.17g}\n")


def save_checkpoint(state, path):
    """Binary checkpoint of every generator and discriminator tensor."""
    tensors = {f"gen.{name}": arr for name, arr in state.gen.param_dict().items()}
    tensors["disc.vectors"] = state.disc.vectors
    save_tensors(path, tensors)


def load_checkpoint(path):
    """Rebuild (GeneratorParams, DiscriminatorParams) from a checkpoint."""
    tensors = load_tensors(path)
    try:
        disc = DiscriminatorParams(tensors.pop("disc.vectors"))
        embed = tensors.pop("gen.embed")
        fuse_mlp = MlpParams(
            tensors.pop("gen.fuse.W1"),
            tensors.pop("gen.fuse.b1").ravel(),
            tensors.pop("gen.fuse.W2"),
            tensors.pop("gen.fuse.b2").ravel(),
        )
        heads = []
        for l in range(sum(1 for name in tensors if name.endswith(".W1"))):
            heads.append(
                MlpParams(
                    tensors.pop(f"gen.head{l}.W1"),
                    tensors.pop(f"gen.head{l}.b1").ravel(),
                    tensors.pop(f"gen.head{l}.W2"),
                    tensors.pop(f"gen.head{l}.b2").ravel(),
                )
            )
    except KeyError as missing:
        raise ShapeError(f"{path}: checkpoint missing tensor {missing}") from None
    if tensors:
        raise ShapeError(f"{path}: unexpected tensors {sorted(tensors)}")
    return GeneratorParams(embed, fuse_mlp, heads), disc
