"""Node-pair discriminator: sigmoid of the inner product of two learned
per-node vectors, with the analytic gradient of the real-vs-fake
objective (mean log-score on real pairs plus mean log one-minus-score on
generated pairs).
"""

from dataclasses import dataclass

import numpy as np

from .errors import ArgumentError, BoundsError, NumericError, ShapeError
from .numkernel import sigmoid

SCORE_EPS = 1e-7


@dataclass
class DiscriminatorParams:
    """One d-dimensional vector per node, independent of the generator."""

    vectors: np.ndarray  # (n, d)

    def __post_init__(self):
        if self.vectors.ndim != 2:
            raise ShapeError("discriminator table must be 2-D")

    @property
    def n(self):
        return self.vectors.shape[0]

    @property
    def d(self):
        return self.vectors.shape[1]

    def copy(self):
        return DiscriminatorParams(self.vectors.copy())

    def param_dict(self):
        return {"vectors": self.vectors}


def init_discriminator_params(n, d, rng):
    """Small Gaussian init; zeros would make every pair score exactly 0.5
    with an identically-zero gradient."""
    return DiscriminatorParams(rng.normal(0.0, 0.1, size=(n, d)))


def score(params, i, j):
    """P(real) for the pair (i, j): stable sigmoid of vectors[i] . vectors[j]."""
    if i == j:
        raise ArgumentError(f"discriminator scores distinct pairs, got ({i},{i})")
    if not (0 <= i < params.n and 0 <= j < params.n):
        raise BoundsError(f"pair ({i},{j}) outside [0,{params.n})")
    return float(sigmoid(np.array([params.vectors[i] @ params.vectors[j]]))[0])


def score_batch(params, anchors, partners):
    """Vectorized score over aligned node arrays."""
    dots = np.einsum("ij,ij->i", params.vectors[anchors], params.vectors[partners])
    out = sigmoid(dots)
    if not np.isfinite(out).all():
        raise NumericError("discriminator produced a non-finite score")
    return out


def clipped_score_batch(params, anchors, partners):
    """score_batch clipped to [eps, 1-eps]; use wherever a log is taken."""
    return np.clip(score_batch(params, anchors, partners), SCORE_EPS, 1.0 - SCORE_EPS)


def discriminator_objective(params, pos, neg):
    """Mean-reduced objective ascended by the discriminator.

    [sum log score(pos) + sum log(1 - score(neg))] / (len(pos) + len(neg))
    """
    total = len(pos) + len(neg)
    if total == 0:
        raise ArgumentError("no pairs given")
    value = 0.0
    if len(pos):
        pi, pj = np.array(pos, dtype=np.int64).T
        value += np.sum(np.log(clipped_score_batch(params, pi, pj)))
    if len(neg):
        ni, nc = np.array(neg, dtype=np.int64).T
        value += np.sum(np.log1p(-clipped_score_batch(params, ni, nc)))
    return float(value) / total


def discriminator_gradient(params, pos, neg):
    """Gradient of discriminator_objective w.r.t. the vector table.

    Real pair (i, j) pushes rows i and j along (1 - D) times the partner
    vector; generated pair (i, c) pushes rows along -D times the partner
    vector. The trainer ascends this gradient.
    """
    total = len(pos) + len(neg)
    if total == 0:
        raise ArgumentError("no pairs given")
    grad = np.zeros_like(params.vectors)
    if len(pos):
        pi, pj = np.array(pos, dtype=np.int64).T
        s = score_batch(params, pi, pj)
        # zero where the clip in the objective saturates
        coef = np.where((s > SCORE_EPS) & (s < 1.0 - SCORE_EPS), 1.0 - s, 0.0)
        np.add.at(grad, pi, coef[:, None] * params.vectors[pj])
        np.add.at(grad, pj, coef[:, None] * params.vectors[pi])
    if len(neg):
        ni, nc = np.array(neg, dtype=np.int64).T
        s = score_batch(params, ni, nc)
        coef = np.where((s > SCORE_EPS) & (s < 1.0 - SCORE_EPS), -s, 0.0)
        np.add.at(grad, ni, coef[:, None] * params.vectors[nc])
        np.add.at(grad, nc, coef[:, None] * params.vectors[ni])
    grad /= total
    if not np.isfinite(grad).all():
        raise NumericError("non-finite discriminator gradient")
    return grad
