"""Minimal dense numeric layer: two-layer MLPs with analytic gradients,
a finite-difference gradient checker, SGD with momentum, and binary
tensor checkpoints.

All math is float64. Forward passes accept a single vector (in,) or a
batch (m, in); gradients are exact, and every backward implementation is
held to the finite-difference checker in the test suite.
"""

import struct
from dataclasses import dataclass
from typing import NamedTuple

import numpy as np

from .errors import NumericError, ShapeError

CHECKPOINT_MAGIC = b"MEGN1"

_ACTIVATIONS = ("tanh", "identity")


def sigmoid(x):
    """Numerically stable logistic function, elementwise."""
    x = np.asarray(x, dtype=np.float64)
    out = np.empty_like(x)
    pos = x >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-x[pos]))
    ex = np.exp(x[~pos])
    out[~pos] = ex / (1.0 + ex)
    return out


@dataclass
class MlpParams:
    """Two affine layers with a hidden activation; output stays linear."""

    W1: np.ndarray  # (hidden, in)
    b1: np.ndarray  # (hidden,)
    W2: np.ndarray  # (out, hidden)
    b2: np.ndarray  # (out,)
    activation: str = "tanh"

    def __post_init__(self):
        if self.W1.shape[0] != self.b1.shape[0] or self.W2.shape[0] != self.b2.shape[0]:
            raise ShapeError("bias widths do not match weight rows")
        if self.W2.shape[1] != self.W1.shape[0]:
            raise ShapeError(
                f"layer widths disagree: {self.W1.shape[0]} hidden vs {self.W2.shape[1]} expected"
            )
        if self.activation not in _ACTIVATIONS:
            raise ShapeError(f"unknown activation {self.activation!r}")

    @property
    def in_dim(self):
        return self.W1.shape[1]

    @property
    def out_dim(self):
        return self.W2.shape[0]

    def copy(self):
        return MlpParams(
            self.W1.copy(), self.b1.copy(), self.W2.copy(), self.b2.copy(), self.activation
        )

    def arrays(self):
        return [self.W1, self.b1, self.W2, self.b2]


class MlpGrads(NamedTuple):
    W1: np.ndarray
    b1: np.ndarray
    W2: np.ndarray
    b2: np.ndarray

    def arrays(self):
        return list(self)


def init_mlp(in_dim, hidden_dim, out_dim, rng, activation="tanh"):
    """Uniform +/- sqrt(6/(fan_in+fan_out)) weights, zero biases."""
    s1 = np.sqrt(6.0 / (in_dim + hidden_dim))
    s2 = np.sqrt(6.0 / (hidden_dim + out_dim))
    return MlpParams(
        W1=rng.uniform(-s1, s1, size=(hidden_dim, in_dim)),
        b1=np.zeros(hidden_dim),
        W2=rng.uniform(-s2, s2, size=(out_dim, hidden_dim)),
        b2=np.zeros(out_dim),
        activation=activation,
    )


def _activate(pre, kind):
    if kind == "tanh":
        return np.tanh(pre)
    return pre


def _activate_grad_from_output(hidden, kind):
    if kind == "tanh":
        return 1.0 - hidden * hidden
    return np.ones_like(hidden)


def mlp_forward(params, x):
    """Compute y = W2 * act(W1 * x + b1) + b2; returns (y, cache).

    x may be a vector (in,) or a batch (m, in); y matches. The cache
    feeds mlp_backward for the same call.
    """
    x = np.asarray(x, dtype=np.float64)
    single = x.ndim == 1
    x2 = np.atleast_2d(x)
    if x2.shape[1] != params.in_dim:
        raise ShapeError(f"input width {x2.shape[1]} != expected {params.in_dim}")
    pre1 = x2 @ params.W1.T + params.b1
    hidden = _activate(pre1, params.activation)
    y = hidden @ params.W2.T + params.b2
    if not np.isfinite(y).all():
        raise NumericError("mlp_forward produced a non-finite output")
    cache = (x2, hidden, single)
    return (y[0] if single else y), cache


def mlp_backward(params, cache, dy):
    """Exact gradients of sum(y * dy) w.r.t. input and all parameters.

    Returns (dx, MlpGrads); dx matches the shape of the forward input.
    """
    x2, hidden, single = cache
    dy = np.asarray(dy, dtype=np.float64)
    dy2 = np.atleast_2d(dy)
    if dy2.shape != (x2.shape[0], params.out_dim):
        raise ShapeError(f"dy shape {dy.shape} does not match forward batch/cache")
    dW2 = dy2.T @ hidden
    db2 = dy2.sum(axis=0)
    dhidden = dy2 @ params.W2
    dpre1 = dhidden * _activate_grad_from_output(hidden, params.activation)
    dW1 = dpre1.T @ x2
    db1 = dpre1.sum(axis=0)
    dx = dpre1 @ params.W1
    return (dx[0] if single else dx), MlpGrads(dW1, db1, dW2, db2)


def grad_check(f, theta, step=1e-5):
    """Max relative disagreement between f's analytic gradient and
    central finite differences.

    f maps a parameter vector to (value, gradient). Per coordinate the
    error is |analytic - central| / max(1, |central|); the max over all
    coordinates is returned.
    """
    theta = np.asarray(theta, dtype=np.float64)
    value, grad = f(theta)
    if not np.isfinite(value):
        raise NumericError("objective is non-finite at theta")
    grad = np.asarray(grad, dtype=np.float64)
    if grad.shape != theta.shape:
        raise ShapeError(f"gradient shape {grad.shape} != theta shape {theta.shape}")
    central = np.empty_like(theta)
    for i in range(theta.size):
        bumped = theta.copy()
        bumped[i] = theta[i] + step
        up, _ = f(bumped)
        bumped[i] = theta[i] - step
        down, _ = f(bumped)
        if not (np.isfinite(up) and np.isfinite(down)):
            raise NumericError(f"objective is non-finite near theta (coordinate {i})")
        central[i] = (up - down) / (2.0 * step)
    rel = np.abs(grad - central) / np.maximum(1.0, np.abs(central))
    return float(rel.max())


class SgdOptimizer:
    """SGD with momentum over named parameter tensors.

    update: v <- momentum * v + g; p <- p - lr * v
    """

    def __init__(self, lr, momentum=0.9):
        self.lr = float(lr)
        self.momentum = float(momentum)
        self._velocity = {}

    def step(self, params, grads):
        """Update the named arrays in `params` in place; returns params."""
        for name, grad in grads.items():
            if name not in params:
                raise ShapeError(f"gradient for unknown parameter {name!r}")
            if params[name].shape != grad.shape:
                raise ShapeError(
                    f"{name}: gradient shape {grad.shape} != parameter shape {params[name].shape}"
                )
            if not np.isfinite(grad).all():
                raise NumericError(f"non-finite gradient entry in {name!r}")
            vel = self._velocity.get(name)
            if vel is None:
                vel = np.zeros_like(params[name])
                self._velocity[name] = vel
            vel *= self.momentum
            vel += grad
            params[name] -= self.lr * vel
        return params


class AdamOptimizer:
    """Adam with bias correction and optional per-tensor learning-rate scales.

    Embedding tables receive sparse, row-skewed gradients while dense MLP
    weights see every batch item; per-tensor scales let a trainer slow
    the dense weights so the signal lands in the table.
    """

    def __init__(self, lr, beta1=0.9, beta2=0.999, eps=1e-8, lr_scales=None):
        self.lr = float(lr)
        self.beta1 = float(beta1)
        self.beta2 = float(beta2)
        self.eps = float(eps)
        self.lr_scales = dict(lr_scales or {})
        self._m = {}
        self._v = {}
        self._t = 0

    def step(self, params, grads):
        """Update the named arrays in `params` in place; returns params."""
        self._t += 1
        for name, grad in grads.items():
            if name not in params:
                raise ShapeError(f"gradient for unknown parameter {name!r}")
            if params[name].shape != grad.shape:
                raise ShapeError(
                    f"{name}: gradient shape {grad.shape} != parameter shape {params[name].shape}"
                )
            if not np.isfinite(grad).all():
                raise NumericError(f"non-finite gradient entry in {name!r}")
            m = self._m.setdefault(name, np.zeros_like(params[name]))
            v = self._v.setdefault(name, np.zeros_like(params[name]))
            m *= self.beta1
            m += (1.0 - self.beta1) * grad
            v *= self.beta2
            v += (1.0 - self.beta2) * grad * grad
            m_hat = m / (1.0 - self.beta1**self._t)
            v_hat = v / (1.0 - self.beta2**self._t)
            lr = self.lr * self.lr_scales.get(name, 1.0)
            params[name] -= lr * m_hat / (np.sqrt(v_hat) + self.eps)
        return params


def sgd_step(opt, params, grads):
    """Apply one optimizer update to named parameter arrays."""
    return opt.step(params, grads)


def flatten_arrays(arrays):
    """Concatenate arrays into one vector; returns (vector, shapes)."""
    return np.concatenate([np.asarray(a, dtype=np.float64).ravel() for a in arrays]), [
        np.asarray(a).shape for a in arrays
    ]


def unflatten_vector(vec, shapes):
    """Inverse of flatten_arrays for a given shape list."""
    out = []
    offset = 0
    for shape in shapes:
        size = int(np.prod(shape)) if shape else 1
        out.append(vec[offset : offset + size].reshape(shape))
        offset += size
    if offset != vec.size:
        raise ShapeError(f"vector length {vec.size} does not match shapes (need {offset})")
    return out


def save_tensors(path, tensors):
    """Write named float64 tensors to a binary checkpoint.

    Layout: magic "MEGN1", little-endian u64 tensor count, then per
    tensor: u64 name length, UTF-8 name, u64 rows, u64 cols, raw
    little-endian float64 entries. 1-D arrays are stored as one row.
    """
    with open(path, "wb") as fh:
        fh.write(CHECKPOINT_MAGIC)
        fh.write(struct.pack("<Q", len(tensors)))
        for name, arr in tensors.items():
            arr = np.asarray(arr, dtype=np.float64)
            if arr.ndim == 1:
                arr = arr.reshape(1, -1)
            if arr.ndim != 2:
                raise ShapeError(f"tensor {name!r} must be 1-D or 2-D, got {arr.ndim}-D")
            encoded = name.encode("utf-8")
            fh.write(struct.pack("<Q", len(encoded)))
            fh.write(encoded)
            fh.write(struct.pack("<QQ", arr.shape[0], arr.shape[1]))
            fh.write(np.ascontiguousarray(arr, dtype="<f8").tobytes())


def load_tensors(path):
    """Read a checkpoint written by save_tensors; returns name -> 2-D array."""
    with open(path, "rb") as fh:
        magic = fh.read(len(CHECKPOINT_MAGIC))
        if magic != CHECKPOINT_MAGIC:
            raise ShapeError(f"{path}: not a checkpoint file (bad magic {magic!r})")
        (count,) = struct.unpack("<Q", fh.read(8))
        tensors = {}
        for _ in range(count):
            (name_len,) = struct.unpack("<Q", fh.read(8))
            name = fh.read(name_len).decode("utf-8")
            rows, cols = struct.unpack("<QQ", fh.read(16))
            raw = fh.read(rows * cols * 8)
            if len(raw) != rows * cols * 8:
                raise ShapeError(f"{path}: truncated tensor {name!r}")
            tensors[name] = np.frombuffer(raw, dtype="<f8").reshape(rows, cols).copy()
    return tensors
