"""Graph-convolution engine: forward pass, MSE loss, analytic backward
pass and momentum-SGD updates.

A layer maps F to relu(concat(F, A_norm @ F) @ W), so each weight matrix
has shape (2 * d_in, d_out). A linear regressor (W, b) on the last
layer's embeddings produces one score per vertex. Gradients are exact;
the ReLU subgradient at zero is taken as zero.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass, field

import numpy as np

from .tensor import concat_cols, dense_matmul, relu, spmm

_MODEL_MAGIC = b"GCNM"
_MODEL_VERSION = 1


@dataclass(frozen=True)
class TrainConfig:
    """Momentum-SGD hyperparameters."""

    learning_rate: float = 0.1
    momentum: float = 0.9
    weight_decay: float = 1e-5
    epochs: int = 200
    seed: int = 0

    def __post_init__(self):
        if self.learning_rate <= 0:
            raise ValueError("learning_rate must be positive")
        if not 0.0 <= self.momentum < 1.0:
            raise ValueError("momentum must lie in [0, 1)")
        if self.weight_decay < 0:
            raise ValueError("weight_decay must be non-negative")
        if self.epochs < 1:
            raise ValueError("epochs must be at least 1")


class GcnModel:
    """Layer weights, regressor and momentum buffers for one GCN."""

    def __init__(self, layers, regressor_weight, regressor_bias=0.0):
        if not layers:
            raise ValueError("model needs at least one layer")
        self.layers = [np.asarray(w, dtype=np.float64) for w in layers]
        self.regressor_weight = np.asarray(regressor_weight, dtype=np.float64)
        self.regressor_bias = float(regressor_bias)
        prev = None
        for i, w in enumerate(self.layers):
            if w.ndim != 2 or w.shape[0] % 2:
                raise ValueError(f"layer {i} weight must be (2*d_in, d_out)")
            if prev is not None and w.shape[0] != 2 * prev:
                raise ValueError(
                    f"layer {i} expects input width {w.shape[0] // 2}, "
                    f"previous layer emits {prev}")
            prev = w.shape[1]
        if self.regressor_weight.shape != (prev, 1):
            raise ValueError(
                f"regressor must be ({prev}, 1), got {self.regressor_weight.shape}")
        self.vel_layers = [np.zeros_like(w) for w in self.layers]
        self.vel_regressor = np.zeros_like(self.regressor_weight)
        self.vel_bias = 0.0

    @property
    def input_dim(self):
        return self.layers[0].shape[0] // 2

    @property
    def output_dim(self):
        return self.layers[-1].shape[1]

    @classmethod
    def init(cls, input_dim, layer_widths, seed=0):
        """Glorot-uniform weights, zero bias, zero momentum."""
        rng = np.random.default_rng(seed)
        layers = []
        d = input_dim
        for width in layer_widths:
            fan_in, fan_out = 2 * d, width
            bound = np.sqrt(6.0 / (fan_in + fan_out))
            layers.append(rng.uniform(-bound, bound, size=(fan_in, fan_out)))
            d = width
        bound = np.sqrt(6.0 / (d + 1))
        reg = rng.uniform(-bound, bound, size=(d, 1))
        return cls(layers, reg, 0.0)

    def copy(self):
        m = GcnModel([w.copy() for w in self.layers],
                     self.regressor_weight.copy(), self.regressor_bias)
        m.vel_layers = [v.copy() for v in self.vel_layers]
        m.vel_regressor = self.vel_regressor.copy()
        m.vel_bias = self.vel_bias
        return m


@dataclass
class GcnGradients:
    layers: list
    regressor_weight: np.ndarray
    regressor_bias: float


@dataclass
class ForwardCache:
    """Intermediate activations retained for the backward pass."""

    adj_norm: object
    concats: list = field(default_factory=list)   # h_l = [F_l | A F_l]
    preacts: list = field(default_factory=list)   # z_l = h_l @ W_l
    final: np.ndarray = None                      # F_L
    layer_shapes: tuple = ()


def gcn_forward(model, adj_norm, features):
    """Run the GCN and regressor; returns (predictions, cache).

    ``predictions`` is a length-n float64 vector (no output
    nonlinearity); the cache feeds :func:`gcn_backward`.
    """
    x = np.asarray(features, dtype=np.float64)
    if x.ndim != 2:
        raise ValueError("features must be a 2-D matrix")
    if adj_norm.n != x.shape[0]:
        raise ValueError(
            f"adjacency is {adj_norm.n}x{adj_norm.n} but features have "
            f"{x.shape[0]} rows")
    if x.shape[1] != model.input_dim:
        raise ValueError(
            f"model expects feature width {model.input_dim}, got {x.shape[1]}")
    cache = ForwardCache(adj_norm=adj_norm,
                         layer_shapes=tuple(w.shape for w in model.layers))
    for w in model.layers:
        h = concat_cols(x, spmm(adj_norm, x))
        z = dense_matmul(h, w)
        cache.concats.append(h)
        cache.preacts.append(z)
        x = relu(z)
    cache.final = x
    preds = dense_matmul(x, model.regressor_weight).ravel() + model.regressor_bias
    return preds, cache


def mse_loss(predictions, targets, mode="mean"):
    """Squared-error loss; ``mean`` over vertices or plain ``sum``."""
    p = np.asarray(predictions, dtype=np.float64).ravel()
    t = np.asarray(targets, dtype=np.float64).ravel()
    if p.size == 0:
        raise ValueError("loss of empty vectors is undefined")
    if p.shape != t.shape:
        raise ValueError(f"length mismatch: {p.shape} vs {t.shape}")
    sq = (p - t) ** 2
    if mode == "mean":
        return float(np.mean(sq))
    if mode == "sum":
        return float(np.sum(sq))
    raise ValueError(f"unknown mode {mode!r}")


def mse_loss_grad(predictions, targets, mode="mean"):
    """Gradient of :func:`mse_loss` w.r.t. the predictions."""
    p = np.asarray(predictions, dtype=np.float64).ravel()
    t = np.asarray(targets, dtype=np.float64).ravel()
    if p.size == 0:
        raise ValueError("loss of empty vectors is undefined")
    if p.shape != t.shape:
        raise ValueError(f"length mismatch: {p.shape} vs {t.shape}")
    g = 2.0 * (p - t)
    if mode == "mean":
        return g / p.size
    if mode == "sum":
        return g
    raise ValueError(f"unknown mode {mode!r}")


def gcn_backward(model, cache, loss_grad):
    """Exact gradients of the loss w.r.t. every parameter.

    ``loss_grad`` is dL/dpredictions for the same forward call that
    produced ``cache``; a cache from a different model or input is
    rejected.
    """
    if cache.layer_shapes != tuple(w.shape for w in model.layers):
        raise ValueError("cache does not match this model's layer shapes")
    g = np.asarray(loss_grad, dtype=np.float64).reshape(-1, 1)
    if cache.final is None or g.shape[0] != cache.final.shape[0]:
        raise ValueError("loss gradient length does not match cached batch")
    d_reg = cache.final.T @ g
    d_bias = float(g.sum())
    dx = g @ model.regressor_weight.T
    adj_t = cache.adj_norm.transpose()
    d_layers = [None] * len(model.layers)
    for l in range(len(model.layers) - 1, -1, -1):
        dz = dx * (cache.preacts[l] > 0)
        d_layers[l] = cache.concats[l].T @ dz
        dh = dz @ model.layers[l].T
        d = dh.shape[1] // 2
        dx = dh[:, :d] + spmm(adj_t, np.ascontiguousarray(dh[:, d:]))
    return GcnGradients(layers=d_layers, regressor_weight=d_reg,
                        regressor_bias=d_bias)


def sgd_step(model, grads, config):
    """One momentum-SGD update, in place; returns the model.

    v <- momentum * v + grad + weight_decay * param
    param <- param - learning_rate * v
    """
    lr, mu, wd = config.learning_rate, config.momentum, config.weight_decay
    for w, v, g in zip(model.layers, model.vel_layers, grads.layers):
        v *= mu
        v += g + wd * w
        w -= lr * v
    model.vel_regressor *= mu
    model.vel_regressor += grads.regressor_weight + wd * model.regressor_weight
    model.regressor_weight -= lr * model.vel_regressor
    model.vel_bias = mu * model.vel_bias + grads.regressor_bias \
        + wd * model.regressor_bias
    model.regressor_bias -= lr * model.vel_bias
    return model


def save_model(model, path):
    """Checkpoint: magic "GCNM", version, layer count, shapes + f32 weights."""
    parts = [struct.pack("<4sII", _MODEL_MAGIC, _MODEL_VERSION,
                         len(model.layers))]
    for w in model.layers:
        parts.append(struct.pack("<II", *w.shape))
        parts.append(w.astype("<f4").tobytes())
    parts.append(struct.pack("<II", *model.regressor_weight.shape))
    parts.append(model.regressor_weight.astype("<f4").tobytes())
    parts.append(struct.pack("<f", model.regressor_bias))
    with open(path, "wb") as fh:
        fh.write(b"".join(parts))


def load_model(path):
    """Load a checkpoint, rejecting shape-inconsistent or truncated files."""
    with open(path, "rb") as fh:
        blob = fh.read()
    head = struct.Struct("<4sII")
    if len(blob) < head.size:
        raise ValueError("model file too short")
    magic, version, n_layers = head.unpack_from(blob)
    if magic != _MODEL_MAGIC:
        raise ValueError(f"bad magic {magic!r}, expected {_MODEL_MAGIC!r}")
    if version != _MODEL_VERSION:
        raise ValueError(f"unsupported model format version {version}")
    if n_layers < 1:
        raise ValueError("model file declares no layers")
    off = head.size

    def take_matrix():
        nonlocal off
        if len(blob) < off + 8:
            raise ValueError("model file truncated in a shape header")
        rows, cols = struct.unpack_from("<II", blob, off)
        off += 8
        nbytes = rows * cols * 4
        if len(blob) < off + nbytes:
            raise ValueError(
                f"model file truncated: need {nbytes} weight bytes")
        w = np.frombuffer(blob, dtype="<f4", count=rows * cols, offset=off)
        off += nbytes
        return w.reshape(rows, cols).astype(np.float64)

    layers = [take_matrix() for _ in range(n_layers)]
    reg = take_matrix()
    if len(blob) != off + 4:
        raise ValueError(
            f"model file has {len(blob)} bytes, expected {off + 4}")
    (bias,) = struct.unpack_from("<f", blob, off)
    return GcnModel(layers, reg, float(bias))
