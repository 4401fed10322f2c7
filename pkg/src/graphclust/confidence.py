"""Vertex confidence: label-derived targets, training and prediction.

The reference target for a vertex is the affinity-weighted vote of its
directed KNN list: same-label neighbors count +a, different-label
neighbors count -a, averaged over the list. High values mean dense,
pure neighborhoods. Alternative target definitions (radius densities,
class-mean similarities) are provided for ablations.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass

import numpy as np

from .gcn import TrainConfig, gcn_backward, gcn_forward, mse_loss, \
    mse_loss_grad, sgd_step
from .tensor import l2_normalize_rows

GROUND_TRUTH = "ground_truth"
PREDICTED = "predicted"

CONFIDENCE_KINDS = ("u_num", "u_weight", "s_avg", "s_center", "s_nbr")


@dataclass
class ConfidenceVector:
    """Per-vertex confidence values plus their provenance tag."""

    values: np.ndarray
    source: str

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=np.float64).ravel()
        if self.source not in (GROUND_TRUTH, PREDICTED):
            raise ValueError(f"unknown source tag {self.source!r}")
        if not np.all(np.isfinite(self.values)):
            raise ValueError("confidence values must be finite")

    def __len__(self):
        return self.values.shape[0]


def ground_truth_confidence(g, labels):
    """Affinity-weighted neighborhood purity of every vertex.

    Uses the directed neighbor lists with raw (unclamped) cosine
    affinities. Accumulation is slot-by-slot in list order so the result
    is bit-identical to a per-vertex left-to-right loop. Vertices with
    empty lists get confidence 0.
    """
    labels = np.asarray(labels)
    if labels.shape != (g.n,):
        raise ValueError(f"need {g.n} labels, got {labels.shape}")
    kp = g.neighbor_ids.shape[1]
    acc = np.zeros(g.n, dtype=np.float64)
    if kp == 0:
        return ConfidenceVector(acc, GROUND_TRUTH)
    signs = np.where(labels[g.neighbor_ids] == labels[:, None], 1.0, -1.0)
    affs = g.neighbor_affinities.astype(np.float64)
    for slot in range(kp):
        acc += signs[:, slot] * affs[:, slot]
    return ConfidenceVector(acc / kp, GROUND_TRUTH)


def confidence_variant(g, labels=None, features=None, kind="s_nbr",
                       radius=None):
    """Alternative confidence definitions for the ablation study.

    kind:
      u_num    - number of vertices within cosine distance ``radius``
      u_weight - sum of their cosine affinities
      s_avg    - mean cosine to all same-label vertices (self excluded)
      s_center - cosine to the (unnormalized) mean feature of the class
      s_nbr    - the neighborhood vote of :func:`ground_truth_confidence`

    Radius is required for the u_* kinds, labels for the s_* kinds.
    """
    if kind not in CONFIDENCE_KINDS:
        raise ValueError(f"unknown confidence kind {kind!r}")
    if kind == "s_nbr":
        if labels is None:
            raise ValueError("s_nbr requires labels")
        return ground_truth_confidence(g, labels)
    if features is None:
        raise ValueError(f"{kind} requires features")
    feats = l2_normalize_rows(features)
    n = feats.shape[0]
    if kind in ("u_num", "u_weight"):
        if radius is None:
            raise ValueError(f"{kind} requires a radius")
        out = np.zeros(n, dtype=np.float64)
        threshold = 1.0 - float(radius)
        block = max(1, int(2 ** 23) // max(n, 1))
        for start in range(0, n, block):
            stop = min(start + block, n)
            sims = feats[start:stop] @ feats.T
            sims[np.arange(stop - start), np.arange(start, stop)] = -np.inf
            within = sims >= threshold
            if kind == "u_num":
                out[start:stop] = within.sum(axis=1)
            else:
                out[start:stop] = np.where(within, sims, 0.0).sum(axis=1)
        return ConfidenceVector(out, GROUND_TRUTH)
    if labels is None:
        raise ValueError(f"{kind} requires labels")
    labels = np.asarray(labels)
    if labels.shape != (n,):
        raise ValueError(f"need {n} labels, got {labels.shape}")
    out = np.zeros(n, dtype=np.float64)
    for lab in np.unique(labels):
        idx = np.flatnonzero(labels == lab)
        sub = feats[idx]
        if kind == "s_avg":
            if idx.size == 1:
                out[idx] = 0.0
                continue
            sims = sub @ sub.T
            out[idx] = (sims.sum(axis=1) - np.diag(sims)) / (idx.size - 1)
        else:  # s_center
            if idx.size == 1:
                out[idx] = 1.0
                continue
            center = sub.mean(axis=0)
            norm = np.linalg.norm(center)
            out[idx] = 0.0 if norm == 0.0 else (sub @ center) / norm
    return ConfidenceVector(out, GROUND_TRUTH)


def train_gcnv(model, adj_norm, features, targets, cfg=None):
    """Full-batch regression of confidence targets; returns loss history.

    The recorded loss of epoch ``e`` is measured before that epoch's
    parameter update.
    """
    if cfg is None:
        cfg = TrainConfig(epochs=200)
    if not isinstance(targets, ConfidenceVector) or targets.source != GROUND_TRUTH:
        raise ValueError("training targets must be ground-truth confidence")
    t = targets.values
    history = np.zeros(cfg.epochs, dtype=np.float64)
    for epoch in range(cfg.epochs):
        preds, cache = gcn_forward(model, adj_norm, features)
        history[epoch] = mse_loss(preds, t, mode="mean")
        grads = gcn_backward(model, cache, mse_loss_grad(preds, t, mode="mean"))
        sgd_step(model, grads, cfg)
    return model, history


def predict_confidence(model, adj_norm, features):
    """Predicted confidence plus the final-layer embeddings.

    Predictions are quantized to float32, the precision used by the
    confidence exchange format, so downstream ranking behaves the same
    whether the values travel in memory or through a file. Duplicated
    inputs then tie exactly instead of differing by accumulation noise.
    """
    preds, cache = gcn_forward(model, adj_norm, features)
    preds = preds.astype(np.float32).astype(np.float64)
    return ConfidenceVector(preds, PREDICTED), cache.final


def write_confidence(conf, path):
    """Binary export: u64 length prefix then little-endian f32 values."""
    values = conf.values if isinstance(conf, ConfidenceVector) else np.asarray(conf)
    with open(path, "wb") as fh:
        fh.write(struct.pack("<Q", values.shape[0]))
        fh.write(values.astype("<f4").tobytes())


def read_confidence(path, source=PREDICTED):
    with open(path, "rb") as fh:
        blob = fh.read()
    if len(blob) < 8:
        raise ValueError("confidence file too short for its length prefix")
    (count,) = struct.unpack_from("<Q", blob)
    expected = 8 + count * 4
    if len(blob) != expected:
        raise ValueError(
            f"confidence file has {len(blob)} bytes, expected {expected}")
    values = np.frombuffer(blob, dtype="<f4", count=count, offset=8)
    return ConfidenceVector(values.astype(np.float64), source)


def write_confidence_text(conf, path):
    """One value per line, for eyeballing."""
    values = conf.values if isinstance(conf, ConfidenceVector) else np.asarray(conf)
    with open(path, "w") as fh:
        for v in values:
            fh.write(f"{float(v)!r}\n")
