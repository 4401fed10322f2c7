"""Edge connectivity: candidate sets, offset subgraphs, training and
scoring of same-class likelihood between a vertex and its more
confident neighbors.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .gcn import TrainConfig, gcn_backward, gcn_forward, mse_loss, \
    mse_loss_grad, sgd_step
from .graph import add_self_loops_and_normalize
from .tensor import SparseAdjacency


@dataclass
class CandidateSet:
    """Neighbors of ``center`` with strictly higher confidence.

    Members keep the neighbor-list order (descending affinity, ties by
    lower id). May be empty when the center is a local confidence
    maximum.
    """

    center: int
    members: np.ndarray
    affinities: np.ndarray

    def __len__(self):
        return self.members.shape[0]


@dataclass
class Subgraph:
    """Candidate-set subgraph with center-offset features.

    ``adjacency`` is the induced affinity matrix among the members,
    self-loops added and row-normalized; row i of ``features_offset``
    is feature(member_i) - feature(center).
    """

    center: int
    vertex_ids: np.ndarray
    features_offset: np.ndarray
    adjacency: SparseAdjacency


@dataclass
class ConnectivityPrediction:
    center: int
    members: np.ndarray
    scores: np.ndarray


def candidate_set(i, g, conf):
    """Filter vertex ``i``'s directed neighbors by strictly higher confidence."""
    values = conf.values if hasattr(conf, "values") else np.asarray(conf)
    if values.shape[0] != g.n:
        raise ValueError(f"need {g.n} confidence values, got {values.shape[0]}")
    ids, affs = g.neighbors(i)
    mask = values[ids] > values[i]
    return CandidateSet(int(i), ids[mask].copy(), affs[mask].copy())


def build_subgraph(s, g, features):
    """Induced, normalized subgraph over a nonempty candidate set."""
    if len(s) == 0:
        raise ValueError("cannot build a subgraph from an empty candidate set")
    feats = np.asarray(features, dtype=np.float64)
    members = s.members.astype(np.int64)
    offsets = feats[members] - feats[s.center]
    order = np.argsort(members)
    sorted_members = members[order]
    rows, cols, vals = [], [], []
    for new_id, m in enumerate(members):
        ecols, evals = g.adjacency.row(m)
        pos = np.searchsorted(sorted_members, ecols)
        pos = np.minimum(pos, members.size - 1)
        hit = sorted_members[pos] == ecols
        rows.append(np.full(int(hit.sum()), new_id, dtype=np.int64))
        cols.append(order[pos[hit]])
        vals.append(evals[hit])
    induced = SparseAdjacency.from_coo(
        members.size, np.concatenate(rows), np.concatenate(cols),
        np.concatenate(vals), symmetric=True)
    return Subgraph(center=s.center, vertex_ids=members,
                    features_offset=offsets,
                    adjacency=add_self_loops_and_normalize(induced))


def ground_truth_connectivity(s, labels):
    """1 where a member shares the center's label, else 0."""
    labels = np.asarray(labels)
    return (labels[s.members] == labels[s.center]).astype(np.float64)


def _stack_subgraphs(subgraphs):
    """Block-diagonal batch of subgraphs; exact equivalent of running
    each subgraph through the GCN separately."""
    sizes = np.array([sg.features_offset.shape[0] for sg in subgraphs])
    vertex_shift = np.concatenate([[0], np.cumsum(sizes)])
    n_total = int(vertex_shift[-1])
    feats = np.concatenate([sg.features_offset for sg in subgraphs])
    row_offsets = np.zeros(n_total + 1, dtype=np.int64)
    nnz_shift = 0
    cols, vals = [], []
    for b, sg in enumerate(subgraphs):
        a = sg.adjacency
        lo, hi = vertex_shift[b], vertex_shift[b + 1]
        row_offsets[lo + 1:hi + 1] = a.row_offsets[1:] + nnz_shift
        cols.append(a.col_indices.astype(np.int64) + lo)
        vals.append(a.values)
        nnz_shift += a.nnz
    batch = SparseAdjacency(n_total, row_offsets,
                            np.concatenate(cols).astype(np.int32),
                            np.concatenate(vals), validate=False)
    return batch, feats


def train_gcne(model, dataset, cfg=None, batch_size=32):
    """Minimize the summed per-subgraph MSE, averaged over each batch.

    ``dataset`` is a list of (Subgraph, target-vector) pairs. Batches of
    subgraphs are stacked block-diagonally, which reproduces the
    per-subgraph computation exactly. Returns (model, per-epoch mean
    batch loss).
    """
    if cfg is None:
        cfg = TrainConfig(epochs=80)
    if not dataset:
        raise ValueError("training dataset is empty")
    for sg, targets in dataset:
        if sg.features_offset.shape[0] == 0:
            raise ValueError("dataset contains an empty subgraph")
        if len(targets) != sg.features_offset.shape[0]:
            raise ValueError("target length does not match subgraph size")
    rng = np.random.default_rng(cfg.seed)
    history = np.zeros(cfg.epochs, dtype=np.float64)
    for epoch in range(cfg.epochs):
        perm = rng.permutation(len(dataset))
        batch_losses = []
        for start in range(0, len(dataset), batch_size):
            chunk = perm[start:start + batch_size]
            subs = [dataset[i][0] for i in chunk]
            targets = np.concatenate(
                [np.asarray(dataset[i][1], dtype=np.float64) for i in chunk])
            batch_adj, batch_feats = _stack_subgraphs(subs)
            preds, cache = gcn_forward(model, batch_adj, batch_feats)
            batch_losses.append(mse_loss(preds, targets, mode="sum") / len(chunk))
            grad = mse_loss_grad(preds, targets, mode="sum") / len(chunk)
            grads = gcn_backward(model, cache, grad)
            sgd_step(model, grads, cfg)
        history[epoch] = float(np.mean(batch_losses))
    return model, history


def predict_connectivity(model, s, g, features):
    """Score each candidate-set member's same-class likelihood."""
    if len(s) == 0:
        raise ValueError("cannot predict on an empty candidate set")
    sub = build_subgraph(s, g, features)
    preds, _ = gcn_forward(model, sub.adjacency, sub.features_offset)
    return ConnectivityPrediction(center=s.center, members=s.members.copy(),
                                  scores=preds)


def select_top_rho(conf, rho):
    """Ids of the ceil(rho * n) most confident vertices, ascending.

    Ties break toward lower vertex index.
    """
    if not 0.0 <= rho <= 1.0:
        raise ValueError(f"rho must lie in [0, 1], got {rho}")
    values = conf.values if hasattr(conf, "values") else np.asarray(conf)
    n = values.shape[0]
    # guard against float dust in rho * n (e.g. 0.2 * 10000 -> 2000.0000...2)
    count = min(n, math.ceil(rho * n - 1e-9))
    order = np.argsort(-values, kind="stable")
    return np.sort(order[:count])


def write_connectivity_text(predictions, path):
    """One `center member score` triple per line."""
    with open(path, "w") as fh:
        for p in predictions:
            for m, s in zip(p.members, p.scores):
                fh.write(f"{p.center} {int(m)} {float(s)!r}\n")


def read_connectivity_text(path):
    """Parse triples back into per-center predictions."""
    by_center = {}
    with open(path) as fh:
        for lineno, line in enumerate(fh, start=1):
            if not line.strip():
                continue
            parts = line.split()
            if len(parts) != 3:
                raise ValueError(f"line {lineno}: expected 3 fields")
            center, member, score = int(parts[0]), int(parts[1]), float(parts[2])
            by_center.setdefault(center, ([], []))
            by_center[center][0].append(member)
            by_center[center][1].append(score)
    return {
        c: ConnectivityPrediction(center=c,
                                  members=np.array(ms, dtype=np.int32),
                                  scores=np.array(ss, dtype=np.float64))
        for c, (ms, ss) in by_center.items()
    }
