"""Shared test oracles, written independently of the library kernels.

Everything here favors straight-line loops over vectorized tricks; the
point is to disagree with the implementation whenever the
implementation is wrong.
"""

import numpy as np

from graphclust.gcn import GcnModel, gcn_forward, mse_loss
from graphclust.tensor import SparseAdjacency


def random_sparse(n, density, rng, symmetric=False):
    """Random CSR matrix for spmm tests."""
    dense = np.where(rng.random((n, n)) < density,
                     rng.standard_normal((n, n)), 0.0)
    if symmetric:
        dense = np.triu(dense) + np.triu(dense, 1).T
    return sparse_from_dense(dense, symmetric=symmetric), dense


def sparse_from_dense(dense, symmetric=False):
    n = dense.shape[0]
    rows, cols = np.nonzero(dense)
    return SparseAdjacency.from_coo(n, rows, cols, dense[rows, cols],
                                    symmetric=symmetric)


def dense_matmul_oracle(x, w):
    """Naive triple loop."""
    n, k = x.shape
    k2, m = w.shape
    assert k == k2
    out = np.zeros((n, m))
    for i in range(n):
        for j in range(m):
            acc = 0.0
            for t in range(k):
                acc += float(x[i, t]) * float(w[t, j])
            out[i, j] = acc
    return out


def exhaustive_knn_oracle(features, k):
    """Per-vertex full sort of float32 cosine similarities.

    Mirrors the contract: descending affinity, ties by lower index,
    self excluded, list length min(k, n-1).
    """
    f = np.asarray(features, dtype=np.float64)
    f = f / np.linalg.norm(f, axis=1, keepdims=True)
    n = f.shape[0]
    kp = min(k, n - 1)
    ids = np.zeros((n, kp), dtype=np.int64)
    affs = np.zeros((n, kp), dtype=np.float32)
    for i in range(n):
        sims = np.clip(f @ f[i], -1.0, 1.0).astype(np.float32)
        order = sorted((j for j in range(n) if j != i),
                       key=lambda j: (-sims[j], j))
        ids[i] = order[:kp]
        affs[i] = sims[order[:kp]]
    return ids, affs


def scalar_gcn_forward_oracle(model, adj_dense, features):
    """Straight-line scalar reimplementation of the forward pass."""
    x = np.asarray(features, dtype=np.float64)
    n = x.shape[0]
    for w in model.layers:
        ax = np.zeros_like(x)
        for i in range(n):
            for j in range(n):
                if adj_dense[i, j] != 0.0:
                    ax[i] += adj_dense[i, j] * x[j]
        h = np.concatenate([x, ax], axis=1)
        z = np.zeros((n, w.shape[1]))
        for i in range(n):
            for j in range(w.shape[1]):
                acc = 0.0
                for t in range(w.shape[0]):
                    acc += h[i, t] * w[t, j]
                z[i, j] = acc
        x = np.maximum(z, 0.0)
    preds = np.zeros(n)
    for i in range(n):
        acc = 0.0
        for t in range(x.shape[1]):
            acc += x[i, t] * model.regressor_weight[t, 0]
        preds[i] = acc + model.regressor_bias
    return preds


def numeric_gradients(model, adj_norm, features, targets, mode="mean",
                      eps=1e-4):
    """Central finite differences w.r.t. every parameter entry."""

    def loss_at(m):
        preds, _ = gcn_forward(m, adj_norm, features)
        return mse_loss(preds, targets, mode=mode)

    def perturbed(filter_fn):
        m = model.copy()
        filter_fn(m)
        return loss_at(m)

    grads_layers = []
    for li, w in enumerate(model.layers):
        g = np.zeros_like(w)
        for idx in np.ndindex(*w.shape):
            def bump(m, d, li=li, idx=idx):
                m.layers[li][idx] += d
            lo = perturbed(lambda m: bump(m, -eps))
            hi = perturbed(lambda m: bump(m, +eps))
            g[idx] = (hi - lo) / (2 * eps)
        grads_layers.append(g)
    g_reg = np.zeros_like(model.regressor_weight)
    for idx in np.ndindex(*model.regressor_weight.shape):
        def bump_r(m, d, idx=idx):
            m.regressor_weight[idx] += d
        lo = perturbed(lambda m: bump_r(m, -eps))
        hi = perturbed(lambda m: bump_r(m, +eps))
        g_reg[idx] = (hi - lo) / (2 * eps)

    def bump_b(m, d):
        m.regressor_bias += d
    lo = perturbed(lambda m: bump_b(m, -eps))
    hi = perturbed(lambda m: bump_b(m, +eps))
    g_bias = (hi - lo) / (2 * eps)
    return grads_layers, g_reg, g_bias


def min_relu_margin(model, adj_norm, features):
    """Smallest |pre-activation|; keep it away from the ReLU kink."""
    _, cache = gcn_forward(model, adj_norm, features)
    return min(float(np.min(np.abs(z))) for z in cache.preacts)


def random_gcn_setup(rng, n_max=10, width_max=8, depth_max=4,
                     kink_margin=1e-3):
    """Random small GCN + graph + targets, resampled away from kinks."""
    while True:
        n = int(rng.integers(2, n_max + 1))
        d_in = int(rng.integers(1, width_max + 1))
        depth = int(rng.integers(1, depth_max + 1))
        widths = [int(rng.integers(1, width_max + 1)) for _ in range(depth)]
        dense = np.where(rng.random((n, n)) < 0.4,
                         rng.uniform(0.1, 1.0, (n, n)), 0.0)
        np.fill_diagonal(dense, 1.0)
        dense = dense / dense.sum(axis=1, keepdims=True)
        adj = sparse_from_dense(dense)
        feats = rng.standard_normal((n, d_in))
        model = GcnModel.init(d_in, widths, seed=int(rng.integers(2 ** 31)))
        targets = rng.standard_normal(n)
        if min_relu_margin(model, adj, feats) > kink_margin:
            return model, adj, dense, feats, targets


def assert_gradients_close(analytic, numeric, rtol=1e-4, atol=1e-6):
    a = np.asarray(analytic, dtype=np.float64).ravel()
    b = np.asarray(numeric, dtype=np.float64).ravel()
    denom = np.maximum(np.abs(b), atol / rtol)
    rel = np.abs(a - b) / denom
    assert rel.max(initial=0.0) <= rtol, \
        f"gradient mismatch: max rel err {rel.max(initial=0.0):.3e}"
