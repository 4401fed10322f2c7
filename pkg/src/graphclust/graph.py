"""KNN affinity graph construction and normalization.

Each vertex is connected to its k most cosine-similar vertices (exact
brute-force search, ties broken by lower vertex index). The symmetric
adjacency is the union of the directed KNN edges with negative
affinities clamped to zero; the directed lists keep raw affinities.
"""

from __future__ import annotations

import struct

import numpy as np

from .tensor import SparseAdjacency, l2_normalize_rows

_GRAPH_MAGIC = b"GCGR"
_GRAPH_VERSION = 1
_HEADER = struct.Struct("<4sIQI")


class KnnGraph:
    """Directed KNN lists plus the symmetrized affinity matrix.

    ``neighbor_ids``/``neighbor_affinities`` are (n, k') arrays with
    k' = min(k, n-1); each row is sorted by descending affinity with ties
    broken by ascending vertex id. Affinities are raw cosines in [-1, 1];
    ``adjacency`` clamps them to [0, 1] and is symmetric.
    """

    def __init__(self, n, k, neighbor_ids, neighbor_affinities, adjacency,
                 validate=True):
        self.n = int(n)
        self.k = int(k)
        self.neighbor_ids = np.ascontiguousarray(neighbor_ids, dtype=np.int32)
        self.neighbor_affinities = np.ascontiguousarray(
            neighbor_affinities, dtype=np.float32)
        self.adjacency = adjacency
        if validate:
            self._validate()

    def _validate(self):
        kp = min(self.k, self.n - 1) if self.n > 1 else 0
        if self.neighbor_ids.shape != (self.n, kp):
            raise ValueError(
                f"neighbor table must be ({self.n}, {kp}), "
                f"got {self.neighbor_ids.shape}")
        if self.neighbor_affinities.shape != self.neighbor_ids.shape:
            raise ValueError("neighbor id/affinity tables must share a shape")
        if self.adjacency.n != self.n or not self.adjacency.symmetric:
            raise ValueError("adjacency must be a symmetric n x n matrix")
        if kp == 0:
            return
        ids = self.neighbor_ids
        if ids.min() < 0 or ids.max() >= self.n:
            raise ValueError("neighbor id out of range")
        if np.any(ids == np.arange(self.n, dtype=np.int32)[:, None]):
            raise ValueError("self-loops are not allowed in neighbor lists")
        affs = self.neighbor_affinities
        if not np.all(np.isfinite(affs)):
            raise ValueError("affinities must be finite")
        if affs.min() < -1.0 or affs.max() > 1.0:
            raise ValueError("affinities must lie in [-1, 1]")
        if np.any(np.diff(affs, axis=1) > 0):
            raise ValueError("neighbor affinities must be non-increasing")

    def neighbors(self, i):
        """Directed neighbor ids and raw affinities of vertex ``i``."""
        return self.neighbor_ids[i], self.neighbor_affinities[i]

    def __repr__(self):
        return f"KnnGraph(n={self.n}, k={self.k}, nnz={self.adjacency.nnz})"


def build_knn_graph(features, k, block_rows=None):
    """Exact top-k cosine KNN graph over row features.

    Parameters
    ----------
    features : (n, d) array
        Feature vectors; rows are L2-normalized internally if needed.
    k : int
        Neighbors per vertex. Lists are shorter only when n - 1 < k.
    block_rows : int, optional
        Rows per similarity block (memory knob; does not affect output).
    """
    if k <= 0:
        raise ValueError(f"k must be positive, got {k}")
    feats = l2_normalize_rows(features)
    n = feats.shape[0]
    if n < 1:
        raise ValueError("need at least one feature row")
    kp = min(k, n - 1)
    ids = np.zeros((n, kp), dtype=np.int32)
    affs = np.zeros((n, kp), dtype=np.float32)
    if kp > 0:
        if block_rows is None:
            block_rows = max(1, int(2 ** 23) // n)
        for start in range(0, n, block_rows):
            stop = min(start + block_rows, n)
            sims = feats[start:stop] @ feats.T
            np.clip(sims, -1.0, 1.0, out=sims)
            sims = sims.astype(np.float32)
            sims[np.arange(stop - start), np.arange(start, stop)] = -np.inf
            # stable sort on descending affinity => ties go to lower index
            order = np.argsort(-sims, axis=1, kind="stable")[:, :kp]
            ids[start:stop] = order
            affs[start:stop] = np.take_along_axis(sims, order, axis=1)
    adjacency = _adjacency_from_neighbors(n, ids, affs)
    return KnnGraph(n, k, ids, affs, adjacency)


def rebuild_graph(embeddings, k):
    """Rebuild the affinity graph from learned embeddings.

    Same contract as :func:`build_knn_graph`; embeddings are
    L2-normalized internally. The caller keeps vertex ids aligned with
    the original feature set.
    """
    return build_knn_graph(embeddings, k)


def _adjacency_from_neighbors(n, ids, affs):
    """Union of directed edges, negative affinities clamped, max-reconciled."""
    kp = ids.shape[1]
    if kp == 0:
        return SparseAdjacency(n, np.zeros(n + 1, dtype=np.int64),
                               np.zeros(0, dtype=np.int32),
                               np.zeros(0, dtype=np.float32),
                               symmetric=True, validate=False)
    src = np.repeat(np.arange(n, dtype=np.int64), kp)
    dst = ids.ravel().astype(np.int64)
    val = np.maximum(affs.ravel(), np.float32(0.0))
    keys = np.concatenate([src * n + dst, dst * n + src])
    vals = np.concatenate([val, val])
    order = np.argsort(keys, kind="stable")
    keys = keys[order]
    vals = vals[order]
    firsts = np.ones(keys.shape[0], dtype=bool)
    firsts[1:] = keys[1:] != keys[:-1]
    starts = np.flatnonzero(firsts)
    uvals = np.maximum.reduceat(vals, starts)
    ukeys = keys[starts]
    urows = (ukeys // n).astype(np.int64)
    ucols = (ukeys % n).astype(np.int32)
    row_offsets = np.zeros(n + 1, dtype=np.int64)
    np.cumsum(np.bincount(urows, minlength=n), out=row_offsets[1:])
    return SparseAdjacency(n, row_offsets, ucols, uvals, symmetric=True,
                           validate=False)


def add_self_loops_and_normalize(a):
    """Row-normalize ``a + I``: each row is divided by its own sum.

    The unit self-loop keeps every row sum positive, so the result is
    row-stochastic even for vertices with no (or all-zero) edges.
    """
    n = a.n
    diag = np.arange(n, dtype=np.int64)
    rows = np.concatenate([np.repeat(np.arange(n, dtype=np.int64),
                                     np.diff(a.row_offsets)), diag])
    cols = np.concatenate([a.col_indices.astype(np.int64), diag])
    vals = np.concatenate([a.values.astype(np.float64), np.ones(n)])
    order = np.argsort(rows * n + cols, kind="stable")
    rows = rows[order]
    cols = cols[order]
    vals = vals[order]
    # duplicates only arise if `a` already held diagonal entries
    keys = rows * n + cols
    firsts = np.ones(keys.shape[0], dtype=bool)
    firsts[1:] = keys[1:] != keys[:-1]
    starts = np.flatnonzero(firsts)
    vals = np.add.reduceat(vals, starts)
    rows = rows[starts]
    cols = cols[starts]
    row_offsets = np.zeros(n + 1, dtype=np.int64)
    np.cumsum(np.bincount(rows, minlength=n), out=row_offsets[1:])
    row_sums = np.add.reduceat(vals, row_offsets[:-1])
    vals = vals / np.repeat(row_sums, np.diff(row_offsets))
    return SparseAdjacency(n, row_offsets, cols.astype(np.int32), vals,
                           symmetric=False, validate=False)


def normalized_adjacency(g):
    """Row-stochastic message-passing matrix of a KNN graph."""
    return add_self_loops_and_normalize(g.adjacency)


def write_graph(g, path):
    """Serialize the directed KNN relation as little-endian CSR.

    Layout: magic "GCGR", version u32, n u64, k u32, row_offsets u64,
    col_indices u32, values f32. Rows are the per-vertex neighbor lists
    in ascending id order; the descending-affinity order and the
    symmetric adjacency are reconstructed on load.
    """
    n = g.n
    kp = g.neighbor_ids.shape[1]
    order = np.argsort(g.neighbor_ids, axis=1)
    ids = np.take_along_axis(g.neighbor_ids, order, axis=1)
    affs = np.take_along_axis(g.neighbor_affinities, order, axis=1)
    row_offsets = (np.arange(n + 1, dtype=np.uint64) * kp)
    with open(path, "wb") as fh:
        fh.write(_HEADER.pack(_GRAPH_MAGIC, _GRAPH_VERSION, n, g.k))
        fh.write(row_offsets.tobytes())
        fh.write(ids.astype("<u4").tobytes())
        fh.write(affs.astype("<f4").tobytes())


def read_graph(path):
    """Load a graph written by :func:`write_graph`."""
    with open(path, "rb") as fh:
        blob = fh.read()
    if len(blob) < _HEADER.size:
        raise ValueError(f"graph file too short: {len(blob)} bytes")
    magic, version, n, k = _HEADER.unpack_from(blob)
    if magic != _GRAPH_MAGIC:
        raise ValueError(f"bad magic {magic!r}, expected {_GRAPH_MAGIC!r}")
    if version != _GRAPH_VERSION:
        raise ValueError(f"unsupported graph format version {version}")
    off = _HEADER.size
    offsets_bytes = (n + 1) * 8
    if len(blob) < off + offsets_bytes:
        raise ValueError("graph file truncated in row offsets")
    row_offsets = np.frombuffer(blob, dtype="<u8", count=n + 1, offset=off)
    off += offsets_bytes
    nnz = int(row_offsets[-1])
    expected = off + nnz * 4 + nnz * 4
    if len(blob) != expected:
        raise ValueError(
            f"graph file has {len(blob)} bytes, expected {expected}")
    ids = np.frombuffer(blob, dtype="<u4", count=nnz, offset=off)
    off += nnz * 4
    affs = np.frombuffer(blob, dtype="<f4", count=nnz, offset=off)
    lengths = np.diff(row_offsets.astype(np.int64))
    if n > 0 and (lengths.min() != lengths.max()):
        raise ValueError("graph file has ragged neighbor lists")
    kp = int(lengths[0]) if n > 0 else 0
    ids = ids.astype(np.int32).reshape(n, kp)
    affs = affs.astype(np.float32).reshape(n, kp)
    # restore descending-affinity order (ids ascend per row, so a stable
    # sort breaks ties by lower id)
    order = np.argsort(-affs, axis=1, kind="stable")
    ids = np.take_along_axis(ids, order, axis=1)
    affs = np.take_along_axis(affs, order, axis=1)
    adjacency = _adjacency_from_neighbors(n, ids, affs)
    return KnnGraph(n, k, ids, affs, adjacency)
