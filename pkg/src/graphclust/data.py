"""Feature/label file formats and synthetic benchmark data.

Feature files are binary: magic "FEAT", version u32, n u64, d u32, then
n*d little-endian float32 values in row-major order. Label files are
plain text with one non-negative integer per line.
"""

from __future__ import annotations

import struct

import numpy as np

from .tensor import l2_normalize_rows

_FEAT_MAGIC = b"FEAT"
_FEAT_VERSION = 1
_FEAT_HEADER = struct.Struct("<4sIQI")


def write_features(x, path):
    x = np.asarray(x)
    if x.ndim != 2:
        raise ValueError("feature matrix must be 2-D")
    if x.size and not np.all(np.isfinite(x)):
        raise ValueError("feature matrix contains non-finite values")
    with open(path, "wb") as fh:
        fh.write(_FEAT_HEADER.pack(_FEAT_MAGIC, _FEAT_VERSION,
                                   x.shape[0], x.shape[1]))
        fh.write(x.astype("<f4").tobytes())


def read_features(path):
    """Read a feature file back as float32, validating the byte count."""
    with open(path, "rb") as fh:
        blob = fh.read()
    if len(blob) < _FEAT_HEADER.size:
        raise ValueError(f"feature file too short: {len(blob)} bytes")
    magic, version, n, d = _FEAT_HEADER.unpack_from(blob)
    if magic != _FEAT_MAGIC:
        raise ValueError(f"bad magic {magic!r}, expected {_FEAT_MAGIC!r}")
    if version != _FEAT_VERSION:
        raise ValueError(f"unsupported feature format version {version}")
    expected = _FEAT_HEADER.size + n * d * 4
    if len(blob) != expected:
        raise ValueError(
            f"feature file has {len(blob)} bytes, expected {expected} "
            f"for a {n}x{d} matrix")
    x = np.frombuffer(blob, dtype="<f4", count=n * d,
                      offset=_FEAT_HEADER.size)
    x = x.reshape(n, d).astype(np.float32)
    if x.size and not np.all(np.isfinite(x)):
        raise ValueError("feature file contains non-finite values")
    return x


def read_labels(path):
    """One non-negative integer per line, remapped to dense ids.

    Ids are assigned in order of first appearance, so "5 9 5" becomes
    [0, 1, 0]. An empty file yields an empty vector.
    """
    with open(path) as fh:
        lines = fh.read().splitlines()
    raw = np.empty(len(lines), dtype=np.int64)
    for idx, line in enumerate(lines):
        try:
            value = int(line.strip())
        except ValueError:
            raise ValueError(
                f"{path}: line {idx + 1}: not an integer: {line!r}") from None
        if value < 0:
            raise ValueError(
                f"{path}: line {idx + 1}: labels must be non-negative")
        raw[idx] = value
    if raw.size == 0:
        return raw
    uniq, first_idx, inverse = np.unique(raw, return_index=True,
                                         return_inverse=True)
    rank = np.empty(uniq.size, dtype=np.int64)
    rank[np.argsort(first_idx)] = np.arange(uniq.size)
    return rank[inverse]


def write_labels(labels, path):
    with open(path, "w") as fh:
        for lab in np.asarray(labels).ravel():
            fh.write(f"{int(lab)}\n")


def generate_synthetic(num_classes, points_per_class, dim, noise_sigma,
                       seed=0):
    """Unit-sphere class blobs: points = normalize(center + N(0, sigma^2)).

    Class centers are drawn uniformly on the unit sphere. Deterministic
    for a fixed seed. Returns (float32 features, int labels).
    """
    if num_classes < 1 or points_per_class < 1 or dim < 1:
        raise ValueError("num_classes, points_per_class and dim must be >= 1")
    if noise_sigma < 0:
        raise ValueError("noise_sigma must be non-negative")
    rng = np.random.default_rng(seed)
    centers = l2_normalize_rows(rng.standard_normal((num_classes, dim)))
    labels = np.repeat(np.arange(num_classes, dtype=np.int64),
                       points_per_class)
    base = np.repeat(centers, points_per_class, axis=0)
    if noise_sigma == 0.0:
        points = base
    else:
        noise = rng.standard_normal(base.shape) * noise_sigma
        points = l2_normalize_rows(base + noise)
    return points.astype(np.float32), labels
