"""Clustering quality: pairwise and BCubed F-scores.

Both metrics are computed from the contingency table between the
predicted and ground-truth partitions, so they run in O(n log n) rather
than enumerating vertex pairs. Degenerate 0/0 precision or recall is
defined as 0.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np


@dataclass
class ScoreReport:
    pairwise: tuple
    bcubed: tuple
    num_pred_clusters: int
    num_gt_clusters: int

    def to_record(self):
        """Single-line machine-readable key=value record."""
        pp, pr, pf = self.pairwise
        bp, br, bf = self.bcubed
        fields = [
            f"pairwise_precision={pp!r}", f"pairwise_recall={pr!r}",
            f"pairwise_f={pf!r}", f"bcubed_precision={bp!r}",
            f"bcubed_recall={br!r}", f"bcubed_f={bf!r}",
            f"num_pred_clusters={self.num_pred_clusters}",
            f"num_gt_clusters={self.num_gt_clusters}",
        ]
        return " ".join(fields)

    def to_table(self):
        pp, pr, pf = self.pairwise
        bp, br, bf = self.bcubed
        lines = [
            "metric    precision    recall       f-score",
            f"pairwise  {pp:<12.6f} {pr:<12.6f} {pf:<12.6f}",
            f"bcubed    {bp:<12.6f} {br:<12.6f} {bf:<12.6f}",
            f"clusters: predicted={self.num_pred_clusters} "
            f"ground-truth={self.num_gt_clusters}",
        ]
        return "\n".join(lines)


def _contingency(pred, gt):
    pred = np.asarray(pred).ravel()
    gt = np.asarray(gt).ravel()
    if pred.shape != gt.shape:
        raise ValueError(
            f"label length mismatch: {pred.shape[0]} vs {gt.shape[0]}")
    _, pi = np.unique(pred, return_inverse=True)
    _, gi = np.unique(gt, return_inverse=True)
    n_gt = int(gi.max()) + 1 if gi.size else 0
    keys = pi.astype(np.int64) * n_gt + gi
    cells, counts = np.unique(keys, return_counts=True)
    pred_sizes = np.bincount(pi)
    gt_sizes = np.bincount(gi)
    cell_pred = cells // n_gt
    cell_gt = cells % n_gt
    return counts.astype(np.int64), cell_pred, cell_gt, \
        pred_sizes.astype(np.int64), gt_sizes.astype(np.int64)


def _f(p, r):
    return 2.0 * p * r / (p + r) if p + r > 0 else 0.0


def pairwise_fscore(pred, gt):
    """Precision/recall/F over unordered same-cluster vertex pairs."""
    pred = np.asarray(pred).ravel()
    gt = np.asarray(gt).ravel()
    if pred.shape != gt.shape:
        raise ValueError(
            f"label length mismatch: {pred.shape[0]} vs {gt.shape[0]}")
    if pred.size < 2:
        raise ValueError("pairwise scores need at least two vertices")
    counts, _, _, pred_sizes, gt_sizes = _contingency(pred, gt)
    both = int(np.sum(counts * (counts - 1) // 2))
    in_pred = int(np.sum(pred_sizes * (pred_sizes - 1) // 2))
    in_gt = int(np.sum(gt_sizes * (gt_sizes - 1) // 2))
    precision = both / in_pred if in_pred else 0.0
    recall = both / in_gt if in_gt else 0.0
    return precision, recall, _f(precision, recall)


def bcubed_fscore(pred, gt):
    """Per-vertex precision/recall averaged over all vertices."""
    pred = np.asarray(pred).ravel()
    gt = np.asarray(gt).ravel()
    if pred.shape != gt.shape:
        raise ValueError(
            f"label length mismatch: {pred.shape[0]} vs {gt.shape[0]}")
    if pred.size < 1:
        raise ValueError("bcubed scores need at least one vertex")
    counts, cell_pred, cell_gt, pred_sizes, gt_sizes = _contingency(pred, gt)
    c = counts.astype(np.float64)
    n = pred.size
    precision = float(np.sum(c * c / pred_sizes[cell_pred]) / n)
    recall = float(np.sum(c * c / gt_sizes[cell_gt]) / n)
    return precision, recall, _f(precision, recall)


def score_clustering(pred, gt):
    """Full report for a predicted assignment against ground truth."""
    pred_labels = pred.labels if hasattr(pred, "labels") else np.asarray(pred)
    gt_labels = np.asarray(gt)
    return ScoreReport(
        pairwise=pairwise_fscore(pred_labels, gt_labels),
        bcubed=bcubed_fscore(pred_labels, gt_labels),
        num_pred_clusters=int(np.unique(pred_labels).size),
        num_gt_clusters=int(np.unique(gt_labels).size),
    )
