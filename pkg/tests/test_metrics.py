import itertools

import numpy as np
import pytest

from graphclust.metrics import bcubed_fscore, pairwise_fscore, \
    score_clustering


def pairwise_oracle(pred, gt):
    """O(n^2) enumeration over unordered vertex pairs."""
    n = len(pred)
    both = in_pred = in_gt = 0
    for i, j in itertools.combinations(range(n), 2):
        p = pred[i] == pred[j]
        g = gt[i] == gt[j]
        in_pred += p
        in_gt += g
        both += p and g
    precision = both / in_pred if in_pred else 0.0
    recall = both / in_gt if in_gt else 0.0
    f = 2 * precision * recall / (precision + recall) \
        if precision + recall > 0 else 0.0
    return precision, recall, f


def bcubed_oracle(pred, gt):
    """Direct per-vertex averages."""
    n = len(pred)
    ps, rs = [], []
    for i in range(n):
        cluster = [j for j in range(n) if pred[j] == pred[i]]
        cls = [j for j in range(n) if gt[j] == gt[i]]
        inter = len(set(cluster) & set(cls))
        ps.append(inter / len(cluster))
        rs.append(inter / len(cls))
    precision = float(np.mean(ps))
    recall = float(np.mean(rs))
    f = 2 * precision * recall / (precision + recall) \
        if precision + recall > 0 else 0.0
    return precision, recall, f


class TestPairwise:
    def test_perfect_match(self):
        labels = np.array([0, 0, 1, 2, 2])
        assert pairwise_fscore(labels, labels) == (1.0, 1.0, 1.0)

    def test_all_singletons_degenerate(self):
        pred = np.arange(4)
        gt = np.zeros(4, dtype=int)
        assert pairwise_fscore(pred, gt) == (0.0, 0.0, 0.0)

    def test_matches_enumeration_oracle(self):
        rng = np.random.default_rng(80)
        for _ in range(10):
            n = int(rng.integers(2, 51))
            pred = rng.integers(0, 8, size=n)
            gt = rng.integers(0, 5, size=n)
            assert pairwise_fscore(pred, gt) == pairwise_oracle(pred, gt)

    def test_length_mismatch_rejected(self):
        with pytest.raises(ValueError):
            pairwise_fscore([0, 1], [0, 1, 2])

    def test_too_small_rejected(self):
        with pytest.raises(ValueError):
            pairwise_fscore([0], [0])


class TestBCubed:
    def test_perfect_match(self):
        labels = np.array([3, 3, 1, 0])
        assert bcubed_fscore(labels, labels) == (1.0, 1.0, 1.0)

    def test_hand_case_mega_cluster(self):
        # one predicted cluster over two equal 5-element classes
        pred = np.zeros(10, dtype=int)
        gt = np.array([0] * 5 + [1] * 5)
        p, r, f = bcubed_fscore(pred, gt)
        assert p == 0.5
        assert r == 1.0
        assert f == 2.0 / 3.0

    def test_matches_per_vertex_oracle(self):
        rng = np.random.default_rng(81)
        for _ in range(10):
            n = int(rng.integers(1, 51))
            pred = rng.integers(0, 6, size=n)
            gt = rng.integers(0, 4, size=n)
            got = bcubed_fscore(pred, gt)
            expected = bcubed_oracle(pred, gt)
            np.testing.assert_allclose(got, expected, atol=1e-12)

    def test_length_mismatch_rejected(self):
        with pytest.raises(ValueError):
            bcubed_fscore([0, 1], [0])


class TestMetricProperties:
    def test_relabeling_invariance(self):
        rng = np.random.default_rng(82)
        pred = rng.integers(0, 5, size=40)
        gt = rng.integers(0, 4, size=40)
        remap_p = rng.permutation(5)[pred]
        remap_g = (gt + 17) * 3
        assert pairwise_fscore(pred, gt) == pairwise_fscore(remap_p, remap_g)
        # bcubed sums float cell contributions whose order depends on ids
        np.testing.assert_allclose(bcubed_fscore(pred, gt),
                                   bcubed_fscore(remap_p, remap_g),
                                   atol=1e-14)

    def test_unity_iff_same_partition(self):
        rng = np.random.default_rng(83)
        gt = rng.integers(0, 5, size=30)
        same = (gt + 3) % 7
        # same partition, different ids
        _, _, f_pair = pairwise_fscore(same, gt)
        assert f_pair == 1.0
        different = gt.copy()
        different[0] = different[0] + 100
        assert pairwise_fscore(different, gt)[2] < 1.0
        assert bcubed_fscore(different, gt)[2] < 1.0

    def test_swapping_args_swaps_precision_recall(self):
        rng = np.random.default_rng(84)
        a = rng.integers(0, 5, size=35)
        b = rng.integers(0, 3, size=35)
        pa, ra, _ = pairwise_fscore(a, b)
        pb, rb, _ = pairwise_fscore(b, a)
        assert (pa, ra) == (rb, pb)
        pa, ra, _ = bcubed_fscore(a, b)
        pb, rb, _ = bcubed_fscore(b, a)
        np.testing.assert_allclose((pa, ra), (rb, pb), atol=1e-15)


class TestScoreReport:
    def test_report_fields_and_record(self):
        pred = np.array([0, 0, 1, 1])
        gt = np.array([0, 0, 0, 1])
        report = score_clustering(pred, gt)
        assert report.num_pred_clusters == 2
        assert report.num_gt_clusters == 2
        record = report.to_record()
        assert "pairwise_f=" in record and "bcubed_f=" in record
        assert "\n" not in record
        table = report.to_table()
        assert "pairwise" in table and "bcubed" in table
