import numpy as np
import pytest

from graphclust.tensor import SparseAdjacency, concat_cols, dense_matmul, \
    l2_normalize_rows, relu, spmm

from helpers import dense_matmul_oracle, random_sparse


class TestSpmm:
    def test_identity(self):
        x = np.arange(12.0).reshape(4, 3)
        assert np.array_equal(spmm(SparseAdjacency.identity(4), x), x)

    def test_permutation(self):
        a = SparseAdjacency.from_coo(2, [0, 1], [1, 0], [1.0, 1.0],
                                     symmetric=True)
        x = np.array([[1.0, 2.0], [3.0, 4.0]])
        assert np.array_equal(spmm(a, x), [[3.0, 4.0], [1.0, 2.0]])

    def test_against_dense_oracle(self):
        rng = np.random.default_rng(0)
        a, dense = random_sparse(10, 0.3, rng)
        x = rng.standard_normal((10, 4))
        np.testing.assert_allclose(spmm(a, x), dense @ x, atol=1e-12)

    def test_random_instances_match_densified(self):
        rng = np.random.default_rng(1)
        for _ in range(25):
            n = int(rng.integers(1, 51))
            a, dense = random_sparse(n, float(rng.uniform(0.05, 0.6)), rng)
            x = rng.standard_normal((n, int(rng.integers(1, 6))))
            np.testing.assert_allclose(spmm(a, x), a.to_dense() @ x,
                                       atol=1e-10)

    def test_dimension_mismatch(self):
        with pytest.raises(ValueError):
            spmm(SparseAdjacency.identity(3), np.zeros((4, 2)))


class TestDenseMatmul:
    def test_identity(self):
        x = np.arange(6.0).reshape(2, 3)
        assert np.array_equal(dense_matmul(x, np.eye(3)), x)

    def test_hand_case(self):
        out = dense_matmul(np.array([[1.0, 2.0]]), np.array([[3.0], [4.0]]))
        assert np.array_equal(out, [[11.0]])

    def test_against_triple_loop(self):
        rng = np.random.default_rng(2)
        x = rng.standard_normal((8, 5))
        w = rng.standard_normal((5, 3))
        np.testing.assert_allclose(dense_matmul(x, w),
                                   dense_matmul_oracle(x, w), atol=1e-12)

    def test_dimension_mismatch(self):
        with pytest.raises(ValueError):
            dense_matmul(np.zeros((2, 3)), np.zeros((4, 2)))


class TestRelu:
    def test_all_negative(self):
        assert np.array_equal(relu(np.full((2, 3), -1.0)), np.zeros((2, 3)))

    def test_all_positive_unchanged(self):
        x = np.full((2, 2), 0.5)
        assert np.array_equal(relu(x), x)

    def test_mixed(self):
        assert np.array_equal(relu(np.array([[-1.0, 2.0]])), [[0.0, 2.0]])

    def test_idempotent(self):
        rng = np.random.default_rng(3)
        x = rng.standard_normal((7, 5))
        assert np.array_equal(relu(relu(x)), relu(x))


class TestConcatCols:
    def test_empty_right(self):
        x = np.ones((3, 2))
        assert np.array_equal(concat_cols(x, np.zeros((3, 0))), x)

    def test_hand_case(self):
        out = concat_cols(np.array([[1.0]]), np.array([[2.0]]))
        assert np.array_equal(out, [[1.0, 2.0]])

    def test_shape_law(self):
        out = concat_cols(np.zeros((3, 4)), np.zeros((3, 6)))
        assert out.shape == (3, 10)

    def test_row_mismatch(self):
        with pytest.raises(ValueError):
            concat_cols(np.zeros((3, 1)), np.zeros((2, 1)))


class TestL2NormalizeRows:
    def test_hand_case(self):
        np.testing.assert_allclose(l2_normalize_rows([[3.0, 4.0]]),
                                   [[0.6, 0.8]], atol=1e-15)

    def test_unit_row_unchanged(self):
        x = np.array([[1.0, 0.0, 0.0]])
        assert np.array_equal(l2_normalize_rows(x), x)

    def test_zero_row_passthrough(self):
        out = l2_normalize_rows(np.array([[0.0, 0.0], [3.0, 4.0]]))
        assert np.array_equal(out[0], [0.0, 0.0])

    def test_unit_norm_property(self):
        rng = np.random.default_rng(4)
        x = rng.standard_normal((50, 9))
        x[7] = 0.0
        out = l2_normalize_rows(x)
        norms2 = np.sum(out * out, axis=1)
        for v in norms2:
            assert v == 0.0 or abs(v - 1.0) <= 1e-9


class TestSparseAdjacency:
    def test_validation_rejects_bad_offsets(self):
        with pytest.raises(ValueError):
            SparseAdjacency(2, [0, 2, 1], [0, 1], [1.0, 1.0])

    def test_validation_rejects_out_of_range_column(self):
        with pytest.raises(ValueError):
            SparseAdjacency(2, [0, 1, 2], [0, 5], [1.0, 1.0])

    def test_validation_rejects_unsorted_columns(self):
        with pytest.raises(ValueError):
            SparseAdjacency(2, [0, 2, 2], [1, 0], [1.0, 1.0])

    def test_validation_rejects_nonfinite(self):
        with pytest.raises(ValueError):
            SparseAdjacency(1, [0, 1], [0], [np.nan])

    def test_validation_rejects_fake_symmetric(self):
        with pytest.raises(ValueError):
            SparseAdjacency(2, [0, 1, 1], [1], [1.0], symmetric=True)

    def test_transpose_roundtrip(self):
        rng = np.random.default_rng(5)
        a, dense = random_sparse(12, 0.3, rng)
        t = a.transpose()
        assert np.array_equal(t.to_dense(), dense.T)
        assert t.transpose() is a
