import numpy as np
import pytest
import scipy.sparse as sp

from amge import core_la as la
from amge.errors import DimensionMismatch, NotPositiveDefinite, ParseError, SingularLocalSystem


def test_spmv_examples():
    np.testing.assert_array_equal(la.spmv(la.identity(3), [1, 2, 3]), [1, 2, 3])
    np.testing.assert_array_equal(la.spmv(la.csr(sp.csr_matrix((2, 2))), [5, 7]), [0, 0])
    A = la.csr(np.array([[1.0, 2], [0, 3]]))
    np.testing.assert_array_equal(la.spmv(A, [1, 1]), [3, 3])


def test_spmv_dimension_mismatch():
    with pytest.raises(DimensionMismatch):
        la.spmv(la.identity(3), np.ones(2))


def test_transpose_examples():
    assert (la.transpose(la.identity(4)) != la.identity(4)).nnz == 0
    row = la.csr(np.array([[1.0, 2, 3]]))
    T = la.transpose(row)
    assert T.shape == (3, 1)
    np.testing.assert_array_equal(T.toarray().ravel(), [1, 2, 3])


def test_triple_product_examples():
    A = la.csr(np.array([[1.0, 0], [0, 2]]))
    assert (la.triple_product(la.identity(2), A, la.identity(2)) != A).nnz == 0
    P = la.csr(np.ones((2, 1)))
    np.testing.assert_array_equal(la.triple_product(la.transpose(P), A, P).toarray(), [[3.0]])


def test_rap_of_spd_is_symmetric_psd():
    rng = np.random.default_rng(0)
    B = rng.standard_normal((12, 12))
    A = la.csr(B @ B.T + 12 * np.eye(12))
    P = la.csr(rng.standard_normal((12, 5)))
    C = la.rap(A, P).toarray()
    np.testing.assert_array_equal(C, C.T)
    assert np.linalg.eigvalsh(C).min() > 0


def test_triple_product_dimension_mismatch():
    with pytest.raises(DimensionMismatch):
        la.triple_product(la.identity(2), la.identity(3), la.identity(3))


def test_dense_solve_examples():
    np.testing.assert_array_equal(la.dense_solve(np.eye(2), [4, 5]), [4, 5])
    np.testing.assert_allclose(la.dense_solve(np.diag([2.0, 4.0]), [2, 4]), [1, 1])
    rng = np.random.default_rng(1)
    M = rng.standard_normal((10, 10)) + 10 * np.eye(10)
    b = rng.standard_normal(10)
    x = la.dense_solve(M, b)
    assert np.linalg.norm(M @ x - b) <= 1e-12 * np.linalg.norm(b)


def test_dense_solve_singular_carries_context():
    with pytest.raises(SingularLocalSystem) as err:
        la.dense_solve(np.ones((2, 2)), [1, 1], context={"agglomerate": 7})
    assert err.value.context == {"agglomerate": 7}
    assert "agglomerate=7" in str(err.value)


def test_orthonormal_complement_examples():
    v = np.array([[1.0], [2.0], [0.5]])
    assert la.svd_orthonormal_complement(v, v).shape == (3, 0)
    Q = la.svd_orthonormal_complement(np.eye(2), np.array([[1.0], [0.0]]))
    assert Q.shape == (2, 1)
    np.testing.assert_allclose(np.abs(Q[:, 0]), [0, 1], atol=1e-15)
    rng = np.random.default_rng(2)
    plane = rng.standard_normal((6, 2))
    V = plane @ rng.standard_normal((2, 3))
    Q = la.svd_orthonormal_complement(V, V[:, :1], tol=1e-10)
    assert Q.shape[1] == 1
    np.testing.assert_allclose(Q.T @ Q, np.eye(1), atol=1e-14)


def test_orthonormal_complement_empty_w():
    Q = la.svd_orthonormal_complement(np.eye(3)[:, :2], np.zeros((3, 0)))
    assert Q.shape == (3, 2)


def test_sparse_direct_solve_examples():
    np.testing.assert_allclose(la.sparse_direct_solve(la.csr(sp.diags([1.0, 2, 3])), [1, 2, 3]), [1, 1, 1])
    T = la.csr(sp.diags([[-1.0, -1], [2.0, 2, 2], [-1.0, -1]], [-1, 0, 1]))
    np.testing.assert_allclose(la.sparse_direct_solve(T, [0, 1, 0]), [0.5, 1.0, 0.5], rtol=1e-14)
    rng = np.random.default_rng(3)
    B = rng.standard_normal((20, 20))
    A = la.csr(B @ B.T + np.eye(20))
    b = rng.standard_normal(20)
    x = la.sparse_direct_solve(A, b)
    assert np.linalg.norm(A @ x - b) <= 1e-10 * np.linalg.norm(b)


def test_sparse_direct_solve_rejects_indefinite():
    with pytest.raises(NotPositiveDefinite):
        la.sparse_direct_solve(la.csr(sp.diags([1.0, -1.0])), [1, 1])


def test_matrix_market_round_trip(tmp_path):
    A = la.csr(np.array([[1.5, 0, -2e-17], [0, 0, 3.0]]))
    path = tmp_path / "a.mtx"
    la.write_matrix_market(path, A)
    B = la.read_matrix_market(path)
    assert B.shape == A.shape
    np.testing.assert_array_equal(B.toarray(), A.toarray())


def test_matrix_market_bad_header(tmp_path):
    path = tmp_path / "bad.mtx"
    path.write_text("hello\n")
    with pytest.raises(ParseError):
        la.read_matrix_market(path)
