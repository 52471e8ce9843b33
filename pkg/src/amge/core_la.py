"""Sparse and dense linear-algebra kernels.

Sparse matrices are ``scipy.sparse.csr_matrix`` objects kept in canonical
form (sorted column indices, no duplicates, no stored zeros).  scipy's CSR
mat-vec accumulates each row in stored (ascending column) order, so every
product here is reproducible run to run.
"""

from __future__ import annotations

import warnings

import numpy as np
import scipy.linalg as sla
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from .errors import DimensionMismatch, NotPositiveDefinite, ParseError, SingularLocalSystem

SparseMatrix = sp.csr_matrix

PIVOT_TOL = 1e-14
SVD_TOL = 1e-10


def csr(A, shape=None) -> sp.csr_matrix:
    """Return ``A`` as a canonical CSR matrix of float64."""
    if sp.issparse(A):
        M = sp.csr_matrix(A, dtype=np.float64, shape=shape, copy=True)
    else:
        M = sp.csr_matrix(np.asarray(A, dtype=np.float64), shape=shape)
    M.sum_duplicates()
    M.eliminate_zeros()
    M.sort_indices()
    return M


def from_triplets(rows, cols, vals, shape) -> sp.csr_matrix:
    """Build a canonical CSR matrix, summing duplicate entries."""
    M = sp.coo_matrix(
        (np.asarray(vals, dtype=np.float64), (np.asarray(rows), np.asarray(cols))),
        shape=shape,
    ).tocsr()
    return csr(M)


def identity(n: int) -> sp.csr_matrix:
    return csr(sp.identity(n, format="csr"))


def spmv(A: sp.csr_matrix, x) -> np.ndarray:
    x = np.asarray(x, dtype=np.float64)
    if x.shape[0] != A.shape[1]:
        raise DimensionMismatch(f"spmv: matrix has {A.shape[1]} columns, vector has {x.shape[0]}")
    return A @ x


def transpose(A: sp.csr_matrix) -> sp.csr_matrix:
    return csr(A.T)


def triple_product(R: sp.csr_matrix, A: sp.csr_matrix, P: sp.csr_matrix) -> sp.csr_matrix:
    """Galerkin product ``R @ A @ P`` with exact zeros dropped."""
    if R.shape[1] != A.shape[0] or A.shape[1] != P.shape[0]:
        raise DimensionMismatch(
            f"triple_product: {R.shape} x {A.shape} x {P.shape} is not conformal"
        )
    return csr((R @ A) @ P)


def rap(A: sp.csr_matrix, P: sp.csr_matrix) -> sp.csr_matrix:
    """``P^T A P``; symmetrized exactly when ``A`` is symmetric."""
    C = triple_product(transpose(P), A, P)
    if (abs(A - A.T) > 0).nnz == 0:
        C = csr(0.5 * (C + C.T))
    return C


def dense_solve(M, b, context=None) -> np.ndarray:
    """Solve a small dense system by LU with partial pivoting.

    Raises :class:`SingularLocalSystem` when a pivot falls below
    ``1e-14 * ||M||_F``.
    """
    M = np.asarray(M, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    if M.ndim != 2 or M.shape[0] != M.shape[1]:
        raise DimensionMismatch(f"dense_solve: matrix must be square, got {M.shape}")
    if b.shape[0] != M.shape[0]:
        raise DimensionMismatch("dense_solve: right-hand side length mismatch")
    if M.shape[0] == 0:
        return np.zeros_like(b)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", sla.LinAlgWarning)
        lu, piv = sla.lu_factor(M, check_finite=False)
    scale = np.linalg.norm(M)
    if np.min(np.abs(np.diag(lu))) <= PIVOT_TOL * scale:
        raise SingularLocalSystem("pivot below tolerance", context)
    return sla.lu_solve((lu, piv), b, check_finite=False)


def orthonormal_basis(W, tol: float = SVD_TOL) -> np.ndarray:
    """Orthonormal basis for the column span of ``W`` (SVD with filtering)."""
    W = np.atleast_2d(np.asarray(W, dtype=np.float64))
    if W.size == 0 or W.shape[1] == 0:
        return np.zeros((W.shape[0], 0))
    U, s, _ = np.linalg.svd(W, full_matrices=False)
    if s.size == 0 or s[0] == 0.0:
        return np.zeros((W.shape[0], 0))
    return U[:, s > tol * s[0]]


def svd_orthonormal_complement(V, W, tol: float = SVD_TOL) -> np.ndarray:
    """Orthonormal columns spanning ``span(V)`` with ``span(W)`` removed.

    Singular values below ``tol`` times the largest singular value of ``V``
    are treated as linear dependence and dropped.  ``W`` may have zero
    columns.
    """
    V = np.asarray(V, dtype=np.float64)
    if V.ndim == 1:
        V = V[:, None]
    n = V.shape[0]
    if V.shape[1] == 0:
        return np.zeros((n, 0))
    s_ref = np.linalg.norm(V, 2)
    if s_ref == 0.0:
        return np.zeros((n, 0))
    W = np.asarray(W, dtype=np.float64).reshape(n, -1)
    if W.shape[1]:
        Q = orthonormal_basis(W, tol)
        V = V - Q @ (Q.T @ V)
        V = V - Q @ (Q.T @ V)
    U, s, _ = np.linalg.svd(V, full_matrices=False)
    return U[:, s > tol * s_ref]


class DirectSolver:
    """Sparse LDL^T-style factorization of an SPD matrix.

    SuperLU runs in symmetric mode with diagonal pivoting only, so the
    diagonal of ``U`` is the ``D`` of a symmetric factorization and must be
    positive for an SPD input.
    """

    def __init__(self, A: sp.csr_matrix, check_spd: bool = True):
        A = csr(A)
        if A.shape[0] != A.shape[1]:
            raise DimensionMismatch("DirectSolver needs a square matrix")
        self.shape = A.shape
        if A.shape[0] == 0:
            self._lu = None
            return
        try:
            self._lu = spla.splu(
                A.tocsc(),
                permc_spec="MMD_AT_PLUS_A",
                diag_pivot_thresh=0.0,
                options={"SymmetricMode": True},
            )
        except RuntimeError as exc:
            raise NotPositiveDefinite(f"factorization failed: {exc}") from exc
        if check_spd:
            d = self._lu.U.diagonal()
            if np.any(d <= 0.0) or self._lu.perm_r is not None and np.any(
                self._lu.perm_r != self._lu.perm_c
            ):
                raise NotPositiveDefinite("matrix is not symmetric positive definite")

    def solve(self, b) -> np.ndarray:
        b = np.asarray(b, dtype=np.float64)
        if self._lu is None:
            return np.zeros_like(b)
        return self._lu.solve(b)

    __call__ = solve


def sparse_direct_solve(A: sp.csr_matrix, b) -> np.ndarray:
    return DirectSolver(A).solve(b)


def write_matrix_market(path, A: sp.csr_matrix) -> None:
    A = csr(A)
    coo = A.tocoo()
    with open(path, "w") as fh:
        fh.write("%%MatrixMarket matrix coordinate real general\n")
        fh.write(f"{A.shape[0]} {A.shape[1]} {coo.nnz}\n")
        for i, j, v in zip(coo.row, coo.col, coo.data):
            fh.write(f"{i + 1} {j + 1} {float(v)!r}\n")


def read_matrix_market(path) -> sp.csr_matrix:
    with open(path) as fh:
        header = fh.readline().strip()
        if not header.startswith("%%MatrixMarket matrix coordinate real"):
            raise ParseError(f"unsupported MatrixMarket header {header!r}", line=1)
        lineno = 1
        for line in fh:
            lineno += 1
            if line.startswith("%") or not line.strip():
                continue
            m, n, nnz = (int(t) for t in line.split())
            break
        else:
            raise ParseError("missing size line", line=lineno)
        rows = np.empty(nnz, dtype=np.int64)
        cols = np.empty(nnz, dtype=np.int64)
        vals = np.empty(nnz)
        k = 0
        for line in fh:
            lineno += 1
            if line.startswith("%") or not line.strip():
                continue
            i, j, v = line.split()
            rows[k], cols[k], vals[k] = int(i) - 1, int(j) - 1, float(v)
            k += 1
        if k != nnz:
            raise ParseError(f"expected {nnz} entries, found {k}", line=lineno)
    return from_triplets(rows, cols, vals, (m, n))
