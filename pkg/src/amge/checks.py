"""Invariant checks of a de Rham hierarchy.

Each check returns a :class:`CheckResult`; :func:`run_checks` collects
them for every level pair.  Tolerances are relative to the magnitude of
the operators involved.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp

from .derham import pv_integral
from .fem import SPACES

TOL_IDENTITY = 1e-10
TOL_COMMUTE = 1e-10
TOL_DD = 1e-12
TOL_PV = 1e-12
RANK_TOL = 1e-9
DENSE_LIMIT = 4000


@dataclass
class CheckResult:
    name: str
    passed: bool
    value: float
    tol: float

    def line(self) -> str:
        status = "PASS" if self.passed else "FAIL"
        return f"CHECK {self.name} {status} value={self.value:.3e} tol={self.tol:.1e}"


def _maxabs(A) -> float:
    A = sp.csr_matrix(A)
    return float(np.abs(A.data).max()) if A.nnz else 0.0


def _scale(*mats) -> float:
    s = 1.0
    for M in mats:
        s *= max(_maxabs(M), 1.0)
    return s


def check_dd(level, name_prefix="") -> list:
    out = []
    for i in (1, 2):
        err = _maxabs(level.D[i + 1] @ level.D[i])
        rel = err / _scale(level.D[i + 1], level.D[i])
        tol = 0.0 if level.level == 1 else TOL_DD
        out.append(CheckResult(f"{name_prefix}l{level.level}.D{i + 1}D{i}=0", rel <= tol, rel, tol))
    return out


def check_bundle(fine, coarse, bundle, agg) -> list:
    """Right inverse, commutativity, prolongator compatibility and PV integrals."""
    l = fine.level
    P, Pi = bundle.P, bundle.Pi
    out = []
    for i in SPACES:
        err = _maxabs(Pi[i] @ P[i] - sp.identity(coarse.dims[i]))
        out.append(CheckResult(f"l{l}.Pi{i}P{i}=I", err <= TOL_IDENTITY, err, TOL_IDENTITY))
    for i in (1, 2, 3):
        err = _maxabs(coarse.D[i] @ Pi[i] - Pi[i + 1] @ fine.D[i]) / _scale(coarse.D[i], Pi[i])
        out.append(CheckResult(f"l{l}.commute{i}", err <= TOL_COMMUTE, err, TOL_COMMUTE))
        err = _maxabs(fine.D[i] @ P[i] - P[i + 1] @ coarse.D[i]) / _scale(fine.D[i], P[i])
        out.append(CheckResult(f"l{l}.prolong{i}", err <= TOL_COMMUTE, err, TOL_COMMUTE))
    worst = 0.0
    for i in SPACES:
        K = i - 1
        Pc = sp.csc_matrix(P[i])
        dofs = np.arange(fine.dims[i])
        for X in range(agg.coarse.counts[K]):
            u = Pc[:, coarse.pv_dof[i][X]].toarray().ravel()
            val = pv_integral(fine, agg, K, X, dofs, u)
            worst = max(worst, abs(val - 1.0))
    out.append(CheckResult(f"l{l}.pv_unit_integral", worst <= TOL_PV, worst, TOL_PV))
    return out


def _rank(A) -> int:
    A = A.toarray() if sp.issparse(A) else np.asarray(A)
    if A.size == 0:
        return 0
    s = np.linalg.svd(A, compute_uv=False)
    return int(np.sum(s > RANK_TOL * s[0])) if s.size and s[0] > 0 else 0


def check_exactness(level) -> list:
    """Dense-SVD rank checks: ``nullity(D_{i+1}) = rank(D_i)``, ``D_3`` onto, ``nullity(D_1) = 1``."""
    if max(level.dims.values()) > DENSE_LIMIT:
        return []
    r = {i: _rank(level.D[i]) for i in (1, 2, 3)}
    l = level.level
    out = [CheckResult(f"l{l}.nullity_D1=1", level.dims[1] - r[1] == 1, level.dims[1] - r[1], 0.0)]
    for i in (1, 2):
        gap = abs((level.dims[i + 1] - r[i + 1]) - r[i])
        out.append(CheckResult(f"l{l}.exact{i + 1}", gap == 0, gap, 0.0))
    gap = level.dims[4] - r[3]
    out.append(CheckResult(f"l{l}.D3_onto", gap == 0, gap, 0.0))
    return out


def run_checks(levels, bundles, aggs, exactness: bool = True) -> list:
    out = []
    for L in levels:
        out += check_dd(L)
        if exactness:
            out += check_exactness(L)
    for fine, coarse, b, agg in zip(levels[:-1], levels[1:], bundles, aggs):
        out += check_bundle(fine, coarse, b, agg)
    return out


def check_identity_coarsening(levels) -> list:
    """Coarse dims equal fine dims (trivial partition)."""
    out = []
    for f, c in zip(levels[:-1], levels[1:]):
        same = f.d == c.d
        out.append(CheckResult(f"l{f.level}.identity_dims", same, 0.0 if same else 1.0, 0.0))
    return out


def check_operator_symmetry(apply, n: int, pairs: int = 20, seed: int = 0):
    """``max |r1^T B r2 - r2^T B r1| / (|r1^T B r2| + |r2^T B r1|)`` and ``min r^T B r / r^T r``."""
    rng = np.random.default_rng(seed)
    worst, minq = 0.0, np.inf
    for _ in range(pairs):
        r1, r2 = rng.standard_normal(n), rng.standard_normal(n)
        a, b = r1 @ apply(r2), r2 @ apply(r1)
        worst = max(worst, abs(a - b) / max(abs(a) + abs(b), 1e-300))
        minq = min(minq, (r1 @ apply(r1)) / (r1 @ r1))
    return worst, minq
