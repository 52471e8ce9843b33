"""Element-based coarsening of a discrete de Rham sequence.

Given a :class:`~amge.fem.SequenceLevel` and an agglomerated topology, the
coarse spaces are built entity by entity:

* every fine dof is owned by the lowest-dimensional coarse entity that
  contains its fine entity (dof agglomeration);
* on the lowest-dimensional entities of each space the coarse traces are
  the PV function (constant density, unit integral) plus the filtered
  targets;
* traces are extended into higher-dimensional entities by local
  saddle-point solves, and bubbles are added so that the coarse
  derivative is exact and the targets' kernel parts are captured.

From the local pieces we assemble the prolongators ``P_i``, the cochain
projectors ``Pi_i`` (``Pi_i P_i = I`` and ``D^H_i Pi_i = Pi_{i+1} D^h_i``)
and the coarse derivatives ``D^H_i = Pi_{i+1} D^h_i P_i``.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.linalg as sla
import scipy.sparse as sp

from . import core_la as la
from .agglomeration import AgglomeratedTopology
from .errors import ExactnessViolation, SingularLocalSystem, TopologyError, ZeroMeasureEntity
from .fem import SPACES, SequenceLevel

EXACTNESS_TOL = 1e-8
FILTER_TOL = 1e-10


# dof agglomeration ---------------------------------------------------------------

def _entity_owner(agg: AgglomeratedTopology):
    """Owner ``(dim, id)`` of every fine entity: the lowest-dimensional coarse
    entity containing it."""
    fine = agg.fine
    cl = fine.closure
    owner = {}
    parts = agg.parts
    owner[3] = (np.full(fine.counts[3], 3), parts.copy())
    # any element containing the entity gives the agglomerate default
    for k in (2, 1, 0):
        T = sp.csc_matrix(cl[(3, k)])
        first = T.indices[T.indptr[:-1]]
        if np.any(np.diff(T.indptr) == 0):
            raise TopologyError(f"a dimension-{k} entity belongs to no element")
        owner[k] = (np.full(fine.counts[k], 3), parts[first].copy())
    for K in (2, 1, 0):
        groups = agg.entities[K]
        if not groups:
            continue
        rows = np.concatenate([np.full(len(g), X) for X, g in enumerate(groups)])
        members = np.concatenate(groups)
        ind = sp.csr_matrix((np.ones(members.size), (rows, members)), shape=(len(groups), fine.counts[K]))
        for k in range(K, -1, -1):
            cover = sp.csc_matrix(ind @ cl[(K, k)])
            cover.data[:] = 1.0
            hits = np.diff(cover.indptr)
            touched = hits > 0
            ids = cover.indices[cover.indptr[:-1][touched]]
            owner[k][0][touched] = K
            owner[k][1][touched] = ids
    # sanity: entities covered by two same-dimension coarse entities must have a lower owner
    for K in (2, 1):
        groups = agg.entities[K]
        if not groups:
            continue
        rows = np.concatenate([np.full(len(g), X) for X, g in enumerate(groups)])
        members = np.concatenate(groups)
        ind = sp.csr_matrix((np.ones(members.size), (rows, members)), shape=(len(groups), fine.counts[K]))
        for k in range(K - 1, -1, -1):
            cover = sp.csc_matrix(ind @ cl[(K, k)])
            multi = np.diff(cover.indptr) > 1
            if np.any(multi & (owner[k][0] >= K)):
                raise TopologyError(
                    f"dimension-{k} entities shared by several coarse dimension-{K} entities "
                    "lie on no lower-dimensional coarse entity"
                )
    return owner


@dataclass(eq=False)
class DofAgglomeration:
    """Fine dofs per coarse entity.

    ``interior[i][K][X]``: fine space-``i`` dofs owned by coarse entity ``X``
    of dimension ``K``; ``closure[i][K][X]``: all fine space-``i`` dofs on its
    closure (sorted).
    """

    owner_dim: dict
    owner_id: dict
    interior: dict
    closure: dict


def agglomerate_dofs(agg: AgglomeratedTopology, level: SequenceLevel) -> DofAgglomeration:
    ent_owner = _entity_owner(agg)
    coarse = agg.coarse
    owner_dim, owner_id, interior, closure = {}, {}, {}, {}
    for i in SPACES:
        dd, de = level.dof_dim[i], level.dof_entity[i]
        od = np.empty(dd.size, dtype=np.int64)
        oi = np.empty(dd.size, dtype=np.int64)
        for k in range(4):
            sel = dd == k
            if np.any(sel):
                od[sel] = ent_owner[k][0][de[sel]]
                oi[sel] = ent_owner[k][1][de[sel]]
        if np.any(od < i - 1):
            raise TopologyError(f"space {i}: a dof is owned by an entity of too low dimension")
        owner_dim[i], owner_id[i] = od, oi
        interior[i], closure[i] = {}, {}
        for K in range(i - 1, 4):
            n = coarse.counts[K]
            sel = np.flatnonzero(od == K)
            order = np.lexsort((sel, oi[sel]))
            sel = sel[order]
            cuts = np.searchsorted(oi[sel], np.arange(n + 1))
            interior[i][K] = [sel[cuts[X] : cuts[X + 1]] for X in range(n)]
        for K in range(i - 1, 4):
            lists = []
            for X in range(coarse.counts[K]):
                parts = []
                for k in range(i - 1, K + 1):
                    C = coarse.closure[(K, k)]
                    for Y in C.indices[C.indptr[X] : C.indptr[X + 1]]:
                        parts.append(interior[i][k][Y])
                lists.append(np.sort(np.concatenate(parts)) if parts else np.zeros(0, dtype=np.int64))
            closure[i][K] = lists
    return DofAgglomeration(owner_dim, owner_id, interior, closure)


# local assembly --------------------------------------------------------------------

def _ix(rows, cols):
    """Open-mesh index pair for the block ``rows x cols`` (cheaper than ``np.ix_``)."""
    return np.asarray(rows)[:, None], np.asarray(cols)[None, :]


def local_mass(level: SequenceLevel, agg: AgglomeratedTopology, K: int, X: int, i: int, dofs: np.ndarray):
    """Trace mass of space ``i`` on coarse entity ``X`` (dim ``K``) over ``dofs``."""
    members = agg.entities[K][X]
    edofs = level.entity_dofs[(K, i)]
    emass = level.entity_mass[(K, i)]
    n = dofs.size
    M = np.zeros((n, n))
    if isinstance(edofs, np.ndarray):
        d = edofs[members]
        pos = np.searchsorted(dofs, d)
        np.add.at(M, (pos[:, :, None], pos[:, None, :]), emass[members])
    else:
        for x in members:
            pos = np.searchsorted(dofs, edofs[x])
            M[_ix(pos, pos)] += emass[x]
    return 0.5 * (M + M.T)


def local_block(A: sp.csr_matrix, rows: np.ndarray, cols: np.ndarray) -> np.ndarray:
    """Dense block ``A[rows][:, cols]`` of a canonical CSR matrix; ``cols`` must be sorted."""
    out = np.zeros((rows.size, cols.size))
    if rows.size == 0 or cols.size == 0:
        return out
    starts = A.indptr[rows]
    lengths = A.indptr[rows + 1] - starts
    total = int(lengths.sum())
    if total == 0:
        return out
    offsets = np.cumsum(lengths) - lengths
    idx = np.arange(total) - np.repeat(offsets, lengths) + np.repeat(starts, lengths)
    c = A.indices[idx]
    pos = np.minimum(np.searchsorted(cols, c), cols.size - 1)
    hit = cols[pos] == c
    r = np.repeat(np.arange(rows.size), lengths)
    out[r[hit], pos[hit]] = A.data[idx[hit]]
    return out


# PV traces and target filtering -------------------------------------------------------

def build_pv_traces(level: SequenceLevel, agg: AgglomeratedTopology, K: int, X: int, dofs: np.ndarray):
    """PV trace of space ``K+1`` on coarse entity ``X`` of dimension ``K``.

    The coefficient on the PV dof of each member entity ``x`` is
    ``sign(x) * |x| / |X|`` divided by the dof's integral weight, so the
    trace has constant density and unit integral over ``X``.
    """
    i = K + 1
    members = agg.entities[K][X]
    signs = agg.signs[K][X]
    meas_x = level.topology.measure[K][members]
    meas_X = meas_x.sum()
    if not meas_X > 0.0:
        raise ZeroMeasureEntity(f"coarse entity {X} of dimension {K} has zero measure")
    pv = np.zeros(dofs.size)
    pos = np.searchsorted(dofs, level.pv_dof[i][members])
    pv[pos] = signs * meas_x / meas_X / level.pv_weight[i][members]
    return pv


def pv_integral(level: SequenceLevel, agg: AgglomeratedTopology, K: int, X: int, dofs: np.ndarray, u):
    """Integral over coarse entity ``X`` of the trace given by values ``u`` on ``dofs``."""
    i = K + 1
    members = agg.entities[K][X]
    pos = np.searchsorted(dofs, level.pv_dof[i][members])
    w = agg.signs[K][X] * level.pv_weight[i][members]
    return w @ np.asarray(u)[pos]


def _chol(M: np.ndarray, context=None) -> np.ndarray:
    try:
        return np.linalg.cholesky(M)
    except np.linalg.LinAlgError as exc:
        raise SingularLocalSystem("local mass matrix is not positive definite", context) from exc


def filter_targets(pv: np.ndarray, targets: np.ndarray, M: np.ndarray, tol: float = FILTER_TOL, context=None):
    """Target traces made M-orthogonal to ``pv`` and M-orthonormal among themselves.

    Linear dependence (singular values below ``tol`` times the largest
    singular value of the weighted targets) is removed.
    """
    n = M.shape[0]
    targets = np.asarray(targets, dtype=np.float64)
    targets = targets.reshape(n, -1) if targets.ndim < 2 else targets
    if targets.shape[1] == 0 or n == 0:
        return np.zeros((n, 0))
    L = _chol(M, context)
    V = L.T @ targets
    W = L.T @ pv.reshape(n, -1)
    U = la.svd_orthonormal_complement(V, W, tol)
    return sla.solve_triangular(L.T, U, lower=False)


# local extension problems ------------------------------------------------------------------

def _solve(A, b, context):
    return la.dense_solve(A, b, context)


def extend_trace_lowest(M_i, D, M_n, p, interior, boundary, mu_B, g=None, context=None):
    """Extend traces ``mu_B`` into the interior with ``D u = c p + g``.

    Local saddle-point system on one coarse entity: unknowns are the interior
    values ``x``, a multiplier ``y`` in the next space and the scalar ``c``::

        [ M_II        D_I^T M_n   0     ] [x]   [ -M_IB mu_B             ]
        [ M_n D_I     0          -M_n p ] [y] = [ -M_n D_B mu_B + M_n g  ]
        [ 0          -p^T M_n     0     ] [c]   [ 0                      ]

    ``D`` maps the closure dofs of the space to the next space's dofs on the
    entity; ``interior``/``boundary`` are positions in the closure.  Returns
    ``(x, c)`` for every right-hand side column.
    """
    mu_B = np.asarray(mu_B, dtype=np.float64).reshape(boundary.size, -1)
    r = mu_B.shape[1]
    g = np.zeros((D.shape[0], r)) if g is None else np.asarray(g, dtype=np.float64).reshape(D.shape[0], r)
    nI, nY = interior.size, D.shape[0]
    DI, DB = D[:, interior], D[:, boundary]
    MDI = M_n @ DI
    Mp = M_n @ p
    A = np.zeros((nI + nY + 1, nI + nY + 1))
    A[:nI, :nI] = M_i[_ix(interior, interior)]
    A[:nI, nI : nI + nY] = MDI.T
    A[nI : nI + nY, :nI] = MDI
    A[nI : nI + nY, -1] = -Mp
    A[-1, nI : nI + nY] = -Mp
    b = np.zeros((nI + nY + 1, r))
    b[:nI] = -M_i[_ix(interior, boundary)] @ mu_B
    b[nI : nI + nY] = -M_n @ (DB @ mu_B) + M_n @ g
    sol = _solve(A, b, context)
    return sol[:nI], sol[-1]


def extend_bubble_lowest(M_i, D, M_n, p, interior, boundary, phi_perp, context=None):
    """Bubble with zero trace and ``D u = phi_perp`` (``phi_perp`` M-orthogonal to ``p``)."""
    phi_perp = np.asarray(phi_perp, dtype=np.float64).reshape(D.shape[0], -1)
    mu = np.zeros((boundary.size, phi_perp.shape[1]))
    return extend_trace_lowest(M_i, D, M_n, p, interior, boundary, mu, phi_perp, context)


def extend_trace_higher(M_i, D, M_n, K_n, interior, boundary, interior_n, mu_B, s, context=None):
    """Extend traces ``mu_B`` into the interior with ``D u = s``.

    Unknowns are the interior values ``x`` and a multiplier ``chi`` on the
    interior dofs of the next space, stabilized by ``K_n = D_n^T M D_n``::

        [ M_II           (M_n D)_{J,I}^T ] [x  ]   [ -M_IB mu_B                       ]
        [ (M_n D)_{J,I}  -K_n,JJ         ] [chi] = [ (M_n s)_J - (M_n D)_{J,B} mu_B    ]

    with ``J`` the interior dofs of the next space.
    """
    mu_B = np.asarray(mu_B, dtype=np.float64).reshape(boundary.size, -1)
    r = mu_B.shape[1]
    s = np.asarray(s, dtype=np.float64).reshape(D.shape[0], r)
    nI, nJ = interior.size, interior_n.size
    MD = (M_n @ D)[interior_n]
    A = np.zeros((nI + nJ, nI + nJ))
    A[:nI, :nI] = M_i[_ix(interior, interior)]
    A[:nI, nI:] = MD[:, interior].T
    A[nI:, :nI] = MD[:, interior]
    A[nI:, nI:] = -K_n[_ix(interior_n, interior_n)]
    b = np.zeros((nI + nJ, r))
    b[:nI] = -M_i[_ix(interior, boundary)] @ mu_B
    b[nI:] = (M_n @ s)[interior_n] - MD[:, boundary] @ mu_B
    sol = _solve(A, b, context)
    return sol[:nI]


def extend_bubble_higher(M_i, D, M_n, K_n, interior, boundary, interior_n, phi0, context=None):
    """Bubble with zero trace and ``D u = phi0`` (``phi0`` a D-free bubble of the next space)."""
    phi0 = np.asarray(phi0, dtype=np.float64).reshape(D.shape[0], -1)
    mu = np.zeros((boundary.size, phi0.shape[1]))
    return extend_trace_higher(M_i, D, M_n, K_n, interior, boundary, interior_n, mu, phi0, context)


def dfree_bubbles(M_II, D_I, targets_I, tol: float = FILTER_TOL, context=None):
    """Interior functions with zero derivative approximating the targets.

    The targets (restricted to interior dofs) are M-orthogonally projected
    onto the null space of ``D_I`` and then orthonormalized with
    dependence filtering.
    """
    nI = M_II.shape[0]
    T = np.asarray(targets_I, dtype=np.float64)
    T = T.reshape(nI, -1) if T.ndim < 2 else T
    if nI == 0 or T.shape[1] == 0:
        return np.zeros((nI, 0))
    if D_I.shape[0] == 0:
        N = np.eye(nI)
    else:
        N = sla.null_space(D_I, rcond=1e-10)
    if N.shape[1] == 0:
        return np.zeros((nI, 0))
    L = _chol(M_II, context)
    ref = np.linalg.norm(L.T @ T, 2)
    if ref == 0.0:
        return np.zeros((nI, 0))
    MN = M_II @ N
    coef = la.dense_solve(N.T @ MN, MN.T @ T, context)
    V = L.T @ (N @ coef)
    U, sv, _ = np.linalg.svd(V, full_matrices=False)
    U = U[:, sv > tol * ref]
    Z = sla.solve_triangular(L.T, U, lower=False)
    # project once more onto the exact null space to clean round-off
    Z = N @ (N.T @ Z) if N.shape[1] < nI else Z
    return Z


# orchestration ---------------------------------------------------------------------------

@dataclass(eq=False)
class CoarseLevelBundle:
    """Transfer operators between a level and its coarsening."""

    P: dict
    Pi: dict
    level: SequenceLevel
    dofagg: DofAgglomeration


class _Space:
    """Per-space bookkeeping while building coarse shape functions."""

    def __init__(self, i: int):
        self.i = i
        self.count = 0
        self.own = {}  # (K, X) -> coarse dof ids owned by X
        self.kind = {}  # (K, X) -> {"pv": [...], "perp": [...], "cross": [...], "dfree": [...]} (local)
        self.shape = {}  # (K, X) -> values on interior fine dofs, columns = ccl(X)
        self.ccl = {}  # (K, X) -> coarse dofs on the closure of X (sorted)
        self.pirow = {}  # (K, X) -> projector rows of owned dofs over fine closure dofs
        self.emass = {}  # (K, X) -> coarse trace mass over ccl(X)

    def claim(self, key, n):
        ids = np.arange(self.count, self.count + n)
        self.count += n
        self.own[key] = ids
        return ids


class _Builder:
    def __init__(self, level: SequenceLevel, agg: AgglomeratedTopology, da: DofAgglomeration, check: bool):
        self.level, self.agg, self.da, self.check = level, agg, da, check
        self.coarse = agg.coarse
        self.sp = {i: _Space(i) for i in SPACES}
        self._mass_cache = {}
        self._pos_cache = {}

    # helpers -------------------------------------------------------------------------
    def mass(self, K, X, i):
        key = (K, X, i)
        M = self._mass_cache.get(key)
        if M is None:
            M = local_mass(self.level, self.agg, K, X, i, self.da.closure[i][K][X])
            self._mass_cache[key] = M
        return M

    def sub_entities(self, i, K, X, include_self=True):
        """(k, Y) pairs of the closure of X carrying space-i dofs, lowest dimension first."""
        out = []
        for k in range(i - 1, K + 1):
            C = self.coarse.closure[(K, k)]
            for Y in C.indices[C.indptr[X] : C.indptr[X + 1]]:
                if k == K and not include_self:
                    continue
                out.append((k, int(Y)))
        return out

    def closure_values(self, i, K, X, include_self=True):
        """Values of the coarse dofs on the closure of X over the fine closure dofs."""
        s = self.sp[i]
        cl = self.da.closure[i][K][X]
        subs = self.sub_entities(i, K, X, include_self)
        cols = np.sort(np.concatenate([s.own[(k, Y)] for k, Y in subs])) if subs else np.zeros(0, int)
        V = np.zeros((cl.size, cols.size))
        for k, Y in subs:
            rows = np.searchsorted(cl, self.da.interior[i][k][Y])
            c = np.searchsorted(cols, s.ccl[(k, Y)])
            V[_ix(rows, c)] = s.shape[(k, Y)]
        return V, cols

    def boundary_projector(self, i, K, X, cols):
        """Projector rows of boundary-owned coarse dofs ``cols`` over the fine closure of X."""
        s = self.sp[i]
        cl = self.da.closure[i][K][X]
        R = np.zeros((cols.size, cl.size))
        for k, Y in self.sub_entities(i, K, X, include_self=False):
            r = np.searchsorted(cols, s.own[(k, Y)])
            c = np.searchsorted(cl, self.da.closure[i][k][Y])
            R[_ix(r, c)] = s.pirow[(k, Y)]
        return R

    def positions(self, i, K, X):
        key = (i, K, X)
        hit = self._pos_cache.get(key)
        if hit is not None:
            return hit
        cl = self.da.closure[i][K][X]
        I = np.searchsorted(cl, self.da.interior[i][K][X])
        mask = np.ones(cl.size, dtype=bool)
        mask[I] = False
        out = self._pos_cache[key] = (cl, I, np.flatnonzero(mask))
        return out

    def violation(self, what, value, ref, K, X):
        if self.check and value > EXACTNESS_TOL * max(ref, 1.0):
            raise ExactnessViolation(f"{what} on coarse entity (dim {K}, id {X}): residual {value:.3e}")

    # the three kinds of entities -------------------------------------------------------------
    def lowest_entity(self, i, K, X):
        s = self.sp[i]
        cl = self.da.closure[i][K][X]
        M = self.mass(K, X, i)
        pv = build_pv_traces(self.level, self.agg, K, X, cl)
        T = self.level.targets[i][cl] if i in self.level.targets else np.zeros((cl.size, 0))
        Q = filter_targets(pv, T, M, context={"space": i, "dim": K, "entity": X})
        S = np.column_stack([pv, Q])
        own = s.claim((K, X), S.shape[1])
        s.kind[(K, X)] = {"pv": [0], "perp": list(range(1, S.shape[1]))}
        s.shape[(K, X)] = S
        s.ccl[(K, X)] = own
        G = S.T @ M @ S
        s.pirow[(K, X)] = la.dense_solve(G, S.T @ M, {"space": i, "dim": K, "entity": X})
        s.emass[(K, X)] = 0.5 * (G + G.T)

    def _finish(self, i, K, X, Vb, bcols, xb, cross, phi, Mphi, D, Z):
        """Store shapes, projector rows and trace mass of the dofs owned by X."""
        s = self.sp[i]
        cl, I, B = self.positions(i, K, X)
        M = self.mass(K, X, i)
        nI = I.size
        m, z = cross.shape[1], Z.shape[1]
        own = s.claim((K, X), m + z)
        s.kind[(K, X)] = {"cross": list(range(m)), "dfree": list(range(m, m + z))}
        ccl = np.concatenate([bcols, own])
        s.ccl[(K, X)] = ccl
        s.shape[(K, X)] = np.column_stack([xb, cross, Z]) if nI else np.zeros((0, ccl.size))
        # full values on the closure
        Vfull = Vb.copy()
        Vfull[I] = xb
        Bc = np.zeros((cl.size, m))
        Bc[I] = cross
        Zc = np.zeros((cl.size, z))
        Zc[I] = Z
        # projector rows: residual after the boundary projection, then cross and D-free parts
        Psub = self.boundary_projector(i, K, X, bcols)
        R = np.eye(cl.size) - Vfull @ Psub
        ctx = {"space": i, "dim": K, "entity": X}
        rows = []
        aC = np.zeros((0, cl.size))
        if m:
            G = phi.T @ Mphi @ phi
            aC = la.dense_solve(G, phi.T @ Mphi @ D @ R, ctx)
            rows.append(aC)
        if z:
            MZ = M @ Zc
            aF = la.dense_solve(Zc.T @ MZ, MZ.T @ (R - Bc @ aC), ctx)
            rows.append(aF)
        s.pirow[(K, X)] = np.vstack(rows) if rows else np.zeros((0, cl.size))
        V = np.column_stack([Vfull, Bc, Zc])
        E = V.T @ M @ V
        s.emass[(K, X)] = 0.5 * (E + E.T)

    def lowest_extension(self, i, K, X):
        n = i + 1
        ctx = {"space": i, "dim": K, "entity": X}
        cl, I, B = self.positions(i, K, X)
        Vb, bcols = self.closure_values(i, K, X, include_self=False)
        mu = Vb[B]
        cln = self.da.closure[n][K][X]
        M_i, M_n = self.mass(K, X, i), self.mass(K, X, n)
        D = local_block(self.level.D[i], cln, cl)
        Sn = self.sp[n].shape[(K, X)]
        kind = self.sp[n].kind[(K, X)]
        p = Sn[:, kind["pv"][0]]
        phi = Sn[:, kind["perp"]]
        r_b, m = mu.shape[1], phi.shape[1]
        mu_all = np.hstack([mu, np.zeros((B.size, m))])
        g_all = np.hstack([np.zeros((cln.size, r_b)), phi])
        x, c = extend_trace_lowest(M_i, D, M_n, p, I, B, mu_all, g_all, ctx)
        if self.check:
            u = np.zeros((cl.size, r_b + m))
            u[I] = x
            u[B] = mu_all
            res = D @ u - np.outer(p, c) - g_all
            ref = np.abs(D @ u).max() if u.size else 0.0
            self.violation("lowest extension derivative", np.abs(res).max() if res.size else 0.0, ref, K, X)
        Z = dfree_bubbles(M_i[_ix(I, I)], D[:, I], self.level.targets[i][cl[I]], context=ctx)
        self._finish(i, K, X, Vb, bcols, x[:, :r_b], x[:, r_b:], phi, M_n, D, Z)

    def higher_extension(self, i, K, X):
        n, nn = i + 1, i + 2
        ctx = {"space": i, "dim": K, "entity": X}
        cl, I, B = self.positions(i, K, X)
        Vb, bcols = self.closure_values(i, K, X, include_self=False)
        mu = Vb[B]
        cln, In, Bn = self.positions(n, K, X)
        clnn = self.da.closure[nn][K][X]
        M_i, M_n, M_nn = self.mass(K, X, i), self.mass(K, X, n), self.mass(K, X, nn)
        D = local_block(self.level.D[i], cln, cl)
        Dn = local_block(self.level.D[n], clnn, cln)
        K_n = Dn.T @ M_nn @ Dn
        # s^eta: extension of D eta expanded in the boundary coarse dofs of the next space
        Wn, ncols = self.closure_values(n, K, X, include_self=True)
        own_n = self.sp[n].own[(K, X)]
        bsel = ~np.isin(ncols, own_n)
        Q = Wn[np.ix_(Bn, np.flatnonzero(bsel))]
        DmuB = D[_ix(Bn, B)] @ mu
        if Q.shape[1]:
            C, *_ = np.linalg.lstsq(Q, DmuB, rcond=None)
            s_eta = Wn[:, bsel] @ C
        else:
            C = np.zeros((0, mu.shape[1]))
            s_eta = np.zeros((cln.size, mu.shape[1]))
        if self.check and DmuB.size:
            self.violation("boundary derivative expansion", np.abs(Q @ C - DmuB).max(), np.abs(DmuB).max(), K, X)
        kind = self.sp[n].kind[(K, X)]
        loc = np.searchsorted(ncols, own_n[kind["dfree"]]) if kind["dfree"] else np.zeros(0, int)
        phi0 = Wn[:, loc]
        r_b, m = mu.shape[1], phi0.shape[1]
        mu_all = np.hstack([mu, np.zeros((B.size, m))])
        s_all = np.hstack([s_eta, phi0])
        x = extend_trace_higher(M_i, D, M_n, K_n, I, B, In, mu_all, s_all, ctx)
        if self.check:
            u = np.zeros((cl.size, r_b + m))
            u[I] = x
            u[B] = mu_all
            res = D @ u - s_all
            ref = np.abs(s_all).max() if s_all.size else 0.0
            self.violation("higher extension derivative", np.abs(res).max() if res.size else 0.0, ref, K, X)
        Z = dfree_bubbles(M_i[_ix(I, I)], D[:, I], self.level.targets[i][cl[I]], context=ctx)
        self._finish(i, K, X, Vb, bcols, x[:, :r_b], x[:, r_b:], phi0, M_n, D, Z)

    # driver ------------------------------------------------------------------------------
    def run(self):
        counts = self.coarse.counts
        for i in (4, 3, 2, 1):
            for K in range(i - 1, 4):
                for X in range(counts[K]):
                    if K == i - 1:
                        self.lowest_entity(i, K, X)
                    elif K == i:
                        self.lowest_extension(i, K, X)
                    else:
                        self.higher_extension(i, K, X)
        return self


def _prune(A: sp.csr_matrix, tol: float = 1e-12) -> sp.csr_matrix:
    """Drop entries below ``tol`` times the largest magnitude in their row."""
    A = la.csr(A)
    if A.nnz == 0:
        return A
    rmax = np.zeros(A.shape[0])
    rows = np.repeat(np.arange(A.shape[0]), np.diff(A.indptr))
    np.maximum.at(rmax, rows, np.abs(A.data))
    keep = np.abs(A.data) > tol * rmax[rows]
    return la.from_triplets(rows[keep], A.indices[keep], A.data[keep], A.shape)


def _assemble(b: _Builder, i: int, fine_dim: int):
    s = b.sp[i]
    da = b.da
    Pr, Pc, Pv, Qr, Qc, Qv = [], [], [], [], [], []
    for (K, X), ids in s.own.items():
        rows = da.interior[i][K][X]
        S = s.shape[(K, X)]
        if rows.size and S.size:
            cols = s.ccl[(K, X)]
            Pr.append(np.repeat(rows, cols.size))
            Pc.append(np.tile(cols, rows.size))
            Pv.append(S.reshape(-1))
        cl = da.closure[i][K][X]
        R = s.pirow[(K, X)]
        if ids.size and cl.size:
            Qr.append(np.repeat(ids, cl.size))
            Qc.append(np.tile(cl, ids.size))
            Qv.append(R.reshape(-1))
    cat = lambda L, dt=np.int64: np.concatenate(L) if L else np.zeros(0, dtype=dt)
    P = la.from_triplets(cat(Pr), cat(Pc), cat(Pv, np.float64), (fine_dim, s.count))
    Pi = la.from_triplets(cat(Qr), cat(Qc), cat(Qv, np.float64), (s.count, fine_dim))
    return _prune(P, 1e-14), _prune(Pi, 1e-14)


def _coarse_level(b: _Builder, P: dict, Pi: dict) -> SequenceLevel:
    level, coarse = b.level, b.coarse
    dims = {i: b.sp[i].count for i in SPACES}
    D = {i: _prune(Pi[i + 1] @ level.D[i] @ P[i]) for i in (1, 2, 3)}
    bnd = coarse.boundary_entities
    dof_dim, dof_entity, boundary, pv_dof = {}, {}, {}, {}
    entity_dofs, entity_mass = {}, {}
    for i in SPACES:
        s = b.sp[i]
        dd = np.empty(dims[i], dtype=np.int64)
        de = np.empty(dims[i], dtype=np.int64)
        for (K, X), ids in s.own.items():
            dd[ids], de[ids] = K, X
        dof_dim[i], dof_entity[i] = dd, de
        boundary[i] = np.array([bnd[k][x] for k, x in zip(dd, de)], dtype=bool)
        pv_dof[i] = np.array([s.own[(i - 1, X)][0] for X in range(coarse.counts[i - 1])], dtype=np.int64)
        for K in range(i - 1, 4):
            entity_dofs[(K, i)] = [s.ccl[(K, X)] for X in range(coarse.counts[K])]
            entity_mass[(K, i)] = [s.emass[(K, X)] for X in range(coarse.counts[K])]
    out = SequenceLevel(
        level=level.level + 1,
        topology=coarse,
        dims=dims,
        D=D,
        dof_dim=dof_dim,
        dof_entity=dof_entity,
        boundary=boundary,
        entity_dofs=entity_dofs,
        entity_mass=entity_mass,
        pv_dof=pv_dof,
        pv_weight={i: np.ones(coarse.counts[i - 1]) for i in SPACES},
    )
    out.targets = {i: Pi[i] @ level.targets[i] for i in SPACES if i in level.targets}
    if level.pi_hat:
        P1 = P[1]
        blk = sp.block_diag([P1, P1, P1], format="csr")
        out.pi_hat = {i: _prune(Pi[i] @ level.pi_hat[i] @ blk) for i in level.pi_hat}
    return out


def check_transfer(level: SequenceLevel, coarse: SequenceLevel, P: dict, Pi: dict, tol: float = EXACTNESS_TOL):
    """Raise :class:`ExactnessViolation` if ``Pi P != I`` or the sequence does not commute."""
    for i in SPACES:
        E = (Pi[i] @ P[i] - sp.identity(coarse.dims[i])).tocsr()
        err = np.abs(E.data).max() if E.nnz else 0.0
        if err > tol:
            raise ExactnessViolation(f"space {i}: Pi P differs from identity by {err:.3e}")
    for i in (1, 2, 3):
        E = (level.D[i] @ P[i] - P[i + 1] @ coarse.D[i]).tocsr()
        ref = max(np.abs(level.D[i].data).max() * max(np.abs(P[i].data).max(), 1.0), 1.0)
        err = np.abs(E.data).max() if E.nnz else 0.0
        if err > tol * ref:
            raise ExactnessViolation(f"space {i}: D P differs from P D^H by {err:.3e}")
    for i in (1, 2):
        E = (coarse.D[i + 1] @ coarse.D[i]).tocsr()
        err = np.abs(E.data).max() if E.nnz else 0.0
        if err > tol * max(np.abs(coarse.D[i].data).max(), 1.0) * max(np.abs(coarse.D[i + 1].data).max(), 1.0):
            raise ExactnessViolation(f"coarse D_{i + 1} D_{i} is not zero ({err:.3e})")


def coarsen_sequence(level: SequenceLevel, agg: AgglomeratedTopology, check: bool = True) -> CoarseLevelBundle:
    """Coarse de Rham sequence on ``agg.coarse`` with prolongators and projectors.

    Raises
    ------
    ExactnessViolation
        if a local extension cannot reproduce the required derivative or a
        post-hoc identity (``Pi P = I``, ``D P = P D^H``, ``D^H D^H = 0``)
        fails beyond ``1e-8``.
    SingularLocalSystem
        if a local saddle-point or Gram system is singular.
    """
    da = agglomerate_dofs(agg, level)
    b = _Builder(level, agg, da, check).run()
    P, Pi = {}, {}
    for i in SPACES:
        P[i], Pi[i] = _assemble(b, i, level.dims[i])
    coarse = _coarse_level(b, P, Pi)
    if check:
        check_transfer(level, coarse, P, Pi)
    return CoarseLevelBundle(P=P, Pi=Pi, level=coarse, dofagg=da)


def coarsen_levels(fine: SequenceLevel, aggs, check: bool = True):
    """Coarsen ``fine`` through a list of agglomerated topologies.

    Returns the list of levels (finest first) and the list of bundles.
    """
    levels, bundles = [fine], []
    for agg in aggs:
        bundle = coarsen_sequence(levels[-1], agg, check=check)
        bundles.append(bundle)
        levels.append(bundle.level)
    return levels, bundles
