"""Agglomerated topologies: coarse elements, facets, edges and vertices.

Given a partition of the elements of one level into agglomerates, the
coarse facets are the connected pieces of agglomerate interfaces (and of
the domain boundary, split by boundary attribute), the coarse edges are the
connected pieces of intersections of coarse facets, and the coarse vertices
are single vertices where coarse edges end.  Every coarse entity records its
constituent entities of the previous level together with +-1 orientation
signs relative to their own orientation.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numba
import numpy as np
import scipy.sparse as sp
from scipy.sparse import csgraph

from . import core_la as la
from .errors import RepairFailed, TopologyError
from .mesh import Mesh
from .partition import partition, renumber, split_components
from .topology import Topology


@dataclass(eq=False)
class AgglomeratedTopology:
    """A coarse topology together with its relation to the previous level.

    ``entities[k][X]`` lists the previous-level entities of dimension ``k``
    that make up coarse entity ``X`` and ``signs[k][X]`` their orientation
    relative to ``X`` (all +1 for elements and vertices).
    """

    fine: Topology
    coarse: Topology
    parts: np.ndarray
    entities: dict
    signs: dict

    @property
    def counts(self):
        return self.coarse.counts

    def table(self, k: int) -> sp.csr_matrix:
        """Signed coarse-entity x fine-entity matrix for dimension ``k``."""
        rows = np.concatenate([np.full(len(e), X) for X, e in enumerate(self.entities[k])] or [[]])
        cols = np.concatenate(self.entities[k] or [[]])
        vals = np.concatenate(self.signs[k] or [[]])
        return la.from_triplets(rows, cols, vals, (self.coarse.counts[k], self.fine.counts[k]))


# dual graph -------------------------------------------------------------------

def build_dual_graph(level) -> sp.csr_matrix:
    """Element adjacency through shared facets for a :class:`Mesh` or :class:`Topology`."""
    if isinstance(level, Mesh):
        level = Topology.from_mesh(level)
    if isinstance(level, AgglomeratedTopology):
        level = level.coarse
    return level.dual_graph()


# helpers ------------------------------------------------------------------------

def _groups(labels: np.ndarray, members: np.ndarray | None = None):
    """Lists of member ids per label ``0..max``, members sorted ascending."""
    labels = np.asarray(labels)
    if members is None:
        members = np.arange(labels.size)
    order = np.lexsort((members, labels))
    lab = labels[order]
    n = int(lab.max()) + 1 if lab.size else 0
    cuts = np.searchsorted(lab, np.arange(n + 1))
    mem = members[order]
    return [mem[cuts[i] : cuts[i + 1]] for i in range(n)]


def _indicator(groups, n_cols: int) -> sp.csr_matrix:
    rows = np.concatenate([np.full(len(g), i) for i, g in enumerate(groups)] or [[]]).astype(np.int64)
    cols = np.concatenate(groups or [[]]).astype(np.int64)
    return sp.csr_matrix((np.ones(cols.size), (rows, cols)), shape=(len(groups), n_cols))


def _count_closure(topo: Topology, ind3: sp.csr_matrix) -> np.ndarray:
    """Per row of an element indicator, ``V - E + F - T`` of the closed cell set."""
    chi = np.zeros(ind3.shape[0], dtype=np.int64)
    for k, sgn in ((0, 1), (1, -1), (2, 1), (3, -1)):
        R = ind3 @ topo.closure[(3, k)]
        chi += sgn * np.diff(sp.csr_matrix(R).indptr)
    return chi


def _surface_chi(topo: Topology, ind2: sp.csr_matrix) -> np.ndarray:
    """``V - E + F`` of sets of facets (rows of a facet indicator)."""
    chi = np.zeros(ind2.shape[0], dtype=np.int64)
    for k, sgn in ((0, 1), (1, -1), (2, 1)):
        R = ind2 @ topo.closure[(2, k)]
        chi += sgn * np.diff(sp.csr_matrix(R).indptr)
    return chi


def _connected_pieces(adj: sp.csr_matrix, labels: np.ndarray) -> np.ndarray:
    """Split label classes into components of ``adj`` restricted to equal labels."""
    coo = adj.tocoo()
    same = labels[coo.row] == labels[coo.col]
    H = sp.csr_matrix((np.ones(same.sum()), (coo.row[same], coo.col[same])), shape=adj.shape)
    _, comp = csgraph.connected_components(H, directed=False)
    # order components by (label, smallest member)
    first = np.full(comp.max() + 1 if comp.size else 0, np.iinfo(np.int64).max)
    np.minimum.at(first, comp, np.arange(comp.size))
    key = np.lexsort((first[comp], labels))
    out = np.empty_like(comp)
    seen = {}
    for idx in key:
        c = comp[idx]
        if c not in seen:
            seen[c] = len(seen)
        out[idx] = seen[c]
    return out


# coarse entity construction -------------------------------------------------------

def _facet_side_signs(fine: Topology):
    """``B3`` value of each facet for its first and second adjacent element."""
    Bt = sp.csc_matrix(fine.incidence[3])
    Bt.sort_indices()
    s0 = Bt.data[Bt.indptr[:-1]]
    return s0, -s0


def _coarse_facets(fine: Topology, parts: np.ndarray):
    fe = fine.facet_elements
    a0 = parts[fe[:, 0]]
    a1 = np.where(fe[:, 1] >= 0, parts[np.maximum(fe[:, 1], 0)], -1)
    cand = np.flatnonzero(a0 != a1)
    bnd = fe[cand, 1] < 0
    if np.any(bnd & (fine.facet_attr[cand] <= 0)):
        raise TopologyError("a facet with one adjacent element carries no boundary attribute")
    lo = np.where(bnd, a0[cand], np.minimum(a0[cand], a1[cand]))
    hi = np.where(bnd, -fine.facet_attr[cand], np.maximum(a0[cand], a1[cand]))
    _, label = np.unique(np.stack([lo, hi], axis=1), axis=0, return_inverse=True)
    label = label.reshape(-1)
    C = sp.csr_matrix(abs(fine.incidence[2])[cand])
    pieces = _connected_pieces(C @ C.T, label)
    s0, s1 = _facet_side_signs(fine)
    # orientation: outward from the lower agglomerate (or the only one)
    first_side = bnd | (a0[cand] == lo)
    phi = np.where(first_side, s0[cand], s1[cand])
    groups = _groups(pieces, cand)
    nF = len(groups)
    F_lo = np.zeros(nF, dtype=np.int64)
    F_hi = np.zeros(nF, dtype=np.int64)
    F_lo[pieces] = lo
    F_hi[pieces] = hi
    # number coarse facets by their smallest member
    order = np.argsort([grp[0] for grp in groups], kind="stable")
    groups = [groups[i] for i in order]
    F_lo, F_hi = F_lo[order], F_hi[order]
    sign_of = np.empty(fine.counts[2])
    sign_of[cand] = phi
    # keep the orientation of the first member; the normal still points from
    # one adjacent agglomerate to the other everywhere on the coarse facet
    signs = [sign_of[g] * sign_of[g[0]] for g in groups]
    flip = np.array([sign_of[g[0]] for g in groups])
    return groups, signs, F_lo, F_hi, flip


def _coarse_edges(fine: Topology, F_groups):
    nv = fine.counts[0]
    AF = _indicator(F_groups, fine.counts[2])
    EF = sp.csr_matrix(abs(fine.incidence[2]).T @ AF.T)
    EF.data[:] = 1.0
    EF.sort_indices()
    nS = np.diff(EF.indptr)
    cand = np.flatnonzero(nS >= 2)
    keys = {}
    g = np.empty(cand.size, dtype=np.int64)
    for j, e in enumerate(cand):
        key = tuple(EF.indices[EF.indptr[e] : EF.indptr[e + 1]])
        g[j] = keys.setdefault(key, len(keys))
    B1 = sp.csr_matrix(fine.incidence[1])
    ev = np.zeros((cand.size, 2), dtype=np.int64)
    ev_sign = np.zeros((cand.size, 2))
    for j, e in enumerate(cand):
        cols = B1.indices[B1.indptr[e] : B1.indptr[e + 1]]
        vals = B1.data[B1.indptr[e] : B1.indptr[e + 1]]
        if cols.size != 2:
            raise TopologyError(f"edge {e} does not have two end points")
        ev[j], ev_sign[j] = cols, vals
    # coarse vertices: shared by several edge groups, or not interior to a path
    gv = np.unique(np.stack([np.repeat(g, 2), ev.reshape(-1)], axis=1), axis=0)
    n_groups_at = np.bincount(gv[:, 1], minlength=nv)
    pair = g[:, None] * nv + ev
    upair, cnt = np.unique(pair.reshape(-1), return_counts=True)
    is_cv = np.zeros(nv, dtype=bool)
    is_cv[n_groups_at >= 2] = True
    is_cv[(upair % nv)[cnt != 2]] = True
    while True:
        R = sp.csr_matrix(
            (np.ones(2 * cand.size), (np.repeat(np.arange(cand.size), 2), ev.reshape(-1))),
            shape=(cand.size, nv),
        )
        Rn = R @ sp.diags((~is_cv).astype(np.float64))
        pieces = _connected_pieces(sp.csr_matrix(Rn @ Rn.T), g)
        groups = _groups(pieces)
        changed = False
        for piece in groups:
            verts, vcnt = np.unique(ev[piece].reshape(-1), return_counts=True)
            if np.any(vcnt % 2 == 1):
                continue  # open path
            inner = verts[~is_cv[verts]]
            is_cv[inner[0]] = True
            changed = True
        if not changed:
            break
    E_groups, E_signs = [], []
    for piece in groups:
        E_groups.append(cand[piece])
        E_signs.append(_orient_path(piece, ev, ev_sign, is_cv))
    order = np.argsort([grp[0] for grp in E_groups], kind="stable")
    E_groups = [E_groups[i] for i in order]
    E_signs = [E_signs[i] for i in order]
    return E_groups, E_signs, np.flatnonzero(is_cv)


def _orient_path(piece, ev, ev_sign, is_cv):
    """Signs orienting the edges of one path consistently, first edge kept."""
    piece = np.sort(piece)
    signs = np.zeros(piece.size)
    at = {}
    for loc, j in enumerate(piece):
        for v in ev[j]:
            if not is_cv[v]:
                at.setdefault(v, []).append(loc)
    signs[0] = 1.0
    stack = [0]
    while stack:
        loc = stack.pop()
        j = piece[loc]
        for v, s in zip(ev[j], ev_sign[j]):
            if is_cv[v]:
                continue
            for other in at[v]:
                if signs[other] != 0.0:
                    continue
                k = piece[other]
                s_other = ev_sign[k][list(ev[k]).index(v)]
                # oriented head of one edge must be the oriented tail of the next
                signs[other] = -signs[loc] * s * s_other
                stack.append(other)
    return signs


def _build(fine: Topology, parts: np.ndarray):
    """Coarse topology for ``parts`` plus the agglomerates that fail the checks."""
    parts = np.asarray(parts, dtype=np.int64)
    nA = int(parts.max()) + 1
    A_groups = _groups(parts)
    F_groups, F_signs, F_lo, F_hi, flip = _coarse_facets(fine, parts)
    E_groups, E_signs, V_ids = _coarse_edges(fine, F_groups)
    nF, nE, nV = len(F_groups), len(E_groups), V_ids.size
    interior = F_hi >= 0

    rows = np.r_[F_lo, F_hi[interior]]
    cols = np.r_[np.arange(nF), np.flatnonzero(interior)]
    vals = np.r_[flip, -flip[interior]]
    C3 = la.from_triplets(rows, cols, vals, (nA, nF))

    def signed(groups, signs, n_fine):
        r = np.concatenate([np.full(len(g), X) for X, g in enumerate(groups)] or [[]]).astype(np.int64)
        return sp.csr_matrix(
            (np.concatenate(signs or [[]]), (r, np.concatenate(groups or [[]]).astype(np.int64))),
            shape=(len(groups), n_fine),
        )

    PhiF = signed(F_groups, F_signs, fine.counts[2])
    PhiE = signed(E_groups, E_signs, fine.counts[1])
    size_E = np.array([len(g) for g in E_groups], dtype=np.float64)
    M2 = (PhiF @ fine.incidence[2] @ PhiE.T).toarray() if nF * nE < 4_000_000 else None
    if M2 is None:
        M2s = sp.csr_matrix(PhiF @ fine.incidence[2] @ PhiE.T)
        N2s = sp.csr_matrix(abs(PhiF) @ abs(fine.incidence[2]) @ abs(PhiE).T)
    else:
        M2s = sp.csr_matrix(M2)
        N2s = sp.csr_matrix((abs(PhiF) @ abs(fine.incidence[2]) @ abs(PhiE).T).toarray())
    C2 = la.csr(M2s @ sp.diags(1.0 / size_E))
    N2 = la.csr(N2s @ sp.diags(1.0 / size_E))
    bad_F = np.zeros(nF, dtype=bool)
    coo = N2.tocoo()
    off = np.abs(coo.data - 1.0) > 1e-12
    bad_F[coo.row[off]] = True
    c2coo = C2.tocoo()
    off = np.abs(np.abs(c2coo.data) - 1.0) > 1e-12
    bad_F[c2coo.row[off]] = True
    C2 = la.csr(sp.csr_matrix((np.sign(c2coo.data), (c2coo.row, c2coo.col)), shape=C2.shape))

    vmap = -np.ones(fine.counts[0], dtype=np.int64)
    vmap[V_ids] = np.arange(nV)
    C1full = sp.csr_matrix(PhiE @ fine.incidence[1]).tocoo()
    keep = np.abs(C1full.data) > 0.5
    C1 = la.from_triplets(C1full.row[keep], vmap[C1full.col[keep]], C1full.data[keep], (nE, nV))
    if np.any(vmap[C1full.col[keep]] < 0):
        raise TopologyError("a coarse edge ends at a vertex that is not a coarse vertex")

    # checks: agglomerates and their boundary surfaces, coarse facets
    bad_A = np.zeros(nA, dtype=bool)
    indA = _indicator(A_groups, fine.counts[3])
    bad_A |= _count_closure(fine, indA) != 1
    surf = sp.csr_matrix(abs(C3) @ _indicator(F_groups, fine.counts[2]))
    bad_A |= _surface_chi(fine, surf) != 2
    bad_F |= _surface_chi(fine, _indicator(F_groups, fine.counts[2])) != 1
    for F in np.flatnonzero(bad_F):
        bad_A[F_lo[F]] = True
        if F_hi[F] >= 0:
            bad_A[F_hi[F]] = True
    if np.any(np.diff(C1.indptr) != 2):
        bad = np.flatnonzero(np.diff(C1.indptr) != 2)
        raise TopologyError(f"coarse edges {bad[:5].tolist()} do not have two end points")

    def measure(k, groups):
        return np.array([fine.measure[k][g].sum() for g in groups])

    facet_attr = np.where(interior, 0, -F_hi)
    coarse = Topology(
        counts=(nV, nE, nF, nA),
        incidence={1: C1, 2: C2, 3: C3},
        facet_attr=facet_attr.astype(np.int64),
        element_attr=np.array([fine.element_attr[g[0]] for g in A_groups], dtype=np.int64),
        measure={0: np.ones(nV), 1: measure(1, E_groups), 2: measure(2, F_groups), 3: measure(3, A_groups)},
    )
    # the same checks in coarse terms: every facet boundary is a simple cycle,
    # every element boundary is a closed manifold surface, every cell has chi 1
    FV = sp.csr_matrix(abs(C2) @ abs(C1))
    rows = np.repeat(np.arange(nF), np.diff(FV.indptr))
    bad_F[rows[FV.data != 2]] = True
    bad_F |= _surface_chi(coarse, sp.identity(nF, format="csr")) != 1
    AE = sp.csr_matrix(abs(C3) @ abs(C2))
    rows = np.repeat(np.arange(nA), np.diff(AE.indptr))
    bad_A[rows[AE.data != 2]] = True
    bad_A |= _count_closure(coarse, sp.identity(nA, format="csr")) != 1
    for F in np.flatnonzero(bad_F):
        bad_A[F_lo[F]] = True
        if F_hi[F] >= 0:
            bad_A[F_hi[F]] = True
    entities = {3: A_groups, 2: F_groups, 1: E_groups, 0: [np.array([v]) for v in V_ids]}
    signs = {
        3: [np.ones(len(g)) for g in A_groups],
        2: F_signs,
        1: E_signs,
        0: [np.ones(1) for _ in V_ids],
    }
    agg = AgglomeratedTopology(fine=fine, coarse=coarse, parts=parts, entities=entities, signs=signs)
    return agg, np.flatnonzero(bad_A)


def coarsen_topology(fine: Topology, parts) -> AgglomeratedTopology:
    """Coarse topology induced by ``parts``; raises if the partition is not repaired."""
    if isinstance(fine, Mesh):
        fine = Topology.from_mesh(fine)
    agg, bad = _build(fine, renumber(parts))
    if bad.size:
        raise TopologyError(f"agglomerates {bad[:10].tolist()} fail the topology check")
    return agg


@numba.njit(cache=True)
def _grow_change(t, delta, e_ptr, e_idx, f_ptr, f_idx, mult, facet_in, bcnt, cnt):
    """Add (``delta = 1``) or remove (``-1``) element ``t``.

    ``e_ptr/e_idx[k]`` list the closure entities of dimension ``k`` of each
    element and ``f_ptr/f_idx[k]`` those of each facet (``k`` = 0, 1).
    ``cnt`` holds: closure counts of vertices/edges/facets (0..2), boundary
    counts (3..5), the number of non-manifold boundary edges (6) and the
    element count (7).
    """
    for k in range(3):
        for p in range(e_ptr[k][t], e_ptr[k][t + 1]):
            x = e_idx[k][p]
            before = mult[k][x] > 0
            mult[k][x] += delta
            after = mult[k][x] > 0
            if before != after:
                cnt[k] += 1 if after else -1
    for p in range(e_ptr[2][t], e_ptr[2][t + 1]):
        f = e_idx[2][p]
        was = facet_in[f] == 1
        facet_in[f] += delta
        now = facet_in[f] == 1
        if was == now:
            continue
        d = 1 if now else -1
        cnt[5] += d
        for k in range(2):
            c = bcnt[k]
            for q in range(f_ptr[k][f], f_ptr[k][f + 1]):
                x = f_idx[k][q]
                old = c[x]
                c[x] += d
                new = c[x]
                if k == 1:
                    cnt[6] += (1 if (new != 0 and new != 2) else 0) - (1 if (old != 0 and old != 2) else 0)
                cnt[3 + k] += (1 if new > 0 else 0) - (1 if old > 0 else 0)
    cnt[7] += delta


class _GrowState:
    """Incremental Euler counts of a growing element set and of its boundary."""

    def __init__(self, topo: Topology):
        self.topo = topo
        cl = topo.closure
        ent = [sp.csr_matrix(cl[(3, k)]) for k in range(3)]
        fv = [sp.csr_matrix(cl[(2, k)]) for k in range(2)]
        self.e_ptr = numba.typed.List([np.ascontiguousarray(M.indptr, dtype=np.int64) for M in ent])
        self.e_idx = numba.typed.List([np.ascontiguousarray(M.indices, dtype=np.int64) for M in ent])
        self.f_ptr = numba.typed.List([np.ascontiguousarray(M.indptr, dtype=np.int64) for M in fv])
        self.f_idx = numba.typed.List([np.ascontiguousarray(M.indices, dtype=np.int64) for M in fv])
        self.mult = numba.typed.List([np.zeros(topo.counts[k], dtype=np.int64) for k in range(3)])
        self.facet_in = np.zeros(topo.counts[2], dtype=np.int64)
        self.bcnt = numba.typed.List([np.zeros(topo.counts[k], dtype=np.int64) for k in range(2)])
        self.cnt = np.zeros(8, dtype=np.int64)

    @property
    def size(self) -> int:
        return int(self.cnt[7])

    def change(self, t, delta):
        _grow_change(int(t), int(delta), self.e_ptr, self.e_idx, self.f_ptr, self.f_idx,
                     self.mult, self.facet_in, self.bcnt, self.cnt)

    def valid(self) -> bool:
        c = self.cnt
        chi = c[0] - c[1] + c[2] - c[7]
        chi_b = c[3] - c[4] + c[5]
        return chi == 1 and chi_b == 2 and c[6] == 0


def _split_valid(topo: Topology, G: sp.csr_matrix, members: np.ndarray, state=None, max_size=None):
    """Split ``members`` into pieces that are topological balls.

    Pieces are grown one at a time from the smallest remaining element by
    adding the neighbor sharing most facets, skipping additions that would
    break the ball property.
    """
    state = state or _GrowState(topo)
    inside = np.zeros(topo.counts[3], dtype=bool)
    inside[members] = True
    left = set(members.tolist())
    pieces = []
    import heapq

    while left:
        seed = min(left)
        piece = [seed]
        state.change(seed, 1)
        left.discard(seed)
        score = {}
        heap = []

        def push(v):
            for p in range(G.indptr[v], G.indptr[v + 1]):
                u = G.indices[p]
                if inside[u] and u in left:
                    score[u] = score.get(u, 0.0) + G.data[p]
                    heapq.heappush(heap, (-score[u], u))

        push(seed)
        rejected = set()
        while heap and (max_size is None or len(piece) < max_size):
            s, u = heapq.heappop(heap)
            if u not in left or u in rejected or -s != score.get(u):
                continue
            state.change(u, 1)
            if state.valid():
                piece.append(u)
                left.discard(u)
                push(u)
                rejected.clear()
            else:
                state.change(u, -1)
                rejected.add(u)
        for t in piece:
            state.change(t, -1)
        pieces.append(np.array(sorted(piece), dtype=np.int64))
    return pieces


def topology_check_and_repair(fine: Topology, parts, seed: int = 0) -> AgglomeratedTopology:
    """Split agglomerates until every agglomerate, its boundary and its coarse facets are cells.

    Disconnected agglomerates are split into components; agglomerates that
    are not balls (Euler characteristic of the closure != 1 or of the
    boundary surface != 2) or that touch a coarse facet that is not a disk
    are bisected, and the process repeats.
    """
    if isinstance(fine, Mesh):
        fine = Topology.from_mesh(fine)
    G = fine.dual_graph()
    parts = split_components(G, parts)
    for _ in range(fine.counts[3] + 1):
        agg, bad = _build(fine, parts)
        if bad.size == 0:
            return agg
        parts = parts.copy()
        nxt = int(parts.max()) + 1
        sizes = np.bincount(parts)
        splittable = bad[sizes[bad] >= 2]
        if splittable.size == 0:
            raise RepairFailed(f"single-element agglomerates {bad[:10].tolist()} fail the topology check")
        state = _GrowState(fine)
        for a in splittable:
            members = np.flatnonzero(parts == a)
            pieces = _split_valid(fine, G, members, state)
            if len(pieces) == 1:
                # a ball that still fails (coarse facet problems): bisect it
                sub = partition(G[members][:, members], 2, seed)
                pieces = [members[sub == 0], members[sub == 1]]
            for piece in pieces[1:]:
                parts[piece] = nxt
                nxt += 1
        parts = split_components(G, parts)
    raise RepairFailed("topology repair did not converge")


def trivial_partition(n_elements: int) -> np.ndarray:
    return np.arange(n_elements, dtype=np.int64)


def block_partition(n_elements: int, size: int) -> np.ndarray:
    """Consecutive element ids in blocks of ``size``.

    Uniform refinement stores the eight children of every tet
    consecutively, and agglomerate ids follow their smallest member, so on
    a mesh refined ``k`` times blocks of 8 revert up to ``k`` refinements
    level by level (geometric coarsening).
    """
    if size < 1:
        raise ValueError("block size must be >= 1")
    return np.arange(n_elements, dtype=np.int64) // int(size)


def greedy_ball_partition(topo: Topology, target_size: int) -> np.ndarray:
    """Agglomerates of at most ``target_size`` elements that are topological balls.

    Elements are swept in id order; each agglomerate grows from the smallest
    unassigned element by adding the neighbor sharing most facets, as long
    as the union stays a ball with a manifold boundary sphere.
    """
    G = topo.dual_graph()
    pieces = _split_valid(topo, G, np.arange(topo.counts[3]), max_size=target_size)
    parts = np.empty(topo.counts[3], dtype=np.int64)
    for i, q in enumerate(pieces):
        parts[q] = i
    return renumber(parts)


def coarsen_recursive(m, factors, seed: int = 0, trivial: bool = False, partitioner: str = "greedy"):
    """Hierarchy of agglomerated topologies, one per coarsening factor.

    ``partitioner`` is ``"greedy"`` (ball-preserving growth to ``factor``
    elements, the default), ``"bisection"`` (seeded recursive bisection
    into ``ceil(n / factor)`` parts) or ``"blocks"`` (consecutive element
    ids, see :func:`block_partition`).  Every partition is checked and
    repaired.
    """
    fine = Topology.from_mesh(m) if isinstance(m, Mesh) else m
    out = []
    for factor in factors:
        if not trivial and factor < 2:
            raise ValueError("coarsening factors must be >= 2")
        n = fine.counts[3]
        if trivial:
            parts = trivial_partition(n)
        elif partitioner == "greedy":
            parts = greedy_ball_partition(fine, int(factor))
        elif partitioner == "blocks":
            parts = block_partition(n, int(factor))
        elif partitioner == "bisection":
            parts = partition(fine.dual_graph(), max(1, math.ceil(n / factor)), seed)
        else:
            raise ValueError(f"unknown partitioner {partitioner!r}")
        agg = topology_check_and_repair(fine, parts, seed)
        out.append(agg)
        fine = agg.coarse
    return out


def dump_topology(levels) -> str:
    """Plain-text listing of coarse entities per level.

    Format: a ``level L`` line with the coarse entity counts, followed by
    one line per coarse entity ``<dim> <id>: <fine id>:<sign> ...``.
    """
    lines = []
    for L, agg in enumerate(levels, start=2):
        c = agg.coarse.counts
        lines.append(f"level {L} vertices {c[0]} edges {c[1]} facets {c[2]} elements {c[3]}")
        for k in (3, 2, 1, 0):
            for X, (ents, sg) in enumerate(zip(agg.entities[k], agg.signs[k])):
                items = " ".join(f"{int(e)}:{int(s):+d}" for e, s in zip(ents, sg))
                lines.append(f"{k} {X}: {items}")
    return "\n".join(lines) + "\n"
