"""Seeded graph partitioning by recursive BFS bisection.

Nodes are numbered ``0..n-1``; graphs are symmetric CSR pattern matrices.
The result is deterministic for a given seed: every bisection grows one half
by breadth-first search from a pseudo-peripheral node, and the final part
ids are renumbered by their smallest node.
"""

from __future__ import annotations

import numpy as np
import scipy.sparse as sp
from scipy.sparse import csgraph


def _distances(G: sp.csr_matrix, root: int) -> np.ndarray:
    return csgraph.shortest_path(G, method="D", unweighted=True, directed=False, indices=root)


def _farthest(dist: np.ndarray) -> int:
    finite = np.where(np.isfinite(dist), dist, -1.0)
    return int(np.flatnonzero(finite == finite.max())[0])


def pseudo_peripheral_node(G: sp.csr_matrix, start: int, max_iter: int = 8) -> int:
    """Endpoint of an approximate diameter of the component containing ``start``.

    Of the two ends of the final sweep the smaller node id is returned so
    that the choice does not depend on the sweep direction.
    """
    u = start
    dist = _distances(G, u)
    ecc = -1.0
    v = _farthest(dist)
    for _ in range(max_iter):
        dv = _distances(G, v)
        e = np.max(np.where(np.isfinite(dv), dv, -1.0))
        if e <= ecc:
            break
        ecc = e
        u, v = v, _farthest(dv)
    return min(u, v)


def _bfs_take(G: sp.csr_matrix, root: int, count: int) -> np.ndarray:
    """First ``count`` nodes in BFS order from ``root``, spilling into other components."""
    n = G.shape[0]
    taken = np.zeros(n, dtype=bool)
    out = []
    r = root
    while len(out) < count:
        order = csgraph.breadth_first_order(G, r, directed=False, return_predecessors=False)
        need = count - len(out)
        out.extend(order[:need].tolist())
        taken[order] = True
        if len(out) >= count:
            break
        rest = np.flatnonzero(~taken)
        r = int(rest[0])
    return np.array(out[:count], dtype=np.int64)


def _greedy_take(G: sp.csr_matrix, root: int, count: int) -> np.ndarray:
    """Grow a compact set from ``root``: repeatedly add the frontier node with
    the largest total edge weight into the set (ties: smallest id)."""
    import heapq

    n = G.shape[0]
    indptr, indices, data = G.indptr, G.indices, G.data
    score = np.zeros(n)
    taken = np.zeros(n, dtype=bool)
    out = []
    heap = [(0.0, root)]
    while len(out) < count:
        if not heap:
            rest = np.flatnonzero(~taken)
            heap = [(0.0, int(rest[0]))]
        s, v = heapq.heappop(heap)
        if taken[v] or -s != score[v]:
            continue
        taken[v] = True
        out.append(v)
        for p in range(indptr[v], indptr[v + 1]):
            u = indices[p]
            if not taken[u]:
                score[u] += data[p]
                heapq.heappush(heap, (-score[u], u))
    return np.array(out, dtype=np.int64)


def _components(G):
    ncomp, comp = csgraph.connected_components(G, directed=False)
    return ncomp, comp


def _bisect(G, nodes, k, rng, labels, next_label, grow=None):
    if k == 1 or nodes.size <= 1:
        labels[nodes] = next_label
        return next_label + 1
    if k >= nodes.size:
        labels[nodes] = next_label + np.arange(nodes.size)
        return next_label + nodes.size
    sub = G[nodes][:, nodes]
    ncomp, comp = _components(sub)
    if ncomp > 1:
        return _split_disconnected(G, nodes, comp, ncomp, k, rng, labels, next_label, grow)
    k1 = k // 2
    n1 = int(round(nodes.size * k1 / k))
    n1 = min(max(n1, 1), nodes.size - 1)
    start = int(rng.integers(nodes.size))
    root = pseudo_peripheral_node(sub, start)
    first = (grow or _bfs_take)(sub, root, n1)
    mask = np.zeros(nodes.size, dtype=bool)
    mask[first] = True
    # pieces of the complement cut off by the BFS front go back to the grown half
    rest = np.flatnonzero(~mask)
    nrest, rcomp = _components(sub[rest][:, rest])
    if nrest > 1:
        sizes = np.bincount(rcomp)
        keep = int(np.argmax(sizes))
        mask[rest[rcomp != keep]] = True
        # keep parts per node balanced after moving nodes between halves
        k1 = min(max(int(round(k * mask.sum() / nodes.size)), 1), k - 1)
    next_label = _bisect(G, nodes[mask], k1, rng, labels, next_label, grow)
    return _bisect(G, nodes[~mask], k - k1, rng, labels, next_label, grow)


def _split_disconnected(G, nodes, comp, ncomp, k, rng, labels, next_label, grow=None):
    """Share ``k`` parts among the components in proportion to their sizes."""
    sizes = np.bincount(comp, minlength=ncomp).astype(np.float64)
    order = np.argsort(-sizes, kind="stable")
    alloc = np.zeros(ncomp, dtype=np.int64)
    remaining = k
    total = sizes.sum()
    for c in order:
        share = int(round(k * sizes[c] / total))
        alloc[c] = max(1, min(share, remaining - 0))
        remaining -= alloc[c]
        remaining = max(remaining, 0)
    for c in range(ncomp):
        next_label = _bisect(G, nodes[comp == c], max(int(alloc[c]), 1), rng, labels, next_label, grow)
    return next_label


def split_components(G: sp.csr_matrix, parts: np.ndarray) -> np.ndarray:
    """Split each part into connected components and renumber by smallest node."""
    parts = np.asarray(parts, dtype=np.int64)
    coo = G.tocoo()
    same = parts[coo.row] == parts[coo.col]
    H = sp.csr_matrix((np.ones(same.sum()), (coo.row[same], coo.col[same])), shape=G.shape)
    _, comp = csgraph.connected_components(H, directed=False)
    return renumber(comp)


def renumber(parts: np.ndarray) -> np.ndarray:
    """Relabel parts ``0..k-1`` in order of their smallest node id."""
    parts = np.asarray(parts, dtype=np.int64)
    _, first = np.unique(parts, return_index=True)
    order = np.argsort(first)
    remap = np.empty(order.size, dtype=np.int64)
    remap[order] = np.arange(order.size)
    _, inv = np.unique(parts, return_inverse=True)
    return remap[inv]


def partition(G: sp.csr_matrix, n_parts: int, seed: int = 0, compact: bool = False) -> np.ndarray:
    """Part id per node; every part is connected.

    Recursive bisection splits node counts proportionally to the requested
    part counts (balanced to +-1 node); disconnected parts are then split
    into components, so the result may contain more than ``n_parts`` parts.
    """
    n = G.shape[0]
    if n_parts < 1:
        raise ValueError("n_parts must be >= 1")
    if n == 0:
        return np.zeros(0, dtype=np.int64)
    G = sp.csr_matrix(G)
    labels = np.empty(n, dtype=np.int64)
    rng = np.random.default_rng(seed)
    grow = _greedy_take if compact else _bfs_take
    _bisect(G, np.arange(n), min(n_parts, n), rng, labels, 0, grow)
    return split_components(G, labels)
