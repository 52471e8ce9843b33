"""Cell-complex view of a mesh level: entity counts and signed incidences.

The same type describes the fine mesh and every agglomerated level, so the
coarsening code never needs to know which one it is working on.  Entity
dimension ``k`` runs over 0 (vertices), 1 (edges), 2 (facets) and
3 (elements).
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import cached_property

import numpy as np
import scipy.sparse as sp

from .mesh import Mesh


def _pattern(A) -> sp.csr_matrix:
    B = sp.csr_matrix(A, copy=True)
    B.data = np.ones_like(B.data)
    return B


@dataclass(eq=False)
class Topology:
    """Signed incidence of one mesh level.

    ``incidence[k]`` maps ``k-1`` cells to ``k`` cells (rows are the higher
    dimensional entities): ``incidence[1]`` is edge-vertex, ``incidence[2]``
    facet-edge and ``incidence[3]`` element-facet.  ``facet_attr`` is the
    boundary attribute of each facet (0 in the interior).
    """

    counts: tuple
    incidence: dict
    facet_attr: np.ndarray
    element_attr: np.ndarray
    measure: dict

    @classmethod
    def from_mesh(cls, m: Mesh) -> "Topology":
        return cls(
            counts=(m.n_vertices, m.n_edges, m.n_facets, m.n_elements),
            incidence={1: m.edge_vertex, 2: m.facet_edge, 3: m.element_facet},
            facet_attr=m.boundary_facet_attr,
            element_attr=m.element_attr,
            measure={0: np.ones(m.n_vertices), 1: m.lengths, 2: m.areas, 3: m.volumes},
        )

    @property
    def n_elements(self) -> int:
        return self.counts[3]

    def euler_characteristic(self) -> int:
        c = self.counts
        return c[0] - c[1] + c[2] - c[3]

    @cached_property
    def closure(self) -> dict:
        """``closure[(k, j)]``: pattern matrix, entity of dim k -> sub-entities of dim j <= k."""
        out = {}
        for k in range(4):
            out[(k, k)] = sp.identity(self.counts[k], format="csr")
            acc = out[(k, k)]
            for j in range(k - 1, -1, -1):
                acc = _pattern(acc @ _pattern(self.incidence[j + 1]))
                out[(k, j)] = acc
        return out

    @cached_property
    def facet_elements(self) -> np.ndarray:
        """(n_facets, 2) adjacent element ids, -1 where absent; column 0 is the lower id."""
        Bt = sp.csc_matrix(self.incidence[3])
        out = -np.ones((self.counts[2], 2), dtype=np.int64)
        nnz = np.diff(Bt.indptr)
        if np.any(nnz > 2) or np.any(nnz == 0):
            from .errors import TopologyError

            raise TopologyError("every facet must border one or two elements")
        starts = Bt.indptr[:-1]
        out[:, 0] = Bt.indices[starts]
        two = nnz == 2
        out[two, 1] = Bt.indices[starts[two] + 1]
        return out

    @cached_property
    def boundary_entities(self) -> dict:
        """Per dimension, boolean mask of entities in the closure of a boundary facet."""
        bf = (self.facet_attr > 0).astype(np.float64)
        out = {3: np.zeros(self.counts[3], dtype=bool), 2: bf > 0}
        for j in (1, 0):
            out[j] = (self.closure[(2, j)].T @ bf) > 0
        return out

    def dual_graph(self) -> sp.csr_matrix:
        """Element adjacency through shared facets; weights count the shared facets."""
        fe = self.facet_elements
        inner = fe[:, 1] >= 0
        a, b = fe[inner, 0], fe[inner, 1]
        n = self.counts[3]
        G = sp.coo_matrix((np.ones(a.size * 2), (np.r_[a, b], np.r_[b, a])), shape=(n, n)).tocsr()
        G.sum_duplicates()
        G.sort_indices()
        return G
