"""Tetrahedral meshes with canonically oriented edges and facets.

Orientation conventions (used by every incidence sign in the package):

* an edge ``(a, b)`` with ``a < b`` points from ``a`` to ``b``;
* a facet ``(a, b, c)`` with ``a < b < c`` has normal
  ``(x_b - x_a) x (x_c - x_a)``;
* an element's facet sign is ``+1`` when that normal points out of it.
"""

from __future__ import annotations

import io
import itertools
from dataclasses import dataclass, field
from functools import cached_property

import numpy as np
import scipy.sparse as sp

from .errors import ParseError, TopologyError

# local vertex triples of a tet's faces; face k is opposite vertex k
_TET_FACES = np.array([[1, 2, 3], [0, 2, 3], [0, 1, 3], [0, 1, 2]])
_TET_EDGES = np.array([[0, 1], [0, 2], [0, 3], [1, 2], [1, 3], [2, 3]])
_TRI_EDGES = np.array([[0, 1], [1, 2], [0, 2]])
_TRI_EDGE_SIGNS = np.array([1.0, 1.0, -1.0])


def _signed_volume(vertices, tets):
    p = vertices[tets]
    return np.einsum(
        "ij,ij->i", np.cross(p[:, 1] - p[:, 0], p[:, 2] - p[:, 0]), p[:, 3] - p[:, 0]
    ) / 6.0


@dataclass(frozen=True, eq=False)
class Mesh:
    """Immutable tetrahedral mesh.

    ``elements`` rows are vertex ids of positively oriented tets;
    ``boundary`` rows are sorted vertex triples.  ``refinement_order``
    keeps each element's vertex order as given (before orientation
    normalization); :func:`uniform_refine` follows it so that repeated
    refinement produces a bounded number of element shapes.  Derived
    entity tables are computed lazily and cached.
    """

    vertices: np.ndarray
    elements: np.ndarray
    element_attr: np.ndarray
    boundary: np.ndarray = field(default=None)
    boundary_attr: np.ndarray = field(default=None)
    refinement_order: np.ndarray = field(default=None, repr=False)

    def __post_init__(self):
        verts = np.ascontiguousarray(self.vertices, dtype=np.float64).reshape(-1, 3)
        elems = np.ascontiguousarray(self.elements, dtype=np.int64).reshape(-1, 4)
        attr = np.ascontiguousarray(self.element_attr, dtype=np.int64).reshape(-1)
        if attr.shape[0] != elems.shape[0]:
            raise TopologyError("one attribute per element required")
        if np.any(attr < 1):
            raise TopologyError("element attributes must be >= 1")
        if elems.size and (elems.min() < 0 or elems.max() >= verts.shape[0]):
            raise TopologyError("element references a missing vertex")
        if self.refinement_order is None:
            order = elems.copy()
        else:
            order = np.ascontiguousarray(self.refinement_order, dtype=np.int64).reshape(-1, 4)
            if order.shape != elems.shape or np.any(np.sort(order, axis=1) != np.sort(elems, axis=1)):
                raise TopologyError("refinement order must permute the element vertices")
        object.__setattr__(self, "refinement_order", order)
        vol = _signed_volume(verts, elems)
        if np.any(vol == 0.0):
            raise TopologyError("degenerate (zero-volume) element")
        neg = vol < 0
        if np.any(neg):
            elems = elems.copy()
            elems[neg, 2], elems[neg, 3] = elems[neg, 3].copy(), elems[neg, 2].copy()
        object.__setattr__(self, "vertices", verts)
        object.__setattr__(self, "elements", elems)
        object.__setattr__(self, "element_attr", attr)

        derived = np.sort(self.facets[self.boundary_facets], axis=1)
        if self.boundary is None:
            object.__setattr__(self, "boundary", derived)
            object.__setattr__(self, "boundary_attr", np.ones(derived.shape[0], dtype=np.int64))
            return
        bnd = np.sort(np.asarray(self.boundary, dtype=np.int64).reshape(-1, 3), axis=1)
        battr = np.asarray(self.boundary_attr, dtype=np.int64).reshape(-1)
        if battr.shape[0] != bnd.shape[0]:
            raise TopologyError("one attribute per boundary facet required")
        if np.any(battr < 1):
            raise TopologyError("boundary attributes must be >= 1")
        given = {tuple(r) for r in bnd.tolist()}
        if len(given) != bnd.shape[0] or given != {tuple(r) for r in derived.tolist()}:
            raise TopologyError("boundary facets do not match the facets with a single element")
        object.__setattr__(self, "boundary", bnd)
        object.__setattr__(self, "boundary_attr", battr)

    # counts -----------------------------------------------------------
    @property
    def n_vertices(self) -> int:
        return self.vertices.shape[0]

    @property
    def n_edges(self) -> int:
        return self.edges.shape[0]

    @property
    def n_facets(self) -> int:
        return self.facets.shape[0]

    @property
    def n_elements(self) -> int:
        return self.elements.shape[0]

    def euler_characteristic(self) -> int:
        return self.n_vertices - self.n_edges + self.n_facets - self.n_elements

    # derived entities -------------------------------------------------
    @cached_property
    def _facet_data(self):
        faces = np.sort(self.elements[:, _TET_FACES], axis=2).reshape(-1, 3)
        facets, inverse = np.unique(faces, axis=0, return_inverse=True)
        elem_facets = inverse.reshape(-1, 4)
        counts = np.bincount(inverse, minlength=facets.shape[0])
        if np.any(counts > 2):
            raise TopologyError("a facet is shared by more than two elements")
        return facets, elem_facets, counts

    @cached_property
    def facets(self) -> np.ndarray:
        return self._facet_data[0]

    @cached_property
    def element_facets(self) -> np.ndarray:
        """(n_elements, 4) facet ids; column k is the facet opposite vertex k."""
        return self._facet_data[1]

    @cached_property
    def boundary_facets(self) -> np.ndarray:
        """Ids of facets that belong to exactly one element."""
        return np.flatnonzero(self._facet_data[2] == 1)

    @cached_property
    def element_facet_signs(self) -> np.ndarray:
        f = self.facets[self.element_facets]  # (m, 4, 3)
        x = self.vertices
        n = np.cross(x[f[..., 1]] - x[f[..., 0]], x[f[..., 2]] - x[f[..., 0]])
        opposite = x[self.elements]
        out = x[f[..., 0]] - opposite
        return np.where(np.einsum("ijk,ijk->ij", n, out) > 0, 1.0, -1.0)

    @cached_property
    def edges(self) -> np.ndarray:
        e = np.sort(self.elements[:, _TET_EDGES], axis=2).reshape(-1, 2)
        return np.unique(e, axis=0)

    def _edge_ids(self, pairs) -> np.ndarray:
        pairs = np.sort(pairs, axis=-1)
        key = pairs[..., 0] * self.n_vertices + pairs[..., 1]
        table = self.edges[:, 0] * self.n_vertices + self.edges[:, 1]
        return np.searchsorted(table, key)

    @cached_property
    def element_edges(self) -> np.ndarray:
        return self._edge_ids(np.sort(self.elements[:, _TET_EDGES], axis=2))

    @cached_property
    def facet_edges(self) -> np.ndarray:
        return self._edge_ids(self.facets[:, _TRI_EDGES])

    # signed incidence -------------------------------------------------
    @cached_property
    def edge_vertex(self) -> sp.csr_matrix:
        ne = self.n_edges
        rows = np.repeat(np.arange(ne), 2)
        vals = np.tile([-1.0, 1.0], ne)
        return sp.csr_matrix((vals, (rows, self.edges.reshape(-1))), shape=(ne, self.n_vertices))

    @cached_property
    def facet_edge(self) -> sp.csr_matrix:
        nf = self.n_facets
        rows = np.repeat(np.arange(nf), 3)
        vals = np.tile(_TRI_EDGE_SIGNS, nf)
        M = sp.csr_matrix((vals, (rows, self.facet_edges.reshape(-1))), shape=(nf, self.n_edges))
        M.sort_indices()
        return M

    @cached_property
    def element_facet(self) -> sp.csr_matrix:
        m = self.n_elements
        rows = np.repeat(np.arange(m), 4)
        M = sp.csr_matrix(
            (self.element_facet_signs.reshape(-1), (rows, self.element_facets.reshape(-1))),
            shape=(m, self.n_facets),
        )
        M.sort_indices()
        return M

    # geometry -----------------------------------------------------------
    @cached_property
    def volumes(self) -> np.ndarray:
        return _signed_volume(self.vertices, self.elements)

    @cached_property
    def facet_normals(self) -> np.ndarray:
        """Area-weighted normals of the canonically oriented facets."""
        x = self.vertices
        f = self.facets
        return 0.5 * np.cross(x[f[:, 1]] - x[f[:, 0]], x[f[:, 2]] - x[f[:, 0]])

    @cached_property
    def areas(self) -> np.ndarray:
        return np.linalg.norm(self.facet_normals, axis=1)

    @cached_property
    def edge_vectors(self) -> np.ndarray:
        return self.vertices[self.edges[:, 1]] - self.vertices[self.edges[:, 0]]

    @cached_property
    def lengths(self) -> np.ndarray:
        return np.linalg.norm(self.edge_vectors, axis=1)

    @cached_property
    def centroids(self) -> np.ndarray:
        return self.vertices[self.elements].mean(axis=1)

    @cached_property
    def boundary_facet_attr(self) -> np.ndarray:
        """Boundary attribute per facet, 0 for interior facets."""
        out = np.zeros(self.n_facets, dtype=np.int64)
        if self.boundary.shape[0]:
            key = self.facets[:, 0] * self.n_vertices**2 + self.facets[:, 1] * self.n_vertices + self.facets[:, 2]
            bkey = self.boundary[:, 0] * self.n_vertices**2 + self.boundary[:, 1] * self.n_vertices + self.boundary[:, 2]
            idx = np.searchsorted(key, bkey)
            out[idx] = self.boundary_attr
        return out

    def with_element_attr(self, attr) -> "Mesh":
        return Mesh(self.vertices, self.elements, attr, self.boundary, self.boundary_attr, self.refinement_order)


# construction -----------------------------------------------------------


def generate_cube_mesh(n: int) -> Mesh:
    """Unit cube split into ``n**3`` subcubes of six Kuhn tetrahedra each.

    Boundary attributes number the six sides: 1/2 for x = 0/1, 3/4 for
    y = 0/1 and 5/6 for z = 0/1.
    """
    if n < 1:
        raise ValueError("n must be >= 1")
    g = np.linspace(0.0, 1.0, n + 1)
    X, Y, Z = np.meshgrid(g, g, g, indexing="ij")
    verts = np.column_stack([X.ravel(), Y.ravel(), Z.ravel()])

    def vid(i, j, k):
        return (i * (n + 1) + j) * (n + 1) + k

    I, J, K = np.meshgrid(np.arange(n), np.arange(n), np.arange(n), indexing="ij")
    I, J, K = I.ravel(), J.ravel(), K.ravel()
    tets = []
    for perm in itertools.permutations(range(3)):
        corner = np.zeros((I.size, 3), dtype=np.int64)
        path = [vid(I, J, K)]
        for axis in perm:
            corner[:, axis] += 1
            path.append(vid(I + corner[:, 0], J + corner[:, 1], K + corner[:, 2]))
        tets.append(np.column_stack(path))
    elems = np.stack(tets, axis=1).reshape(-1, 4)
    m = Mesh(verts, elems, np.ones(elems.shape[0], dtype=np.int64))
    c = verts[m.boundary].mean(axis=1)
    side = np.zeros(c.shape[0], dtype=np.int64)
    for axis in range(3):
        side[np.isclose(c[:, axis], 0.0)] = 2 * axis + 1
        side[np.isclose(c[:, axis], 1.0)] = 2 * axis + 2
    return Mesh(verts, elems, m.element_attr, m.boundary, side, elems)


def uniform_refine(m: Mesh) -> Mesh:
    """Split every tet into eight (red refinement).

    Children follow the parent's ``refinement_order`` (Bey's ordering,
    interior diagonal between the midpoints of edges 02 and 13), which
    keeps the number of similarity classes bounded under repeated
    refinement.  The eight children of element ``k`` are elements
    ``8k .. 8k+7``.
    """
    nv = m.n_vertices
    order = m.refinement_order
    mid = nv + m._edge_ids(order[:, _TET_EDGES])  # midpoint ids, columns follow _TET_EDGES
    verts = np.vstack([m.vertices, 0.5 * (m.vertices[m.edges[:, 0]] + m.vertices[m.edges[:, 1]])])
    x0, x1, x2, x3 = order.T
    m01, m02, m03, m12, m13, m23 = mid.T
    children = np.stack(
        [
            np.column_stack([x0, m01, m02, m03]),
            np.column_stack([m01, x1, m12, m13]),
            np.column_stack([m02, m12, x2, m23]),
            np.column_stack([m03, m13, m23, x3]),
            np.column_stack([m01, m02, m03, m13]),
            np.column_stack([m01, m02, m12, m13]),
            np.column_stack([m02, m03, m13, m23]),
            np.column_stack([m02, m12, m13, m23]),
        ],
        axis=1,
    ).reshape(-1, 4)
    attr = np.repeat(m.element_attr, 8)

    b = m.boundary
    bm = nv + m._edge_ids(b[:, _TRI_EDGES])  # midpoints of (01, 12, 02)
    b01, b12, b02 = bm.T
    bchildren = np.stack(
        [
            np.column_stack([b[:, 0], b01, b02]),
            np.column_stack([b01, b[:, 1], b12]),
            np.column_stack([b02, b12, b[:, 2]]),
            np.column_stack([b01, b12, b02]),
        ],
        axis=1,
    ).reshape(-1, 3)
    battr = np.repeat(m.boundary_attr, 4)
    return Mesh(verts, children, attr, np.sort(bchildren, axis=1), battr, children)


def assign_attribute_by_region(m: Mesh, predicate, attr: int) -> Mesh:
    """Retag elements whose centroid satisfies ``predicate``.

    ``predicate`` receives an ``(n, 3)`` array of centroids and returns a
    boolean array (a plain bool broadcasts).
    """
    if attr < 1:
        raise ValueError("attributes must be >= 1")
    mask = np.broadcast_to(np.asarray(predicate(m.centroids), dtype=bool), (m.n_elements,))
    new = m.element_attr.copy()
    new[mask] = attr
    return m.with_element_attr(new)


def inner_box(lo: float = 0.25, hi: float = 0.75):
    """Predicate selecting centroids inside the box ``[lo, hi]^3``."""

    def pred(c):
        return np.all((c >= lo) & (c <= hi), axis=1)

    return pred


# file format --------------------------------------------------------------


def _tokens(text):
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if line:
            yield lineno, line.split()


def parse_mesh(data) -> Mesh:
    """Parse the ``amge-mesh v1`` text format."""
    if isinstance(data, bytes):
        data = data.decode("utf-8")
    lines = _tokens(data)

    def expect(keyword):
        try:
            lineno, tok = next(lines)
        except StopIteration:
            raise ParseError(f"unexpected end of input, expected {keyword!r}") from None
        if tok[0] != keyword:
            raise ParseError(f"expected {keyword!r}, found {tok[0]!r}", lineno)
        return lineno, tok

    def rows(count, width, conv, what):
        out = []
        for _ in range(count):
            try:
                lineno, tok = next(lines)
            except StopIteration:
                raise ParseError(f"unexpected end of input in {what} block") from None
            if len(tok) != width:
                raise ParseError(f"{what} line needs {width} fields, found {len(tok)}", lineno)
            try:
                out.append([conv(t) for t in tok])
            except ValueError:
                raise ParseError(f"malformed {what} line", lineno) from None
        return out

    def header_count(keyword):
        lineno, tok = expect(keyword)
        if len(tok) != 2:
            raise ParseError(f"{keyword} line needs a count", lineno)
        try:
            return int(tok[1])
        except ValueError:
            raise ParseError(f"bad count {tok[1]!r}", lineno) from None

    try:
        lineno, tok = next(lines)
    except StopIteration:
        raise ParseError("empty input") from None
    if tok != ["amge-mesh", "v1"]:
        raise ParseError("missing 'amge-mesh v1' header", lineno)
    lineno, tok = expect("dim")
    if tok != ["dim", "3"]:
        raise ParseError("only 'dim 3' is supported", lineno)
    verts = rows(header_count("vertices"), 3, float, "vertex")
    elems = rows(header_count("elements"), 5, int, "element")
    bnd = rows(header_count("boundary"), 4, int, "boundary")
    for lineno, tok in lines:
        raise ParseError(f"trailing content {tok[0]!r}", lineno)

    elems = np.array(elems, dtype=np.int64).reshape(-1, 5)
    bnd = np.array(bnd, dtype=np.int64).reshape(-1, 4)
    return Mesh(
        np.array(verts, dtype=np.float64).reshape(-1, 3),
        elems[:, 1:],
        elems[:, 0],
        bnd[:, 1:],
        bnd[:, 0],
    )


def format_mesh(m: Mesh) -> str:
    buf = io.StringIO()
    buf.write("amge-mesh v1\ndim 3\n")
    buf.write(f"vertices {m.n_vertices}\n")
    for x in m.vertices:
        buf.write(" ".join(repr(float(c)) for c in x) + "\n")
    buf.write(f"elements {m.n_elements}\n")
    for a, e in zip(m.element_attr, m.elements):
        buf.write(f"{a} {e[0]} {e[1]} {e[2]} {e[3]}\n")
    buf.write(f"boundary {m.boundary.shape[0]}\n")
    for a, f in zip(m.boundary_attr, m.boundary):
        buf.write(f"{a} {f[0]} {f[1]} {f[2]}\n")
    return buf.getvalue()


def read_mesh(path) -> Mesh:
    with open(path, "rb") as fh:
        return parse_mesh(fh.read())


def write_mesh(path, m: Mesh) -> None:
    with open(path, "w") as fh:
        fh.write(format_mesh(m))
