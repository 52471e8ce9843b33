"""Finest-level lowest-order de Rham sequence on a tetrahedral mesh.

Spaces are numbered 1..4: continuous P1 (vertex values), Nedelec
(tangential edge integrals), Raviart-Thomas (facet fluxes) and piecewise
constants (element averages).  Space ``i`` has one dof per mesh entity of
dimension ``i - 1``.

Basis conventions
-----------------
* Nedelec: ``w_e = lambda_a grad lambda_b - lambda_b grad lambda_a`` for an
  edge ``a < b``; unit tangential integral.
* Raviart-Thomas: inside element ``K`` the function of the facet opposite
  vertex ``m`` is ``s (x - p_m) / (3|K|)``, ``s = +1`` when the facet's
  global normal points out of ``K``; unit flux.
* L2: the element indicator, so the dof is the element average and the
  local mass is ``|K|``.  Consequently ``D_3 = diag(1/|K|) B`` with ``B``
  the signed element-facet incidence: the divergence of a unit-flux field
  on ``K`` is ``1/|K|``.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from itertools import product

import numpy as np
import scipy.sparse as sp

from . import core_la as la
from .errors import UnknownAttribute
from .local_matrices import (
    gauss_line,
    lagrange_mass,
    rt_mass,
    tet_rule,
    triangle_rule,
    whitney_edge_mass,
)
from .mesh import Mesh, _TET_EDGES, _TRI_EDGES
from .topology import Topology

SPACES = (1, 2, 3, 4)


@dataclass(frozen=True)
class Coefficient:
    """Piecewise-constant ``(alpha, beta)`` per element attribute."""

    values: dict

    def __post_init__(self):
        for attr, (a, b) in self.values.items():
            if not (a > 0 and b > 0):
                raise ValueError(f"attribute {attr}: alpha and beta must be positive, got ({a}, {b})")

    @classmethod
    def uniform(cls, alpha: float = 1.0, beta: float = 1.0, attrs=(1,)) -> "Coefficient":
        return cls({int(a): (float(alpha), float(beta)) for a in attrs})

    def per_element(self, element_attr, which: str) -> np.ndarray:
        k = {"alpha": 0, "beta": 1}[which]
        out = np.empty(len(element_attr))
        for attr in np.unique(element_attr):
            if int(attr) not in self.values:
                raise UnknownAttribute(int(attr))
            out[element_attr == attr] = self.values[int(attr)][k]
        return out


@dataclass(eq=False)
class SequenceLevel:
    """One level of a discrete de Rham sequence.

    Space ``i`` dofs are attached to entities of the level's topology:
    ``dof_dim[i]``/``dof_entity[i]`` give the dimension and id of the entity
    that owns each dof.  ``entity_dofs[(k, i)][x]`` lists the space-``i`` dofs
    on the closure of entity ``x`` of dimension ``k`` and
    ``entity_mass[(k, i)][x]`` is the trace mass matrix on those dofs.
    ``pv_dof[i][x]`` is the PV dof of entity ``x`` of dimension ``i-1``;
    ``pv_weight[i][x]`` converts it to an integral over ``x``.
    """

    level: int
    topology: Topology
    dims: dict
    D: dict
    dof_dim: dict
    dof_entity: dict
    boundary: dict
    entity_dofs: dict
    entity_mass: dict
    pv_dof: dict
    pv_weight: dict
    targets: dict = field(default_factory=dict)
    pi_hat: dict = field(default_factory=dict)

    @property
    def d(self):
        return tuple(self.dims[i] for i in SPACES)


# local matrices -------------------------------------------------------------

def _tet_edge_signs(m: Mesh) -> np.ndarray:
    e = m.elements
    return np.where(e[:, _TET_EDGES[:, 0]] < e[:, _TET_EDGES[:, 1]], 1.0, -1.0)


def element_matrices(m: Mesh, space: int) -> np.ndarray:
    """Unweighted local mass matrices of all elements, ``(n_elements, n, n)``."""
    P = m.vertices[m.elements]
    if space == 1:
        return lagrange_mass(P)
    if space == 2:
        return whitney_edge_mass(P, _TET_EDGES, _tet_edge_signs(m))
    if space == 3:
        return rt_mass(P, m.element_facet_signs)
    if space == 4:
        return m.volumes[:, None, None].copy()
    raise ValueError(f"space must be in 1..4, got {space}")


def element_dofs(m: Mesh, space: int) -> np.ndarray:
    return {
        1: m.elements,
        2: m.element_edges,
        3: m.element_facets,
        4: np.arange(m.n_elements)[:, None],
    }[space]


def _entity_tables(m: Mesh):
    """Closure dofs and trace masses of every fine entity, keyed ``(k, i)``."""
    dofs, mass = {}, {}
    nv, ne, nf = m.n_vertices, m.n_edges, m.n_facets
    dofs[(0, 1)] = np.arange(nv)[:, None]
    mass[(0, 1)] = np.ones((nv, 1, 1))
    Pe = m.vertices[m.edges]
    dofs[(1, 1)] = m.edges
    mass[(1, 1)] = lagrange_mass(Pe)
    dofs[(1, 2)] = np.arange(ne)[:, None]
    mass[(1, 2)] = (1.0 / m.lengths)[:, None, None]
    Pf = m.vertices[m.facets]
    dofs[(2, 1)] = m.facets
    mass[(2, 1)] = lagrange_mass(Pf)
    dofs[(2, 2)] = m.facet_edges
    mass[(2, 2)] = whitney_edge_mass(Pf, _TRI_EDGES)
    dofs[(2, 3)] = np.arange(nf)[:, None]
    mass[(2, 3)] = (1.0 / m.areas)[:, None, None]
    for i in SPACES:
        dofs[(3, i)] = element_dofs(m, i)
        mass[(3, i)] = element_matrices(m, i)
    return dofs, mass


# assembly -------------------------------------------------------------------

def _scatter(local: np.ndarray, dofs: np.ndarray, n: int) -> sp.csr_matrix:
    k = dofs.shape[1]
    rows = np.repeat(dofs, k, axis=1).reshape(-1)
    cols = np.tile(dofs, (1, k)).reshape(-1)
    return la.from_triplets(rows, cols, local.reshape(-1), (n, n))


def _weights(m: Mesh, weight) -> np.ndarray:
    if np.isscalar(weight):
        if weight <= 0:
            raise ValueError("mass weight must be positive")
        return np.full(m.n_elements, float(weight))
    if isinstance(weight, dict):
        out = np.empty(m.n_elements)
        for attr in np.unique(m.element_attr):
            if int(attr) not in weight:
                raise UnknownAttribute(int(attr))
            out[m.element_attr == attr] = weight[int(attr)]
        if np.any(out <= 0):
            raise ValueError("mass weight must be positive")
        return out
    w = np.asarray(weight, dtype=np.float64)
    if w.shape != (m.n_elements,):
        raise ValueError("per-element weight has wrong length")
    return w


def assemble_mass(level: SequenceLevel, m: Mesh, space: int, weight=1.0) -> sp.csr_matrix:
    """Mass matrix of space ``space`` with a positive piecewise-constant weight.

    ``weight`` is a scalar, a ``{attribute: value}`` mapping or a
    per-element array.
    """
    w = _weights(m, weight)
    local = level.entity_mass[(3, space)] * w[:, None, None]
    M = _scatter(local, element_dofs(m, space), level.dims[space])
    return la.csr(0.5 * (M + M.T))


def essential_dofs(level: SequenceLevel, i: int) -> np.ndarray:
    return np.flatnonzero(level.boundary[i])


def eliminate(A: sp.csr_matrix, dofs: np.ndarray) -> sp.csr_matrix:
    """Replace rows and columns of ``dofs`` by those of the identity."""
    keep = np.ones(A.shape[0])
    keep[dofs] = 0.0
    K = sp.diags(keep)
    out = K @ A @ K + sp.diags(1.0 - keep)
    return la.csr(out)


def assemble_form(
    level: SequenceLevel, m: Mesh, i: int, coeff: Coefficient, essential: bool = True
) -> sp.csr_matrix:
    """``A = D_i^T M_{i+1}(alpha) D_i + M_i(beta)`` for ``i`` in {1, 2, 3}."""
    if i not in (1, 2, 3):
        raise ValueError("form index must be 1, 2 or 3")
    alpha = coeff.per_element(m.element_attr, "alpha")
    beta = coeff.per_element(m.element_attr, "beta")
    D = level.D[i]
    A = la.triple_product(la.transpose(D), assemble_mass(level, m, i + 1, alpha), D)
    A = la.csr(A + assemble_mass(level, m, i, beta))
    A = la.csr(0.5 * (A + A.T))
    if essential:
        A = eliminate(A, essential_dofs(level, i))
    return A


def assemble_rhs(level: SequenceLevel, m: Mesh, i: int, f, essential: bool = True) -> np.ndarray:
    """Load vector ``M_i interpolate(f)`` with essential entries zeroed."""
    b = assemble_mass(level, m, i) @ interpolate(level, m, i, f)
    if essential:
        b[level.boundary[i]] = 0.0
    return b


# interpolation ----------------------------------------------------------------

def _eval(f, X: np.ndarray, vector: bool) -> np.ndarray:
    """Evaluate ``f`` at points ``X`` (..., 3); accepts vectorized or pointwise callables."""
    flat = X.reshape(-1, 3)
    try:
        v = np.asarray(f(flat), dtype=np.float64)
        expected = (flat.shape[0], 3) if vector else (flat.shape[0],)
        if v.shape != expected:
            raise ValueError
    except Exception:
        v = np.array([f(x) for x in flat], dtype=np.float64)
    shape = X.shape if vector else X.shape[:-1]
    return v.reshape(shape)


def interpolate(level: SequenceLevel, m: Mesh, i: int, f, order: int = 6) -> np.ndarray:
    """Canonical dof values of ``f`` in space ``i``.

    ``f`` maps points ``(n, 3)`` to values ``(n,)`` for spaces 1 and 4 or
    to vectors ``(n, 3)`` for spaces 2 and 3.  Edge, facet and element
    moments use Gauss rules exact for polynomials of degree ``2*order-1``.
    """
    x = m.vertices
    if i == 1:
        return _eval(f, x, vector=False)
    if i == 2:
        t, w = gauss_line(order)
        a, b = x[m.edges[:, 0]], x[m.edges[:, 1]]
        pts = a[:, None, :] + t[None, :, None] * (b - a)[:, None, :]
        vals = _eval(f, pts, vector=True)
        return np.einsum("q,nqd,nd->n", w, vals, b - a)
    if i == 3:
        lam, w = triangle_rule(order)
        pts = np.einsum("qj,njd->nqd", lam, x[m.facets])
        vals = _eval(f, pts, vector=True)
        return np.einsum("q,nqd,nd->n", w, vals, m.facet_normals)
    if i == 4:
        lam, w = tet_rule(order)
        pts = np.einsum("qj,njd->nqd", lam, x[m.elements])
        return _eval(f, pts, vector=False) @ w
    raise ValueError(f"space must be in 1..4, got {i}")


def monomial_exponents(p: int):
    """Exponent triples of all monomials of total degree ``<= p``."""
    return [e for d in range(p + 1) for e in product(range(d + 1), repeat=3) if sum(e) == d]


def _monomial(e):
    def f(X):
        return X[:, 0] ** e[0] * X[:, 1] ** e[1] * X[:, 2] ** e[2]

    return f


def _vector_monomial(e, comp):
    def f(X):
        out = np.zeros_like(X)
        out[:, comp] = X[:, 0] ** e[0] * X[:, 1] ** e[1] * X[:, 2] ** e[2]
        return out

    return f


def build_targets(level: SequenceLevel, m: Mesh, p: int = 1) -> dict:
    """Interpolated polynomial targets per space (columns are targets)."""
    if p < 0:
        raise ValueError("target order must be >= 0")
    exps = monomial_exponents(p)
    out = {1: np.zeros((level.dims[1], 0))}
    for i in (2, 3):
        cols = [interpolate(level, m, i, _vector_monomial(e, c)) for c in range(3) for e in exps]
        out[i] = np.column_stack(cols)
    out[4] = np.column_stack([interpolate(level, m, 4, _monomial(e)) for e in exps])
    return out


def build_pi_hat(level: SequenceLevel, m: Mesh, i: int) -> sp.csr_matrix:
    """Interpolation from nodal vector P1 (component-blocked, ``c*d_1 + v``) to space ``i``."""
    nv = m.n_vertices
    if i == 2:
        ent, vec = m.edges, m.edge_vectors
    elif i == 3:
        ent, vec = m.facets, m.facet_normals
    else:
        raise ValueError("pi_hat is defined for spaces 2 and 3")
    k = ent.shape[1]
    n = ent.shape[0]
    rows = np.repeat(np.arange(n), 3 * k)
    cols = (np.arange(3)[None, :, None] * nv + ent[:, None, :]).reshape(-1)
    vals = np.repeat(vec / k, k, axis=1).reshape(-1)  # components outer, vertices inner
    return la.from_triplets(rows, cols, vals, (n, 3 * nv))


# construction ---------------------------------------------------------------

def build_fine_sequence(m: Mesh, target_order: int = 1) -> SequenceLevel:
    """Fine-level sequence with derivatives, entity masses, targets and Pi-hat."""
    topo = Topology.from_mesh(m)
    counts = topo.counts
    D3 = la.csr(sp.diags(1.0 / m.volumes) @ m.element_facet)
    D = {1: la.csr(m.edge_vertex), 2: la.csr(m.facet_edge), 3: D3}
    dims = {i: counts[i - 1] for i in SPACES}
    bnd = topo.boundary_entities
    dofs, mass = _entity_tables(m)
    level = SequenceLevel(
        level=1,
        topology=topo,
        dims=dims,
        D=D,
        dof_dim={i: np.full(dims[i], i - 1) for i in SPACES},
        dof_entity={i: np.arange(dims[i]) for i in SPACES},
        boundary={i: bnd[i - 1].copy() for i in SPACES},
        entity_dofs=dofs,
        entity_mass=mass,
        pv_dof={i: np.arange(dims[i]) for i in SPACES},
        pv_weight={1: np.ones(dims[1]), 2: np.ones(dims[2]), 3: np.ones(dims[3]), 4: m.volumes.copy()},
    )
    level.targets = build_targets(level, m, target_order)
    level.pi_hat = {2: build_pi_hat(level, m, 2), 3: build_pi_hat(level, m, 3)}
    return level
