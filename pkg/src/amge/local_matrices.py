"""Closed-form local mass matrices of lowest-order Whitney forms on simplices.

All routines are vectorized over a batch of simplices given as an array of
vertex coordinates with shape ``(n, k+1, 3)``; a simplex of dimension ``k``
may be embedded in 3D (edges and triangles of a tet mesh).
"""

from __future__ import annotations

from math import factorial

import numpy as np


def barycentric_gradients(P: np.ndarray):
    """Gradients of the barycentric coordinates and the measure of each simplex.

    Returns ``(G, meas)`` with ``G[s, j]`` the (tangential) gradient of
    ``lambda_j`` on simplex ``s``.
    """
    P = np.asarray(P, dtype=np.float64)
    k = P.shape[1] - 1
    J = P[:, 1:, :] - P[:, :1, :]  # (n, k, 3), rows are edge vectors from vertex 0
    JJt = np.einsum("nij,nkj->nik", J, J)
    G1 = np.linalg.solve(JJt, J)  # (n, k, 3): grad lambda_1..lambda_k
    G0 = -G1.sum(axis=1, keepdims=True)
    meas = np.sqrt(np.abs(np.linalg.det(JJt))) / factorial(k)
    return np.concatenate([G0, G1], axis=1), meas


def lagrange_mass(P: np.ndarray) -> np.ndarray:
    """P1 mass ``int lambda_i lambda_j = |S| (1 + delta_ij) / ((k+1)(k+2))``."""
    _, meas = barycentric_gradients(P)
    k = P.shape[1] - 1
    base = (np.ones((k + 1, k + 1)) + np.eye(k + 1)) / ((k + 1) * (k + 2))
    return meas[:, None, None] * base[None]


def whitney_edge_mass(P: np.ndarray, edges: np.ndarray, signs=None) -> np.ndarray:
    """Mass of ``w_ab = lambda_a grad lambda_b - lambda_b grad lambda_a``.

    ``edges`` lists local vertex pairs ``(a, b)``; ``signs`` (shape
    ``(n, n_edges)``) flips basis functions whose global orientation is
    ``b -> a``.
    """
    G, _ = barycentric_gradients(P)
    L = lagrange_mass(P)
    gg = np.einsum("nid,njd->nij", G, G)
    a, b = edges[:, 0], edges[:, 1]
    A, C = np.meshgrid(a, a, indexing="ij")
    B, D = np.meshgrid(b, b, indexing="ij")
    M = (
        L[:, A, C] * gg[:, B, D]
        - L[:, A, D] * gg[:, B, C]
        - L[:, B, C] * gg[:, A, D]
        + L[:, B, D] * gg[:, A, C]
    )
    if signs is not None:
        M = M * signs[:, :, None] * signs[:, None, :]
    return M


def rt_mass(P: np.ndarray, signs: np.ndarray) -> np.ndarray:
    """Mass of unit-flux Raviart-Thomas functions on tets.

    The function for the facet opposite local vertex ``m`` is
    ``s_m (x - p_m) / (3 |K|)``.
    """
    L = lagrange_mass(P)
    vol = L.sum(axis=(1, 2))
    xx = np.einsum("nij,nid,njd->n", L, P, P)  # int x.x
    xbar = np.einsum("nij,nid->nd", L, P)  # int x
    pp = np.einsum("nid,njd->nij", P, P)
    px = np.einsum("nid,nd->ni", P, xbar)
    M = xx[:, None, None] - px[:, :, None] - px[:, None, :] + vol[:, None, None] * pp
    M = M / (9.0 * vol[:, None, None] ** 2)
    return M * signs[:, :, None] * signs[:, None, :]


# quadrature ---------------------------------------------------------------

def gauss_line(order: int):
    """Points in [0, 1] and weights summing to 1."""
    x, w = np.polynomial.legendre.leggauss(order)
    return 0.5 * (x + 1.0), 0.5 * w


def triangle_rule(order: int):
    """Collapsed (Duffy) Gauss rule on the reference triangle.

    Returns barycentric points ``(q, 3)`` and weights summing to 1.
    """
    t, wt = gauss_line(order)
    u, wu = gauss_line(order)
    U, T = np.meshgrid(u, t, indexing="ij")
    l1 = U
    l2 = (1.0 - U) * T
    W = (wu[:, None] * wt[None, :]) * (1.0 - U) * 2.0
    lam = np.stack([1.0 - l1 - l2, l1, l2], axis=-1).reshape(-1, 3)
    return lam, W.reshape(-1)


def tet_rule(order: int):
    """Collapsed Gauss rule on the reference tet (barycentric points, weights sum 1)."""
    g, wg = gauss_line(order)
    A, B, C = np.meshgrid(g, g, g, indexing="ij")
    x = A
    y = (1.0 - A) * B
    z = (1.0 - A) * (1.0 - B) * C
    W = wg[:, None, None] * wg[None, :, None] * wg[None, None, :]
    W = W * (1.0 - A) ** 2 * (1.0 - B) * 6.0
    lam = np.stack([1.0 - x - y - z, x, y, z], axis=-1).reshape(-1, 4)
    return lam, W.reshape(-1)
