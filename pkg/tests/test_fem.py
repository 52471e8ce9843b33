import numpy as np
import pytest

from amge.errors import UnknownAttribute
from amge.fem import (
    Coefficient,
    assemble_form,
    assemble_mass,
    build_fine_sequence,
    build_pi_hat,
    build_targets,
    interpolate,
)
from amge.mesh import assign_attribute_by_region, generate_cube_mesh, inner_box

from conftest import reference_tet

X = lambda P: P[:, 0]  # noqa: E731


@pytest.fixture(scope="module")
def cube():
    m = generate_cube_mesh(2)
    return m, build_fine_sequence(m)


def test_dims_match_entity_counts(cube):
    m, L = cube
    assert L.d == (m.n_vertices, m.n_edges, m.n_facets, m.n_elements)


def test_sequence_property(cube):
    _, L = cube
    assert abs(L.D[2] @ L.D[1]).max() == 0
    assert abs(L.D[3] @ L.D[2]).max() == 0


def test_reference_tet_masses():
    m = reference_tet()
    L = build_fine_sequence(m)
    np.testing.assert_allclose(assemble_mass(L, m, 4).toarray(), [[1 / 6]], rtol=1e-14)
    M1 = assemble_mass(L, m, 1).toarray()
    expected = (np.ones((4, 4)) + np.eye(4)) / 120
    np.testing.assert_allclose(M1, expected, rtol=1e-13)
    np.testing.assert_allclose(assemble_mass(L, m, 2, 2.0).toarray(), 2 * assemble_mass(L, m, 2).toarray())


def test_masses_are_spd(cube):
    m, L = cube
    for i in (1, 2, 3, 4):
        M = assemble_mass(L, m, i).toarray()
        np.testing.assert_allclose(M, M.T, atol=1e-16)
        assert np.linalg.eigvalsh(M).min() > 0


def test_coefficient_validation():
    with pytest.raises(ValueError):
        Coefficient({1: (0.0, 1.0)})
    with pytest.raises(UnknownAttribute):
        Coefficient.uniform(attrs=(1,)).per_element(np.array([1, 2]), "alpha")


def test_single_tet_forms_are_spd():
    m = reference_tet()
    L = build_fine_sequence(m)
    for i in (2, 3):
        A = assemble_form(L, m, i, Coefficient.uniform(), essential=False).toarray()
        np.testing.assert_allclose(A, A.T, atol=1e-15)
        assert np.linalg.eigvalsh(A).min() > 0


def test_div_form_energy_of_constant_field(cube):
    m, L = cube
    c = Coefficient.uniform(alpha=3.0, beta=0.5)
    A = assemble_form(L, m, 3, c, essential=False)
    u = interpolate(L, m, 3, lambda P: np.tile([1.0, 0, 0], (len(P), 1)))
    assert u @ A @ u == pytest.approx(0.5 * 1.0, rel=1e-12)


def test_essential_rows_are_identity(cube):
    m, L = cube
    A = assemble_form(L, m, 2, Coefficient.uniform())
    b = np.flatnonzero(L.boundary[2])
    assert b.size > 0
    np.testing.assert_array_equal(A[b].toarray(), np.eye(L.dims[2])[b])


def test_jump_coefficient_form_scales_by_region():
    m = assign_attribute_by_region(generate_cube_mesh(2), inner_box(0.0, 0.5), 2)
    L = build_fine_sequence(m)
    u = interpolate(L, m, 3, lambda P: np.tile([0.0, 0, 1.0], (len(P), 1)))
    A = assemble_form(L, m, 3, Coefficient({1: (1.0, 1.0), 2: (1.0, 9.0)}), essential=False)
    # |box| = 1/8, so beta integrates to 7/8 + 9/8
    assert u @ A @ u == pytest.approx(2.0, rel=1e-12)


def test_interpolation_examples(cube):
    m, L = cube
    np.testing.assert_array_equal(interpolate(L, m, 1, X), m.vertices[:, 0])
    e = interpolate(L, m, 2, lambda P: np.tile([1.0, 0, 0], (len(P), 1)))
    np.testing.assert_allclose(e, L.D[1] @ interpolate(L, m, 1, X), atol=1e-15)
    np.testing.assert_allclose(interpolate(L, m, 4, lambda P: np.ones(len(P))), 1.0)


def test_fine_commutativity_for_linear_fields(cube):
    m, L = cube
    u = lambda P: np.stack([P[:, 1], P[:, 2] * P[:, 0], P[:, 0] + 2 * P[:, 1]], axis=1)  # noqa: E731
    curl = lambda P: np.stack([2 - P[:, 0], -np.ones(len(P)), P[:, 2] - 1], axis=1)  # noqa: E731
    np.testing.assert_allclose(L.D[2] @ interpolate(L, m, 2, u), interpolate(L, m, 3, curl), atol=1e-14)
    div = lambda P: np.ones(len(P)) * 0 + P[:, 0]  # noqa: E731
    w = lambda P: np.stack([np.zeros(len(P)), np.zeros(len(P)), P[:, 0] * P[:, 2]], axis=1)  # noqa: E731
    np.testing.assert_allclose(L.D[3] @ interpolate(L, m, 3, w), interpolate(L, m, 4, div), atol=1e-14)


def test_target_counts(cube):
    m, L = cube
    t0 = build_targets(L, m, 0)
    assert t0[1].shape[1] == 0
    assert t0[3].shape[1] == 3
    np.testing.assert_allclose(t0[4], np.ones((L.dims[4], 1)), rtol=1e-15)
    t1 = build_targets(L, m, 1)
    assert t1[4].shape[1] == 4 and np.linalg.matrix_rank(t1[4]) == 4
    assert t1[2].shape[1] == 12 and np.linalg.matrix_rank(t1[2]) == 12


def test_pi_hat_reproduces_constants(cube):
    m, L = cube
    nv = m.n_vertices
    const = np.concatenate([np.full(nv, c) for c in (1.0, -2.0, 0.5)])
    field = lambda P: np.tile([1.0, -2.0, 0.5], (len(P), 1))  # noqa: E731
    np.testing.assert_allclose(build_pi_hat(L, m, 3) @ const, interpolate(L, m, 3, field), atol=1e-15)
    ex = np.concatenate([np.ones(nv), np.zeros(2 * nv)])
    np.testing.assert_allclose(build_pi_hat(L, m, 2) @ ex, m.edge_vectors[:, 0], atol=1e-15)


def test_pi_hat_exact_for_linear_h1_fields(cube):
    m, L = cube
    x, y, z = m.vertices.T
    v = np.concatenate([y, z, x])
    field = lambda P: np.stack([P[:, 1], P[:, 2], P[:, 0]], axis=1)  # noqa: E731
    for i in (2, 3):
        np.testing.assert_allclose(L.pi_hat[i] @ v, interpolate(L, m, i, field), atol=1e-14)
