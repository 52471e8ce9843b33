import numpy as np
import pytest

from amge.errors import ParseError, TopologyError
from amge.mesh import (
    assign_attribute_by_region,
    format_mesh,
    generate_cube_mesh,
    inner_box,
    parse_mesh,
    read_mesh,
    uniform_refine,
    write_mesh,
)

from conftest import reference_tet, two_tets


def counts(m):
    return m.n_vertices, m.n_edges, m.n_facets, m.n_elements


def test_reference_tet_counts_and_euler():
    m = reference_tet()
    assert counts(m) == (4, 6, 4, 1)
    assert m.euler_characteristic() == 1
    assert m.volumes[0] == pytest.approx(1 / 6)


def test_two_tets_share_one_facet():
    m = two_tets()
    assert m.n_facets == 7
    assert m.n_facets - m.boundary_facets.size == 1


def test_cube_mesh_counts():
    m1 = generate_cube_mesh(1)
    assert m1.n_elements == 6 and m1.n_vertices == 8
    m2 = generate_cube_mesh(2)
    assert m2.n_elements == 48
    assert m2.euler_characteristic() == 1
    assert m2.volumes.sum() == pytest.approx(1.0)
    assert np.all(m2.volumes > 0)


def test_incidence_nilpotent():
    m = generate_cube_mesh(2)
    assert abs(m.facet_edge @ m.edge_vertex).max() == 0


def test_boundary_attributes_per_side():
    m = generate_cube_mesh(2)
    # 6 sides x 2 x 2 squares x 2 triangles
    assert m.boundary.shape[0] == 48
    assert sorted(np.unique(m.boundary_attr)) == [1, 2, 3, 4, 5, 6]
    assert np.all(np.bincount(m.boundary_attr)[1:] == 8)


def test_uniform_refine_multiplies_elements_by_eight():
    m = uniform_refine(generate_cube_mesh(1))
    assert m.n_elements == 48
    assert m.euler_characteristic() == 1
    assert m.volumes.sum() == pytest.approx(1.0)
    assert m.boundary.shape[0] == 4 * generate_cube_mesh(1).boundary.shape[0]


def test_refinement_children_are_consecutive():
    coarse = generate_cube_mesh(1)
    fine = uniform_refine(coarse)
    parent = np.arange(fine.n_elements) // 8
    np.testing.assert_allclose(np.bincount(parent, weights=fine.volumes), coarse.volumes, rtol=1e-14)
    np.testing.assert_allclose(
        fine.centroids.reshape(-1, 8, 3).mean(axis=1), coarse.centroids, atol=1e-14
    )


def test_repeated_refinement_keeps_element_shapes_bounded():
    m = generate_cube_mesh(1)
    for _ in range(3):
        m = uniform_refine(m)
    # the ratio of longest edge to inradius is scale invariant
    L = m.lengths[m.element_edges].max(axis=1)
    r = 3 * m.volumes / m.areas[m.element_facets].sum(axis=1)
    ratio = L / r
    assert ratio.max() / ratio.min() < 2.0


def test_refine_keeps_attributes():
    m = assign_attribute_by_region(generate_cube_mesh(2), inner_box(0.0, 0.5), 3)
    f = uniform_refine(m)
    np.testing.assert_array_equal(f.element_attr, np.repeat(m.element_attr, 8))


def test_assign_attribute_examples():
    m = generate_cube_mesh(4)
    same = assign_attribute_by_region(m, lambda c: False, 2)
    np.testing.assert_array_equal(same.element_attr, m.element_attr)
    box = assign_attribute_by_region(m, inner_box(), 2)
    assert np.count_nonzero(box.element_attr == 2) == 48
    allm = assign_attribute_by_region(m, lambda c: True, 5)
    assert np.all(allm.element_attr == 5)


def test_negative_orientation_is_normalized():
    V = np.array([[0.0, 0, 0], [1, 0, 0], [0, 1, 0], [0, 0, 1]])
    m = type(reference_tet())(V, np.array([[0, 2, 1, 3]]), [1])
    assert m.volumes[0] == pytest.approx(1 / 6)


def test_degenerate_element_rejected():
    V = np.array([[0.0, 0, 0], [1, 0, 0], [2, 0, 0], [0, 0, 1]])
    with pytest.raises(TopologyError):
        type(reference_tet())(V, np.array([[0, 1, 2, 3]]), [1])


def test_format_parse_round_trip(tmp_path):
    m = assign_attribute_by_region(generate_cube_mesh(2), inner_box(), 2)
    text = format_mesh(m)
    assert text.startswith("amge-mesh v1\n")
    back = parse_mesh(text.encode())
    np.testing.assert_array_equal(back.vertices, m.vertices)
    np.testing.assert_array_equal(back.elements, m.elements)
    np.testing.assert_array_equal(back.element_attr, m.element_attr)
    np.testing.assert_array_equal(back.boundary_attr, m.boundary_attr)
    path = tmp_path / "m.mesh"
    write_mesh(path, m)
    assert counts(read_mesh(path)) == counts(m)


@pytest.mark.parametrize(
    "text, line",
    [
        ("", None),
        ("mesh v2\n", 1),
        ("amge-mesh v1\ndim 2\n", 2),
        ("amge-mesh v1\ndim 3\nvertices 1\n0 0\n", 4),
        ("amge-mesh v1\ndim 3\nvertices 1\n0 0 x\n", 4),
    ],
)
def test_parse_errors(text, line):
    with pytest.raises(ParseError) as err:
        parse_mesh(text)
    assert err.value.line == line


def test_parse_rejects_wrong_boundary():
    text = format_mesh(reference_tet())
    lines = text.splitlines()
    cut = lines.index("boundary 4")
    bad = "\n".join(lines[: cut] + ["boundary 3"] + lines[cut + 1 : cut + 4]) + "\n"
    with pytest.raises(TopologyError):
        parse_mesh(bad)
