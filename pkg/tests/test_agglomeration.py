import numpy as np
import pytest

from amge.agglomeration import (
    block_partition,
    coarsen_recursive,
    coarsen_topology,
    dump_topology,
    greedy_ball_partition,
    topology_check_and_repair,
    trivial_partition,
)
from amge.mesh import generate_cube_mesh, uniform_refine
from amge.topology import Topology

from conftest import reference_tet, two_tets


def closure_euler(m, elems):
    """Euler characteristic of the closure of a set of fine elements."""
    V = np.unique(m.elements[elems])
    E = np.unique(m.element_edges[elems])
    F = np.unique(m.element_facets[elems])
    return V.size - E.size + F.size - len(elems)


def assert_balls(m, agg):
    for X in range(agg.counts[3]):
        assert closure_euler(m, agg.entities[3][X]) == 1


def test_dual_graph_examples():
    assert Topology.from_mesh(reference_tet()).dual_graph().shape == (1, 1)
    assert Topology.from_mesh(reference_tet()).dual_graph().nnz == 0
    assert Topology.from_mesh(two_tets()).dual_graph().nnz == 2


def test_trivial_partition_is_identity():
    m = generate_cube_mesh(2)
    fine = Topology.from_mesh(m)
    agg = coarsen_topology(fine, trivial_partition(48))
    assert agg.counts == fine.counts
    for k in range(4):
        assert all(len(e) == 1 for e in agg.entities[k])
        assert all(np.all(s == 1) for s in agg.signs[k])
    assert agg.coarse.euler_characteristic() == 1


def test_two_halves_share_one_coarse_facet():
    m = generate_cube_mesh(2)
    parts = (m.centroids[:, 0] > 0.5).astype(int)
    agg = coarsen_topology(Topology.from_mesh(m), parts)
    assert agg.counts[3] == 2
    interior = np.flatnonzero(agg.coarse.facet_attr == 0)
    assert interior.size == 1
    # the x = 1/2 plane carries 2 x 2 squares split into 2 triangles each
    assert len(agg.entities[2][interior[0]]) == 8
    assert set(np.abs(agg.signs[2][interior[0]]).tolist()) == {1}


def test_single_agglomerate_boundary_patches():
    m = generate_cube_mesh(2)
    agg = coarsen_topology(Topology.from_mesh(m), np.zeros(48, dtype=int))
    assert agg.counts == (8, 12, 6, 1)
    assert np.all(agg.coarse.facet_attr > 0)
    assert sorted(agg.coarse.facet_attr.tolist()) == [1, 2, 3, 4, 5, 6]
    assert agg.coarse.euler_characteristic() == 1


def test_coarse_incidence_is_a_complex():
    m = generate_cube_mesh(3)
    agg = coarsen_recursive(m, [8])[0]
    inc = agg.coarse.incidence
    assert abs(inc[2] @ inc[1]).max() == 0
    assert abs(inc[3] @ inc[2]).max() == 0
    assert agg.coarse.euler_characteristic() == 1


def test_coarse_tables_commute_with_incidence():
    """Boundary of a coarse entity = signed sum of boundaries of its fine pieces."""
    m = generate_cube_mesh(3)
    agg = coarsen_recursive(m, [8])[0]
    fine = agg.fine
    for k in (1, 2, 3):
        lhs = agg.coarse.incidence[k] @ agg.table(k - 1)
        rhs = agg.table(k) @ fine.incidence[k]
        # interior cancellations: compare on the coarse entities' own constituents
        diff = lhs - rhs
        diff.eliminate_zeros()
        assert diff.nnz == 0, k


def test_hollow_shell_is_split():
    m = generate_cube_mesh(3)
    on_bnd = np.isclose(m.vertices, 0) | np.isclose(m.vertices, 1)
    touches = on_bnd.any(axis=1)[m.elements].any(axis=1)
    parts = np.where(touches, 0, 1 + np.arange(m.n_elements))
    assert closure_euler(m, np.flatnonzero(touches)) != 1
    agg = topology_check_and_repair(Topology.from_mesh(m), parts)
    assert agg.counts[3] > np.unique(parts).size
    assert_balls(m, agg)


def test_two_component_agglomerate_is_split():
    m = generate_cube_mesh(2)
    c = m.centroids
    far = [int(np.argmin(c.sum(axis=1))), int(np.argmax(c.sum(axis=1)))]
    parts = np.arange(48)
    parts[far[1]] = parts[far[0]]
    agg = topology_check_and_repair(Topology.from_mesh(m), parts)
    assert agg.counts[3] == 48


def test_all_single_tets_unchanged():
    m = generate_cube_mesh(2)
    agg = topology_check_and_repair(Topology.from_mesh(m), trivial_partition(48))
    np.testing.assert_array_equal(agg.parts, np.arange(48))


def test_coarsen_recursive_examples():
    m = generate_cube_mesh(2)
    assert coarsen_recursive(m, []) == []
    one = coarsen_recursive(m, [8], seed=0)
    assert one[0].counts[3] >= 6
    two = coarsen_recursive(m, [8, 8], seed=0)
    assert two[1].counts[3] < two[0].counts[3]
    for agg in two:
        assert agg.coarse.euler_characteristic() == 1


@pytest.mark.parametrize("partitioner", ["greedy", "bisection", "blocks"])
def test_partitioners_give_ball_agglomerates(partitioner):
    m = uniform_refine(generate_cube_mesh(1))
    aggs = coarsen_recursive(m, [8], partitioner=partitioner)
    assert_balls(m, aggs[0])


def test_blocks_revert_uniform_refinement():
    coarse = generate_cube_mesh(2)
    m = uniform_refine(coarse)
    agg = coarsen_recursive(m, [8], partitioner="blocks")[0]
    assert agg.counts == (coarse.n_vertices, coarse.n_edges, coarse.n_facets, coarse.n_elements)
    np.testing.assert_array_equal(agg.parts, block_partition(m.n_elements, 8))


def test_greedy_agglomerates_respect_size():
    m = generate_cube_mesh(3)
    parts = greedy_ball_partition(Topology.from_mesh(m), 8)
    assert np.bincount(parts).max() <= 8


def test_unknown_partitioner():
    with pytest.raises(ValueError):
        coarsen_recursive(generate_cube_mesh(1), [8], partitioner="metis")


def test_dump_topology_format():
    aggs = coarsen_recursive(generate_cube_mesh(2), [8])
    text = dump_topology(aggs)
    first = text.splitlines()[0]
    c = aggs[0].counts
    assert first == f"level 2 vertices {c[0]} edges {c[1]} facets {c[2]} elements {c[3]}"
    assert sum(1 for line in text.splitlines() if line.startswith("3 ")) == c[3]
