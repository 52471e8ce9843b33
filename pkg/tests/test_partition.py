import numpy as np
import pytest
import scipy.sparse as sp

from amge.agglomeration import build_dual_graph
from amge.mesh import generate_cube_mesh
from amge.partition import partition, renumber, split_components
from amge.topology import Topology


def path_graph(n):
    return sp.diags([np.ones(n - 1), np.ones(n - 1)], [-1, 1], format="csr")


def test_dual_graph_kuhn_cube():
    m = generate_cube_mesh(1)
    G = build_dual_graph(m)
    interior = m.n_facets - m.boundary_facets.size
    assert G.shape == (6, 6)
    assert G.nnz // 2 == interior
    assert (abs(G - G.T)).nnz == 0


def test_dual_graph_from_topology_matches_mesh():
    m = generate_cube_mesh(2)
    assert (build_dual_graph(m) != build_dual_graph(Topology.from_mesh(m))).nnz == 0


def test_partition_trivial_cases():
    G = build_dual_graph(generate_cube_mesh(2))
    np.testing.assert_array_equal(partition(G, 1), np.zeros(48))
    np.testing.assert_array_equal(partition(G, 48), np.arange(48))


def test_partition_path_graph():
    np.testing.assert_array_equal(partition(path_graph(4), 2), [0, 0, 1, 1])


def test_partition_parts_are_connected_and_balanced():
    G = build_dual_graph(generate_cube_mesh(3))
    parts = partition(G, 8, seed=3)
    sizes = np.bincount(parts)
    assert sizes.sum() == 162 and parts.max() + 1 >= 8
    np.testing.assert_array_equal(split_components(G, parts), parts)


def test_partition_is_deterministic():
    G = build_dual_graph(generate_cube_mesh(3))
    np.testing.assert_array_equal(partition(G, 7, seed=11), partition(G, 7, seed=11))


def test_partition_rejects_zero_parts():
    with pytest.raises(ValueError):
        partition(path_graph(3), 0)


def test_split_components_and_renumber():
    G = path_graph(5)
    np.testing.assert_array_equal(split_components(G, [0, 1, 0, 0, 1]), [0, 1, 2, 2, 3])
    np.testing.assert_array_equal(renumber([5, 5, 2, 9]), [0, 0, 1, 2])
