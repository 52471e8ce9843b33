"""Shared fixtures: small meshes and hierarchies reused across test modules."""

import numpy as np
import pytest

from amge.mesh import Mesh, generate_cube_mesh, uniform_refine
from amge.pipeline import setup_hierarchy

CURL, DIV = 2, 3


def reference_tet() -> Mesh:
    V = np.array([[0.0, 0, 0], [1, 0, 0], [0, 1, 0], [0, 0, 1]])
    return Mesh(V, np.array([[0, 1, 2, 3]]), [1])


def two_tets() -> Mesh:
    V = np.array([[0.0, 0, 0], [1, 0, 0], [0, 1, 0], [0, 0, 1], [1, 1, 1]])
    return Mesh(V, np.array([[0, 1, 2, 3], [1, 2, 3, 4]]), [1, 1])


@pytest.fixture(scope="session")
def cube2():
    return generate_cube_mesh(2)


@pytest.fixture(scope="session")
def cube3():
    return generate_cube_mesh(3)


@pytest.fixture(scope="session")
def curl_cube2(cube2):
    """48-tet H(curl) problem, 2 levels, linear targets."""
    return setup_hierarchy(cube2, CURL, levels=2)


@pytest.fixture(scope="session")
def div_cube2(cube2):
    return setup_hierarchy(cube2, DIV, levels=2)


@pytest.fixture(scope="session")
def refined2():
    """Unit cube refined twice (n = 4), the small mesh-refinement test case."""
    return uniform_refine(uniform_refine(generate_cube_mesh(1)))


@pytest.fixture(scope="session")
def curl_refined(refined2):
    return setup_hierarchy(refined2, CURL, levels=3, target_order=0)


@pytest.fixture(scope="session")
def div_refined(refined2):
    return setup_hierarchy(refined2, DIV, levels=3, target_order=0)
