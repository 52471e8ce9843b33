"""Mesh-to-hierarchy setup shared by the command line and the tests."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .agglomeration import coarsen_recursive
from .derham import coarsen_levels
from .fem import Coefficient, assemble_form, build_fine_sequence
from .mesh import Mesh
from .solvers import Hierarchy


@dataclass(eq=False)
class Setup:
    mesh: Mesh
    aggs: list
    hierarchy: Hierarchy

    @property
    def levels(self):
        return self.hierarchy.levels


def setup_hierarchy(
    m: Mesh,
    form: int,
    coefficient: Coefficient | None = None,
    levels: int = 3,
    factor: int = 8,
    target_order: int = 1,
    partitioner: str = "greedy",
    seed: int = 0,
    trivial: bool = False,
    check: bool = True,
) -> Setup:
    """Fine sequence, ``levels - 1`` coarsenings and the Galerkin matrices of form ``form``."""
    if levels < 1:
        raise ValueError("levels must be >= 1")
    if coefficient is None:
        coefficient = Coefficient.uniform(attrs=tuple(int(a) for a in np.unique(m.element_attr)))
    fine = build_fine_sequence(m, target_order)
    aggs = coarsen_recursive(m, [factor] * (levels - 1), seed=seed, trivial=trivial, partitioner=partitioner)
    seq, bundles = coarsen_levels(fine, aggs, check=check)
    A = assemble_form(fine, m, form, coefficient, essential=False)
    return Setup(m, aggs, Hierarchy.build(seq, bundles, A, form, coefficient))


def fine_rhs(setup: Setup, seed: int = 0) -> np.ndarray:
    """Deterministic right-hand side on free fine dofs: ``A`` times a random vector."""
    rng = np.random.default_rng(seed)
    A = setup.hierarchy.A[0]
    return A @ rng.standard_normal(A.shape[0])
