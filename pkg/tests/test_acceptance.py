"""Acceptance criteria; every test prints one ``ACCEPTANCE`` line with its verdict.

Criterion 4 builds hierarchies with up to ~2.2e5 unknowns and takes several
minutes on one core.
"""

import re

import numpy as np
import pytest

from amge import core_la as la
from amge.agglomeration import coarsen_recursive
from amge.checks import check_operator_symmetry, run_checks
from amge.derham import coarsen_levels
from amge.fem import Coefficient, build_fine_sequence
from amge.mesh import assign_attribute_by_region, generate_cube_mesh, inner_box, uniform_refine
from amge.pipeline import fine_rhs, setup_hierarchy
from amge.solvers import Direct, SolverContext, SolverLibrary, pcg

CURL, DIV = 2, 3
NAMES = {CURL: "curl", DIV: "div"}

HYBRID_DIRECT = {
    "solvers": {
        "main": {"type": "pcg", "preconditioner": "mg", "max_iterations": 1000, "rel_tol": 1e-6},
        "mg": {"type": "vcycle", "smoother": "hybrid", "coarse": "exact"},
        "hybrid": {"type": "hybrid", "smoother": "sgs"},
        "sgs": {"type": "l1-sgs", "sweeps": 2},
        "exact": {"type": "direct"},
        "aux": {"type": "aux-space", "smoother": "sgs"},
        "mg_aux": {"type": "vcycle", "smoother": "hybrid", "coarse": "aux"},
    }
}

PRIMARY_ONLY = {
    "solvers": {
        "main": {"type": "pcg", "preconditioner": "mg", "max_iterations": 1000, "rel_tol": 1e-6},
        "mg": {"type": "vcycle", "smoother": "sgs", "coarse": "coarse"},
        "sgs": {"type": "l1-sgs", "sweeps": 2},
        "coarse": {"type": "pcg", "preconditioner": "aux", "max_iterations": 5, "rel_tol": 0.0},
        "aux": {"type": "aux-space", "smoother": "sgs"},
    }
}


@pytest.fixture
def report(capsys):
    def emit(number, name, passed, detail):
        with capsys.disabled():
            print(f"\nACCEPTANCE {number} {name}: {'PASS' if passed else 'FAIL'} {detail}")
        assert passed, detail

    return emit


def refined(base, times):
    m = generate_cube_mesh(base)
    for _ in range(times):
        m = uniform_refine(m)
    return m


# 1 ---------------------------------------------------------------------------------


def test_criterion_1_invariant_suite(report):
    worst, total, failed = {}, 0, []
    for n in (2, 3):
        m = generate_cube_mesh(n)
        fine = build_fine_sequence(m, 1)
        for nlev in (2, 3):
            aggs = coarsen_recursive(m, [8] * (nlev - 1))
            levels, bundles = coarsen_levels(fine, aggs)
            for r in run_checks(levels, bundles, aggs):
                total += 1
                kind = re.sub(r"\d", "", r.name.split(".", 1)[1].split("=")[0])
                worst[kind] = max(worst.get(kind, 0.0), float(r.value))
                if not r.passed:
                    failed.append(f"n={n} L={nlev} {r.line()}")
    detail = f"checks={total} failed={len(failed)} " + " ".join(
        f"{k}={v:.1e}" for k, v in sorted(worst.items()) if k in ("DD", "PiP", "commute", "prolong", "pv_unit_integral")
    )
    report(1, "invariant suite (n=2,3; 2 and 3 levels)", not failed, detail + "".join("\n  " + f for f in failed))


# 2 ---------------------------------------------------------------------------------


def test_criterion_2_identity_coarsening_oracle(report):
    m = generate_cube_mesh(2)
    assert m.n_elements == 48
    lib = SolverLibrary(HYBRID_DIRECT)
    ok, parts = True, []
    for form in (CURL, DIV):
        s = setup_hierarchy(m, form, levels=2, trivial=True)
        H = s.hierarchy
        same_dims = H.levels[0].d == H.levels[1].d
        b = fine_rhs(s)
        it_mg = lib.solve(H, b).iterations
        it_exact = pcg(H.A[0], Direct(H.A[0]), b, 1e-6).iterations
        good = same_dims and abs(it_mg - it_exact) <= 1
        ok &= good
        parts.append(f"{NAMES[form]}: dims equal={same_dims} it(vcycle)={it_mg} it(exact)={it_exact}")
    report(2, "identity-coarsening oracle (48 tets, |diff| <= 1)", ok, "; ".join(parts))


# 3 ---------------------------------------------------------------------------------


def test_criterion_3_direct_solve_oracle(report):
    m = refined(3, 1)
    ok, parts = True, []
    for form in (CURL, DIV):
        s = setup_hierarchy(m, form, levels=3)
        H = s.hierarchy
        n = H.A[0].shape[0]
        b = fine_rhs(s)
        res = SolverLibrary.default().solve(H, b, rel_tol=1e-6)
        x = la.sparse_direct_solve(H.A[0], b)
        diff = np.linalg.norm(res.x - x) / np.linalg.norm(x)
        good = n <= 5000 and res.converged and diff <= 1e-5
        ok &= good
        parts.append(f"{NAMES[form]}: dofs={n} it={res.iterations} rel_diff={diff:.2e}")
    report(3, "direct-solve oracle (tol 1e-6, diff <= 1e-5)", ok, "; ".join(parts))


# 4 ---------------------------------------------------------------------------------


@pytest.mark.parametrize("form, base, bound", [(CURL, 4, 120), (DIV, 3, 60)])
def test_criterion_4_mesh_independence(report, form, base, bound):
    its, dofs = [], []
    for k in (1, 2, 3):
        s = setup_hierarchy(refined(base, k), form, levels=3, target_order=0)
        res = SolverLibrary.default().solve(s.hierarchy, fine_rhs(s))
        assert res.converged
        its.append(res.iterations)
        dofs.append(s.hierarchy.A[0].shape[0])
    growth = max(b / a - 1.0 for a, b in zip(its[:-1], its[1:]))
    ok = max(its) <= bound and growth <= 0.25
    detail = f"{NAMES[form]}: dofs={dofs} iterations={its} max growth={100 * growth:.0f}% (bound {bound}, 25%)"
    report(4, f"mesh independence {NAMES[form]}", ok, detail)


# 5 ---------------------------------------------------------------------------------


@pytest.mark.parametrize("form, bound", [(CURL, 300), (DIV, 150)])
def test_criterion_5_jump_coefficients(report, form, bound):
    m = assign_attribute_by_region(refined(4, 1), inner_box(), 2)
    coeff = Coefficient({1: (1.641, 0.2), 2: (0.00188, 2000.0)})
    s = setup_hierarchy(m, form, coeff, levels=3)
    res = SolverLibrary.default().solve(s.hierarchy, fine_rhs(s), rel_tol=1e-6)
    ok = res.converged and res.iterations <= bound
    detail = f"{NAMES[form]}: dofs={s.hierarchy.A[0].shape[0]} iterations={res.iterations} (bound {bound})"
    report(5, f"jump coefficients {NAMES[form]}", ok, detail)


# 6 ---------------------------------------------------------------------------------


@pytest.mark.parametrize("form", [CURL, DIV])
def test_criterion_6_hybrid_smoothing_necessity(report, form):
    s = setup_hierarchy(refined(2, 2), form, levels=3, target_order=0)
    b = fine_rhs(s)
    hybrid = SolverLibrary.default().solve(s.hierarchy, b)
    primary = SolverLibrary(PRIMARY_ONLY).solve(s.hierarchy, b)
    ratio = primary.iterations / hybrid.iterations
    ok = hybrid.converged and ratio >= 2.0
    detail = f"{NAMES[form]}: hybrid={hybrid.iterations} primary-only={primary.iterations} ratio={ratio:.1f} (>= 2)"
    report(6, f"hybrid smoother necessity {NAMES[form]}", ok, detail)


# 7 ---------------------------------------------------------------------------------


@pytest.mark.parametrize("form", [CURL, DIV])
def test_criterion_7_complexities(report, form):
    H = setup_hierarchy(refined(2, 2), form, levels=3, target_order=0).hierarchy
    gc, oc = H.complexities()
    d = [L.dims[form] for L in H.levels]
    nnz = [A.nnz for A in H.A]
    assert gc == pytest.approx(sum(d) / d[0]) and oc == pytest.approx(sum(nnz) / nnz[0])
    detail = f"{NAMES[form]}: dims={d} GC={gc:.3f} OC={oc:.3f} (GC <= 1.35)"
    report(7, f"complexities {NAMES[form]}", gc <= 1.35, detail)


# 8 ---------------------------------------------------------------------------------


@pytest.mark.parametrize("form", [CURL, DIV])
def test_criterion_8_symmetry_positivity(report, form):
    H = setup_hierarchy(refined(2, 1), form, levels=3).hierarchy
    lib = SolverLibrary(HYBRID_DIRECT)
    ctx = SolverContext(H, 0, form, H.A[0])
    n = H.A[0].shape[0]
    ok, parts = True, []
    for name, label in (("mg", "vcycle/direct"), ("mg_aux", "vcycle/aux"), ("aux", "aux-space")):
        asym, minq = check_operator_symmetry(lib.build(name, ctx).apply, n, pairs=20)
        ok &= asym <= 1e-10 and minq > 0
        parts.append(f"{label}: asym={asym:.1e} min r'Br/r'r={minq:.1e}")
    report(8, f"preconditioner symmetry/positivity {NAMES[form]}", ok, "; ".join(parts))
