"""Smoothers, the multilevel V-cycle, PCG and the auxiliary-space preconditioner.

Every solver is an operator object with ``apply(r)`` returning an
approximation of ``A^{-1} r`` and ``apply_T(r)`` applying its transpose.
Operators that are not linear in ``r`` (a fixed number of inner PCG
iterations) set ``linear = False``; PCG then switches to its flexible
variant.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field

import numba
import numpy as np
import scipy.sparse as sp

from . import core_la as la
from .errors import ConfigError, IndefinitePreconditioner, ZeroDiagonal

DEFAULT_SWEEPS = 2


# point smoothers ---------------------------------------------------------------------

@numba.njit(cache=True)
def _gs_forward(indptr, indices, data, d, b, x):
    n = d.size
    for i in range(n):
        s = b[i]
        for p in range(indptr[i], indptr[i + 1]):
            s -= data[p] * x[indices[p]]
        x[i] += s / d[i]


@numba.njit(cache=True)
def _gs_backward(indptr, indices, data, d, b, x):
    n = d.size
    for i in range(n - 1, -1, -1):
        s = b[i]
        for p in range(indptr[i], indptr[i + 1]):
            s -= data[p] * x[indices[p]]
        x[i] += s / d[i]


def l1_diagonal(A: sp.csr_matrix) -> np.ndarray:
    """``d_i = a_ii + sum_{j != i} |a_ij|``.

    Raises
    ------
    ZeroDiagonal
        if some ``a_ii`` is zero.
    """
    A = la.csr(A)
    diag = A.diagonal()
    if np.any(diag == 0.0):
        raise ZeroDiagonal(f"zero diagonal entry at row {int(np.flatnonzero(diag == 0.0)[0])}")
    absrow = np.asarray(abs(A).sum(axis=1)).ravel()
    return diag + (absrow - np.abs(diag))


class Operator:
    """Base class: ``apply`` approximates ``A^{-1}``; ``apply_T`` is its transpose."""

    linear = True
    symmetric = True

    def apply(self, r: np.ndarray) -> np.ndarray:
        raise NotImplementedError

    def apply_T(self, r: np.ndarray) -> np.ndarray:
        return self.apply(r)

    def __call__(self, r):
        return self.apply(r)


class L1SGS(Operator):
    """Point l1-scaled symmetric Gauss-Seidel, ``sweeps`` forward+backward pairs."""

    def __init__(self, A: sp.csr_matrix, sweeps: int = DEFAULT_SWEEPS):
        self.A = la.csr(A)
        self.sweeps = int(sweeps)
        self.d = l1_diagonal(self.A)

    def apply(self, r):
        r = np.ascontiguousarray(r, dtype=np.float64)
        x = np.zeros_like(r)
        A = self.A
        for _ in range(self.sweeps):
            _gs_forward(A.indptr, A.indices, A.data, self.d, r, x)
            _gs_backward(A.indptr, A.indices, A.data, self.d, r, x)
        return x


def l1_sgs_apply(A: sp.csr_matrix, r, sweeps: int = 1) -> np.ndarray:
    """Correction from ``sweeps`` l1-scaled symmetric Gauss-Seidel sweeps (zero initial guess)."""
    return L1SGS(A, sweeps).apply(r)


class Jacobi(Operator):
    """l1-Jacobi: ``sweeps`` damped-free iterations with the l1 diagonal."""

    def __init__(self, A: sp.csr_matrix, sweeps: int = DEFAULT_SWEEPS):
        self.A = la.csr(A)
        self.sweeps = int(sweeps)
        self.d = l1_diagonal(self.A)

    def apply(self, r):
        r = np.asarray(r, dtype=np.float64)
        x = r / self.d
        for _ in range(self.sweeps - 1):
            x = x + (r - self.A @ x) / self.d
        return x


class HybridSmoother(Operator):
    """Primary smoothing on ``A`` followed by smoothing of ``D^T A D`` in ``Range(D)``.

    ``apply`` performs the primary step first; ``apply_T`` reverses the
    order and uses the transposed smoothers, so pre- and post-smoothing
    with the pair yields a symmetric multigrid cycle.
    """

    def __init__(self, A, D, primary: Operator, auxiliary: Operator):
        self.A, self.D, self.primary, self.auxiliary = A, la.csr(D), primary, auxiliary
        self.DT = la.csr(self.D.T)

    def step(self, b, x0, transpose: bool = False):
        """One smoothing step ``x0 -> x1`` for ``A x = b``."""
        x = np.array(x0, dtype=np.float64, copy=True)
        if not transpose:
            x += self.primary.apply(b - self.A @ x)
            x += self.D @ self.auxiliary.apply(self.DT @ (b - self.A @ x))
        else:
            x += self.D @ self.auxiliary.apply_T(self.DT @ (b - self.A @ x))
            x += self.primary.apply_T(b - self.A @ x)
        return x

    def apply(self, r):
        return self.step(r, np.zeros_like(r, dtype=np.float64))

    def apply_T(self, r):
        return self.step(r, np.zeros_like(r, dtype=np.float64), transpose=True)

    symmetric = False


def hybrid_smooth(A, D, M_primary: Operator, M_aux: Operator, b, x0) -> np.ndarray:
    """One hybrid smoothing step; ``M_aux`` smooths ``D^T A D``."""
    return HybridSmoother(A, D, M_primary, M_aux).step(b, x0)


def auxiliary_matrix(A, D) -> sp.csr_matrix:
    return la.csr(la.triple_product(la.transpose(D), A, D))


# direct, V-cycle, PCG ---------------------------------------------------------------------

class Direct(Operator):
    """Sparse direct solve; ``shift`` adds ``shift * max(diag)`` to the diagonal."""

    def __init__(self, A: sp.csr_matrix, shift: float = 0.0):
        A = la.csr(A)
        if shift > 0.0 and A.shape[0]:
            A = la.csr(A + shift * max(A.diagonal().max(), 0.0) * sp.identity(A.shape[0]))
        self.A = A
        self._solver = la.DirectSolver(A)

    def apply(self, r):
        return self._solver.solve(np.asarray(r, dtype=np.float64))


class VCycle(Operator):
    """Multilevel V-cycle preconditioner.

    ``A[l]`` are the level matrices, ``P[l]`` maps level ``l+1`` to level
    ``l``, ``smoothers[l]`` relax on level ``l`` (pre: ``apply``, post:
    ``apply_T``) and ``coarse`` solves on the last level.
    """

    def __init__(self, A: list, P: list, smoothers: list, coarse: Operator):
        if not (len(A) == len(P) + 1 == len(smoothers) + 1):
            raise ValueError("need L matrices, L-1 prolongators and L-1 smoothers")
        self.A, self.P, self.smoothers, self.coarse = A, P, smoothers, coarse
        self.PT = [la.csr(p.T) for p in P]
        self.linear = coarse.linear
        self.symmetric = coarse.symmetric

    def cycle(self, l: int, b: np.ndarray, x: np.ndarray) -> np.ndarray:
        A, S = self.A[l], self.smoothers[l]
        x = x + S.apply(b - A @ x)
        rc = self.PT[l] @ (b - A @ x)
        if l + 1 == len(self.A) - 1:
            e = self.coarse.apply(rc)
        else:
            e = self.cycle(l + 1, rc, np.zeros_like(rc))
        x = x + self.P[l] @ e
        return x + S.apply_T(b - A @ x)

    def apply(self, r):
        r = np.asarray(r, dtype=np.float64)
        if len(self.A) == 1:
            return self.coarse.apply(r)
        return self.cycle(0, r, np.zeros_like(r))


def vcycle_apply(A, P, smoothers, coarse, b, x0=None) -> np.ndarray:
    """One V-cycle for ``A[0] x = b`` starting from ``x0``."""
    V = VCycle(A, P, smoothers, coarse)
    b = np.asarray(b, dtype=np.float64)
    x0 = np.zeros_like(b) if x0 is None else np.asarray(x0, dtype=np.float64)
    if len(A) == 1:
        return x0 + coarse.apply(b - A[0] @ x0)
    return V.cycle(0, b, x0)


@dataclass
class PCGResult:
    x: np.ndarray
    iterations: int
    converged: bool
    history: list = field(default_factory=list)

    @property
    def rel_residual(self) -> float:
        """Final preconditioned residual norm relative to the initial one."""
        if not self.history or self.history[0] == 0.0:
            return 0.0
        return self.history[-1] / self.history[0]


def pcg(A, B, b, rel_tol: float = 1e-6, max_it: int = 1000, x0=None, flexible=None) -> PCGResult:
    """Preconditioned conjugate gradients.

    Stops when ``sqrt(r^T B r) <= rel_tol * sqrt(r0^T B r0)``; ``history``
    holds ``sqrt(r^T B r)`` per iteration.  With ``flexible`` (default:
    when ``B`` is not linear) the Polak-Ribiere update is used.  On reaching
    ``max_it`` the last iterate is returned with ``converged=False``.

    Raises
    ------
    IndefinitePreconditioner
        if ``r^T B r < 0``.
    """
    apply = B.apply if isinstance(B, Operator) else B
    if flexible is None:
        flexible = isinstance(B, Operator) and not B.linear
    b = np.asarray(b, dtype=np.float64)
    x = np.zeros_like(b) if x0 is None else np.array(x0, dtype=np.float64, copy=True)
    r = b - A @ x
    z = apply(r)
    rz = float(r @ z)
    if rz < 0.0:
        raise IndefinitePreconditioner(f"r^T B r = {rz:.3e} < 0")
    history = [np.sqrt(rz)]
    if rz == 0.0:
        return PCGResult(x, 0, True, history)
    target = rel_tol * history[0]
    p = z.copy()
    for it in range(1, max_it + 1):
        Ap = A @ p
        pAp = float(p @ Ap)
        if pAp <= 0.0:
            raise IndefinitePreconditioner(f"p^T A p = {pAp:.3e} <= 0 (operator not SPD)")
        alpha = rz / pAp
        x += alpha * p
        r_new = r - alpha * Ap
        z_new = apply(r_new)
        rz_new = float(r_new @ z_new)
        if rz_new < 0.0:
            raise IndefinitePreconditioner(f"r^T B r = {rz_new:.3e} < 0")
        history.append(np.sqrt(rz_new))
        if history[-1] <= target:
            return PCGResult(x, it, True, history)
        beta = (float(r_new @ (z_new - z)) if flexible else rz_new) / rz
        p = z_new + beta * p
        r, z, rz = r_new, z_new, rz_new
    return PCGResult(x, max_it, False, history)


class PCGSolver(Operator):
    """A fixed number of PCG iterations (or until ``rel_tol``) used as an operator."""

    linear = False

    def __init__(self, A, B: Operator, max_it: int = 5, rel_tol: float = 0.0):
        self.A, self.B, self.max_it, self.rel_tol = A, B, int(max_it), float(rel_tol)

    def apply(self, r):
        return pcg(self.A, self.B, r, self.rel_tol, self.max_it).x


# hierarchy ------------------------------------------------------------------------------

def _restrict(A: sp.csr_matrix, rows: np.ndarray, cols: np.ndarray) -> sp.csr_matrix:
    return la.csr(la.csr(A)[rows][:, cols])


@dataclass(eq=False)
class Hierarchy:
    """Level matrices for one form, restricted to interior (non-essential) dofs.

    ``levels``/``bundles`` come from the de Rham coarsening; ``interior[l][j]``
    are the free dofs of space ``j`` on level ``l``; ``A[l]`` and ``P[l]``
    (level ``l+1`` to ``l``) act on free dofs of the form's space, with
    ``A[l+1] = P[l]^T A[l] P[l]``.
    """

    levels: list
    bundles: list
    form: int
    A: list
    P: list
    interior: list
    coefficient: object = None

    @classmethod
    def build(cls, levels, bundles, A_fine: sp.csr_matrix, form: int, coefficient=None) -> "Hierarchy":
        if form not in (1, 2, 3):
            raise ValueError("form index must be 1, 2 or 3")
        interior = [{j: np.flatnonzero(~L.boundary[j]) for j in (1, 2, 3, 4)} for L in levels]
        I0 = interior[0][form]
        A = [_restrict(A_fine, I0, I0)]
        P = []
        for l, b in enumerate(bundles):
            Pl = _restrict(b.P[form], interior[l][form], interior[l + 1][form])
            P.append(Pl)
            A.append(la.csr(la.rap(A[-1], Pl)))
        return cls(levels, bundles, form, A, P, interior, coefficient)

    @property
    def n_levels(self) -> int:
        return len(self.A)

    def D(self, l: int, j: int) -> sp.csr_matrix:
        """``D_j`` on level ``l`` between free dofs of spaces ``j`` and ``j+1``."""
        I = self.interior[l]
        return _restrict(self.levels[l].D[j], I[j + 1], I[j])

    def pi_hat(self, l: int, j: int) -> sp.csr_matrix:
        """Vector-H1 interpolator to space ``j`` on level ``l`` (free dofs, component-blocked)."""
        I = self.interior[l]
        n1 = self.levels[l].dims[1]
        cols = np.concatenate([c * n1 + I[1] for c in range(3)])
        return _restrict(self.levels[l].pi_hat[j], I[j], cols)

    def complexities(self):
        """``(GC, OC)``: hierarchy totals of dofs and nonzeros relative to the finest level."""
        d = [L.dims[self.form] for L in self.levels]
        nnz = [a.nnz for a in self.A]
        return sum(d) / d[0], sum(nnz) / nnz[0]


def complexities(hier: Hierarchy):
    return hier.complexities()


# auxiliary-space preconditioner --------------------------------------------------------------

def spd_direct(A: sp.csr_matrix) -> Direct:
    """Direct solver, retried with a small relative diagonal shift for semi-definite blocks."""
    from .errors import NotPositiveDefinite

    for shift in (0.0, 1e-12, 1e-10, 1e-8):
        try:
            return Direct(A, shift)
        except NotPositiveDefinite:
            continue
    raise NotPositiveDefinite("auxiliary block could not be factorized")


class AuxSpace(Operator):
    """``B r = M r + Pi (Pi^T A Pi)^{-1} Pi^T r + D B_aux D^T r`` (additive).

    ``D``/``B_aux`` may be omitted (``None``) when ``A D = 0``.
    """

    def __init__(self, A, smoother: Operator, Pi, B_H1: Operator, D=None, B_aux: Operator | None = None):
        self.A, self.M, self.Pi, self.B_H1 = A, smoother, la.csr(Pi), B_H1
        self.PiT = la.csr(self.Pi.T)
        self.D, self.B_aux = (la.csr(D), B_aux) if D is not None else (None, None)
        self.DT = la.csr(self.D.T) if D is not None else None

    def apply(self, r):
        r = np.asarray(r, dtype=np.float64)
        z = self.M.apply(r) + self.Pi @ self.B_H1.apply(self.PiT @ r)
        if self.D is not None:
            z += self.D @ self.B_aux.apply(self.DT @ r)
        return z


def aux_space_apply(A, M: Operator, Pi, B_H1: Operator, D, B_prev: Operator, r) -> np.ndarray:
    return AuxSpace(A, M, Pi, B_H1, D, B_prev).apply(r)


def build_aux_space(hier: Hierarchy, l: int, space: int, A=None, smoother=None) -> AuxSpace:
    """Auxiliary-space preconditioner for the space-``space`` matrix ``A`` on level ``l``.

    H1 blocks are solved directly.  For ``space == 3`` the block in
    ``Range(D_2)`` is itself an auxiliary-space preconditioner of the
    induced matrix ``D_2^T A D_2`` (whose own gradient block vanishes).
    """
    A = hier.A[l] if A is None else A
    make = smoother or (lambda B: L1SGS(B, DEFAULT_SWEEPS))
    Pi = hier.pi_hat(l, space)
    B_H1 = spd_direct(auxiliary_matrix(A, Pi))
    if space == 2:
        D = hier.D(l, 1)
        return AuxSpace(A, make(A), Pi, B_H1, D, spd_direct(auxiliary_matrix(A, D)))
    if space == 3:
        D = hier.D(l, 2)
        A2 = auxiliary_matrix(A, D)
        Pi2 = hier.pi_hat(l, 2)
        inner = AuxSpace(A2, make(A2), Pi2, spd_direct(auxiliary_matrix(A2, Pi2)))
        return AuxSpace(A, make(A), Pi, B_H1, D, inner)
    raise ValueError("auxiliary-space preconditioner is defined for spaces 2 and 3")


# solver library -----------------------------------------------------------------------------

SOLVER_TYPES = ("jacobi", "l1-sgs", "hybrid", "vcycle", "pcg", "direct", "aux-space")
_REFERENCE_KEYS = ("smoother", "coarse", "preconditioner")
_ALLOWED_KEYS = {
    "jacobi": {"sweeps"},
    "l1-sgs": {"sweeps"},
    "hybrid": {"smoother"},
    "vcycle": {"smoother", "coarse", "levels"},
    "pcg": {"preconditioner", "max_iterations", "rel_tol"},
    "direct": set(),
    "aux-space": {"smoother"},
}

DEFAULT_CONFIG = {
    "solve": "main",
    "solvers": {
        "main": {"type": "pcg", "preconditioner": "amge", "max_iterations": 1000, "rel_tol": 1e-6},
        "amge": {"type": "vcycle", "smoother": "hybrid", "coarse": "coarse"},
        "hybrid": {"type": "hybrid", "smoother": "sgs"},
        "sgs": {"type": "l1-sgs", "sweeps": 2},
        "coarse": {"type": "pcg", "preconditioner": "aux", "max_iterations": 5, "rel_tol": 0.0},
        "aux": {"type": "aux-space", "smoother": "sgs"},
    },
}


@dataclass
class SolverContext:
    """Where a solver is built: hierarchy level ``level``, space ``space``, matrix ``A``."""

    hier: Hierarchy
    level: int
    space: int
    A: sp.csr_matrix

    def on(self, level: int) -> "SolverContext":
        return SolverContext(self.hier, level, self.space, self.hier.A[level])


class SolverLibrary:
    """Named solver specifications with references to child solvers.

    The document has a ``solvers`` mapping ``name -> {"type": ..., ...}``
    and an optional ``solve`` naming the entry point (default ``"main"``).
    """

    def __init__(self, document: dict | None = None):
        document = {} if document is None else document
        if not isinstance(document, dict):
            raise ConfigError("solver configuration must be a JSON object")
        specs = document.get("solvers", {})
        if not isinstance(specs, dict):
            raise ConfigError("'solvers' must map names to solver objects")
        self.specs = {}
        for name, spec in specs.items():
            if not isinstance(spec, dict) or "type" not in spec:
                raise ConfigError(f"solver {name!r} needs a 'type'")
            kind = spec["type"]
            if kind not in SOLVER_TYPES:
                raise ConfigError(f"solver {name!r}: unknown type {kind!r}")
            extra = set(spec) - {"type"} - _ALLOWED_KEYS[kind]
            if extra:
                raise ConfigError(f"solver {name!r}: unknown keys {sorted(extra)}")
            self.specs[name] = dict(spec)
        self.entry = document.get("solve", "main")
        for name, spec in self.specs.items():
            for key in _REFERENCE_KEYS:
                if key in spec and spec[key] not in self.specs:
                    raise ConfigError(f"solver {name!r}: {key} {spec[key]!r} is not defined")
        self._check_acyclic()

    @classmethod
    def from_json(cls, text: str) -> "SolverLibrary":
        try:
            doc = json.loads(text)
        except json.JSONDecodeError as exc:
            raise ConfigError(f"invalid JSON: {exc}") from exc
        return cls(doc)

    @classmethod
    def from_file(cls, path) -> "SolverLibrary":
        try:
            with open(path) as fh:
                return cls.from_json(fh.read())
        except OSError as exc:
            raise ConfigError(f"cannot read solver configuration: {exc}") from exc

    @classmethod
    def default(cls) -> "SolverLibrary":
        return cls(json.loads(json.dumps(DEFAULT_CONFIG)))

    def _check_acyclic(self):
        state = {}

        def visit(name, path):
            if state.get(name) == 2:
                return
            if state.get(name) == 1:
                raise ConfigError("cyclic solver references: " + " -> ".join(path + [name]))
            state[name] = 1
            for key in _REFERENCE_KEYS:
                if key in self.specs[name]:
                    visit(self.specs[name][key], path + [name])
            state[name] = 2

        for name in self.specs:
            visit(name, [])

    def __contains__(self, name):
        return name in self.specs

    def spec(self, name: str) -> dict:
        if name not in self.specs:
            raise ConfigError(f"solver {name!r} is not defined")
        return self.specs[name]

    def build(self, name: str, ctx: SolverContext) -> Operator:
        """Instantiate solver ``name`` for the context's matrix."""
        s = self.spec(name)
        kind = s["type"]
        sweeps = int(s.get("sweeps", DEFAULT_SWEEPS))
        if kind == "l1-sgs":
            return L1SGS(ctx.A, sweeps)
        if kind == "jacobi":
            return Jacobi(ctx.A, sweeps)
        if kind == "direct":
            return spd_direct(ctx.A)
        if kind == "hybrid":
            if ctx.space < 2:
                raise ConfigError(f"solver {name!r}: hybrid smoothing needs a space >= 2")
            child = s.get("smoother")
            if child is None:
                raise ConfigError(f"solver {name!r}: hybrid needs a 'smoother'")
            D = ctx.hier.D(ctx.level, ctx.space - 1)
            aux_ctx = SolverContext(ctx.hier, ctx.level, ctx.space - 1, auxiliary_matrix(ctx.A, D))
            return HybridSmoother(ctx.A, D, self.build(child, ctx), self.build(child, aux_ctx))
        if kind == "aux-space":
            child = s.get("smoother")
            make = (lambda B: self.build(child, SolverContext(ctx.hier, ctx.level, ctx.space, B))) if child else None
            return build_aux_space(ctx.hier, ctx.level, ctx.space, ctx.A, make)
        if kind == "pcg":
            if "preconditioner" not in s:
                raise ConfigError(f"solver {name!r}: pcg needs a 'preconditioner'")
            B = self.build(s["preconditioner"], ctx)
            return PCGSolver(ctx.A, B, int(s.get("max_iterations", 5)), float(s.get("rel_tol", 0.0)))
        if kind == "vcycle":
            for key in ("smoother", "coarse"):
                if key not in s:
                    raise ConfigError(f"solver {name!r}: vcycle needs a {key!r}")
            last = ctx.hier.n_levels - 1
            if "levels" in s:
                last = min(last, ctx.level + int(s["levels"]) - 1)
            if last <= ctx.level:
                return self.build(s["coarse"], ctx)
            ls = range(ctx.level, last + 1)
            smoothers = [self.build(s["smoother"], ctx.on(l)) for l in ls[:-1]]
            coarse = self.build(s["coarse"], ctx.on(last))
            A = [ctx.hier.A[l] for l in ls]
            P = [ctx.hier.P[l] for l in ls[:-1]]
            return VCycle(A, P, smoothers, coarse)
        raise ConfigError(f"solver {name!r}: unknown type {kind!r}")  # pragma: no cover

    def solve(self, hier: Hierarchy, b, name: str | None = None, rel_tol=None, max_it=None) -> PCGResult:
        """Run the entry solver (which must be ``pcg``) on the finest level."""
        name = self.entry if name is None else name
        s = self.spec(name)
        if s["type"] != "pcg":
            raise ConfigError(f"entry solver {name!r} must be of type 'pcg'")
        ctx = SolverContext(hier, 0, hier.form, hier.A[0])
        B = self.build(s["preconditioner"], ctx)
        tol = float(s.get("rel_tol", 1e-6)) if rel_tol is None else float(rel_tol)
        it = int(s.get("max_iterations", 1000)) if max_it is None else int(max_it)
        return pcg(hier.A[0], B, b, tol, it)


def rap_level(A_fine: sp.csr_matrix, P: sp.csr_matrix) -> sp.csr_matrix:
    """Galerkin coarse matrix ``P^T A P`` (kept exactly symmetric)."""
    return la.rap(A_fine, P)


def coarse_solver(hier: Hierarchy, spec: dict | None = None, level: int | None = None) -> Operator:
    """Solver for the coarsest (or given) level of ``hier``.

    ``spec`` is a single solver object, by default ``{"type": "pcg",
    "max_iterations": 5}``; a ``pcg`` without a ``preconditioner`` is
    preconditioned by the auxiliary-space method.  ``{"type": "direct"}``
    gives a sparse direct solve.
    """
    spec = dict({"type": "pcg", "max_iterations": 5} if spec is None else spec)
    solvers = {"coarse": spec}
    if spec.get("type") == "pcg" and "preconditioner" not in spec:
        spec["preconditioner"] = "aux"
        solvers["aux"] = {"type": "aux-space"}
    lib = SolverLibrary({"solvers": solvers})
    level = hier.n_levels - 1 if level is None else level
    return lib.build("coarse", SolverContext(hier, level, hier.form, hier.A[level]))


def build_solver_library(document) -> SolverLibrary:
    """Library from a parsed JSON document, JSON text or ``None`` (empty)."""
    if isinstance(document, str):
        return SolverLibrary.from_json(document)
    return SolverLibrary(document)
