"""Cone-program intermediate representation and robust-constraint builders.

Programs are assembled from named variable blocks and constraint blocks
tagged with their cone type; complex-valued data enters through the standard
2x real embedding so every emitted PSD block is real symmetric.  Solving is
delegated to an ecosystem interior-point conic solver behind the
ConicProgram/SolveReport boundary.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import cvxpy as cp
import numpy as np

CONE_TAGS = ("zero", "nonneg", "soc", "psd")

STATUS_OPTIMAL = "optimal"
STATUS_INFEASIBLE = "infeasible"
STATUS_UNBOUNDED = "unbounded"
STATUS_NUMERICAL = "numerical-limit"

_STATUS_MAP = {
    cp.OPTIMAL: STATUS_OPTIMAL,
    cp.INFEASIBLE: STATUS_INFEASIBLE,
    cp.UNBOUNDED: STATUS_UNBOUNDED,
    cp.OPTIMAL_INACCURATE: STATUS_NUMERICAL,
    cp.INFEASIBLE_INACCURATE: STATUS_INFEASIBLE,
    cp.UNBOUNDED_INACCURATE: STATUS_UNBOUNDED,
}

_PREFERRED_SOLVERS = ("CLARABEL", "CVXOPT", "SCS")


class ProgramError(ValueError):
    pass


@dataclass
class SolveReport:
    status: str
    objective: float | None
    values: dict
    iterations: int | None
    residual: float | None

    @property
    def ok(self) -> bool:
        return self.status == STATUS_OPTIMAL


class ConicProgram:
    """Catalog of named variable blocks, a linear objective, and cone-tagged
    constraint blocks."""

    def __init__(self, name: str = ""):
        self.name = name
        self._vars: dict[str, cp.Variable] = {}
        self._params: dict[str, cp.Parameter] = {}
        self._constraints: list[tuple[str, cp.Constraint]] = []
        self._objective = None
        self._problem = None

    def variable(self, name: str, shape=(), **kwargs) -> cp.Variable:
        if name in self._vars:
            raise ProgramError(f"variable {name!r} already declared")
        v = cp.Variable(shape, name=name, **kwargs)
        self._vars[name] = v
        return v

    def parameter(self, name: str, shape=(), **kwargs) -> cp.Parameter:
        if name in self._params:
            raise ProgramError(f"parameter {name!r} already declared")
        p = cp.Parameter(shape, name=name, **kwargs)
        self._params[name] = p
        return p

    def add(self, cone: str, constraint: cp.Constraint):
        if cone not in CONE_TAGS:
            raise ProgramError(f"unknown cone tag {cone!r}")
        declared = set(id(v) for v in self._vars.values())
        for v in constraint.variables():
            if id(v) not in declared:
                raise ProgramError(
                    f"constraint references undeclared variable {v.name()!r}")
        self._constraints.append((cone, constraint))
        self._problem = None
        return constraint

    def minimize(self, expr):
        self._objective = cp.Minimize(expr)
        self._problem = None

    @property
    def constraints(self):
        return list(self._constraints)

    def problem(self) -> cp.Problem:
        if self._problem is None:
            obj = self._objective if self._objective is not None else cp.Minimize(0)
            self._problem = cp.Problem(obj, [c for _, c in self._constraints])
        return self._problem

    def value(self, name: str):
        return self._vars[name].value


def solve(program: ConicProgram, tol: float = 1e-7, solver: str | None = None) -> SolveReport:
    """Solve the program; never fails silently (non-optimal outcomes are
    reported through SolveReport.status)."""
    prob = program.problem()
    chosen = solver
    if chosen is None:
        installed = cp.installed_solvers()
        chosen = next((s for s in _PREFERRED_SOLVERS if s in installed), None)
    kwargs = {}
    if chosen == "CLARABEL":
        kwargs = dict(tol_feas=tol, tol_gap_abs=tol, tol_gap_rel=tol)
    try:
        import warnings

        with warnings.catch_warnings():
            warnings.filterwarnings("ignore", message="Solution may be inaccurate")
            prob.solve(solver=chosen, **kwargs)
    except cp.error.SolverError:
        return SolveReport(STATUS_NUMERICAL, None, {}, None, None)
    status = _STATUS_MAP.get(prob.status, STATUS_NUMERICAL)
    values = {name: v.value for name, v in program._vars.items()}
    iters = getattr(prob.solver_stats, "num_iters", None)
    residual = None
    if status == STATUS_OPTIMAL:
        viol = [np.max(c.violation()) for _, c in program._constraints] or [0.0]
        residual = float(max(viol))
    obj = float(prob.value) if prob.value is not None and np.isfinite(prob.value) else None
    return SolveReport(status, obj, values, iters, residual)


# ---------------------------------------------------------------------------
# complex -> real embedding

def realify_hermitian(H: np.ndarray) -> np.ndarray:
    """Embed a Hermitian matrix as [[Re H, -Im H], [Im H, Re H]]; H is PSD
    iff the embedding is PSD."""
    H = np.asarray(H, dtype=complex)
    if H.ndim != 2 or H.shape[0] != H.shape[1]:
        raise ProgramError("expected a square matrix")
    if not np.allclose(H, H.conj().T, atol=1e-10 * max(1.0, np.linalg.norm(H))):
        raise ProgramError("PSD embedding requires a Hermitian matrix")
    R, I = H.real, H.imag
    out = np.block([[R, -I], [I, R]])
    return 0.5 * (out + out.T)


def realify_vector(v: np.ndarray) -> np.ndarray:
    v = np.asarray(v, dtype=complex).reshape(-1)
    return np.concatenate([v.real, v.imag])


def realify_psd_expr(H):
    """Expression-level real embedding of a Hermitian-by-construction affine
    block; symmetrized so the PSD constraint is well formed."""
    R, I = cp.real(H), cp.imag(H)
    E = cp.bmat([[R, -I], [I, R]])
    return 0.5 * (E + E.T)


# ---------------------------------------------------------------------------
# robust-constraint builders

def build_soc_own_channel(prog: ConicProgram, h, eps: float, sqrt_a, w, t):
    """Own-channel robust gain constraint
    eps*||w|| <= Re(h w) - sqrt_a * t with Im(h w) pinned to zero (phase
    invariance of the optimal solution)."""
    h = np.asarray(h, dtype=complex).reshape(1, -1)
    lhs = cp.real(h @ w) - cp.multiply(sqrt_a, t)
    soc = prog.add("soc", eps * cp.norm(w, 2) <= cp.reshape(lhs, (), order="F"))
    pin = prog.add("zero", cp.imag(h @ w) == 0)
    return soc, pin


def build_s_lemma_lmi(prog: ConicProgram, h, Xi, eps: float, bound, mult,
                      offset=None):
    """Robust quadratic bound max_{||d||<=eps} ||(h + d) Xi - offset||^2
    <= bound^2 as a single LMI with nonnegative multiplier ``mult``
    (lossless for one uncertainty ball).  Xi is an (N, J) block (variable or
    constant); ``bound`` and ``mult`` are scalar expressions."""
    h = np.asarray(h, dtype=complex).reshape(1, -1)
    n = h.shape[1]
    if isinstance(Xi, np.ndarray) and Xi.ndim == 1:
        Xi = Xi.reshape(-1, 1)
    j = Xi.shape[1]
    top = h @ Xi
    if offset is not None:
        top = top - cp.reshape(offset, (1, j), order="F")
    bound = cp.reshape(bound, (1, 1), order="F")
    mult = cp.reshape(mult, (1, 1), order="F")
    eye_j = np.eye(j)
    eye_n = np.eye(n)
    zero_1n = np.zeros((1, n))
    zero_n1 = np.zeros((n, 1))
    block = cp.bmat([
        [bound - mult, top, zero_1n],
        [cp.conj(top).T, cp.kron(bound, eye_j), -eps * cp.conj(Xi).T],
        [zero_n1, -eps * Xi, cp.kron(mult, eye_n)],
    ])
    lmi = prog.add("psd", realify_psd_expr(block) >> 0)
    nn = prog.add("nonneg", cp.reshape(mult, (), order="F") >= 0)
    return lmi, nn
