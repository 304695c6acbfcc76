"""Robust weighted sum-rate lower-bound maximization.

Outer loop over the exponential-slack vector u, inner alternating
optimization over precoders (per-cell SDPs with S-lemma LMIs) and scalar
equalizers (1-D convex minimization in the inverse equalizer).  The inner
objective is the weighted worst-case-MSE sum; the reported quantity is the
certified sum-rate lower bound sum(alpha * (-log mse_wc)).
"""

from __future__ import annotations

from dataclasses import dataclass, field

import cvxpy as cp
import numpy as np
from scipy.optimize import minimize_scalar

from . import conic
from .instance import EqualizerSet, NetworkInstance, PrecoderSet
from .maxmin import matched_filter_precoders
from .worst_case import max_quadratic_over_ball, max_shifted_norm_sq, worst_case_mse

INNER_TOL = 1e-6
INNER_MAX = 50
OUTER_TOL = 1e-4
OUTER_MAX = 100


@dataclass
class AOState:
    u: np.ndarray
    precoders: PrecoderSet
    equalizers: EqualizerSet
    lower_bounds: list = field(default_factory=list)
    inner_objectives: list = field(default_factory=list)


def all_worst_case_mses(instance, precoders, equalizers) -> np.ndarray:
    M, K = instance.config.m, instance.config.k
    return np.array([[worst_case_mse(instance, precoders, equalizers, m, k)
                      for k in range(K)] for m in range(M)])


def update_u(instance: NetworkInstance, precoders: PrecoderSet,
             equalizers: EqualizerSet) -> np.ndarray:
    """Optimal slack: u = 1 - log(worst-case mse), per user."""
    return 1.0 - np.log(all_worst_case_mses(instance, precoders, equalizers))


def _mse_weights(instance, u, equalizers) -> np.ndarray:
    """Per-user weights q = alpha * exp(u - 1) / f^2 of the precoder step."""
    return instance.weights * np.exp(u - 1.0) / equalizers.values ** 2


def weighted_mse_objective(instance, precoders, equalizers, u) -> float:
    mses = all_worst_case_mses(instance, precoders, equalizers)
    return float(np.sum(instance.weights * np.exp(u - 1.0) * mses))


def sum_rate_bound(instance, precoders, equalizers) -> float:
    mses = all_worst_case_mses(instance, precoders, equalizers)
    return float(np.sum(instance.weights * (-np.log(mses))))


def nominal_mmse_equalizers(instance: NetworkInstance, precoders: PrecoderSet) -> EqualizerSet:
    """Real MMSE equalizers at the channel estimates (assumes own-channel
    gains phase-aligned, which every design path in this package enforces)."""
    M, K = instance.config.m, instance.config.k
    vals = np.empty((M, K))
    for m in range(M):
        for k in range(K):
            h = instance.estimates[m, m, k]
            gain = np.real(h @ precoders.beam(m, k))
            inter = 1.0 + float(np.sum(np.abs(h @ precoders.deleted(m, k)) ** 2))
            for n in range(M):
                if n != m:
                    inter += float(np.sum(np.abs(instance.estimates[m, n, k]
                                                 @ precoders.cell(n)) ** 2))
            gain = max(gain, 1e-9)
            vals[m, k] = (abs(gain) ** 2 + inter) / gain
    return EqualizerSet(vals)


def optimize_equalizers(instance: NetworkInstance, precoders: PrecoderSet,
                        u: np.ndarray) -> EqualizerSet:
    """Per-user minimization of the worst-case MSE over the real equalizer;
    convex in the inverse equalizer g = 1/f, solved by 1-D search whose
    objective is evaluated with the exact worst-case kernel."""
    M, K = instance.config.m, instance.config.k
    vals = np.empty((M, K))
    for m in range(M):
        for k in range(K):
            const = 1.0
            for n in range(M):
                if n != m:
                    const += max_quadratic_over_ball(
                        instance.estimates[m, n, k], precoders.cell(n),
                        instance.radii[m, n, k])
            h = instance.estimates[m, m, k]
            phi = precoders.cell(m)
            eps = instance.radii[m, m, k]
            unit = np.zeros(K, dtype=complex)
            unit[k] = 1.0

            def phi_of_g(g):
                return max_shifted_norm_sq(h, g * phi, unit, eps) + g * g * const

            # The gain is clamped to a moderate range: when a beam is
            # (nearly) switched off the unconstrained optimum runs off to
            # g -> 0 with MSE -> 1, and the resulting huge f = 1/g would
            # destabilise the precoder SDPs without improving the bound.
            res = minimize_scalar(phi_of_g, bounds=(1e-3, 1e3), method="bounded",
                                  options={"xatol": 1e-12})
            vals[m, k] = 1.0 / res.x
    return EqualizerSet(vals)


class _PrecoderCellProgram:
    """Per-cell SDP of the precoder step, parametric in the per-user weights
    q and equalizers f."""

    def __init__(self, instance: NetworkInstance, m: int):
        M, K, N = instance.config.m, instance.config.k, instance.config.n
        self.instance = instance
        self.m = m
        prog = conic.ConicProgram(f"sumrate-cell{m}")
        self.phi = prog.variable("phi", (N, K), complex=True)
        self.f_param = prog.parameter("f", (K,), nonneg=True)
        terms = []  # (sqrt_q parameter, bound variable)
        self.sqrt_q_own = prog.parameter("sq_own", (K,), nonneg=True)
        beta_own = prog.variable("beta_own", (K,), nonneg=True)
        lam_own = prog.variable("lam_own", (K,))
        for j in range(K):
            unit = np.zeros(K)
            unit[j] = 1.0
            offset = cp.multiply(self.f_param[j], cp.Constant(unit))
            conic.build_s_lemma_lmi(
                prog, instance.estimates[m, m, j], self.phi,
                instance.radii[m, m, j], beta_own[j], lam_own[j], offset=offset)
            terms.append(cp.reshape(cp.multiply(self.sqrt_q_own[j], beta_own[j]),
                                    (1,), order="F"))
        self.leak_index = [(n, l) for n in range(M) if n != m for l in range(K)]
        if self.leak_index:
            nl = len(self.leak_index)
            self.sqrt_q_leak = prog.parameter("sq_leak", (nl,), nonneg=True)
            beta_leak = prog.variable("beta_leak", (nl,), nonneg=True)
            lam_leak = prog.variable("lam_leak", (nl,))
            for i, (n, l) in enumerate(self.leak_index):
                conic.build_s_lemma_lmi(
                    prog, instance.estimates[n, m, l], self.phi,
                    instance.radii[n, m, l], beta_leak[i], lam_leak[i])
                terms.append(cp.reshape(cp.multiply(self.sqrt_q_leak[i], beta_leak[i]),
                                        (1,), order="F"))
        s = prog.variable("s")
        prog.add("soc", cp.norm(cp.hstack(terms), 2) <= s)
        prog.add("soc", cp.norm(self.phi, "fro") <= np.sqrt(instance.powers[m]))
        prog.minimize(s)
        self.prog = prog

    def solve(self, q: np.ndarray, equalizers: EqualizerSet):
        m = self.m
        self.f_param.value = equalizers.values[m]
        self.sqrt_q_own.value = np.sqrt(q[m])
        if self.leak_index:
            self.sqrt_q_leak.value = np.sqrt(np.array([q[n, l] for n, l in self.leak_index]))
        rep = conic.solve(self.prog)
        if not rep.ok and rep.status == conic.STATUS_NUMERICAL:
            # Near-degenerate weight/equalizer combinations can stall the
            # default solver just short of its tolerance; a first-order
            # solver with a looser target recovers a usable point.
            rep = conic.solve(self.prog, tol=1e-6, solver="SCS")
        if not rep.ok:
            raise RuntimeError(f"precoder subproblem for cell {m} failed: {rep.status}")
        return np.asarray(self.phi.value)


def optimize_precoders(instance: NetworkInstance, equalizers: EqualizerSet,
                       u: np.ndarray, _programs=None) -> PrecoderSet:
    """Weighted worst-case-MSE precoder step; decouples into one SDP per
    cell (each involves only the channels leaving that cell's BS)."""
    q = _mse_weights(instance, u, equalizers)
    progs = _programs or [_PrecoderCellProgram(instance, m) for m in range(instance.config.m)]
    mats = np.stack([progs[m].solve(q, equalizers) for m in range(instance.config.m)])
    return PrecoderSet(mats)


def weighted_sumrate_ao(instance: NetworkInstance, outer_tol: float = OUTER_TOL,
                        max_outer: int = OUTER_MAX, inner_tol: float = INNER_TOL,
                        max_inner: int = INNER_MAX, init=None):
    """Alternating optimization for the robust weighted sum-rate lower
    bound.  Returns (PrecoderSet, EqualizerSet, AOState) where
    state.lower_bounds is the per-outer-iteration bound trace (nats).
    ``init`` optionally warm-starts from an (PrecoderSet, EqualizerSet)
    pair, e.g. the solution at a smaller power budget."""
    if init is not None:
        precoders, equalizers = init
    else:
        precoders = matched_filter_precoders(instance)
        equalizers = nominal_mmse_equalizers(instance, precoders)
    u = update_u(instance, precoders, equalizers)
    state = AOState(u=u, precoders=precoders, equalizers=equalizers)
    programs = [_PrecoderCellProgram(instance, m) for m in range(instance.config.m)]
    state.lower_bounds.append(sum_rate_bound(instance, precoders, equalizers))
    for _ in range(max_outer):
        obj = weighted_mse_objective(instance, precoders, equalizers, u)
        for _ in range(max_inner):
            precoders = optimize_precoders(instance, equalizers, u, _programs=programs)
            equalizers = optimize_equalizers(instance, precoders, u)
            new_obj = weighted_mse_objective(instance, precoders, equalizers, u)
            state.inner_objectives.append(new_obj)
            if obj - new_obj < inner_tol:
                obj = new_obj
                break
            obj = new_obj
        lb = sum_rate_bound(instance, precoders, equalizers)
        if lb < state.lower_bounds[-1]:
            # Solver noise on a non-improving step; keep the previous
            # iterate so the reported trace reflects actual progress.
            precoders, equalizers = state.precoders, state.equalizers
            break
        u = update_u(instance, precoders, equalizers)
        state.lower_bounds.append(lb)
        state.precoders, state.equalizers = precoders, equalizers
        if lb - state.lower_bounds[-2] < outer_tol:
            break
    state.u = u
    state.precoders = precoders
    state.equalizers = equalizers
    return precoders, equalizers, state
