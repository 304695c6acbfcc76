"""Centralized robust max-min optimization.

Two routes: a bisection over the worst-case SINR target wrapped around a
power-minimization cone program (exact for K=1 and a
certified lower bound for K>1), and a min-max worst-case-MSE route solved
as a bisection over the generalized-eigenvalue level.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import cvxpy as cp
import numpy as np

from . import conic
from .instance import EqualizerSet, NetworkInstance, PrecoderSet

DEFAULT_DELTA = 1e-3
_B_FEAS_SLACK = 1e-9


@dataclass
class BisectionTrace:
    """Probe log of one bisection run: (a, b-or-None) pairs plus the bracket
    after each step."""

    probes: list = field(default_factory=list)
    brackets: list = field(default_factory=list)
    delta: float = 0.0
    a_star: float = 0.0
    degenerate: bool = False


def a_max_init(instance: NetworkInstance) -> float:
    """Interference-free ceiling min_{m,k} P_m ((||h|| - eps)^+)^2."""
    vals = []
    for m in range(instance.config.m):
        for k in range(instance.config.k):
            gap = max(np.linalg.norm(instance.estimates[m, m, k])
                      - instance.radii[m, m, k], 0.0)
            vals.append(instance.powers[m] * gap ** 2)
    return float(min(vals))


def matched_filter_precoders(instance: NetworkInstance) -> PrecoderSet:
    """Scaled matched filter: column k of cell m is sqrt(P_m/K) times the
    normalized conjugate own-channel estimate."""
    m, k, n = instance.config.m, instance.config.k, instance.config.n
    mats = np.zeros((m, n, k), dtype=complex)
    for mm in range(m):
        for kk in range(k):
            h = instance.estimates[mm, mm, kk]
            mats[mm, :, kk] = np.sqrt(instance.powers[mm] / k) * h.conj() / np.linalg.norm(h)
    return PrecoderSet(mats)


class _PowerProgramSingle:
    """Min-power SOCP for K=1, parametric in sqrt(a)."""

    def __init__(self, instance: NetworkInstance):
        M, N = instance.config.m, instance.config.n
        self.instance = instance
        prog = conic.ConicProgram("power-single")
        self.sqrt_a = prog.parameter("sqrt_a", nonneg=True)
        self.w = [prog.variable(f"w{m}", (N,), complex=True) for m in range(M)]
        t = prog.variable("t", (M,))
        b = prog.variable("b")
        if M > 1:
            c = prog.variable("c", (M, M), nonneg=True)
            d = prog.variable("d", (M, M), nonneg=True)
            e = prog.variable("e", (M, M), nonneg=True)
        for m in range(M):
            conic.build_soc_own_channel(
                prog, instance.estimates[m, m, 0], instance.radii[m, m, 0],
                self.sqrt_a, self.w[m], t[m])
            parts = []
            for n in range(M):
                if n == m:
                    continue
                parts.append(cp.reshape(e[m, n], (1,), order="F"))
                prog.add("nonneg", c[m, n] + d[m, n] <= e[m, n])
                prog.add("soc", cp.abs(instance.estimates[m, n, 0].reshape(1, -1) @ self.w[n])
                         <= c[m, n])
                prog.add("soc", instance.radii[m, n, 0] * cp.norm(self.w[n], 2) <= d[m, n])
            parts.append(cp.Constant(np.ones(1)))
            prog.add("soc", cp.norm(cp.hstack(parts), 2) <= t[m])
            prog.add("soc", cp.norm(self.w[m], 2) <= b * np.sqrt(instance.powers[m]))
        prog.minimize(b)
        self.prog = prog
        self.b = b

    def solve_at(self, a: float, tol: float = 1e-7):
        self.sqrt_a.value = np.sqrt(a)
        rep = conic.solve(self.prog, tol=tol)
        if not rep.ok:
            return rep.status, None, None
        N = self.instance.config.n
        mats = np.stack([w.value.reshape(N, 1) for w in self.w])
        return rep.status, float(rep.objective), PrecoderSet(mats)


class _PowerProgramMulti:
    """Min-power SDP with S-lemma robust-leakage LMIs, parametric in sqrt(a)."""

    def __init__(self, instance: NetworkInstance):
        M, K, N = instance.config.m, instance.config.k, instance.config.n
        self.instance = instance
        prog = conic.ConicProgram("power-multi")
        self.sqrt_a = prog.parameter("sqrt_a", nonneg=True)
        self.phi = [prog.variable(f"phi{m}", (N, K), complex=True) for m in range(M)]
        t = prog.variable("t", (M, K))
        b = prog.variable("b")
        e = prog.variable("e", (M * K, M), nonneg=True)
        lam = prog.variable("lam", (M * K, M))
        for m in range(M):
            for k in range(K):
                row = m * K + k
                conic.build_soc_own_channel(
                    prog, instance.estimates[m, m, k], instance.radii[m, m, k],
                    self.sqrt_a, self.phi[m][:, k], t[m, k])
                parts = []
                if K > 1:
                    psi = cp.hstack([self.phi[m][:, j:j + 1] for j in range(K) if j != k])
                    conic.build_s_lemma_lmi(
                        prog, instance.estimates[m, m, k], psi,
                        instance.radii[m, m, k], e[row, m], lam[row, m])
                    parts.append(cp.reshape(e[row, m], (1,), order="F"))
                for n in range(M):
                    if n == m:
                        continue
                    conic.build_s_lemma_lmi(
                        prog, instance.estimates[m, n, k], self.phi[n],
                        instance.radii[m, n, k], e[row, n], lam[row, n])
                    parts.append(cp.reshape(e[row, n], (1,), order="F"))
                parts.append(cp.Constant(np.ones(1)))
                prog.add("soc", cp.norm(cp.hstack(parts), 2) <= t[m, k])
        for m in range(M):
            prog.add("soc", cp.norm(self.phi[m], "fro") <= b * np.sqrt(instance.powers[m]))
        prog.minimize(b)
        self.prog = prog
        self.b = b

    def solve_at(self, a: float, tol: float = 1e-7):
        self.sqrt_a.value = np.sqrt(a)
        rep = conic.solve(self.prog, tol=tol)
        if not rep.ok:
            return rep.status, None, None
        mats = np.stack([p.value for p in self.phi])
        return rep.status, float(rep.objective), PrecoderSet(mats)


def _power_program(instance: NetworkInstance):
    return _PowerProgramSingle(instance) if instance.config.k == 1 else _PowerProgramMulti(instance)


def power_opt_single(instance: NetworkInstance, a: float):
    """Solve the K=1 power-minimization SOCP at SINR target a.
    Returns (status, b, PrecoderSet) with b/precoders None when not optimal."""
    if instance.config.k != 1:
        raise ValueError("power_opt_single requires K=1")
    return _PowerProgramSingle(instance).solve_at(a)


def power_opt_multi(instance: NetworkInstance, a: float):
    """Solve the general power-minimization SDP at certified-lower-bound
    SINR target a."""
    return _PowerProgramMulti(instance).solve_at(a)


def maxmin_via_power(instance: NetworkInstance, delta: float = DEFAULT_DELTA):
    """Bisection on the SINR target wrapped around the power program
.  Returns (a_star, PrecoderSet, BisectionTrace);
    delta is relative to the initial bracket width."""
    prog = _power_program(instance)
    a_hi = a_max_init(instance)
    trace = BisectionTrace(delta=delta)
    if a_hi <= 0:
        trace.degenerate = True
        return 0.0, matched_filter_precoders(instance), trace
    a_min, a_max = 0.0, a_hi
    best = None
    # resolution relative to the shrinking upper bracket: the optimum can
    # sit orders of magnitude below the interference-free ceiling (e.g. at
    # high SNR), where a fixed delta * a_hi grid would never reach it
    while a_max - a_min > delta * a_max and a_max > 1e-9 * a_hi:
        a0 = 0.5 * (a_min + a_max)
        status, b, prec = prog.solve_at(a0)
        feasible = status == conic.STATUS_OPTIMAL and b is not None and b <= 1.0 + _B_FEAS_SLACK
        trace.probes.append((a0, b if status == conic.STATUS_OPTIMAL else None))
        if feasible:
            a_min, best = a0, prec
        else:
            a_max = a0
        trace.brackets.append((a_min, a_max))
    trace.a_star = a_min
    if best is None:
        trace.degenerate = True
        return 0.0, matched_filter_precoders(instance), trace
    return a_min, best, trace


class _MseFeasibilityProgram:
    """LMI feasibility system for the min-max worst-case-RMS-MSE level,
    parametric in the level a."""

    def __init__(self, instance: NetworkInstance):
        M, K, N = instance.config.m, instance.config.k, instance.config.n
        self.instance = instance
        prog = conic.ConicProgram("mse-gevp")
        self.a = prog.parameter("a", nonneg=True)
        self.phi = [prog.variable(f"phi{m}", (N, K), complex=True) for m in range(M)]
        self.f = prog.variable("f", (M, K), nonneg=True)
        bb = prog.variable("bb", (M * K, M), nonneg=True)
        lam = prog.variable("lam", (M * K, M))
        for m in range(M):
            for k in range(K):
                row = m * K + k
                unit = np.zeros(K)
                unit[k] = 1.0
                offset = cp.multiply(self.f[m, k], cp.Constant(unit))
                conic.build_s_lemma_lmi(
                    prog, instance.estimates[m, m, k], self.phi[m],
                    instance.radii[m, m, k], bb[row, m], lam[row, m], offset=offset)
                for n in range(M):
                    if n == m:
                        continue
                    conic.build_s_lemma_lmi(
                        prog, instance.estimates[m, n, k], self.phi[n],
                        instance.radii[m, n, k], bb[row, n], lam[row, n])
                prog.add("soc",
                         cp.norm(cp.hstack([bb[row, :], cp.Constant(np.ones(1))]), 2)
                         <= cp.multiply(self.a, self.f[m, k]))
        for m in range(M):
            prog.add("soc", cp.norm(self.phi[m], "fro") <= np.sqrt(instance.powers[m]))
        prog.minimize(0)
        self.prog = prog

    def feasible_at(self, a: float, tol: float = 1e-7):
        self.a.value = a
        rep = conic.solve(self.prog, tol=tol)
        if rep.status != conic.STATUS_OPTIMAL:
            return False, None, None
        mats = np.stack([p.value for p in self.phi])
        f = np.maximum(np.asarray(self.f.value, dtype=float), 1e-12)
        return True, PrecoderSet(mats), EqualizerSet(f)


def minmax_mse_gevp(instance: NetworkInstance, delta: float = DEFAULT_DELTA):
    """Minimize the worst-case RMS-MSE level over precoders and real
    equalizers by bisection over LMI feasibility.  Returns
    (a_star, PrecoderSet, EqualizerSet)."""
    prog = _MseFeasibilityProgram(instance)
    hi = 1.0
    feas, prec, eq = prog.feasible_at(hi)
    attempts = 0
    while not feas and attempts < 6:
        hi *= 1.5
        feas, prec, eq = prog.feasible_at(hi)
        attempts += 1
    if not feas:
        raise RuntimeError("worst-case-MSE level 1 not attainable; invalid instance?")
    lo = 0.0
    while hi - lo > delta:
        mid = 0.5 * (lo + hi)
        ok, p, e = prog.feasible_at(mid)
        if ok:
            hi, prec, eq = mid, p, e
        else:
            lo = mid
    return hi, prec, eq


def mse_rate_lower_bound(a_star: float) -> float:
    """Rate lower bound from an RMS-MSE level: -log(a^2), clipped at 0."""
    return max(0.0, -2.0 * float(np.log(a_star)))
