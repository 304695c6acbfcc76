"""Comparator precoder designs.

Two families: per-cell zero forcing on the channel estimates with a nominal
in-cell power allocation (no robustness), and per-beam worst-case SLINR
maximization, where each beam's signal-to-leakage-interference-plus-noise
ratio depends only on that beam, so the designs decouple across users.
"""

from __future__ import annotations

import itertools

import cvxpy as cp
import numpy as np

from . import conic
from .instance import NetworkInstance, PrecoderSet
from .maxmin import DEFAULT_DELTA, _B_FEAS_SLACK
from .worst_case import worst_case_slinr

__all__ = ["zero_forcing", "slinr_beamforming", "slinr_profile_search"]


def _waterfill(gains: np.ndarray, total: float) -> np.ndarray:
    """Allocate ``total`` power over parallel channels with gains g_k to
    maximize sum log(1 + p_k g_k): p_k = (nu - 1/g_k)^+ at the common water
    level nu."""
    inv = 1.0 / np.asarray(gains, dtype=float)
    order = np.argsort(inv)
    active = len(inv)
    while active > 0:
        idx = order[:active]
        nu = (total + inv[idx].sum()) / active
        if nu >= inv[order[active - 1]]:
            break
        active -= 1
    p = np.maximum(nu - inv, 0.0)
    p[order[active:]] = 0.0
    return p


def zero_forcing(instance: NetworkInstance, objective: str = "maxmin") -> PrecoderSet:
    """Per-cell zero forcing on the stacked in-cell channel estimates.

    Each BS takes its beam directions from the normalized columns of the
    pseudo-inverse of its own-cell estimate matrix (so nominal in-cell
    interference vanishes), then allocates power on those fixed directions
    for the chosen nominal in-cell objective: equal-SINR allocation for
    ``maxmin``, waterfilling for ``sumrate``.  Other cells and channel
    uncertainty are ignored.
    """
    if objective not in ("maxmin", "sumrate"):
        raise ValueError(f"objective must be 'maxmin' or 'sumrate', got {objective!r}")
    M, K, N = instance.config.m, instance.config.k, instance.config.n
    if K > N:
        raise ValueError("zero forcing needs at least as many antennas as users")
    mats = np.zeros((M, N, K), dtype=complex)
    for m in range(M):
        H = instance.estimates[m, m]  # (K, N), row k = user k's estimate
        if np.linalg.matrix_rank(H) < K:
            raise ValueError(f"in-cell estimate matrix of cell {m} is rank deficient")
        D = np.linalg.pinv(H)  # (N, K)
        dirs = D / np.linalg.norm(D, axis=0, keepdims=True)
        gains = np.abs(np.einsum("kn,nk->k", H, dirs)) ** 2
        total = float(instance.powers[m])
        if objective == "maxmin":
            # equalizing p_k * g_k maximizes the minimum nominal SINR on
            # fixed orthogonalized directions
            inv = 1.0 / gains
            p = total * inv / inv.sum()
        else:
            p = _waterfill(gains, total)
        mats[m] = dirs * np.sqrt(p)
    return PrecoderSet(mats)


def _leak_channels(instance: NetworkInstance, m: int, k: int):
    """Channels onto which beam (m, k) leaks: other users of cell m and all
    users of other cells, each with its uncertainty radius."""
    out = []
    for j in range(instance.config.k):
        if j != k:
            out.append((instance.estimates[m, m, j], instance.radii[m, m, j]))
    for n in range(instance.config.m):
        if n == m:
            continue
        for l in range(instance.config.k):
            out.append((instance.estimates[n, m, l], instance.radii[n, m, l]))
    return out


class _SlinrBeamProgram:
    """Min-power cone program for one beam at SLINR target a, parametric in
    sqrt(a) and the per-beam power budget: own-channel SOC for the
    numerator, one rank-one robust-leakage LMI per victim channel for the
    denominator."""

    def __init__(self, instance: NetworkInstance, m: int, k: int):
        N = instance.config.n
        self.instance, self.m, self.k = instance, m, k
        prog = conic.ConicProgram(f"slinr-beam-{m}-{k}")
        self.sqrt_a = prog.parameter("sqrt_a", nonneg=True)
        self.sqrt_p = prog.parameter("sqrt_p", nonneg=True)
        self.w = prog.variable("w", (N,), complex=True)
        t = prog.variable("t")
        b = prog.variable("b")
        conic.build_soc_own_channel(
            prog, instance.estimates[m, m, k], instance.radii[m, m, k],
            self.sqrt_a, self.w, t)
        leaks = _leak_channels(instance, m, k)
        parts = [cp.Constant(np.ones(1))]
        if leaks:
            e = prog.variable("e", (len(leaks),), nonneg=True)
            lam = prog.variable("lam", (len(leaks),))
            w_col = cp.reshape(self.w, (N, 1), order="F")
            for i, (h, eps) in enumerate(leaks):
                conic.build_s_lemma_lmi(prog, h, w_col, eps, e[i], lam[i])
            parts.append(e)
        prog.add("soc", cp.norm(cp.hstack(parts), 2) <= t)
        prog.add("soc", cp.norm(self.w, 2) <= cp.multiply(b, self.sqrt_p))
        prog.minimize(b)
        self.prog = prog
        self.b = b

    def solve_at(self, a: float, power: float, tol: float = 1e-7):
        self.sqrt_a.value = np.sqrt(a)
        self.sqrt_p.value = np.sqrt(power)
        rep = conic.solve(self.prog, tol=tol)
        if not rep.ok:
            return rep.status, None, None
        return rep.status, float(rep.objective), np.array(self.w.value).reshape(-1)


def _max_slinr_beam(prog: _SlinrBeamProgram, power: float,
                    delta: float = DEFAULT_DELTA):
    """Bisection on the worst-case SLINR level for one beam under a power
    budget.  Returns (w, level); the beam is rescaled to the full budget,
    which never decreases its worst-case SLINR."""
    instance, m, k = prog.instance, prog.m, prog.k
    h = instance.estimates[m, m, k]
    eps = instance.radii[m, m, k]
    gap = max(np.linalg.norm(h) - eps, 0.0)
    mf = np.sqrt(power) * h.conj() / np.linalg.norm(h)
    a_hi = power * gap ** 2
    if a_hi <= 0 or power <= 0:
        if power <= 0:
            return np.zeros_like(h), 0.0
        return mf, worst_case_slinr(instance, _solo_set(instance, m, k, mf), m, k)
    a_lo, best = 0.0, mf
    hi = a_hi
    while hi - a_lo > delta * a_hi:
        a0 = 0.5 * (a_lo + hi)
        status, b, w = prog.solve_at(a0, power)
        if status == conic.STATUS_OPTIMAL and b is not None and b <= 1.0 + _B_FEAS_SLACK:
            a_lo, best = a0, w
        else:
            hi = a0
    nrm = np.linalg.norm(best)
    if nrm > 0:
        best = best * (np.sqrt(power) / nrm)
    return best, a_lo


def _solo_set(instance: NetworkInstance, m: int, k: int, w: np.ndarray) -> PrecoderSet:
    """PrecoderSet with beam (m, k) set to w and everything else zero; the
    per-beam SLINR ignores all other beams, so this suffices to score w."""
    mats = np.zeros((instance.config.m, instance.config.n, instance.config.k),
                    dtype=complex)
    mats[m, :, k] = w
    return PrecoderSet(mats)


def slinr_beamforming(instance: NetworkInstance, power_profile=None,
                      delta: float = DEFAULT_DELTA) -> PrecoderSet:
    """Per-beam worst-case SLINR maximization under per-user power budgets
    (default: equal split of each cell's budget).  Each beam is found by
    bisection on the SLINR level around the min-power cone program."""
    M, K, N = instance.config.m, instance.config.k, instance.config.n
    if power_profile is None:
        power_profile = np.outer(instance.powers / K, np.ones(K))
    profile = np.asarray(power_profile, dtype=float)
    if profile.shape != (M, K):
        raise ValueError(f"power_profile must have shape {(M, K)}")
    sums = profile.sum(axis=1)
    if np.any(sums > instance.powers * (1 + 1e-9)):
        raise ValueError("per-user powers exceed a cell budget")
    mats = np.zeros((M, N, K), dtype=complex)
    for m in range(M):
        for k in range(K):
            prog = _SlinrBeamProgram(instance, m, k)
            w, _ = _max_slinr_beam(prog, float(profile[m, k]), delta)
            mats[m, :, k] = w
    return PrecoderSet(mats)


def slinr_profile_search(instance: NetworkInstance, resolution: int = 4,
                         delta: float = DEFAULT_DELTA) -> PrecoderSet:
    """Grid search over per-cell power splits maximizing the sum of
    worst-case SLINRs.  The per-beam values decouple, so each beam is scored
    once per grid power level and the best split per cell is assembled from
    those scores."""
    if resolution < 1:
        raise ValueError("resolution must be at least 1")
    M, K, N = instance.config.m, instance.config.k, instance.config.n
    mats = np.zeros((M, N, K), dtype=complex)
    for m in range(M):
        total = float(instance.powers[m])
        levels = [total * i / resolution for i in range(resolution + 1)]
        scores = np.zeros((K, resolution + 1))
        beams = {}
        for k in range(K):
            prog = _SlinrBeamProgram(instance, m, k)
            for i, p in enumerate(levels):
                if p == 0.0:
                    beams[k, i] = np.zeros(N, dtype=complex)
                    continue
                w, _ = _max_slinr_beam(prog, p, delta)
                beams[k, i] = w
                scores[k, i] = worst_case_slinr(instance, _solo_set(instance, m, k, w), m, k)
        best_val, best_split = -1.0, None
        for split in itertools.product(range(resolution + 1), repeat=K):
            if sum(split) != resolution:
                continue
            val = sum(scores[k, split[k]] for k in range(K))
            if val > best_val:
                best_val, best_split = val, split
        for k in range(K):
            mats[m, :, k] = beams[k, best_split[k]]
    return PrecoderSet(mats)
