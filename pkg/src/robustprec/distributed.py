"""Limited-cooperation max-min optimization.

Three levels of coordination: unilateral per-cell updates with veto
messaging (round-robin and greedy variants), and a dual-decomposition
subgradient method that reaches the centralized optimum by exchanging
scalar leakage bounds between base stations.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field

import cvxpy as cp
import numpy as np

from . import conic
from .instance import NetworkInstance, PrecoderSet
from .maxmin import (DEFAULT_DELTA, _B_FEAS_SLACK, BisectionTrace, a_max_init,
                     matched_filter_precoders)
from .worst_case import max_quadratic_over_ball, sinr_lower_bound


@dataclass
class Message:
    """One entry of the simulated in-process message channel.

    kind is one of "broadcast_w" (a BS publishes its transmit covariance),
    "error" (a veto), "update" (a committed proposal), or "beta" (one
    leakage-copy exchange of the dual method).  receiver None means
    broadcast to all.
    """

    kind: str
    sender: int
    receiver: int | None = None
    payload: dict = field(default_factory=dict)

    def to_json(self) -> str:
        return json.dumps({"kind": self.kind, "sender": self.sender,
                           "receiver": self.receiver, "payload": self.payload},
                          sort_keys=True)


def save_event_log(path, messages) -> None:
    """Write an event log as JSON lines, one message per line."""
    with open(path, "w") as fh:
        for msg in messages:
            fh.write(msg.to_json() + "\n")


def load_event_log(path) -> list:
    out = []
    with open(path) as fh:
        for line in fh:
            if line.strip():
                d = json.loads(line)
                out.append(Message(d["kind"], d["sender"], d["receiver"],
                                   d["payload"]))
    return out


def _covariance_factor(W: np.ndarray) -> np.ndarray:
    """Factor a Hermitian PSD matrix as W = L L^H (eigen route, tolerant of
    rank deficiency)."""
    W = np.asarray(W, dtype=complex)
    vals, vecs = np.linalg.eigh(0.5 * (W + W.conj().T))
    vals = np.maximum(vals, 0.0)
    return vecs * np.sqrt(vals)


def worst_interference(instance: NetworkInstance, m: int, k: int,
                       interference_map: dict) -> float:
    """Worst-case total other-cell interference power at user (m, k) when
    each other BS n transmits with covariance interference_map[n]."""
    total = 0.0
    for n, W in interference_map.items():
        if n == m:
            continue
        L = _covariance_factor(W)
        total += max_quadratic_over_ball(
            instance.estimates[m, n, k], L, instance.radii[m, n, k])
    return total


class _LocalPowerProgram:
    """Per-cell power-minimization cone program at worst-case SINR target a,
    with other-cell interference-plus-noise entering as fixed per-user
    constants (both supplied as parameters)."""

    def __init__(self, instance: NetworkInstance, m: int):
        K, N = instance.config.k, instance.config.n
        self.instance = instance
        self.m = m
        prog = conic.ConicProgram(f"local-power-{m}")
        self.sqrt_a = prog.parameter("sqrt_a", nonneg=True)
        self.sqrt_noise = prog.parameter("sqrt_noise", (K,), nonneg=True)
        self.phi = prog.variable("phi", (N, K), complex=True)
        t = prog.variable("t", (K,))
        b = prog.variable("b")
        if K > 1:
            e = prog.variable("e", (K,), nonneg=True)
            lam = prog.variable("lam", (K,))
        for k in range(K):
            conic.build_soc_own_channel(
                prog, instance.estimates[m, m, k], instance.radii[m, m, k],
                self.sqrt_a, self.phi[:, k], t[k])
            parts = []
            if K > 1:
                psi = cp.hstack([self.phi[:, j:j + 1] for j in range(K) if j != k])
                conic.build_s_lemma_lmi(
                    prog, instance.estimates[m, m, k], psi,
                    instance.radii[m, m, k], e[k], lam[k])
                parts.append(cp.reshape(e[k], (1,), order="F"))
            parts.append(self.sqrt_noise[k:k + 1])
            prog.add("soc", cp.norm(cp.hstack(parts), 2) <= t[k])
        prog.add("soc", cp.norm(self.phi, "fro") <= b * np.sqrt(instance.powers[m]))
        prog.minimize(b)
        self.prog = prog

    def solve_at(self, a: float, noise_terms: np.ndarray, tol: float = 1e-7):
        self.sqrt_a.value = np.sqrt(a)
        self.sqrt_noise.value = np.sqrt(np.asarray(noise_terms, dtype=float))
        rep = conic.solve(self.prog, tol=tol)
        if not rep.ok:
            return rep.status, None, None
        return rep.status, float(rep.objective), np.asarray(self.phi.value)


def local_maxmin_update(instance: NetworkInstance, m: int,
                        interference_map: dict, delta: float = DEFAULT_DELTA):
    """Cell-m robust max-min update treating the other cells' broadcast
    transmit covariances as fixed.  Returns (a_local, phi_m)."""
    K = instance.config.k
    noise = np.array([1.0 + worst_interference(instance, m, k, interference_map)
                      for k in range(K)])
    caps = []
    for k in range(K):
        gap = max(np.linalg.norm(instance.estimates[m, m, k])
                  - instance.radii[m, m, k], 0.0)
        caps.append(instance.powers[m] * gap ** 2 / noise[k])
    a_hi = float(min(caps))
    prog = _LocalPowerProgram(instance, m)
    if a_hi <= 0:
        return 0.0, matched_filter_precoders(instance).matrices[m]
    a_min, a_max = 0.0, a_hi
    best = None
    while a_max - a_min > delta * a_max and a_max > 1e-9 * a_hi:
        a0 = 0.5 * (a_min + a_max)
        status, b, phi = prog.solve_at(a0, noise)
        if status == conic.STATUS_OPTIMAL and b is not None and b <= 1.0 + _B_FEAS_SLACK:
            a_min, best = a0, phi
        else:
            a_max = a0
    if best is None:
        return 0.0, matched_filter_precoders(instance).matrices[m]
    return a_min, best


def _local_min_sinr(instance: NetworkInstance, precoders: PrecoderSet, m: int) -> float:
    return min(sinr_lower_bound(instance, precoders, m, k)
               for k in range(instance.config.k))


def _with_cell(precoders: PrecoderSet, m: int, phi: np.ndarray) -> PrecoderSet:
    mats = precoders.matrices.copy()
    mats[m] = phi
    return PrecoderSet(mats)


def _covariances(precoders: PrecoderSet) -> dict:
    return {m: precoders.matrices[m] @ precoders.matrices[m].conj().T
            for m in range(precoders.matrices.shape[0])}


def run_unilateral_updates(instance: NetworkInstance, delta: float = DEFAULT_DELTA,
                   max_rounds: int = 20, improve_tol: float = 1e-9):
    """Round-robin unilateral updates with veto messaging.

    Each BS in turn proposes the precoder that maximizes its own local
    worst-case min-SINR against the currently broadcast covariances; the
    proposal commits only if no cell (including the proposer) sees its
    local metric decrease.  Terminates after a full round without commits.
    Returns (PrecoderSet, event log)."""
    M = instance.config.m
    precoders = matched_filter_precoders(instance)
    log = []
    for _ in range(max_rounds):
        committed = False
        for m in range(M):
            cov = _covariances(precoders)
            _, phi = local_maxmin_update(instance, m, cov, delta)
            proposal = _with_cell(precoders, m, phi)
            log.append(Message("broadcast_w", m,
                               payload={"trace": float(np.real(np.trace(
                                   phi @ phi.conj().T)))}))
            before = [_local_min_sinr(instance, precoders, n) for n in range(M)]
            after = [_local_min_sinr(instance, proposal, n) for n in range(M)]
            vetoed = False
            for n in range(M):
                if after[n] < before[n] - improve_tol:
                    log.append(Message("error", n, receiver=m))
                    vetoed = True
            if vetoed or after[m] <= before[m] + improve_tol:
                continue
            precoders = proposal
            committed = True
            log.append(Message("update", m,
                               payload={"network_min": min(after)}))
        if not committed:
            break
    return precoders, log


def run_unilateral_updates_greedy(instance: NetworkInstance, delta: float = DEFAULT_DELTA,
                          max_rounds: int = 20, improve_tol: float = 1e-9):
    """Greedy variant: each round every BS bids a candidate update and the
    one that most improves the network minimum worst-case SINR commits."""
    M = instance.config.m
    precoders = matched_filter_precoders(instance)
    log = []
    for _ in range(max_rounds):
        current = min(_local_min_sinr(instance, precoders, n) for n in range(M))
        cov = _covariances(precoders)
        best_val, best_prop, best_m = current, None, None
        for m in range(M):
            _, phi = local_maxmin_update(instance, m, cov, delta)
            proposal = _with_cell(precoders, m, phi)
            log.append(Message("broadcast_w", m,
                               payload={"trace": float(np.real(np.trace(
                                   phi @ phi.conj().T)))}))
            val = min(_local_min_sinr(instance, proposal, n) for n in range(M))
            if val > best_val + improve_tol:
                best_val, best_prop, best_m = val, proposal, m
        if best_prop is None:
            break
        precoders = best_prop
        log.append(Message("update", best_m, payload={"network_min": best_val}))
    return precoders, log


@dataclass
class DualState:
    """Consensus state of the dual-decomposition run: multipliers and the
    two leakage-bound copies per cross-cell (user, source) pair."""

    multipliers: np.ndarray        # (M, K, M): lambda[m, k, n], n != m
    copies_in: np.ndarray          # (M, K, M): BS m's copy of beta^k_{m,n}
    copies_out: np.ndarray         # (M, K, M): BS n's copy of beta^k_{m,n}
    step: float
    residual: float = np.inf
    iterations: int = 0

    def residual_now(self) -> float:
        diff = np.abs(self.copies_in - self.copies_out)
        return float(diff.max()) if diff.size else 0.0


class _DualCellProgram:
    """BS-m subproblem of the dual decomposition at SINR target a: local
    precoder, own copies of the cross-cell leakage bounds, and the
    multipliers entering the objective linearly."""

    def __init__(self, instance: NetworkInstance, m: int):
        M, K, N = instance.config.m, instance.config.k, instance.config.n
        self.instance = instance
        self.m = m
        self.others = [n for n in range(M) if n != m]
        prog = conic.ConicProgram(f"dual-cell-{m}")
        self.sqrt_a = prog.parameter("sqrt_a", nonneg=True)
        # price on this BS's copy of beta^k_{m,n} (own users) and on its copy
        # of beta^l_{n,m} (leakage it causes), flattened over (k, n) / (l, n)
        self.price_in = prog.parameter("price_in", (K, len(self.others)))
        self.price_out = prog.parameter("price_out", (K, len(self.others)))
        # anchors for the proximal damping that keeps the linearly-priced
        # copies from snapping between their box extremes every iteration
        self.ref_in = prog.parameter("ref_in", (K, len(self.others)), nonneg=True)
        self.ref_out = prog.parameter("ref_out", (K, len(self.others)), nonneg=True)
        self.phi = prog.variable("phi", (N, K), complex=True)
        self.c_in = prog.variable("c_in", (K, len(self.others)), nonneg=True)
        self.c_out = prog.variable("c_out", (K, len(self.others)), nonneg=True)
        t = prog.variable("t", (K,))
        if K > 1:
            e = prog.variable("e", (K,), nonneg=True)
            lam_intra = prog.variable("lam_intra", (K,))
        lam_out = prog.variable("lam_out", (K, len(self.others)))
        box = _copy_box_bound(instance)
        for k in range(K):
            conic.build_soc_own_channel(
                prog, instance.estimates[m, m, k], instance.radii[m, m, k],
                self.sqrt_a, self.phi[:, k], t[k])
            parts = []
            if K > 1:
                psi = cp.hstack([self.phi[:, j:j + 1] for j in range(K) if j != k])
                conic.build_s_lemma_lmi(
                    prog, instance.estimates[m, m, k], psi,
                    instance.radii[m, m, k], e[k], lam_intra[k])
                parts.append(cp.reshape(e[k], (1,), order="F"))
            parts.append(self.c_in[k, :])
            parts.append(cp.Constant(np.ones(1)))
            prog.add("soc", cp.norm(cp.hstack(parts), 2) <= t[k])
        for i, n in enumerate(self.others):
            for l in range(K):
                conic.build_s_lemma_lmi(
                    prog, instance.estimates[n, m, l], self.phi,
                    instance.radii[n, m, l], self.c_out[l, i], lam_out[l, i])
        prog.add("nonneg", self.c_in <= box)
        prog.add("nonneg", self.c_out <= box)
        prog.add("soc", cp.norm(self.phi, "fro") <= np.sqrt(instance.powers[m]))
        self.rho = 1.0
        prog.minimize(cp.sum_squares(self.phi)
                      + cp.sum(cp.multiply(self.price_in, self.c_in))
                      + cp.sum(cp.multiply(self.price_out, self.c_out))
                      + 0.5 * self.rho * cp.sum_squares(self.c_in - self.ref_in)
                      + 0.5 * self.rho * cp.sum_squares(self.c_out - self.ref_out))
        self.prog = prog

    def solve_at(self, a: float, multipliers: np.ndarray, consensus: np.ndarray,
                 tol: float = 1e-7):
        K = self.instance.config.k
        m = self.m
        self.sqrt_a.value = np.sqrt(a)
        # L = ... + sum lambda[m,k,n] (copy_in - copy_out): BS m pays
        # +lambda[m,k,n] on its own-user copies and -lambda[n,l,m] on the
        # leakage copies it produces for other cells' users.
        self.price_in.value = np.stack(
            [[multipliers[m, k, n] for n in self.others] for k in range(K)])
        self.price_out.value = np.stack(
            [[-multipliers[n, l, m] for n in self.others] for l in range(K)])
        self.ref_in.value = np.stack(
            [[consensus[m, k, n] for n in self.others] for k in range(K)])
        self.ref_out.value = np.stack(
            [[consensus[n, l, m] for n in self.others] for l in range(K)])
        rep = conic.solve(self.prog, tol=tol)
        if not rep.ok:
            return rep.status, None, None
        return (rep.status, np.asarray(self.phi.value),
                (np.asarray(self.c_in.value), np.asarray(self.c_out.value)))


class _DualCheckProgram:
    """BS-m feasibility check with the leakage-bound copies pinned to their
    consensus values (entered as parameters)."""

    def __init__(self, instance: NetworkInstance, m: int):
        M, K, N = instance.config.m, instance.config.k, instance.config.n
        self.instance = instance
        self.m = m
        self.others = [n for n in range(M) if n != m]
        prog = conic.ConicProgram(f"dual-check-{m}")
        self.sqrt_a = prog.parameter("sqrt_a", nonneg=True)
        self.beta_in = prog.parameter("beta_in", (K, len(self.others)), nonneg=True)
        self.beta_out = prog.parameter("beta_out", (K, len(self.others)), nonneg=True)
        # the LMI builder needs a variable bound to stay parameter-affine,
        # so the pinned value enters through an equality constraint
        bvar_out = prog.variable("bvar_out", (K, len(self.others)), nonneg=True)
        prog.add("zero", bvar_out == self.beta_out)
        self.phi = prog.variable("phi", (N, K), complex=True)
        t = prog.variable("t", (K,))
        if K > 1:
            e = prog.variable("e", (K,), nonneg=True)
            lam_intra = prog.variable("lam_intra", (K,))
        lam_out = prog.variable("lam_out", (K, len(self.others)))
        for k in range(K):
            conic.build_soc_own_channel(
                prog, instance.estimates[m, m, k], instance.radii[m, m, k],
                self.sqrt_a, self.phi[:, k], t[k])
            parts = []
            if K > 1:
                psi = cp.hstack([self.phi[:, j:j + 1] for j in range(K) if j != k])
                conic.build_s_lemma_lmi(
                    prog, instance.estimates[m, m, k], psi,
                    instance.radii[m, m, k], e[k], lam_intra[k])
                parts.append(cp.reshape(e[k], (1,), order="F"))
            parts.append(self.beta_in[k, :])
            parts.append(cp.Constant(np.ones(1)))
            prog.add("soc", cp.norm(cp.hstack(parts), 2) <= t[k])
        for i, n in enumerate(self.others):
            for l in range(K):
                conic.build_s_lemma_lmi(
                    prog, instance.estimates[n, m, l], self.phi,
                    instance.radii[n, m, l], bvar_out[l, i], lam_out[l, i])
        prog.add("soc", cp.norm(self.phi, "fro") <= np.sqrt(instance.powers[m]))
        prog.minimize(cp.sum_squares(self.phi))
        self.prog = prog

    def solve_at(self, a: float, beta: np.ndarray, tol: float = 1e-7):
        K = self.instance.config.k
        m = self.m
        self.sqrt_a.value = np.sqrt(a)
        self.beta_in.value = np.stack(
            [[beta[m, k, n] for n in self.others] for k in range(K)])
        self.beta_out.value = np.stack(
            [[beta[n, l, m] for n in self.others] for l in range(K)])
        rep = conic.solve(self.prog, tol=tol)
        if not rep.ok:
            return rep.status, None
        return rep.status, np.asarray(self.phi.value)


def _actual_leakages(instance: NetworkInstance, precoders: PrecoderSet) -> np.ndarray:
    """beta[m, k, n] = worst-case leakage magnitude at user (m, k) from BS
    n's current precoder."""
    M, K = instance.config.m, instance.config.k
    beta = np.zeros((M, K, M))
    for m in range(M):
        for n in range(M):
            if n == m:
                continue
            for k in range(K):
                beta[m, k, n] = np.sqrt(max_quadratic_over_ball(
                    instance.estimates[m, n, k], precoders.matrices[n],
                    instance.radii[m, n, k]))
    return beta


def _copy_box_bound(instance: NetworkInstance) -> float:
    """Upper bound on any worst-case leakage magnitude: the copies live in
    [0, B] so each dual subproblem stays bounded for any multiplier sign."""
    best = 0.0
    for m in range(instance.config.m):
        for n in range(instance.config.m):
            if n == m:
                continue
            for k in range(instance.config.k):
                norm = np.linalg.norm(instance.estimates[m, n, k])
                best = max(best, (norm + instance.radii[m, n, k])
                           * np.sqrt(instance.powers[n]))
    return float(best)


def dual_feasibility_check(instance: NetworkInstance, a: float, mu: float = 20.0,
                           max_iters: int = 60, consensus_tol: float = 1e-3,
                           average_after: int = 30, log=None, _programs=None,
                           multipliers0=None):
    """Multiplier consensus over the per-BS subproblems at SINR target a.

    Iterates the decoupled cone programs and constant-step multiplier
    updates lambda += mu (copy_in - copy_out) until the
    copies agree within consensus_tol, then (or after average_after
    iterations) pins both copies to their average and re-solves each BS
    problem as the final feasibility verdict.  Returns
    (feasible, PrecoderSet-or-None, DualState)."""
    M, K = instance.config.m, instance.config.k
    progs, checks, locals_ = _programs or (
        [_DualCellProgram(instance, m) for m in range(M)],
        [_DualCheckProgram(instance, m) for m in range(M)],
        [_LocalPowerProgram(instance, m) for m in range(M)])
    mult0 = (np.array(multipliers0, dtype=float) if multipliers0 is not None
             else np.zeros((M, K, M)))
    state = DualState(multipliers=mult0,
                      copies_in=np.zeros((M, K, M)),
                      copies_out=np.zeros((M, K, M)), step=mu)
    anchor = np.zeros((M, K, M))
    last_phis = [None] * M
    for it in range(1, max_iters + 1):
        for m in range(M):
            status, phi, copies = progs[m].solve_at(a, state.multipliers, anchor)
            if copies is None:
                if status == conic.STATUS_NUMERICAL:
                    # solver stall from extreme prices: keep this BS's
                    # previous copies for the round instead of misreading
                    # the stall as infeasibility of the target
                    continue
                state.iterations = it
                return False, None, state
            last_phis[m] = phi
            c_in, c_out = copies
            for i, n in enumerate(progs[m].others):
                for k in range(K):
                    state.copies_in[m, k, n] = c_in[k, i]
                    state.copies_out[n, k, m] = c_out[k, i]
                    if log is not None:
                        log.append(Message("beta", m, receiver=n,
                                           payload={"k": k, "cell": m,
                                                    "value": float(c_in[k, i])}))
        state.iterations = it
        state.residual = state.residual_now()
        anchor = 0.5 * (state.copies_in + state.copies_out)
        if state.residual < consensus_tol or it >= average_after:
            break
        state.multipliers += mu * (state.copies_in - state.copies_out)
    # Any common pinning of the copies yields a sound feasibility
    # certificate (the leakage LMIs hold at the source BS).  Try the
    # averaged consensus and the one-sided pinnings; if none certify, fall
    # back to min-power control rounds, which settle borderline targets
    # exactly.
    # At consensus the stacked subproblem solutions are themselves a primal
    # point; evaluating its worst-case SINR bounds directly avoids
    # re-solving a razor-thin feasibility program at the boundary.
    if all(phi is not None for phi in last_phis):
        combined = PrecoderSet(np.stack(last_phis))
        lbs = [sinr_lower_bound(instance, combined, m, k)
               for m in range(M) for k in range(K)]
        if min(lbs) >= a * (1.0 - 1e-3):
            return True, combined, state
    average = 0.5 * (state.copies_in + state.copies_out)
    # Uniformly rescaled pinnings stay sound (every source's leakage cap
    # equals the matching receiver's assumed interference); scaling in both
    # directions gives slack to whichever side sits on the boundary.
    candidates = [average, 1.05 * average, 0.95 * average, 1.1 * average,
                  0.9 * average, state.copies_out,
                  np.maximum(state.copies_in, state.copies_out)]
    for consensus in candidates:
        mats = []
        for m in range(M):
            _, phi = checks[m].solve_at(a, consensus)
            if phi is None:
                mats = None
                break
            mats.append(phi)
        if mats is not None:
            return True, PrecoderSet(np.stack(mats)), state
    feasible, prec = _power_control_feasible(instance, a, locals_)
    return feasible, prec, state


def _power_control_feasible(instance: NetworkInstance, a: float, progs=None,
                            max_rounds: int = 40, tol: float = 1e-6):
    """Feasibility of SINR target a by synchronous min-power rounds.

    Interference starts at zero, so the per-cell minimum powers rise
    monotonically toward the least fixed point; exceeding a power budget on
    the way up proves infeasibility, and a converged iterate is certified
    by evaluating the worst-case SINR bounds directly."""
    M, K = instance.config.m, instance.config.k
    progs = progs or [_LocalPowerProgram(instance, m) for m in range(M)]
    noise = np.ones((M, K))
    prec = None
    for _ in range(max_rounds):
        mats, worst_b = [], 0.0
        for m in range(M):
            status, b, phi = progs[m].solve_at(a, noise[m])
            if phi is None:
                return False, None
            worst_b = max(worst_b, b)
            mats.append(phi)
        if worst_b > 1.0 + 1e-6:
            return False, None
        prec = PrecoderSet(np.stack(mats))
        beta = _actual_leakages(instance, prec)
        new_noise = 1.0 + (beta ** 2).sum(axis=2)
        if np.max(np.abs(new_noise - noise)) < tol * max(1.0, float(noise.max())):
            noise = new_noise
            break
        noise = new_noise
    if prec is None:
        return False, None
    lbs = [sinr_lower_bound(instance, prec, m, k)
           for m in range(M) for k in range(K)]
    if min(lbs) >= a * (1.0 - 1e-6):
        return True, prec
    return False, None


def distributed_maxmin(instance: NetworkInstance, delta: float = DEFAULT_DELTA,
                       mu: float = 20.0, max_iters: int = 60,
                       consensus_tol: float = 1e-3):
    """Bisection on the worst-case SINR target with the dual-decomposition
    consensus run as the feasibility oracle.  Returns
    (a_star, PrecoderSet, BisectionTrace)."""
    M = instance.config.m
    programs = ([_DualCellProgram(instance, m) for m in range(M)],
                [_DualCheckProgram(instance, m) for m in range(M)],
                [_LocalPowerProgram(instance, m) for m in range(M)])
    a_hi = a_max_init(instance)
    trace = BisectionTrace(delta=delta)
    if a_hi <= 0:
        trace.degenerate = True
        return 0.0, matched_filter_precoders(instance), trace
    a_min, a_max = 0.0, a_hi
    best = None
    while a_max - a_min > delta * a_max and a_max > 1e-9 * a_hi:
        a0 = 0.5 * (a_min + a_max)
        feasible, prec, st = dual_feasibility_check(
            instance, a0, mu=mu, max_iters=max_iters,
            consensus_tol=consensus_tol, average_after=max_iters,
            _programs=programs)
        if not feasible:
            # the price update can oscillate at an aggressive step even
            # when the target is feasible; retry with smaller steps before
            # trusting an infeasible verdict
            for mu_retry in (mu / 4.0, mu / 16.0):
                feasible, prec, st = dual_feasibility_check(
                    instance, a0, mu=mu_retry, max_iters=max_iters,
                    consensus_tol=consensus_tol, average_after=max_iters,
                    _programs=programs)
                if feasible:
                    break
        trace.probes.append((a0, 1.0 if feasible else None))
        if feasible:
            a_min, best = a0, prec
        else:
            a_max = a0
        trace.brackets.append((a_min, a_max))
    trace.a_star = a_min
    if best is None:
        trace.degenerate = True
        return 0.0, matched_filter_precoders(instance), trace
    # report the level the returned precoders actually certify, which can
    # differ from the last feasible probe by the acceptance slack
    achieved = min(sinr_lower_bound(instance, best, m, k)
                   for m in range(M) for k in range(instance.config.k))
    trace.a_star = achieved
    return achieved, best, trace
