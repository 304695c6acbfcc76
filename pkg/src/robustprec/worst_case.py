"""Worst-case SINR / MSE / SLINR evaluations for fixed precoders.

The workhorse is ``max_shifted_norm_sq``: the exact maximum of
``||(h + d) A - c||^2`` over the ball ``||d|| <= eps``, computed by
maximizing a convex quadratic over a sphere (eigendecomposition plus a
secular equation in the multiplier).  Everything certified in this module
reduces to that kernel or to the closed-form gain extrema; sampling-based
estimators are provided separately as independent oracles.
"""

from __future__ import annotations

import numpy as np
from scipy.linalg import cho_factor, cho_solve
from scipy.optimize import brentq

from .instance import EqualizerSet, NetworkInstance, PrecoderSet, sample_perturbation

_SECULAR_TOL = 1e-10


def _real_embed_rows(A: np.ndarray) -> np.ndarray:
    """Map the complex (N, J) matrix A to the real (2N, 2J) matrix M such
    that, for a complex row x = a + ib represented as (a, b) in R^{2N},
    (a, b) @ M is the (Re, Im) stacking of x @ A."""
    Ar, Ai = A.real, A.imag
    return np.block([[Ar, Ai], [-Ai, Ar]])


def max_shifted_norm_sq(h: np.ndarray, A: np.ndarray, c, eps: float) -> float:
    """Exact max over ||d||_2 <= eps of ||(h + d) @ A - c||^2.

    h is a complex row of length N, A complex (N, J), c a complex row of
    length J (or None for zero offset).
    """
    h = np.asarray(h, dtype=complex).reshape(-1)
    A = np.asarray(A, dtype=complex)
    if A.ndim == 1:
        A = A[:, None]
    n, j = A.shape
    if c is None:
        c = np.zeros(j, dtype=complex)
    c = np.asarray(c, dtype=complex).reshape(-1)
    if c.shape[0] != j:
        raise ValueError(f"offset length {c.shape[0]} != {j}")
    if h.shape[0] != n:
        raise ValueError(f"h length {h.shape[0]} != {n}")
    r0 = h @ A - c
    c0 = float(np.real(np.vdot(r0, r0)))
    if eps == 0.0 or j == 0 or not np.any(A):
        return c0

    M = _real_embed_rows(A)                       # (2N, 2J)
    S = M @ M.T                                   # PSD quadratic form
    b = M @ np.concatenate([r0.real, r0.imag])    # linear term

    lam, V = np.linalg.eigh(S)
    beta = V.T @ b
    lmax = lam[-1]
    scale = max(abs(lmax), 1.0)
    bnorm = np.linalg.norm(b)

    def value(x):
        return float(x @ S @ x + 2 * b @ x + c0)

    if bnorm <= 1e-15 * scale * eps or bnorm == 0.0:
        x = eps * V[:, -1]
        return value(x)

    # Solve the secular equation in the shifted variable t = mu - lmax so
    # that the eigenvalue gaps enter exactly and the bracket endpoints do
    # not suffer catastrophic cancellation when lmax dominates.
    gaps = lmax - lam  # nonnegative

    def phi(t):
        return float(np.sum((beta / (t + gaps)) ** 2))

    t_lo = max(1e-14 * scale, 1e-300)
    if phi(t_lo) < eps * eps:
        # hard case: multiplier pinned at lmax, fill norm inside top eigenspace
        top = lam > lmax - 1e-12 * scale
        coeff = np.zeros_like(beta)
        coeff[~top] = beta[~top] / (lmax - lam[~top])
        x = V @ coeff
        deficit = eps * eps - float(x @ x)
        if deficit > 0:
            x = x + np.sqrt(deficit) * V[:, -1]
        return value(x)
    t_hi = bnorm / eps
    while phi(t_hi) >= eps * eps:
        t_hi *= 2.0
    t = brentq(lambda t: phi(t) - eps * eps, t_lo, t_hi,
               xtol=_SECULAR_TOL * scale, rtol=1e-14)
    x = V @ (beta / (t + gaps))
    return value(x)


def max_quadratic_over_ball(h: np.ndarray, A: np.ndarray, eps: float) -> float:
    """Exact max over ||d|| <= eps of ||(h + d) @ A||^2."""
    return max_shifted_norm_sq(h, A, None, eps)


def robust_gain_extrema(h: np.ndarray, w: np.ndarray, eps: float, Q=None):
    """Closed-form extrema of |(h + x) w|^2 over the ellipsoid
    sqrt(x Q x^H) <= eps: returns (g_min, g_max)."""
    h = np.asarray(h, dtype=complex).reshape(-1)
    w = np.asarray(w, dtype=complex).reshape(-1)
    if eps < 0:
        raise ValueError("eps must be nonnegative")
    if Q is None:
        s = np.linalg.norm(w)
    else:
        Q = np.asarray(Q, dtype=complex)
        if not np.allclose(Q, Q.conj().T, atol=1e-12 * max(1.0, np.linalg.norm(Q))):
            raise ValueError("Q must be Hermitian positive definite")
        try:
            cf = cho_factor(Q)
        except np.linalg.LinAlgError as exc:
            raise ValueError("Q must be positive definite") from exc
        s = float(np.sqrt(np.real(np.vdot(w, cho_solve(cf, w)))))
    mag = abs(h @ w)
    g_min = max(mag - eps * s, 0.0) ** 2
    g_max = (mag + eps * s) ** 2
    return g_min, g_max


def nominal_sinr(instance: NetworkInstance, precoders: PrecoderSet, m: int, k: int,
                 pert=None) -> float:
    """SINR of user (m, k) at the channel estimates, or at estimates plus a
    given PerturbationSet."""
    def chan(n):
        hh = instance.estimates[m, n, k]
        if pert is not None:
            hh = hh + pert.deltas[m, n, k]
        return hh

    h_own = chan(m)
    num = abs(h_own @ precoders.beam(m, k)) ** 2
    den = 1.0
    den += float(np.sum(np.abs(h_own @ precoders.deleted(m, k)) ** 2))
    for n in range(instance.config.m):
        if n != m:
            den += float(np.sum(np.abs(chan(n) @ precoders.cell(n)) ** 2))
    return num / den


def worst_case_sinr_single(instance: NetworkInstance, precoders: PrecoderSet, m: int) -> float:
    """Exact worst-case SINR for single-user cells (K = 1)."""
    if instance.config.k != 1:
        raise ValueError("exact worst-case SINR only available for K=1")
    w = precoders.beam(m, 0)
    h = instance.estimates[m, m, 0]
    num = max(abs(h @ w) - instance.radii[m, m, 0] * np.linalg.norm(w), 0.0) ** 2
    den = 1.0
    for n in range(instance.config.m):
        if n == m:
            continue
        wn = precoders.beam(n, 0)
        den += (abs(instance.estimates[m, n, 0] @ wn)
                + instance.radii[m, n, 0] * np.linalg.norm(wn)) ** 2
    return num / den


def sinr_lower_bound(instance: NetworkInstance, precoders: PrecoderSet, m: int, k: int) -> float:
    """Certified lower bound on the worst-case SINR of user (m, k): exact
    per-term extrema with the coupling across numerator/denominator dropped."""
    w = precoders.beam(m, k)
    g_min, _ = robust_gain_extrema(instance.estimates[m, m, k], w, instance.radii[m, m, k])
    den = 1.0 + max_quadratic_over_ball(instance.estimates[m, m, k],
                                        precoders.deleted(m, k), instance.radii[m, m, k])
    for n in range(instance.config.m):
        if n != m:
            den += max_quadratic_over_ball(instance.estimates[m, n, k],
                                           precoders.cell(n), instance.radii[m, n, k])
    return g_min / den


def sinr_upper_bound(instance: NetworkInstance, precoders: PrecoderSet, m: int, k: int) -> float:
    """Simple worst-case SINR upper bound built from normalized beams."""
    h = instance.estimates[m, m, k]
    eps_own = instance.radii[m, m, k]
    w = precoders.beam(m, k)
    num = (np.linalg.norm(h) + eps_own) ** 2 * float(np.vdot(w, w).real)

    def f_term(hrow, eps, cell, skip=None):
        best = 0.0
        K = cell.shape[1]
        for q in range(K):
            if q == skip:
                continue
            wq = cell[:, q]
            nq = np.linalg.norm(wq)
            if nq == 0:
                continue
            best = max(best, (abs(hrow @ wq) / nq + eps) ** 2 * nq ** 2)
        return best

    den = 1.0 + f_term(h, eps_own, precoders.cell(m), skip=k)
    for n in range(instance.config.m):
        if n != m:
            den += f_term(instance.estimates[m, n, k], instance.radii[m, n, k],
                          precoders.cell(n))
    return num / den


def worst_case_mse(instance: NetworkInstance, precoders: PrecoderSet,
                   equalizers: EqualizerSet, m: int, k: int) -> float:
    """Exact worst-case MSE of user (m, k) for a fixed real positive
    equalizer; the per-channel uncertainties are disjoint so the maximum
    decomposes channel by channel."""
    f = float(equalizers.values[m, k])
    if f <= 0:
        raise ValueError("equalizer must be strictly positive")
    K = instance.config.k
    offset = np.zeros(K, dtype=complex)
    offset[k] = f
    total = max_shifted_norm_sq(instance.estimates[m, m, k], precoders.cell(m),
                                offset, instance.radii[m, m, k])
    for n in range(instance.config.m):
        if n != m:
            total += max_quadratic_over_ball(instance.estimates[m, n, k],
                                             precoders.cell(n), instance.radii[m, n, k])
    return (total + 1.0) / f ** 2


def worst_case_slinr(instance: NetworkInstance, precoders: PrecoderSet, m: int, k: int) -> float:
    """Worst-case signal-to-leakage-interference-plus-noise ratio of beam
    (m, k); numerator and denominator uncertainties are decoupled."""
    w = precoders.beam(m, k)
    num, _ = robust_gain_extrema(instance.estimates[m, m, k], w, instance.radii[m, m, k])
    den = 1.0
    for j in range(instance.config.k):
        if j != k:
            _, g = robust_gain_extrema(instance.estimates[m, m, j], w, instance.radii[m, m, j])
            den += g
    for n in range(instance.config.m):
        if n == m:
            continue
        for l in range(instance.config.k):
            _, g = robust_gain_extrema(instance.estimates[n, m, l], w, instance.radii[n, m, l])
            den += g
    return num / den


def rates_from(sinr, weights=None):
    """Rates log(1 + sinr) in nats, elementwise; weighted sum if weights given."""
    arr = np.asarray(sinr, dtype=float)
    if np.any(arr < 0):
        raise ValueError("sinr must be nonnegative")
    rates = np.log1p(arr)
    if weights is None:
        return rates if rates.ndim else float(rates)
    return float(np.sum(np.asarray(weights, dtype=float) * rates))


def min_rate_lower_bound(instance: NetworkInstance, precoders: PrecoderSet) -> float:
    """Smallest certified per-user rate, log(1 + sinr_lower_bound)."""
    vals = [sinr_lower_bound(instance, precoders, m, k)
            for m in range(instance.config.m) for k in range(instance.config.k)]
    return float(np.log1p(min(vals)))


def sum_rate_lower_bound(instance: NetworkInstance, precoders: PrecoderSet) -> float:
    """Weighted sum of certified per-user rate lower bounds."""
    total = 0.0
    for m in range(instance.config.m):
        for k in range(instance.config.k):
            total += instance.weights[m, k] * np.log1p(sinr_lower_bound(instance, precoders, m, k))
    return float(total)


# ---------------------------------------------------------------------------
# sampling oracles (kept formula-free: sampling plus projected gradient only)

def _grad_norm_sq(h, A, c):
    """Gradient of ||h A - c||^2 wrt the real embedding (Re h, Im h)."""
    u = h @ A - c
    g = A @ u.conj()
    return np.concatenate([2 * g.real, -2 * g.imag])


def _sinr_and_grads(instance, precoders, m, k, deltas):
    """SINR of user (m, k) at estimates + deltas, plus the gradient wrt each
    per-channel perturbation (real embedding)."""
    M, K = instance.config.m, instance.config.k
    h_own = instance.estimates[m, m, k] + deltas[m]
    w_own = precoders.beam(m, k)
    psi = precoders.deleted(m, k)
    num = abs(h_own @ w_own) ** 2
    den = 1.0 + float(np.real(np.vdot(h_own @ psi, h_own @ psi)))
    inter = {}
    for n in range(M):
        if n != m:
            hn = instance.estimates[m, n, k] + deltas[n]
            inter[n] = hn
            den += float(np.real(np.vdot(hn @ precoders.cell(n), hn @ precoders.cell(n))))
    sinr = num / den
    grads = {}
    gnum = _grad_norm_sq(h_own, w_own[:, None], np.zeros(1, dtype=complex))
    gden_own = _grad_norm_sq(h_own, psi, np.zeros(psi.shape[1], dtype=complex)) if psi.shape[1] else 0.0
    grads[m] = (gnum * den - num * gden_own) / den ** 2
    for n, hn in inter.items():
        gden = _grad_norm_sq(hn, precoders.cell(n), np.zeros(K, dtype=complex))
        grads[n] = -num * gden / den ** 2
    return sinr, grads


def _project_ball(x, eps):
    nrm = np.linalg.norm(x)
    if nrm > eps > 0:
        return x * (eps / nrm)
    if eps == 0:
        return np.zeros_like(x)
    return x


def oracle_sinr_estimate(instance: NetworkInstance, precoders: PrecoderSet,
                         m: int, k: int, samples: int = 10000, seed: int = 0,
                         descent_steps: int = 50) -> float:
    """Sampling upper estimate of the true worst-case SINR of user (m, k):
    surface-biased joint sampling followed by projected gradient descent.
    Independent of the certified-bound code path."""
    if samples < 1:
        raise ValueError("samples must be >= 1")
    M = instance.config.m
    N = instance.config.n
    rng = np.random.default_rng(seed)
    eps_row = instance.radii[m, :, k]

    def random_joint():
        ds = {}
        for n in range(M):
            raw = rng.standard_normal(N) + 1j * rng.standard_normal(N)
            nrm = np.linalg.norm(raw)
            ds[n] = eps_row[n] * raw / nrm if nrm > 0 else raw * 0
        return ds

    best_val = None
    best = None
    zero = {n: np.zeros(N, dtype=complex) for n in range(M)}
    for cand in [zero] + [random_joint() for _ in range(samples)]:
        val, _ = _sinr_and_grads(instance, precoders, m, k, cand)
        if best_val is None or val < best_val:
            best_val, best = val, cand

    # projected gradient descent from the best sample
    deltas = {n: best[n].copy() for n in range(M)}
    step = 1e-2
    val = best_val
    for _ in range(descent_steps):
        _, grads = _sinr_and_grads(instance, precoders, m, k, deltas)
        improved = False
        trial_step = step
        for _ in range(20):
            trial = {}
            for n in range(M):
                g = grads[n]
                x = np.concatenate([deltas[n].real, deltas[n].imag]) - trial_step * g
                x = _project_ball(x, eps_row[n])
                trial[n] = x[:N] + 1j * x[N:]
            tval, _ = _sinr_and_grads(instance, precoders, m, k, trial)
            if tval < val - 1e-15:
                deltas, val = trial, tval
                step = trial_step * 1.5
                improved = True
                break
            trial_step /= 2
        if not improved:
            break
    return min(val, best_val)


def oracle_mse_estimate(instance: NetworkInstance, precoders: PrecoderSet,
                        equalizers: EqualizerSet, m: int, k: int,
                        samples: int = 2000, seed: int = 0,
                        ascent_steps: int = 200, restarts: int = 12) -> float:
    """Sampling lower estimate of the worst-case MSE: the per-channel terms
    decouple, so each ball is maximized by sampling plus projected gradient
    ascent with restarts."""
    f = float(equalizers.values[m, k])
    K = instance.config.k
    N = instance.config.n
    rng = np.random.default_rng(seed)

    def maximize_term(h, A, c, eps):
        if eps == 0:
            u = h @ A - c
            return float(np.real(np.vdot(u, u)))

        def fval(d):
            u = (h + d) @ A - c
            return float(np.real(np.vdot(u, u)))

        cands = []
        for _ in range(samples):
            raw = rng.standard_normal(N) + 1j * rng.standard_normal(N)
            d = eps * raw / np.linalg.norm(raw)
            cands.append((fval(d), d))
        cands.sort(key=lambda t: -t[0])
        best = cands[0][0]
        for _, d0 in cands[:restarts]:
            d = d0.copy()
            val = fval(d)
            step = 0.1 * eps
            for _ in range(ascent_steps):
                g = _grad_norm_sq(h + d, A, c)
                moved = False
                trial_step = step
                for _ in range(25):
                    x = np.concatenate([d.real, d.imag]) + trial_step * g
                    x = _project_ball(x, eps)
                    dt = x[:N] + 1j * x[N:]
                    tv = fval(dt)
                    if tv > val + 1e-15:
                        d, val = dt, tv
                        step = trial_step * 1.5
                        moved = True
                        break
                    trial_step /= 2
                if not moved:
                    break
            best = max(best, val)
        return best

    offset = np.zeros(K, dtype=complex)
    offset[k] = f
    total = maximize_term(instance.estimates[m, m, k], precoders.cell(m), offset,
                          instance.radii[m, m, k])
    for n in range(instance.config.m):
        if n != m:
            total += maximize_term(instance.estimates[m, n, k], precoders.cell(n),
                                   np.zeros(K, dtype=complex), instance.radii[m, n, k])
    return (total + 1.0) / f ** 2


def oracle_ball_quadratic(h, A, eps, samples=10000, seed=0, ascent_steps=200,
                          restarts=12):
    """Sampling + ascent oracle for max ||(h + d) A||^2 over the ball."""
    h = np.asarray(h, dtype=complex).reshape(-1)
    A = np.asarray(A, dtype=complex)
    if A.ndim == 1:
        A = A[:, None]
    N = h.shape[0]
    rng = np.random.default_rng(seed)
    c = np.zeros(A.shape[1], dtype=complex)

    def fval(d):
        u = (h + d) @ A
        return float(np.real(np.vdot(u, u)))

    if eps == 0:
        return fval(np.zeros(N, dtype=complex))
    cands = []
    for _ in range(samples):
        raw = rng.standard_normal(N) + 1j * rng.standard_normal(N)
        d = eps * raw / np.linalg.norm(raw)
        cands.append((fval(d), d))
    cands.sort(key=lambda t: -t[0])
    best = cands[0][0]
    for _, d0 in cands[:restarts]:
        d = d0.copy()
        val = fval(d)
        step = 0.1 * eps
        for _ in range(ascent_steps):
            g = _grad_norm_sq(h + d, A, c)
            moved = False
            trial_step = step
            for _ in range(25):
                x = np.concatenate([d.real, d.imag]) + trial_step * g
                x = _project_ball(x, eps)
                dt = x[:N] + 1j * x[N:]
                tv = fval(dt)
                if tv > val + 1e-15:
                    d, val = dt, tv
                    step = trial_step * 1.5
                    moved = True
                    break
                trial_step /= 2
            if not moved:
                break
        best = max(best, val)
    return best
