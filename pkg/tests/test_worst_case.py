import numpy as np
import pytest

from robustprec.instance import (EqualizerSet, NetworkConfig, PrecoderSet,
                                 sample_instance, sample_perturbation)
from robustprec.worst_case import (max_quadratic_over_ball, max_shifted_norm_sq,
                                   min_rate_lower_bound, nominal_sinr,
                                   oracle_ball_quadratic, oracle_mse_estimate,
                                   oracle_sinr_estimate, rates_from,
                                   robust_gain_extrema, sinr_lower_bound,
                                   sinr_upper_bound, sum_rate_lower_bound,
                                   worst_case_mse, worst_case_sinr_single,
                                   worst_case_slinr)

RNG = np.random.default_rng(0)


def _cvec(n):
    return RNG.standard_normal(n) + 1j * RNG.standard_normal(n)


def test_gain_extrema_zero_radius():
    h, w = _cvec(3), _cvec(3)
    lo, hi = robust_gain_extrema(h, w, 0.0)
    assert lo == pytest.approx(abs(h @ w) ** 2)
    assert hi == pytest.approx(abs(h @ w) ** 2)


def test_gain_extrema_vs_sampling_oracle():
    for trial in range(30):
        n = int(RNG.integers(1, 5))
        h, w = _cvec(n), _cvec(n)
        eps = float(RNG.random() * 0.5)
        lo, hi = robust_gain_extrema(h, w, eps)
        samples_lo, samples_hi = np.inf, -np.inf
        for _ in range(400):
            d = _cvec(n)
            d *= eps / np.linalg.norm(d)
            v = abs((h + d) @ w) ** 2
            samples_lo, samples_hi = min(samples_lo, v), max(samples_hi, v)
        assert hi >= samples_hi - 1e-9
        assert lo <= samples_lo + 1e-9


def test_gain_extrema_ellipsoid_closed_form():
    n = 3
    h, w = _cvec(n), _cvec(n)
    q = _cvec(n * n).reshape(n, n)
    Q = q @ q.conj().T + np.eye(n)
    lo, hi = robust_gain_extrema(h, w, 0.3, Q=Q)
    mag = abs(h @ w)
    s = np.sqrt(np.real(np.vdot(w, np.linalg.solve(Q, w))))
    assert hi == pytest.approx((mag + 0.3 * s) ** 2)
    assert lo == pytest.approx(max(mag - 0.3 * s, 0.0) ** 2)
    with pytest.raises(ValueError):
        robust_gain_extrema(h, w, -0.1)


def test_max_quadratic_matches_oracle():
    for trial in range(20):
        n = int(RNG.integers(1, 5))
        j = int(RNG.integers(1, 4))
        h = _cvec(n)
        A = _cvec(n * j).reshape(n, j)
        eps = float(RNG.random() * 0.6 + 0.01)
        exact = max_quadratic_over_ball(h, A, eps)
        osearch = oracle_ball_quadratic(h, A, eps, samples=600, seed=trial)
        assert exact >= osearch - 1e-8
        assert exact == pytest.approx(osearch, rel=1e-5, abs=1e-8)


def test_max_shifted_norm_matches_ascent_oracle():
    from robustprec.worst_case import _grad_norm_sq, _project_ball

    for trial in range(20):
        rng = np.random.default_rng(100 + trial)
        n = int(rng.integers(1, 5))
        j = int(rng.integers(1, 4))
        h = rng.standard_normal(n) + 1j * rng.standard_normal(n)
        A = (rng.standard_normal((n, j)) + 1j * rng.standard_normal((n, j)))
        c = rng.standard_normal(j) + 1j * rng.standard_normal(j)
        eps = float(rng.random() * 0.6 + 0.01)

        def f(d):
            u = (h + d) @ A - c
            return float(np.real(np.vdot(u, u)))

        exact = max_shifted_norm_sq(h, A, c, eps)
        # sampling plus projected gradient ascent, independent of the
        # secular-equation code path
        best_val, best_d = -np.inf, None
        for _ in range(400):
            raw = rng.standard_normal(n) + 1j * rng.standard_normal(n)
            d = eps * raw / np.linalg.norm(raw)
            v = f(d)
            if v > best_val:
                best_val, best_d = v, d
        d, val = best_d, best_val
        step = 0.1 * eps
        for _ in range(400):
            g = _grad_norm_sq(h + d, A, c)
            moved = False
            trial_step = step
            for _ in range(30):
                x = np.concatenate([d.real, d.imag]) + trial_step * g
                x = _project_ball(x, eps)
                dt = x[:n] + 1j * x[n:]
                tv = f(dt)
                if tv > val + 1e-14:
                    d, val, moved = dt, tv, True
                    step = trial_step * 1.5
                    break
                trial_step /= 2
            if not moved:
                break
        assert exact >= val - 1e-8
        assert exact == pytest.approx(val, rel=1e-5, abs=1e-7)


def test_max_quadratic_hard_case():
    # channel orthogonal to the dominant right space triggers the
    # norm-filling branch; cross-check against the ascent oracle
    h = np.array([1.0 + 0j, 0.0])
    A = np.array([[0.0, 0.0], [3.0, 0.0]], dtype=complex)
    eps = 0.5
    exact = max_quadratic_over_ball(h, A, eps)
    osearch = oracle_ball_quadratic(h, A, eps, samples=2000, seed=1)
    assert exact == pytest.approx(osearch, rel=1e-6)


def test_single_user_worst_sinr_matches_bound_and_oracle():
    inst = sample_instance(NetworkConfig(2, 1, 2), radii=0.1, powers=10.0, seed=2)
    mats = np.stack([np.sqrt(10) * (inst.estimates[m, m, 0].conj() /
                                    np.linalg.norm(inst.estimates[m, m, 0])).reshape(2, 1)
                     for m in range(2)])
    prec = PrecoderSet(mats)
    for m in range(2):
        exact = worst_case_sinr_single(inst, prec, m)
        lb = sinr_lower_bound(inst, prec, m, 0)
        ub = sinr_upper_bound(inst, prec, m, 0)
        assert exact == pytest.approx(lb, rel=1e-10)  # K=1: bound is exact
        assert lb <= ub + 1e-9
        est = oracle_sinr_estimate(inst, prec, m, 0, samples=1500, seed=3)
        assert lb <= est + 1e-7
        assert exact == pytest.approx(est, rel=1e-3)


def test_sinr_lower_bound_is_a_bound_multiuser():
    inst = sample_instance(NetworkConfig(2, 2, 2), radii=0.08, powers=10.0, seed=4)
    mats = RNG.standard_normal((2, 2, 2)) + 1j * RNG.standard_normal((2, 2, 2))
    prec = PrecoderSet(mats)
    for m in range(2):
        for k in range(2):
            lb = sinr_lower_bound(inst, prec, m, k)
            est = oracle_sinr_estimate(inst, prec, m, k, samples=1000, seed=5)
            assert lb <= est + 1e-7
            assert lb <= nominal_sinr(inst, prec, m, k) + 1e-9


def test_worst_case_mse_matches_oracle():
    inst = sample_instance(NetworkConfig(2, 2, 2), radii=0.1, powers=5.0, seed=6)
    mats = RNG.standard_normal((2, 2, 2)) + 1j * RNG.standard_normal((2, 2, 2))
    prec = PrecoderSet(mats)
    eq = EqualizerSet(np.full((2, 2), 0.7))
    for m in range(2):
        for k in range(2):
            exact = worst_case_mse(inst, prec, eq, m, k)
            est = oracle_mse_estimate(inst, prec, eq, m, k, samples=600, seed=7)
            assert exact >= est - 1e-7
            assert exact == pytest.approx(est, rel=5e-3)


def test_slinr_zero_radius_is_nominal():
    inst = sample_instance(NetworkConfig(2, 2, 2), radii=0.0, powers=4.0, seed=8)
    mats = RNG.standard_normal((2, 2, 2)) + 1j * RNG.standard_normal((2, 2, 2))
    prec = PrecoderSet(mats)
    for m in range(2):
        for k in range(2):
            w = prec.beam(m, k)
            num = abs(inst.estimates[m, m, k] @ w) ** 2
            den = 1.0
            for j in range(2):
                if j != k:
                    den += abs(inst.estimates[m, m, j] @ w) ** 2
            for n in range(2):
                if n != m:
                    for l in range(2):
                        den += abs(inst.estimates[n, m, l] @ w) ** 2
            assert worst_case_slinr(inst, prec, m, k) == pytest.approx(num / den)


def test_perturbed_rates_never_undershoot_certificate():
    inst = sample_instance(NetworkConfig(2, 2, 2), radii=0.1, powers=10.0, seed=9)
    mats = RNG.standard_normal((2, 2, 2)) + 1j * RNG.standard_normal((2, 2, 2))
    prec = PrecoderSet(mats)
    bounds = {(m, k): sinr_lower_bound(inst, prec, m, k)
              for m in range(2) for k in range(2)}
    for s in range(200):
        pert = sample_perturbation(inst, seed=s, mode="surface")
        for (m, k), lb in bounds.items():
            assert nominal_sinr(inst, prec, m, k, pert) >= lb - 1e-9


def test_rates_helpers():
    assert rates_from(np.e - 1) == pytest.approx(1.0)
    with pytest.raises(ValueError):
        rates_from(-0.5)
    inst = sample_instance(NetworkConfig(1, 1, 2), radii=0.0, powers=1.0, seed=0)
    prec = PrecoderSet(inst.estimates[0, 0, 0].conj().reshape(1, 2, 1)
                       / np.linalg.norm(inst.estimates[0, 0, 0]))
    assert min_rate_lower_bound(inst, prec) == pytest.approx(
        sum_rate_lower_bound(inst, prec))
