import numpy as np
import pytest
from scipy.linalg import eigh

from robustprec.baselines import (_leak_channels, slinr_beamforming,
                                  slinr_profile_search, zero_forcing)
from robustprec.instance import NetworkConfig, NetworkInstance, sample_instance
from robustprec.worst_case import worst_case_slinr


def _orthonormal_instance():
    base = sample_instance(NetworkConfig(1, 2, 2), radii=0.0, powers=10.0, seed=0)
    est = base.estimates.copy()
    est[0, 0, 0] = [1.0, 0.0]
    est[0, 0, 1] = [0.0, 1.0]
    return NetworkInstance(base.config, est, base.radii, base.powers, base.weights)


def test_zf_orthonormal_rows_give_canonical_directions():
    inst = _orthonormal_instance()
    prec = zero_forcing(inst)
    for k in range(2):
        d = prec.beam(0, k) / np.linalg.norm(prec.beam(0, k))
        expect = np.zeros(2)
        expect[k] = 1.0
        assert np.allclose(np.abs(d), expect, atol=1e-12)


def test_zf_kills_in_cell_interference():
    inst = sample_instance(NetworkConfig(2, 2, 3), radii=0.05, powers=10.0, seed=1)
    for objective in ("maxmin", "sumrate"):
        prec = zero_forcing(inst, objective)
        for m in range(2):
            for k in range(2):
                for l in range(2):
                    if l != k:
                        assert abs(inst.estimates[m, m, k] @ prec.beam(m, l)) < 1e-10
        assert np.allclose(prec.cell_powers(), inst.powers)


def test_zf_maxmin_equalizes_nominal_sinrs():
    inst = sample_instance(NetworkConfig(2, 2, 3), radii=0.05, powers=10.0, seed=2)
    prec = zero_forcing(inst, "maxmin")
    for m in range(2):
        sinrs = [abs(inst.estimates[m, m, k] @ prec.beam(m, k)) ** 2 for k in range(2)]
        assert sinrs[0] == pytest.approx(sinrs[1], rel=1e-9)


def test_zf_sumrate_waterfilling_beats_equal_split():
    inst = sample_instance(NetworkConfig(1, 2, 2), radii=0.0, powers=10.0, seed=3)
    wf = zero_forcing(inst, "sumrate")
    mm = zero_forcing(inst, "maxmin")

    def nominal_sum(prec):
        return sum(np.log1p(abs(inst.estimates[0, 0, k] @ prec.beam(0, k)) ** 2)
                   for k in range(2))

    assert nominal_sum(wf) >= nominal_sum(mm) - 1e-9


def test_zf_rejects_bad_inputs():
    inst = sample_instance(NetworkConfig(1, 3, 2), radii=0.0, powers=1.0, seed=0)
    with pytest.raises(ValueError):
        zero_forcing(inst)  # K > N
    inst2 = sample_instance(NetworkConfig(1, 2, 2), radii=0.0, powers=1.0, seed=0)
    with pytest.raises(ValueError):
        zero_forcing(inst2, "weird")


def test_slinr_single_user_single_cell_is_matched_filter():
    inst = sample_instance(NetworkConfig(1, 1, 2), radii=0.1, powers=10.0, seed=4)
    prec = slinr_beamforming(inst)
    w = prec.beam(0, 0)
    h = inst.estimates[0, 0, 0]
    mf = np.sqrt(10.0) * h.conj() / np.linalg.norm(h)
    align = abs(np.vdot(w, mf)) / (np.linalg.norm(w) * np.linalg.norm(mf))
    assert np.linalg.norm(w) ** 2 == pytest.approx(10.0, rel=1e-9)
    assert align == pytest.approx(1.0, abs=1e-6)


def test_slinr_certificate():
    inst = sample_instance(NetworkConfig(2, 2, 2), radii=0.1, powers=10.0, seed=5)
    delta = 1e-3
    prec = slinr_beamforming(inst, delta=delta)
    from robustprec.baselines import _SlinrBeamProgram, _max_slinr_beam
    for m in range(2):
        for k in range(2):
            prog = _SlinrBeamProgram(inst, m, k)
            _, level = _max_slinr_beam(prog, 5.0, delta)
            achieved = worst_case_slinr(inst, prec, m, k)
            assert achieved >= level - delta * max(level, 1.0)


def test_slinr_zero_radius_matches_eigen_oracle():
    inst = sample_instance(NetworkConfig(2, 2, 3), radii=0.0, powers=10.0, seed=3)
    prec = slinr_beamforming(inst, delta=1e-8)
    per_beam_power = 10.0 / 2
    for m in range(2):
        for k in range(2):
            h = inst.estimates[m, m, k]
            A = np.outer(h.conj(), h)
            B = (np.eye(3) / per_beam_power).astype(complex)
            for hl, _ in _leak_channels(inst, m, k):
                B += np.outer(hl.conj(), hl)
            _, vecs = eigh(A, B)
            u = vecs[:, -1]
            w = prec.beam(m, k)
            align = abs(np.vdot(w, u)) / (np.linalg.norm(w) * np.linalg.norm(u))
            assert np.arccos(min(align, 1.0)) < 1e-4


def test_profile_search_k1_full_power():
    inst = sample_instance(NetworkConfig(2, 1, 2), radii=0.1, powers=10.0, seed=6)
    prec = slinr_profile_search(inst, resolution=4)
    assert np.allclose(prec.cell_powers(), inst.powers, rtol=1e-6)


def test_profile_search_refinement_never_decreases():
    inst = sample_instance(NetworkConfig(2, 2, 2), radii=0.1, powers=10.0, seed=7)

    def sum_slinr(prec):
        return sum(worst_case_slinr(inst, prec, m, k)
                   for m in range(2) for k in range(2))

    coarse = sum_slinr(slinr_profile_search(inst, resolution=2))
    fine = sum_slinr(slinr_profile_search(inst, resolution=4))
    assert fine >= coarse - 1e-9


def test_profile_search_near_continuous_optimum():
    inst = sample_instance(NetworkConfig(2, 2, 2), radii=0.1, powers=10.0, seed=8)
    best_grid = slinr_profile_search(inst, resolution=4)
    grid_val = sum(worst_case_slinr(inst, best_grid, m, k)
                   for m in range(2) for k in range(2))
    # random-restart continuous search over per-cell splits
    from robustprec.baselines import _SlinrBeamProgram, _max_slinr_beam, _solo_set
    rng = np.random.default_rng(0)
    best_cont = 0.0
    progs = {(m, k): _SlinrBeamProgram(inst, m, k) for m in range(2) for k in range(2)}
    for _ in range(6):
        total = 0.0
        for m in range(2):
            frac = rng.random()
            for k, p in enumerate((frac * 10.0, (1 - frac) * 10.0)):
                w, _ = _max_slinr_beam(progs[m, k], p)
                total += worst_case_slinr(inst, _solo_set(inst, m, k, w), m, k)
        best_cont = max(best_cont, total)
    # the grid optimum is within one grid step of anything the continuous
    # search finds
    assert grid_val >= best_cont * (1 - 0.15)
