import json

import numpy as np
import pytest

from robustprec.instance import (EqualizerSet, NetworkConfig, NetworkInstance,
                                 PrecoderSet, load_instance, sample_instance,
                                 sample_perturbation, save_instance, validate)


def test_config_rejects_bad_counts():
    with pytest.raises(ValueError):
        NetworkConfig(0, 1, 2)
    with pytest.raises(ValueError):
        NetworkConfig(1, -1, 2)
    with pytest.raises(ValueError):
        NetworkConfig(1, 1.5, 2)


def test_sample_shapes_and_determinism():
    cfg = NetworkConfig(3, 2, 4)
    a = sample_instance(cfg, radii=0.1, powers=10.0, seed=7)
    b = sample_instance(cfg, radii=0.1, powers=10.0, seed=7)
    c = sample_instance(cfg, radii=0.1, powers=10.0, seed=8)
    assert a.estimates.shape == (3, 3, 2, 4)
    assert a.radii.shape == (3, 3, 2)
    assert a.powers.shape == (3,)
    assert a.weights.shape == (3, 2)
    assert np.array_equal(a.estimates, b.estimates)
    assert not np.array_equal(a.estimates, c.estimates)


def test_validate_flags_violations():
    cfg = NetworkConfig(1, 1, 2)
    inst = sample_instance(cfg, seed=0)
    bad = NetworkInstance(cfg, inst.estimates, np.full((1, 1, 1), -0.1),
                          inst.powers, inst.weights)
    assert any("negative radius" in v for v in validate(bad))
    bad_pow = NetworkInstance(cfg, inst.estimates, inst.radii,
                              np.array([0.0]), inst.weights)
    assert any("power" in v for v in validate(bad_pow))
    # own-channel radius at least the estimate norm makes the worst case
    # degenerate and is rejected
    big = np.full((1, 1, 1), np.linalg.norm(inst.estimates[0, 0, 0]) + 1)
    bad_rad = NetworkInstance(cfg, inst.estimates, big, inst.powers, inst.weights)
    assert any("radius exceeds" in v for v in validate(bad_rad))
    assert validate(inst) == []


def test_save_load_roundtrip(tmp_path):
    inst = sample_instance(NetworkConfig(2, 2, 3), radii=0.05, powers=[1.0, 2.0], seed=3)
    path = tmp_path / "inst.json"
    save_instance(inst, path)
    back = load_instance(path)
    assert np.array_equal(back.estimates, inst.estimates)
    assert np.array_equal(back.radii, inst.radii)
    assert np.array_equal(back.powers, inst.powers)
    assert np.array_equal(back.weights, inst.weights)


def test_load_rejects_malformed(tmp_path):
    path = tmp_path / "broken.json"
    path.write_text("{not json")
    with pytest.raises(ValueError):
        load_instance(path)


def test_precoder_set_views():
    mats = np.arange(12, dtype=float).reshape(2, 3, 2) + 0j
    ps = PrecoderSet(mats)
    assert np.array_equal(ps.beam(1, 0), mats[1, :, 0])
    assert np.array_equal(ps.deleted(0, 1), mats[0, :, [0]].reshape(3, 1))
    assert np.allclose(ps.cell_powers(), np.sum(np.abs(mats) ** 2, axis=(1, 2)))


def test_equalizers_positive():
    with pytest.raises(ValueError):
        EqualizerSet(np.array([[1.0, 0.0]]))


def test_perturbations_respect_radii():
    inst = sample_instance(NetworkConfig(2, 2, 3), radii=0.2, seed=1)
    for mode in ("interior", "surface"):
        pert = sample_perturbation(inst, seed=5, mode=mode)
        norms = np.linalg.norm(pert.deltas, axis=-1)
        assert np.all(norms <= inst.radii + 1e-12)
        if mode == "surface":
            assert np.allclose(norms, inst.radii)


def test_instance_arrays_immutable():
    inst = sample_instance(NetworkConfig(1, 1, 2), seed=0)
    with pytest.raises(ValueError):
        inst.estimates[0, 0, 0, 0] = 0
