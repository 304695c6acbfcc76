import numpy as np
import pytest

from robustprec.instance import NetworkConfig, sample_instance
from robustprec.maxmin import matched_filter_precoders
from robustprec.sumrate import (all_worst_case_mses, nominal_mmse_equalizers,
                                optimize_equalizers, sum_rate_bound, update_u,
                                weighted_sumrate_ao)
from robustprec.worst_case import sum_rate_lower_bound, worst_case_mse


def test_equalizer_step_never_hurts():
    inst = sample_instance(NetworkConfig(2, 2, 2), radii=0.1, powers=10.0, seed=0)
    prec = matched_filter_precoders(inst)
    eq0 = nominal_mmse_equalizers(inst, prec)
    u = update_u(inst, prec, eq0)
    eq1 = optimize_equalizers(inst, prec, u)
    m0 = all_worst_case_mses(inst, prec, eq0)
    m1 = all_worst_case_mses(inst, prec, eq1)
    # the per-user 1-D equalizer step minimizes each worst-case MSE
    assert np.all(m1 <= m0 + 1e-9)


def test_u_update_is_stationary_slack():
    inst = sample_instance(NetworkConfig(2, 2, 2), radii=0.1, powers=10.0, seed=1)
    prec = matched_filter_precoders(inst)
    eq = nominal_mmse_equalizers(inst, prec)
    u = update_u(inst, prec, eq)
    for m in range(2):
        for k in range(2):
            mse = worst_case_mse(inst, prec, eq, m, k)
            assert u[m, k] == pytest.approx(1.0 - np.log(mse), rel=1e-9)
            # the slack is tight at the returned u: u - exp(u-1) * mse
            # equals the rate surrogate -log(mse)
            assert u[m, k] - np.exp(u[m, k] - 1.0) * mse == pytest.approx(
                -np.log(mse), abs=1e-9)


@pytest.mark.parametrize("seed", [0, 1, 2])
def test_ao_trace_monotone_and_converges(seed):
    inst = sample_instance(NetworkConfig(2, 2, 2), radii=0.1, powers=10.0, seed=seed)
    prec, eq, state = weighted_sumrate_ao(inst)
    trace = state.lower_bounds
    assert len(trace) >= 2
    assert all(b - a >= -1e-6 for a, b in zip(trace, trace[1:]))
    assert len(trace) <= 101
    assert np.all(prec.cell_powers() <= inst.powers * (1 + 1e-6))
    # the reported trace value is reproducible from the returned iterates
    assert sum_rate_bound(inst, prec, eq) == pytest.approx(trace[-1], abs=1e-8)


def test_ao_bound_certifies_final_design():
    inst = sample_instance(NetworkConfig(2, 2, 2), radii=0.1, powers=10.0, seed=3)
    prec, eq, state = weighted_sumrate_ao(inst)
    # the MSE-based bound never exceeds the SINR-based sum-rate bound
    assert state.lower_bounds[-1] <= sum_rate_lower_bound(inst, prec) + 1e-6


def test_ao_improves_on_matched_filter():
    inst = sample_instance(NetworkConfig(2, 2, 2), radii=0.1, powers=10.0, seed=4)
    mf = matched_filter_precoders(inst)
    eq0 = nominal_mmse_equalizers(inst, mf)
    start = sum_rate_bound(inst, mf, eq0)
    _, _, state = weighted_sumrate_ao(inst)
    assert state.lower_bounds[-1] >= start - 1e-9


def test_ao_shrinking_radius_helps():
    vals = []
    for eps in (0.0, 0.1):
        inst = sample_instance(NetworkConfig(2, 2, 2), radii=eps, powers=10.0, seed=5)
        _, _, state = weighted_sumrate_ao(inst)
        vals.append(state.lower_bounds[-1])
    assert vals[0] > vals[1]
