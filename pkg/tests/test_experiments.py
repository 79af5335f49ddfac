import numpy as np
import pytest

from gradfit.chain import ChainGeometry, InvalidInputError, ProbeParams, linear_field
from gradfit.estimator import TrialConfig, crb_gradient
from gradfit.experiments import (
    compare_states,
    default_gradient_rule,
    fi_bound,
    nonlinear_field_demo,
    run_ensemble,
    run_trials,
    sigma_half_difference_bound,
    sigma_mean_field_bound,
    sweep_scaling,
)

UNIT = ProbeParams()


def config(n=4, g=0.05, shots=1000, seed=3):
    geo = ChainGeometry(n)
    return TrialConfig(geo, UNIT, linear_field(geo, 0.0, g), "cascade", shots, seed)


def test_ensemble_smoke_single_shot():
    stats = run_ensemble(config(shots=1), 2)
    assert stats.repeats == 2
    assert np.isfinite([stats.mean_g, stats.std_g, stats.crb, stats.fi_crb]).all()
    assert "g_hats" not in stats.row()


def test_ensemble_rejects_one_repeat():
    with pytest.raises(InvalidInputError):
        run_ensemble(config(), 1)


def test_ensemble_reproducible():
    a = run_ensemble(config(), 20)
    b = run_ensemble(config(), 20)
    assert a.g_hats == b.g_hats
    assert a.g_hats != run_ensemble(config(seed=4), 20).g_hats


def test_parallel_trials_match_serial():
    serial = [e.g_hat for e in run_trials(config(), 12)]
    parallel = [e.g_hat for e in run_trials(config(), 12, workers=3)]
    assert serial == parallel


def test_fourier_trials_rejected():
    cfg = config()
    bad = TrialConfig(cfg.geometry, UNIT, cfg.true_field, "fourier", 100, 0)
    with pytest.raises(InvalidInputError):
        run_trials(bad, 2)


def test_fi_bound_close_to_crb_near_origin():
    cfg = config(n=6, g=1e-3, shots=500)
    assert fi_bound(cfg) == pytest.approx(crb_gradient(6, UNIT, 1.0, 500), rel=1e-2)


def test_ensemble_bias_small():
    stats = run_ensemble(config(n=6, g=0.05, shots=10**5, seed=11), 100)
    assert stats.valid and stats.failures == 0
    assert abs(stats.bias) < 4 * stats.std_g / np.sqrt(100)
    assert 0.75 < stats.ratio_to_fi_crb < 1.3


def test_analytic_sweep_slope():
    report = sweep_scaling([8, 16, 32, 64], 10**5, analytic_only=True)
    assert -1.02 <= report.slope <= -0.98
    assert report.slope == report.crb_slope
    assert [r["n"] for r in report.rows] == [8, 16, 32, 64]


def test_sweep_needs_three_sizes():
    with pytest.raises(InvalidInputError):
        sweep_scaling([8, 8, 16], 100, analytic_only=True)


def test_sweep_reproducible():
    a = sweep_scaling([3, 4, 5], 2000, seed=1, repeats=10)
    b = sweep_scaling([5, 4, 3], 2000, seed=1, repeats=10)
    assert a.rows == b.rows


def test_default_rule_fixed_phase():
    rule = default_gradient_rule(ProbeParams(2.0, 0.5), 0.5)
    for n in (4, 9, 50):
        assert rule(n) * n * 0.5 == pytest.approx(0.4)


def test_compare_states_small():
    c3 = compare_states(3)
    assert c3.qfi_w == pytest.approx(32 / 3, rel=1e-12)
    assert c3.qfi_ghz == pytest.approx(36, rel=1e-12)
    assert c3.lagrange_bound == pytest.approx(36, rel=1e-12)
    assert c3.qfi_noon is None and c3.sigma_half_difference is None
    c4 = compare_states(4)
    assert c4.qfi_noon == pytest.approx(64, rel=1e-12)
    assert c4.qfi_ghz == pytest.approx(144, rel=1e-12)


@pytest.mark.parametrize("n", range(2, 16))
def test_ghz_saturates_lagrange(n):
    c = compare_states(n, ProbeParams(0.8, 1.7), 0.6)
    assert c.qfi_ghz == pytest.approx(c.lagrange_bound, rel=1e-12)
    assert c.qfi_w <= c.qfi_ghz


def test_sigma_bounds():
    assert sigma_mean_field_bound(10, UNIT, 1) == pytest.approx(1 / 20)
    assert sigma_half_difference_bound(10, UNIT, 1) == pytest.approx(1 / 10)
    c = compare_states(10, UNIT, shots=1)
    assert c.sigma_mean_field == pytest.approx(1 / 20, rel=1e-12)
    assert c.sigma_half_difference == pytest.approx(1 / 10, rel=1e-12)


def test_nonlinear_demo_projects_slope():
    report = nonlinear_field_demo(ChainGeometry(5), UNIT, 0.02, 0.005)
    assert report.projected_slope == pytest.approx(0.04, abs=1e-14)
    assert report.noiseless_fit == pytest.approx(0.04, rel=1e-8)
    # the linear-model Fourier fit does not estimate the projected slope
    assert report.single_a_bias == pytest.approx(report.single_a_fit - 0.04)


def test_nonlinear_demo_linear_case():
    report = nonlinear_field_demo(ChainGeometry(5), UNIT, 0.02, 0.0, shots=10**4, seed=2, repeats=5)
    assert report.projected_slope == pytest.approx(0.02, abs=1e-14)
    assert report.noiseless_fit == pytest.approx(0.02, rel=1e-8)
    assert report.single_a_fit == pytest.approx(0.02, rel=1e-6)
    assert report.ensemble is not None and report.ensemble.repeats == 5
    assert "ensemble_std_g" in report.row()
