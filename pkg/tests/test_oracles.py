import math

import numpy as np
import pytest

from glassopt import glass, netkit, oracles
from glassopt.netkit import ConfigError


class TestGlassWalk:
    def test_zero_density_gives_zero(self):
        sim = oracles.SyntheticGlass1D(rho=0.0, lam=1.0, n_kinks=10, trials=100, seed=0)
        result = oracles.glass_walk_expectation(sim)
        assert result.mean_abs == 0.0
        assert result.predicted_mean_abs == 0.0

    def test_deterministic(self):
        sim = oracles.SyntheticGlass1D(rho=1.0, lam=1.0, n_kinks=100, trials=2000, seed=5)
        a = oracles.glass_walk_expectation(sim)
        b = oracles.glass_walk_expectation(sim)
        assert a.mean_abs == b.mean_abs and a.variance == b.variance

    def test_gaussian_and_rademacher_kicks_agree(self):
        base = dict(rho=2.0, lam=0.5, n_kinks=500, trials=40_000)
        gauss = oracles.glass_walk_expectation(oracles.SyntheticGlass1D(seed=1, **base))
        rade = oracles.glass_walk_expectation(
            oracles.SyntheticGlass1D(seed=2, kick="rademacher", **base)
        )
        assert gauss.mean_abs == pytest.approx(rade.mean_abs, rel=0.03)
        assert gauss.variance == pytest.approx(rade.variance, rel=0.03)

    def test_standard_error_quarter_trials(self):
        # Standard error follows 1/sqrt(trials): quadrupling halves it.
        small = oracles.glass_walk_expectation(
            oracles.SyntheticGlass1D(rho=1.0, lam=1.0, n_kinks=200, trials=20_000, seed=3)
        )
        big = oracles.glass_walk_expectation(
            oracles.SyntheticGlass1D(rho=1.0, lam=1.0, n_kinks=200, trials=80_000, seed=3)
        )
        ratio = big.mean_abs_se / small.mean_abs_se
        assert 0.5 * 0.8 < ratio < 0.5 * 1.2

    def test_invalid_parameters(self):
        with pytest.raises(ConfigError):
            oracles.SyntheticGlass1D(rho=-1.0, lam=1.0)
        with pytest.raises(ConfigError):
            oracles.SyntheticGlass1D(rho=1.0, lam=0.0)
        with pytest.raises(ConfigError):
            oracles.SyntheticGlass1D(rho=1.0, lam=1.0, kick="cauchy")


class TestTestMatrix:
    def test_dominance_definition(self):
        m = np.array([[2.0, 1.0], [0.5, -1.0]])
        tm = oracles.TestMatrix(m)
        assert tm.dominance == pytest.approx([0.25, 0.25])

    def test_random_diag_dominant_within_bound(self):
        tm = oracles.TestMatrix.random_diag_dominant(50, seed=0)
        assert np.all(tm.dominance <= 1.0 + 1e-12)
        assert np.all(np.abs(tm.diagonal) >= 0.5)

    def test_rejects_non_square(self):
        with pytest.raises(ConfigError):
            oracles.TestMatrix(np.zeros((2, 3)))


class TestMcEstimator:
    def test_diagonal_matrix_rademacher_exact(self):
        tm = oracles.TestMatrix(np.diag([1.0, -2.0, 3.0, 0.5][:4]))
        kspec = glass.make_kernel("rademacher", 0.0)
        result = oracles.mc_estimator(tm, "rademacher", kspec, 1000, seed=0)
        assert np.allclose(result.bias, 0.0, atol=1e-14)
        assert np.allclose(result.variance, 0.0, atol=1e-14)

    def test_rademacher_variance_below_normal(self):
        tm = oracles.TestMatrix.random_diag_dominant(100, seed=1)
        res_rad = oracles.mc_estimator(
            tm, "rademacher", glass.make_kernel("rademacher", tm.dominance), 50_000, seed=2
        )
        res_nrm = oracles.mc_estimator(
            tm, "normal", glass.make_kernel("normal", tm.dominance), 50_000, seed=2
        )
        assert np.mean(res_rad.variance) < np.mean(res_nrm.variance)

    def test_restricted_updates_reduce_effective_variance(self):
        tm = oracles.TestMatrix.random_diag_dominant(60, seed=3, omega_max=1.0)
        n = 200_000
        unres = oracles.mc_estimator(
            tm, "normal", glass.make_kernel("normal", tm.dominance), n, seed=4
        )
        res = oracles.mc_estimator(
            tm, "normal", glass.make_kernel("normal", tm.dominance, restrict=1.0), n, seed=4
        )
        effective = res.variance * n / res.n_accepted
        assert np.mean(effective) < np.mean(unres.variance)

    def test_restricted_acceptance_rate(self):
        tm = oracles.TestMatrix.random_diag_dominant(40, seed=5)
        res = oracles.mc_estimator(
            tm, "normal", glass.make_kernel("normal", 1.0, restrict=1.0), 20_000, seed=6
        )
        rate = res.n_accepted.mean() / res.n_samples
        assert rate == pytest.approx(0.3173, abs=0.01)

    def test_minimum_sample_count(self):
        tm = oracles.TestMatrix.random_diag_dominant(10, seed=0)
        with pytest.raises(ConfigError):
            oracles.mc_estimator(tm, "rademacher", glass.make_kernel("rademacher", 0.0), 10, 0)


class TestVariationBoundOracle:
    def test_constructed_net_has_uniform_preactivations(self):
        scenario = oracles.build_uniform_preactivation_net(psi=0.05, seed=0)
        preacts, _ = netkit.forward(scenario.spec, scenario.params, scenario.batch.inputs)
        assert np.all(np.abs(preacts[0]) < scenario.psi)

    def test_zero_delta_trivially_within(self):
        scenario = oracles.build_uniform_preactivation_net(n_in=20, n_hidden=8, seed=1)
        records = netkit.relu_introspect(
            scenario.spec, scenario.params, scenario.batch, scenario.psi
        )
        r_mat = glass.density_matrix(records, scenario.psi).R
        cov = oracles.mc_variation(scenario, r_mat, 0.0, 50, seed=2)
        assert np.array_equal(cov.v, np.zeros_like(cov.v))
        assert cov.fraction_within == 1.0

    def test_small_step_coverage_and_negative_control(self):
        scenario = oracles.build_uniform_preactivation_net(seed=0)
        records = netkit.relu_introspect(
            scenario.spec, scenario.params, scenario.batch, scenario.psi
        )
        r_mat = glass.density_matrix(records, scenario.psi).R
        small = oracles.mc_variation(scenario, r_mat, 5e-5, 1500, seed=3)
        assert small.fraction_within >= 0.99
        assert small.precondition_violation_fraction < 0.01
        large = oracles.mc_variation(scenario, r_mat, 0.5, 150, seed=4)
        assert large.fraction_within < 0.99
        assert large.precondition_violation_fraction > 0.5


class TestUnderdeterminedLs:
    def test_zero_rhs_stays_at_zero(self):
        report = oracles.underdetermined_ls(0, zero_rhs=True)
        assert report.loss_initial == 0.0
        assert report.loss_full_step == 0.0
        assert report.full_step_norm == 0.0

    @pytest.mark.parametrize("seed", range(8))
    def test_full_step_overshoots_damped_step_descends(self, seed):
        report = oracles.underdetermined_ls(seed)
        assert report.loss_full_step > report.loss_initial
        assert report.loss_damped_step < report.loss_initial

    def test_minimum_norm_solution_is_smaller(self):
        report = oracles.underdetermined_ls(1)
        assert report.min_norm_solution_norm < report.full_step_norm


class TestStepObjectiveOracle:
    def test_golden_section_on_parabola(self):
        argmin = oracles.golden_section_min(lambda x: (x - 1.3) ** 2, 0.0, 4.0)
        assert argmin == pytest.approx(1.3, abs=1e-9)

    def test_pure_quasi_newton_limit(self):
        # golden section resolves a smooth minimum to ~sqrt(eps) relative
        assert oracles.step_objective_argmin(2.0, 4.0, 0.0) == pytest.approx(0.5, rel=1e-7)

    def test_pure_glass_limit(self):
        g, rho = 1.5, 0.7
        expected = 2.0 * math.pi * g * g / (3.0 * rho)
        assert oracles.step_objective_argmin(g, 0.0, rho) == pytest.approx(expected, rel=1e-7)

    def test_zero_gradient(self):
        assert oracles.step_objective_argmin(0.0, 1.0, 1.0) == 0.0


class TestSyntheticFields:
    def test_quadratic_oracle_identity(self):
        assert np.allclose(oracles.quadratic_powerlaw_oracle(np.eye(3), 0.5), 0.25)

    def test_quadratic_oracle_zero(self):
        assert np.array_equal(oracles.quadratic_powerlaw_oracle(np.zeros((3, 3)), 1.0), np.zeros(3))

    def test_quadratic_oracle_requires_symmetry(self):
        with pytest.raises(ConfigError):
            oracles.quadratic_powerlaw_oracle(np.array([[1.0, 2.0], [0.0, 1.0]]), 1.0)

    def test_staircase_expected_variation_matches_monte_carlo(self):
        field = oracles.StaircaseGradientField.random(64, 2000, span=1.0, magnitude=0.2, seed=7)
        lam = 0.01
        meas = glass.measure_variations(field.grad, np.zeros(64), lam, 200, seed=8)
        expected = field.expected_variation(lam).mean()
        assert meas.v.mean() == pytest.approx(expected, rel=0.1)

    def test_staircase_exponent_near_one(self):
        # Exponent noise is dominated by the frozen threshold realization, so
        # it shrinks with (coordinates x kinks), not with probe samples.
        field = oracles.StaircaseGradientField.random(4096, 512, span=1.0, magnitude=0.1, seed=9)
        m1 = glass.measure_variations(field.grad, np.zeros(4096), 0.02, 32, seed=10)
        m2 = glass.measure_variations(field.grad, np.zeros(4096), 0.04, 32, seed=10)
        report = glass.power_law(m1, m2, {"all": np.arange(4096)})
        assert report.exponent("all") == pytest.approx(1.0, abs=0.15)
