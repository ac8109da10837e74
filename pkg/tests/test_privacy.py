import math

import numpy as np
import pytest

from privfp import privacy
from privfp.errors import ConditionNotMet, ParameterError, StructuralError
from privfp.privacy import (
    DEFAULT_ALPHAS, RdpCurve, amplification_by_iteration, calibrate_sigma,
    centralized_epsilon, compose, estimated_participations, federated_central_epsilon,
    gaussian_curve, gaussian_rdp, local_epsilon, network_rdp_epsilon, rdp_to_dp,
    sensitivity_consensus, sensitivity_general, setting_curve, subsampled_rdp,
)


class TestGaussianRdp:
    def test_unit_case(self):
        assert gaussian_rdp(1.0, 1.0, 2.0) == 1.0

    def test_zero_sensitivity(self):
        assert gaussian_rdp(0.0, 3.7, 5.0) == 0.0

    def test_substitution(self):
        assert gaussian_rdp(2.0, 2.0, 3.0) == pytest.approx(1.5, abs=0)

    def test_guards(self):
        with pytest.raises(ParameterError):
            gaussian_rdp(1.0, 0.0, 2.0)
        with pytest.raises(ParameterError):
            gaussian_rdp(1.0, 1.0, 1.0)


class TestCompose:
    def test_k_fold_gaussian(self):
        K = 7
        curve = gaussian_curve(1.0, 2.0)
        total = compose([curve] * K)
        for a, e in zip(total.alphas, total.epsilons):
            assert e == pytest.approx(K * a * 1.0 / (2 * 4.0), rel=1e-15)

    def test_zero_curve_is_identity(self):
        curve = gaussian_curve(1.5, 1.0)
        zero = RdpCurve(curve.alphas, tuple(0.0 for _ in curve.alphas))
        np.testing.assert_array_equal(compose([curve, zero]).epsilons, curve.epsilons)

    def test_order_invariance(self):
        a = gaussian_curve(1.0, 1.0)
        b = gaussian_curve(2.0, 3.0)
        assert compose([a, b]).epsilons == compose([b, a]).epsilons

    def test_grid_mismatch(self):
        a = gaussian_curve(1.0, 1.0, alphas=(2.0, 4.0))
        b = gaussian_curve(1.0, 1.0, alphas=(2.0, 8.0))
        with pytest.raises(StructuralError):
            compose([a, b])


class TestRdpToDp:
    def test_single_point(self):
        curve = RdpCurve((2.0,), (1.0,))
        assert rdp_to_dp(curve, math.exp(-1.0)) == pytest.approx(2.0, rel=1e-12)

    def test_picks_minimizing_order(self):
        curve = RdpCurve((2.0, 11.0), (1.0, 1.0))
        assert rdp_to_dp(curve, math.exp(-1.0)) == pytest.approx(1.1, rel=1e-12)

    def test_delta_near_one_limit(self):
        curve = RdpCurve((2.0,), (0.0,))
        assert rdp_to_dp(curve, 1 - 1e-12) == pytest.approx(0.0, abs=1e-9)

    def test_dominated_grid_points_ignored(self):
        base = RdpCurve((2.0, 11.0), (1.0, 1.0))
        padded = RdpCurve((2.0, 11.0, 3.0), (1.0, 1.0, 50.0))
        assert rdp_to_dp(base, 1e-5) == rdp_to_dp(padded, 1e-5)

    def test_delta_range(self):
        with pytest.raises(ParameterError):
            rdp_to_dp(RdpCurve((2.0,), (1.0,)), 1.0)


class TestSensitivities:
    def test_consensus_value(self):
        assert sensitivity_consensus(1.0, 0.1, 1.0, 10) == pytest.approx(0.04, rel=1e-15)

    def test_consensus_local_level(self):
        assert sensitivity_consensus(1.0, 0.1, 1.0, 1) == pytest.approx(0.4, rel=1e-15)

    def test_general_reduces_to_consensus_for_identity(self):
        assert sensitivity_general(2.0, 0.3, 0.7, 5, 1.0, 1.0) == \
            sensitivity_consensus(2.0, 0.3, 0.7, 5)

    def test_general_value(self):
        assert sensitivity_general(1.0, 1.0, 1.0, 1, 2.0, 0.5) == pytest.approx(16.0, rel=1e-15)

    def test_rank_deficient_rejected(self):
        with pytest.raises(ParameterError):
            sensitivity_general(1.0, 1.0, 1.0, 1, 2.0, 0.0)


class TestCentralizedEpsilon:
    def test_value(self):
        assert centralized_epsilon(2.0, 100, 1.0, 0.1, 1.0, 100) == pytest.approx(0.0016, rel=1e-12)

    def test_zero_rounds(self):
        assert centralized_epsilon(2.0, 0, 1.0, 0.1, 1.0, 100) == 0.0

    def test_equals_composed_per_step_curve(self):
        alpha, K, L, gamma, sigma, n = 3.0, 12, 0.8, 0.25, 1.3, 40
        per_step = gaussian_rdp(sensitivity_consensus(L, gamma, 1.0, n), sigma, alpha)
        composed = compose([RdpCurve((alpha,), (per_step,))] * K).epsilons[0]
        assert centralized_epsilon(alpha, K, L, gamma, sigma, n) == pytest.approx(
            composed, rel=1e-15)


class TestSubsampledRdp:
    def test_in_regime_value(self):
        assert subsampled_rdp(2.0, 0.1, 1.0, 4.0) == pytest.approx(0.0025, rel=1e-12)

    def test_large_q_rejected(self):
        with pytest.raises(ConditionNotMet) as err:
            subsampled_rdp(2.0, 0.5, 1.0, 4.0)
        assert "1/5" in err.value.condition

    def test_small_sigma_rejected(self):
        with pytest.raises(ConditionNotMet) as err:
            subsampled_rdp(2.0, 0.1, 1.0, 1.0)
        assert "sigma" in err.value.condition

    def test_alpha_cap_rejected(self):
        with pytest.raises(ConditionNotMet) as err:
            subsampled_rdp(4096.0, 0.1, 1.0, 4.0)
        assert "alpha" in err.value.condition


class TestFederatedCentral:
    def test_formula_value(self):
        # literal recomputation: 16*2*10*1*0.01 / (16 * 100^2) = 2e-5
        got = federated_central_epsilon(2.0, 10, 1.0, 0.1, 4.0, 10, 100)
        assert got == pytest.approx(16 * 2 * 10 * 1 * 0.1 ** 2 / (4.0 ** 2 * 100 ** 2), rel=1e-15)
        assert got == pytest.approx(2e-5, rel=1e-12)

    def test_cohort_too_large(self):
        with pytest.raises(ConditionNotMet):
            federated_central_epsilon(2.0, 10, 1.0, 0.1, 4.0, 20, 100)

    def test_twice_centralized(self):
        args = dict(alpha=2.0, K=10, L=1.0, gamma=0.1, sigma=4.0, n=100)
        fed = federated_central_epsilon(m=10, **args)
        cen = centralized_epsilon(**args)
        assert fed == pytest.approx(2.0 * cen, rel=1e-15)

    def test_secure_agg_flag_does_not_change_central_bound(self):
        args = dict(alpha=2.0, K=10, L=1.0, gamma=0.1, sigma=4.0, m=10, n=100)
        assert federated_central_epsilon(**args) == \
            federated_central_epsilon(secure_agg=True, **args)


class TestLocalEpsilon:
    def test_unit_value(self):
        assert local_epsilon(2.0, 1, 1.0, 1.0, 4.0) == pytest.approx(1.0, rel=1e-15)

    def test_zero_participations(self):
        assert local_epsilon(2.0, 0, 1.0, 1.0, 4.0) == 0.0

    def test_population_size_has_no_effect(self):
        # the formula has no n: phrased as invariance under unrelated scaling
        vals = {local_epsilon(2.0, 3, 1.0, 0.5, 4.0) for _ in range(3)}
        assert len(vals) == 1

    def test_secure_aggregation_divides_by_cohort_squared(self):
        base = local_epsilon(2.0, 5, 1.0, 1.0, 4.0)
        assert local_epsilon(2.0, 5, 1.0, 1.0, 4.0, secure_agg_m=10) == \
            pytest.approx(base / 100.0, rel=1e-15)


class TestAmplificationByIteration:
    def test_single_step_is_plain_gaussian(self):
        assert amplification_by_iteration(1.0, 1, 1.0, 2.0) == gaussian_rdp(1.0, 1.0, 2.0)

    def test_four_steps(self):
        assert amplification_by_iteration(1.0, 4, 1.0, 2.0) == pytest.approx(0.25, rel=1e-15)

    def test_monotone_decreasing_in_steps(self):
        vals = [amplification_by_iteration(2.0, m, 1.5, 3.0) for m in range(1, 101)]
        assert all(a > b for a, b in zip(vals, vals[1:]))

    def test_invalid_steps(self):
        with pytest.raises(ParameterError):
            amplification_by_iteration(1.0, 0, 1.0, 2.0)


class TestNetworkRdp:
    def test_value(self):
        got = network_rdp_epsilon(2.0, 1, 1.0, 1.0, 4.0, 10)
        assert got == pytest.approx(16 * math.log(10) / 160.0, rel=1e-12)

    def test_strict_noise_condition(self):
        threshold = 2.0 * 1.0 * 1.0 * math.sqrt(2.0 * 1.0)
        with pytest.raises(ConditionNotMet):
            network_rdp_epsilon(2.0, 1, 1.0, 1.0, threshold, 10)

    def test_small_population_rejected(self):
        with pytest.raises(ParameterError):
            network_rdp_epsilon(2.0, 1, 1.0, 1.0, 4.0, 1)

    @pytest.mark.parametrize("n", [5, 10, 100])
    def test_walk_length_series_bound(self, n):
        # direct summation oracle: (1/n) sum_{k>=1} (1-1/n)^k / k <= ln(n)/n
        N = int(10 * n * math.log(n)) + 1
        k = np.arange(1, N + 1)
        partial = np.sum((1 - 1 / n) ** k / k) / n
        assert partial <= math.log(n) / n + 1e-12

    def test_participation_estimate(self):
        assert estimated_participations(100, 30) == 4
        assert estimated_participations(90, 30) == 3
        assert estimated_participations(0, 5) == 0


class TestMonotonicity:
    """Every formula is monotone the right way across parameter sweeps."""

    def test_centralized_sweeps(self):
        base = dict(alpha=2.0, K=10, L=1.0, gamma=0.5, sigma=2.0, n=50)
        f = lambda **kw: centralized_epsilon(**{**base, **kw})
        assert all(f(K=k1) <= f(K=k2) for k1, k2 in zip(range(1, 20), range(2, 21)))
        ls = np.linspace(0.1, 4, 15)
        assert all(f(L=a) <= f(L=b) for a, b in zip(ls, ls[1:]))
        gs = np.linspace(0.05, 2, 15)
        assert all(f(gamma=a) <= f(gamma=b) for a, b in zip(gs, gs[1:]))
        als = np.linspace(1.5, 64, 15)
        assert all(f(alpha=a) <= f(alpha=b) for a, b in zip(als, als[1:]))
        ss = np.linspace(0.5, 8, 15)
        assert all(f(sigma=a) >= f(sigma=b) for a, b in zip(ss, ss[1:]))
        ns = range(10, 200, 10)
        assert all(f(n=a) >= f(n=b) for a, b in zip(ns, list(ns)[1:]))

    def test_network_sweeps(self):
        base = dict(alpha=2.0, K_i=4, L=0.5, gamma=0.5, sigma=6.0, n=20)
        f = lambda **kw: network_rdp_epsilon(**{**base, **kw})
        assert all(f(K_i=a) <= f(K_i=b) for a, b in zip(range(0, 10), range(1, 11)))
        ss = np.linspace(4, 16, 12)
        assert all(f(sigma=a) >= f(sigma=b) for a, b in zip(ss, ss[1:]))
        ns = range(10, 300, 20)
        assert all(f(n=a) >= f(n=b) for a, b in zip(ns, list(ns)[1:]))


class TestSettingCurve:
    def test_federated_curve_drops_out_of_regime_orders(self):
        curve = setting_curve("federated_central", 4.0, K=10, L=1.0, gamma=0.1,
                              n=100, m=10)
        assert set(curve.alphas).issubset(set(DEFAULT_ALPHAS))
        assert len(curve.alphas) < len(DEFAULT_ALPHAS)  # large orders fall out at sigma=4

    def test_all_out_of_regime_raises(self):
        with pytest.raises(ConditionNotMet):
            setting_curve("federated_central", 4.0, K=10, L=1.0, gamma=0.1,
                          n=100, m=50)


class TestCalibrate:
    def test_centralized_rdp_target_closed_form(self):
        sigma = calibrate_sigma("centralized", epsilon=0.0016, alpha=2.0, K=100,
                                L=1.0, gamma=0.1, n=100)
        assert sigma == pytest.approx(1.0, rel=1e-9)

    def test_round_trip_random_draws(self):
        gen = np.random.default_rng(0)
        for _ in range(25):
            setting = gen.choice(["centralized", "local", "federated_central", "network"])
            K = int(gen.integers(1, 500))
            L = float(gen.uniform(0.05, 2.0))
            gamma = float(gen.uniform(0.01, 1.0))
            n = int(gen.integers(20, 2000))
            m = max(1, int(0.1 * n))
            target = float(gen.uniform(0.05, 5.0))
            sigma = calibrate_sigma(setting, epsilon=target, delta=1e-6, K=K, L=L,
                                    gamma=gamma, n=n, m=m)
            curve = setting_curve(setting, sigma, K=K, L=L, gamma=gamma, n=n, m=m)
            assert rdp_to_dp(curve, 1e-6) <= target

    def test_rdp_round_trip_with_regime_floor(self):
        sigma = calibrate_sigma("federated_central", epsilon=1.0, alpha=2.0, K=5,
                                L=0.1, gamma=0.1, n=100, m=10)
        assert sigma >= 4.0
        assert federated_central_epsilon(2.0, 5, 0.1, 0.1, sigma, 10, 100) <= 1.0

    def test_bisection_tightness(self):
        target = 0.5
        sigma = calibrate_sigma("centralized", epsilon=target, delta=1e-6, K=50,
                                L=1.0, gamma=0.5, n=100)
        curve = setting_curve("centralized", sigma, K=50, L=1.0, gamma=0.5, n=100)
        assert rdp_to_dp(curve, 1e-6) <= target
        looser = setting_curve("centralized", sigma * 0.98, K=50, L=1.0, gamma=0.5, n=100)
        assert rdp_to_dp(looser, 1e-6) > target

    def test_zero_budget_infeasible(self):
        with pytest.raises(ConditionNotMet):
            calibrate_sigma("centralized", epsilon=0.0, alpha=2.0, K=1, L=1.0,
                            gamma=1.0, n=10)

    def test_network_target_respects_noise_floor(self):
        sigma = calibrate_sigma("network", epsilon=10.0, alpha=2.0, K=10, L=1.0,
                                gamma=1.0, n=20, K_i=1)
        assert sigma > 2.0 * math.sqrt(2.0)
        assert network_rdp_epsilon(2.0, 1, 1.0, 1.0, sigma, 20) <= 10.0
