import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from numpy.testing import assert_allclose, assert_array_equal

from clrg.errors import DimensionMismatch, HypothesisViolated, RealizabilityViolated
from clrg.game import (
    GameConfig,
    Stability,
    dominance_certificate,
    index_split,
    kkt_violation,
    nash_ensemble,
    nash_ensemble_multi,
    nash_strategies,
    ulrg_ne_exists,
    variational_gap,
    variational_stability_check,
)
from clrg.instances import confounder_instance, random_spd, separable_instance
from clrg.population import EnvironmentMoments, confounder_closed_form
from clrg.sem import confounder_only_config, preset

coef = st.floats(-3, 3, allow_nan=False)


def _brute_best_response(w_star, other, w_sup, grid=4001):
    """Minimizer of (x + other - w_star)^2 over a fine grid of [-w_sup, w_sup]."""
    xs = np.linspace(-w_sup, w_sup, grid)
    return xs[np.argmin((xs + other - w_star) ** 2)]


class TestIndexSplit:
    def test_equal(self):
        split = index_split([1.0, 2.0], [1.0, 2.0])
        assert split.v_set == ()
        assert split.u_set == (0, 1)

    def test_mixed(self):
        split = index_split([1.0, 0.5], [1.0, -0.3], tol=1e-9)
        assert split.u_set == (0,)
        assert split.v_set == (1,)

    def test_confounder_preset_keeps_causal_block_shared(self):
        rng = np.random.default_rng(0)
        cfg = confounder_instance(rng, 3, 3)
        split = index_split(confounder_closed_form(cfg, 0).w_star, confounder_closed_form(cfg, 1).w_star)
        assert set(range(3)) <= set(split.u_set)

    def test_dimension_mismatch(self):
        with pytest.raises(DimensionMismatch):
            index_split([1.0], [1.0, 2.0])


class TestNashEnsemble:
    def test_opposite_signs_zeroed(self):
        assert_array_equal(nash_ensemble([1.0, 0.5], [1.0, -0.3]), [1.0, 0.0])

    def test_smaller_magnitude_kept(self):
        assert_array_equal(nash_ensemble([2.0, 0.4], [2.0, 0.9]), [2.0, 0.4])
        assert_array_equal(nash_ensemble([-0.9, 3.0], [-0.2, 1.0]), [-0.2, 1.0])

    def test_equal_inputs(self):
        w = np.array([0.3, -1.0, 2.0])
        assert_array_equal(nash_ensemble(w, w), w)

    def test_zero_counts_as_same_sign(self):
        assert_array_equal(nash_ensemble([0.0, 1e-12], [0.7, -0.5]), [0.0, 1e-12])

    def test_tie_in_magnitude_returns_first(self):
        assert_array_equal(nash_ensemble([0.5], [0.5]), [0.5])

    def test_sign_less_opposite_tie_is_zero(self):
        assert_array_equal(nash_ensemble([1e-10], [-1e-10]), [0.0])

    @settings(max_examples=300, deadline=None)
    @given(st.lists(st.tuples(coef, coef), min_size=1, max_size=6))
    def test_symmetric(self, pairs):
        a = np.array([p[0] for p in pairs])
        b = np.array([p[1] for p in pairs])
        assert_array_equal(nash_ensemble(a, b), nash_ensemble(b, a))

    @settings(max_examples=300, deadline=None)
    @given(st.lists(st.tuples(coef, coef), min_size=1, max_size=6), st.floats(0.1, 10), st.sampled_from([-1, 1]))
    def test_scale_equivariant(self, pairs, c, sign):
        a = np.array([p[0] for p in pairs])
        b = np.array([p[1] for p in pairs])
        c = sign * c
        assert_allclose(nash_ensemble(c * a, c * b), c * nash_ensemble(a, b), atol=1e-8)

    @settings(max_examples=300, deadline=None)
    @given(coef, coef)
    def test_magnitude_bounded_by_both(self, a, b):
        e = nash_ensemble([a], [b])[0]
        assert abs(e) <= min(abs(a), abs(b)) + 1e-15


class TestNashStrategies:
    def test_opposite_component(self):
        sol = nash_strategies([-0.4], [0.7], GameConfig(2.0))
        assert_array_equal(sol.strategies[0], [-2.0])
        assert_array_equal(sol.strategies[1], [2.0])
        assert_array_equal(sol.ensemble, [0.0])
        assert_array_equal(sol.boundary_flags, [[-1], [1]])

    def test_same_sign_component(self):
        sol = nash_strategies([0.5], [0.9], GameConfig(2.0))
        assert_allclose(sol.strategies[0], [-1.5])
        assert_allclose(sol.strategies[1], [2.0])
        assert_allclose(sol.ensemble, [0.5])
        assert_array_equal(sol.boundary_flags, [[0], [1]])

    def test_mirror_when_second_is_smaller(self):
        sol = nash_strategies([-0.9], [-0.5], GameConfig(2.0))
        assert_allclose(sol.strategies[0], [-2.0])
        assert_allclose(sol.strategies[1], [1.5])

    def test_equal_coefficients_split(self):
        sol = nash_strategies([1.0, -0.6], [1.0, -0.6], GameConfig(2.0))
        assert_allclose(sol.strategies[0], [0.5, -0.3])
        assert_allclose(sol.strategies[1], [0.5, -0.3])

    def test_realizability(self):
        with pytest.raises(RealizabilityViolated, match="Realizability"):
            nash_strategies([2.5], [0.1], GameConfig(2.0))

    def test_each_strategy_is_a_best_response(self):
        rng = np.random.default_rng(3)
        for _ in range(30):
            ws = rng.uniform(0.5, 3.0)
            a, b = rng.uniform(-0.9 * ws, 0.9 * ws, (2, 4))
            sol = nash_strategies(a, b, GameConfig(ws))
            s1, s2 = sol.strategies
            for i in range(4):
                assert abs(_brute_best_response(a[i], s2[i], ws) - s1[i]) <= 2 * ws / 4000
                assert abs(_brute_best_response(b[i], s1[i], ws) - s2[i]) <= 2 * ws / 4000

    def test_kkt_on_separable_instances(self):
        rng = np.random.default_rng(8)
        for _ in range(50):
            inst = separable_instance(rng, 5, rng.uniform(1, 4))
            s1, s2 = nash_strategies(*inst.stars, GameConfig(inst.w_sup)).strategies
            assert kkt_violation(inst.moments[0], s1, s2, inst.w_sup) <= 1e-9 * inst.w_sup
            assert kkt_violation(inst.moments[1], s2, s1, inst.w_sup) <= 1e-9 * inst.w_sup

    @settings(max_examples=200, deadline=None)
    @given(st.lists(st.tuples(st.floats(-0.9, 0.9), st.floats(-0.9, 0.9)), min_size=1, max_size=5))
    def test_sum_and_box(self, pairs):
        a = np.array([p[0] for p in pairs])
        b = np.array([p[1] for p in pairs])
        sol = nash_strategies(a, b, GameConfig(1.0))
        assert_array_equal(sol.ensemble, sol.strategies[0] + sol.strategies[1])
        # Clamping a sign-less coefficient can move the sum by at most the tolerance.
        assert_allclose(sol.ensemble, nash_ensemble(a, b), atol=1e-9)
        assert max(np.max(np.abs(s)) for s in sol.strategies) <= 1.0 + 1e-12


class TestMulti:
    def test_odd_median(self):
        assert_array_equal(nash_ensemble_multi([[-1.0], [0.2], [5.0]]), [0.2])

    def test_even_opposite_middle(self):
        assert_array_equal(nash_ensemble_multi([[-2.0], [-0.3], [0.6], [1.0]]), [0.0])

    def test_even_same_sign_middle(self):
        assert_array_equal(nash_ensemble_multi([[0.1], [0.4], [0.7], [1.0]]), [0.4])

    def test_two_environments_match_pair_rule(self):
        rng = np.random.default_rng(0)
        for a, b in rng.uniform(-2, 2, (2000, 2, 3)):
            assert_array_equal(nash_ensemble_multi([a, b]), nash_ensemble(a, b))

    def test_order_invariant(self):
        ws = [[0.3, -1.0], [0.9, 0.5], [-0.2, 0.1]]
        assert_array_equal(nash_ensemble_multi(ws), nash_ensemble_multi(ws[::-1]))

    def test_realizability_with_config(self):
        with pytest.raises(RealizabilityViolated):
            nash_ensemble_multi([[0.1], [3.0], [0.2]], GameConfig(2.0))

    def test_needs_two(self):
        with pytest.raises(DimensionMismatch):
            nash_ensemble_multi([[1.0]])


class TestUnconstrainedExistence:
    def test_equal(self):
        assert ulrg_ne_exists([1.0, 2.0], [1.0, 2.0])

    def test_different(self):
        assert not ulrg_ne_exists([1.0, 0.5], [1.0, 0.6])

    def test_noise_only_difference(self):
        cfg = confounder_only_config(3, 3, np.eye(3), np.zeros(3), np.zeros(3), [1, 1, 1], [2, 2, 2])
        w1 = confounder_closed_form(cfg, 0).w_star
        w2 = confounder_closed_form(cfg, 1).w_star
        assert ulrg_ne_exists(w1, w2)


class TestVariationalStability:
    def test_equal(self):
        s = random_spd(3, np.random.default_rng(0))
        assert variational_stability_check(s, s) is Stability.STABLE_EQUAL

    def test_psd_with_zero_eigenvalue(self):
        s = random_spd(2, np.random.default_rng(1))
        assert variational_stability_check(s, s + np.diag([0.0, 1.0])) is Stability.STABLE_PSD_ZERO_MIN
        assert variational_stability_check(s + np.diag([0.0, 1.0]), s) is Stability.STABLE_PSD_ZERO_MIN

    def test_indefinite(self):
        s = random_spd(2, np.random.default_rng(2))
        assert variational_stability_check(s, s + np.diag([-1.0, 1.0])) is Stability.UNKNOWN

    def test_strictly_definite_difference(self):
        s = random_spd(2, np.random.default_rng(2))
        assert variational_stability_check(s, s + np.eye(2)) is Stability.UNKNOWN

    def test_gap_non_positive_for_equal_covariances(self):
        rng = np.random.default_rng(5)
        sigma = random_spd(3, rng)
        ws = 2.0
        stars = rng.uniform(-1.5, 1.5, (2, 3))
        moments = [EnvironmentMoments(sigma=sigma, rho=sigma @ w, mu=np.zeros(3)) for w in stars]
        eq = nash_strategies(*stars, GameConfig(ws)).strategies
        for _ in range(200):
            w = rng.uniform(-ws, ws, (2, 3))
            assert variational_gap(moments, eq, list(w)) <= 1e-10

    def test_shape_mismatch(self):
        with pytest.raises(DimensionMismatch):
            variational_stability_check(np.eye(2), np.eye(3))


class TestDominance:
    def test_opposite_signs_recover_ideal(self):
        eta = np.array([1.0, -0.5, 0.8])
        cfg = confounder_only_config(2, 3, np.eye(3), eta, -2 * eta, np.ones(3), np.ones(3))
        rep = dominance_certificate(cfg, np.linspace(0.1, 0.9, 9))
        assert rep.d_ne == 0.0
        assert rep.holds(1e-6)

    def test_pure_environment_is_an_exception(self):
        eta = np.array([0.6, -0.4])
        cfg = confounder_only_config(1, 2, np.eye(2), eta, 2 * eta, np.ones(2), np.ones(2))
        rep = dominance_certificate(cfg, [0.5, 1.0])
        assert rep.d_ne_sq == pytest.approx(rep.d_erm_sq[1], abs=1e-14)
        assert_array_equal(rep.exceptions, [False, True])
        assert rep.margins()[0] > 0

    def test_random_orthogonal_loadings(self):
        rng = np.random.default_rng(12)
        grid = np.linspace(0.1, 0.9, 9)
        for _ in range(30):
            rep = dominance_certificate(confounder_instance(rng, 2, 4), grid)
            assert rep.holds(0.0)
            assert_allclose(rep.d_erm ** 2, rep.d_erm_sq)

    def test_anticausal_rejected(self):
        with pytest.raises(HypothesisViolated):
            dominance_certificate(preset("P-HOM", 2, 2, seed=0), [0.5])

    def test_identical_coefficients_rejected(self):
        cfg = confounder_only_config(1, 2, np.eye(2), [1.0, 1.0], [1.0, 1.0], np.ones(2), np.ones(2))
        with pytest.raises(HypothesisViolated):
            dominance_certificate(cfg, [0.5])

    def test_realizability_rejected(self):
        cfg = confounder_only_config(1, 1, np.eye(1), [8.0], [-8.0], [1.0], [1.0])
        with pytest.raises(HypothesisViolated):
            dominance_certificate(cfg, [0.5], w_sup=2.0)
