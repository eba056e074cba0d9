import math

import numpy as np
import pytest
from numpy.testing import assert_allclose, assert_array_equal

from clrg.bench import estimation_error
from clrg.dynamics import (
    DynamicsParams,
    clamp_brd,
    exact_brd,
    exact_brd_multi,
    iteration_bound,
    penalty_gradient,
    sgd_brd,
    signed_grad_brd,
)
from clrg.errors import ClrgError, EmptyVSet, RealizabilityViolated
from clrg.game import IndexSplit, nash_ensemble
from clrg.instances import separable_instance
from clrg.population import EnvironmentMoments, least_squares, population_moments
from clrg.sem import EnvParams, EnvSample, SemConfig, preset, sample_all


def _diag_moments(w_star, diag):
    sigma = np.diag(diag)
    return EnvironmentMoments(sigma=sigma, rho=sigma @ np.asarray(w_star), mu=np.zeros(len(diag)))


class TestExactBrd:
    def test_agreement_settles_after_first_round(self):
        base = preset("F-HOM", 2, 2, seed=0)
        env = EnvParams(alpha=np.zeros(2), theta=np.zeros((2, 2)), eta=np.zeros(2), sigma_eps=1.0,
                        sigma_zeta=np.ones(2), sigma_h=1.0, sigma_x1=np.ones(2))
        cfg = SemConfig(p=2, q=2, s=2, gamma=base.gamma, envs=(env, env))
        m = population_moments(cfg, 0)
        tr = exact_brd(m, m, DynamicsParams())
        assert_allclose(tr.rounds[1].ensemble, least_squares(m).w_star, atol=1e-12)
        assert tr.converged and tr.n_rounds <= 2

    def test_two_dimensional_example(self):
        m1 = _diag_moments([1.0, 0.5], [1.0, 2.0])
        m2 = _diag_moments([1.0, -0.3], [1.5, 0.7])
        tr = exact_brd(m1, m2, DynamicsParams(w_sup=2.0))
        assert tr.converged
        assert_allclose(tr.final_ensemble, [1.0, 0.0], atol=1e-10)
        assert_allclose([tr.final_strategies[0][1], tr.final_strategies[1][1]], [2.0, -2.0], atol=1e-10)

    def test_matches_equilibrium_on_random_instances(self):
        rng = np.random.default_rng(21)
        for _ in range(200):
            inst = separable_instance(rng, int(rng.integers(1, 8)), rng.uniform(0.5, 4),
                                      n_shared=int(rng.integers(0, 2)))
            tr = exact_brd(*inst.moments, DynamicsParams(w_sup=inst.w_sup))
            assert tr.converged
            assert np.max(np.abs(tr.final_ensemble - nash_ensemble(*inst.stars))) <= 1e-8

    def test_trace_invariants(self):
        rng = np.random.default_rng(4)
        inst = separable_instance(rng, 4, 1.5, n_shared=2)
        tr = exact_brd(*inst.moments, DynamicsParams(w_sup=1.5))
        for r in tr.rounds:
            assert_array_equal(r.ensemble, r.strategies[0] + r.strategies[1])
            assert max(np.max(np.abs(s)) for s in r.strategies) <= 1.5 + 1e-12
        assert all(after <= before + 1e-12 * max(1.0, abs(before)) for _, _, before, after in tr.turns)

    def test_turn_order_does_not_change_the_ensemble(self):
        rng = np.random.default_rng(6)
        inst = separable_instance(rng, 5, 2.0)
        a = exact_brd(*inst.moments, DynamicsParams(w_sup=2.0))
        b = exact_brd(*inst.moments, DynamicsParams(w_sup=2.0, env_order=(1, 0)))
        assert_allclose(a.final_ensemble, b.final_ensemble, atol=1e-8)

    def test_max_rounds_reported(self):
        m1 = _diag_moments([0.5], [1.0])
        m2 = _diag_moments([-0.5], [1.0])
        tr = exact_brd(m1, m2, DynamicsParams(w_sup=2.0, max_rounds=1))
        assert not tr.converged
        assert tr.stop_reason == "max_rounds"

    def test_three_environments_reach_the_median(self):
        rng = np.random.default_rng(2)
        inst = separable_instance(rng, 3, 2.0, r=3)
        tr = exact_brd_multi(inst.moments, DynamicsParams(w_sup=2.0))
        assert_allclose(tr.final_ensemble, np.median(np.array(inst.stars), axis=0), atol=1e-6)


class TestClampBrd:
    def test_first_two_moves(self):
        a = np.array([0.8, -0.4, 0.3])
        b = np.array([-0.6, 0.9, 0.5])
        tr = clamp_brd(a, b, DynamicsParams(w_sup=1.0, max_rounds=1))
        # Round 1: environment 1 plays its own solution, then 2 plays the clamped gap.
        assert_array_equal(tr.rounds[1].strategies[0], a)
        assert_allclose(tr.rounds[1].strategies[1], np.clip(b - a, -1.0, 1.0))

    def test_opposite_component_pins_to_boundary(self):
        tr = clamp_brd([0.5, 1.0], [-0.3, 1.0], DynamicsParams(w_sup=2.0))
        assert tr.converged
        assert_allclose([tr.final_strategies[0][0], tr.final_strategies[1][0]], [2.0, -2.0])
        assert_allclose(tr.final_ensemble, [0.0, 1.0])

    def test_agrees_with_exact(self):
        rng = np.random.default_rng(13)
        for _ in range(50):
            inst = separable_instance(rng, 4, rng.uniform(1, 3))
            p = DynamicsParams(w_sup=inst.w_sup)
            assert_allclose(clamp_brd(*inst.stars, p).final_ensemble, exact_brd(*inst.moments, p).final_ensemble,
                            atol=1e-8)

    def test_unconstrained_growth(self):
        tr = clamp_brd([1.0, 0.5], [1.0, 0.6], DynamicsParams(w_sup=1e6, max_rounds=10**6,
                                                              divergence_threshold=1e3, trace_every=100))
        assert tr.stop_reason == "diverged"
        assert tr.max_strategy_norm() > 1e3
        norms = [abs(r.strategies[0][1]) for r in tr.rounds]
        assert all(y >= x for x, y in zip(norms, norms[1:]))

    def test_realizability(self):
        with pytest.raises(RealizabilityViolated):
            clamp_brd([3.0], [0.0], DynamicsParams(w_sup=2.0))


class TestSignedGradient:
    params = DynamicsParams(w_sup=2.0, beta=1e-3, max_rounds=50_000)

    def test_same_sign_band_center(self):
        tr = signed_grad_brd([0.4], [0.9], self.params)
        assert tr.stop_reason == "oscillation_detected"
        assert abs(tr.band_center[0] - 0.4) <= 1e-2

    def test_opposite_sign_pins(self):
        tr = signed_grad_brd([-0.4], [0.7], self.params)
        assert_array_equal(tr.final_strategies[0], [-2.0])
        assert_array_equal(tr.final_strategies[1], [2.0])
        assert_array_equal(tr.final_ensemble, [0.0])

    def test_equal_solutions(self):
        tr = signed_grad_brd([0.6, -0.2], [0.6, -0.2], self.params)
        assert np.max(np.abs(tr.band_center - [0.6, -0.2])) <= 1e-3

    def test_random_instances(self):
        rng = np.random.default_rng(1)
        for _ in range(10):
            a, b = rng.uniform(-1.8, 1.8, (2, 3))
            tr = signed_grad_brd(a, b, self.params)
            target = nash_ensemble(a, b)
            sep = np.abs(a - b) > 1e-2
            assert np.all(np.abs(tr.band_center - target)[sep] <= 1e-2)


class TestSgdBrd:
    def test_anticausal_two_dimensional(self):
        cfg = preset("F-HOM", 1, 1, seed=3)
        samples = sample_all(cfg, 1000, seed=4)
        w = sgd_brd(samples, DynamicsParams(w_sup=2.0, seed=5, trace_every=10**6)).ensemble
        assert estimation_error(w, 1, 1) <= 0.05

    def test_unconstrained_mode_matches_erm_scale(self):
        errs = []
        for seed in range(3):
            cfg = preset("F-HOM", 1, 1, seed=seed)
            samples = sample_all(cfg, 1000, seed=seed + 10)
            w = sgd_brd(samples, DynamicsParams(w_sup=math.inf, seed=seed, trace_every=10**6)).ensemble
            errs.append(estimation_error(w, 1, 1))
        assert 0.88 - 0.3 <= np.median(errs) <= 0.88 + 0.3

    def test_noiseless_duplicate_environment(self):
        rng = np.random.default_rng(0)
        x = rng.standard_normal((500, 3))
        w_star = np.array([0.7, -0.4, 1.1])
        s = [EnvSample(0, x, x @ w_star), EnvSample(1, x, x @ w_star)]
        w = sgd_brd(s, DynamicsParams(w_sup=2.0, trace_every=10**6)).ensemble
        assert np.max(np.abs(w - w_star)) <= 0.01

    def test_seed_determinism(self):
        samples = sample_all(preset("P-HET", 2, 2, seed=1), 200, seed=2)
        p = DynamicsParams(epochs=5, seed=9)
        a, b = sgd_brd(samples, p), sgd_brd(samples, p)
        assert all(np.array_equal(x.ensemble, y.ensemble) for x, y in zip(a.rounds, b.rounds))
        c = sgd_brd(samples, p.with_(seed=10))
        assert not np.array_equal(a.final_ensemble, c.final_ensemble)

    def test_budget_and_box(self):
        samples = sample_all(preset("F-HET", 2, 2, seed=1), 300, seed=2)
        tr = sgd_brd(samples, DynamicsParams(w_sup=0.5, epochs=3))
        assert tr.n_rounds == 3 * math.ceil(300 / 128)
        assert tr.stop_reason == "max_rounds"
        assert tr.max_strategy_norm() <= 0.5
        for r in tr.rounds:
            assert_allclose(r.ensemble, r.strategies[0] + r.strategies[1], atol=1e-15)

    def test_penalty_gradients(self):
        w = np.array([0.5, -2.0, 2.0])
        assert_allclose(penalty_gradient(w, "l2", 0.1), 0.2 * w)
        assert_allclose(penalty_gradient(w, "linf", 0.1), [0.0, -0.05, 0.05])
        assert_array_equal(penalty_gradient(np.zeros(3), "linf", 0.1), 0.0)
        assert_array_equal(penalty_gradient(w, "none", 0.1), 0.0)

    def test_empty_sample(self):
        with pytest.raises(ClrgError):
            sgd_brd([EnvSample(0, np.ones((3, 2)), np.ones(3))], DynamicsParams())


class TestIterationBound:
    def test_arithmetic(self):
        assert iteration_bound([0.0], [0.8], 2.0, IndexSplit(u_set=(), v_set=(0,))) == pytest.approx(5.0)

    def test_from_coefficients(self):
        assert iteration_bound([1.0, 0.5], [1.0, -0.3], 2.0) == pytest.approx(5.0)

    def test_empty_v(self):
        with pytest.raises(EmptyVSet):
            iteration_bound([1.0, 2.0], [1.0, 2.0], 2.0)

    def test_rounds_within_bound(self):
        rng = np.random.default_rng(17)
        for _ in range(50):
            inst = separable_instance(rng, 5, rng.uniform(0.5, 4))
            bound = iteration_bound(*inst.stars, inst.w_sup)
            tr = exact_brd(*inst.moments, DynamicsParams(w_sup=inst.w_sup))
            assert tr.n_rounds <= math.ceil(bound) + 2


class TestParams:
    @pytest.mark.parametrize("kw", [{"tol": 0.0}, {"max_rounds": 0}, {"beta": -1.0}, {"penalty": "l1"}])
    def test_invalid(self, kw):
        with pytest.raises(ClrgError):
            DynamicsParams(**kw)
