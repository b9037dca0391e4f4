import numpy as np
import pytest
from hypothesis import given, settings as hyp_settings, strategies as st

from driftguard import action_space, bandit
from driftguard.archive import Archive
from driftguard.config import DEFAULTS
from driftguard.errors import InvalidReward, NoFeasibleAction
from driftguard.schemes import build_diagnostic_scheme
from driftguard.simenv import canonical_action


class TestFeatures:
    def test_injective_over_sa_actions(self, ps_eq3):
        actions = action_space.enumerate_actions("SA")
        vectors = {bandit.encode_features(ps_eq3.context, a).values
                   for a in actions}
        assert len(vectors) == len(actions)

    def test_dimension_matches(self, ps_eq3):
        phi = bandit.encode_features(ps_eq3.context,
                                     canonical_action("Sobol"))
        assert len(phi.values) == bandit.feature_dim("SA")

    def test_deterministic(self, ps_eq3):
        a = canonical_action("CVM")
        assert bandit.encode_features(ps_eq3.context, a) \
            == bandit.encode_features(ps_eq3.context, a)

    def test_context_sensitivity(self, ps_eq3, ps_g8):
        a = canonical_action("Sobol")
        assert bandit.encode_features(ps_eq3.context, a) \
            != bandit.encode_features(ps_g8.context, a)


class TestExplorationSchedule:
    def test_explore_max_starts_at_one(self):
        assert bandit.exploration_schedule(1, "explore_max") == 1.0

    def test_neutral_third_iteration(self):
        assert bandit.exploration_schedule(3, "neutral") \
            == pytest.approx(0.5 * 0.6 ** 2)   # 0.18

    def test_exploit_hits_floor(self):
        assert bandit.exploration_schedule(10, "exploit") == 0.02

    def test_monotone_decay(self):
        eps = [bandit.exploration_schedule(n, "explore_max")
               for n in range(1, 30)]
        assert all(a >= b for a, b in zip(eps, eps[1:]))
        assert eps[-1] == 0.02


class TestPosterior:
    def test_closed_form_single_update(self):
        # One observation on the first basis direction: the posterior mean
        # along it is the centered reward shrunk by the ridge prior,
        # ((r - 50)/sigma^2) / (lambda + 1/sigma^2).
        st_ = bandit.PolicyState("SA")
        phi = np.zeros(st_.dim)
        phi[3] = 1.0
        r = 80.0
        st_.update(bandit.FeatureVector(tuple(phi)), r)
        expected = ((r - 50.0) / 25.0) / (1.0 + 1.0 / 25.0)
        assert st_.posterior_mean[3] == pytest.approx(expected)
        assert st_.posterior_mean[0] == 0.0

    def test_update_commutes_with_weighted_batch(self, ps_g8):
        # Three unit-weight updates equal one weight-3 pseudo-observation.
        phi = bandit.encode_features(ps_g8.context, canonical_action("Sobol"))
        a = bandit.PolicyState("SA")
        for _ in range(3):
            a.update(phi, 91.0)
        b = bandit.PolicyState("SA")
        b._absorb(phi.as_array(), 91.0, 3.0)
        np.testing.assert_allclose(a.precision, b.precision)
        np.testing.assert_allclose(a.b_vector, b.b_vector)

    def test_nonfinite_reward_rejected(self, ps_g8):
        phi = bandit.encode_features(ps_g8.context, canonical_action("CVM"))
        st_ = bandit.PolicyState("SA")
        with pytest.raises(InvalidReward):
            st_.update(phi, float("nan"))

    @hyp_settings(max_examples=30, deadline=None)
    @given(rewards=st.lists(st.floats(0.0, 100.0), min_size=1, max_size=20))
    def test_precision_stays_positive_definite(self, ps_g8, rewards):
        st_ = bandit.PolicyState("SA")
        phi = bandit.encode_features(ps_g8.context,
                                     canonical_action("Chatterjee"))
        for r in rewards:
            st_.update(phi, r, "Chatterjee")
        eigvals = np.linalg.eigvalsh(st_.precision)
        assert np.all(eigvals > 0)
        assert st_.iteration == len(rewards)
        assert st_.estimator_counts["Chatterjee"] == len(rewards)

    def test_snapshot_round_trip(self, ps_g8):
        st_ = bandit.PolicyState("SA", exploration_mode="neutral")
        phi = bandit.encode_features(ps_g8.context, canonical_action("Sobol"))
        st_.update(phi, 77.0, "Sobol")
        again = bandit.PolicyState.from_snapshot(st_.snapshot())
        np.testing.assert_allclose(again.precision, st_.precision)
        np.testing.assert_allclose(again.b_vector, st_.b_vector)
        assert again.exploration_mode == "neutral"
        assert again.estimator_counts == {"Sobol": 1}


class TestSelectAction:
    def _arms(self, ps):
        return [canonical_action(e) for e in ps.feasible_sa_estimators]

    def test_empty_feasible_set_raises(self, ps_eq3):
        with pytest.raises(NoFeasibleAction):
            bandit.select_action(bandit.PolicyState("SA"), ps_eq3, [])

    def test_single_candidate(self, ps_eq3):
        arm = canonical_action("Sobol")
        decision = bandit.select_action(bandit.PolicyState("SA"), ps_eq3,
                                        [arm], rng_seed=0)
        assert decision.action == arm
        assert decision.method_scheme.estimator == "Sobol"

    def test_warm_start_close_exploits_known_arm(self, ps_g8):
        # A close-match warm start with one strong arm should make the
        # policy pick that arm almost always in exploit mode.
        archive = Archive()
        entry = archive.seed_entry(ps_g8, canonical_action("Sobol"), 91.0, 3)
        hits = 0
        for seed in range(40):
            st_ = bandit.PolicyState("SA", exploration_mode="exploit")
            st_.warm_start(entry.arm_stats_list(), "close")
            assert st_.exploration_mode == "exploit"
            d = bandit.select_action(st_, ps_g8, self._arms(ps_g8),
                                     rng_seed=seed)
            hits += d.action.estimator == "Sobol"
        # Exploit mode still carries a 10% epsilon at iteration 1, so allow
        # a handful of exploratory picks.
        assert hits >= 30

    def test_weak_warm_start_carries_lower_weight(self, ps_g8):
        archive = Archive()
        entry = archive.seed_entry(ps_g8, canonical_action("Sobol"), 91.0, 3)
        close = bandit.PolicyState("SA")
        close.warm_start(entry.arm_stats_list(), "close")
        weak = bandit.PolicyState("SA")
        weak.warm_start(entry.arm_stats_list(), "weak")
        assert weak.exploration_mode == "neutral"
        phi = bandit.encode_features(ps_g8.context,
                                     canonical_action("Sobol")).as_array()
        assert float(weak.posterior_mean @ phi) \
            < float(close.posterior_mean @ phi)
        with pytest.raises(ValueError):
            bandit.PolicyState("SA").warm_start(entry.arm_stats_list(),
                                                "none")

    def test_blocked_estimator_avoided(self, ps_eq3):
        diag = build_diagnostic_scheme(
            "required attribute first_order_indices absent",
            None, _zero_breakdown())
        for seed in range(20):
            d = bandit.select_action(bandit.PolicyState("SA"), ps_eq3,
                                     self._arms(ps_eq3), diag=diag,
                                     blocked_estimator="Sobol",
                                     rng_seed=seed)
            if not d.epsilon_fired:
                assert d.action.estimator != "Sobol"

    def test_prescribed_estimator_dominates(self, ps_eq3):
        diag = build_diagnostic_scheme(
            "wrong estimator. prescribe estimator CVM.",
            None, _zero_breakdown())
        d = bandit.select_action(bandit.PolicyState("SA"), ps_eq3,
                                 self._arms(ps_eq3), diag=diag, rng_seed=0)
        assert d.action.estimator == "CVM"

    def test_prescribed_n_factor_scales_and_clamps(self, ps_eq3):
        diag = build_diagnostic_scheme(
            "sampling insufficient at n_samples=1000.",
            None, _zero_breakdown())
        d = bandit.select_action(
            bandit.PolicyState("SA"), ps_eq3, [canonical_action("CVM")],
            diag=diag, rng_seed=0,
            prev_hyperparams={"n_samples": 1000, "_estimator": "CVM"})
        n = d.method_scheme.hyperparam("n_samples")
        # Prescribed 2000 is below CVM's single-loop floor 500*(4+2)=3000.
        assert n == 3000

    def test_hyperparams_only_carry_over_same_estimator(self, ps_eq3):
        d = bandit.select_action(
            bandit.PolicyState("SA"), ps_eq3, [canonical_action("Sobol")],
            rng_seed=0, prev_hyperparams={"n_samples": 999999,
                                          "_estimator": "CVM"})
        assert d.method_scheme.hyperparam("n_samples") != 999999

    def test_novelty_penalty_flagged(self, ps_eq3):
        st_ = bandit.PolicyState("SA")
        phi = bandit.encode_features(ps_eq3.context,
                                     canonical_action("Sobol"))
        for _ in range(5):
            st_.update(phi, 90.0, "Sobol")
        d = bandit.select_action(st_, ps_eq3, self._arms(ps_eq3),
                                 novelty_warning=True, rng_seed=1)
        assert d.novelty_penalty_applied

    def test_deterministic_given_seed(self, ps_eq3):
        st_ = bandit.PolicyState("SA")
        a = bandit.select_action(st_, ps_eq3, self._arms(ps_eq3), rng_seed=42)
        b = bandit.select_action(st_, ps_eq3, self._arms(ps_eq3), rng_seed=42)
        assert a.action == b.action and a.sampled_scores == b.sampled_scores


def _zero_breakdown():
    from driftguard.reward import RewardBreakdown
    return RewardBreakdown(0.0, 0.0, 0.0, 0.0, ())


class TestDefaultNSamples:
    def test_targets_safety_scaled_minimum(self, ps_eq3):
        # Sobol on d=4, budget 8000: target min(8000, max(2*3000, 4000)) =
        # 6000 total evaluations -> 1000 per loop.
        assert bandit.default_n_samples("Sobol", ps_eq3.context) == 1000

    def test_morris_uses_trajectory_cost(self, ps_g8):
        n = bandit.default_n_samples("Morris", ps_g8.context)
        info_cost = n * (ps_g8.context.d_in + 1)
        assert info_cost <= ps_g8.context.n_budget
