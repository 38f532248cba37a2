import math
from fractions import Fraction

import numpy as np
import pytest

from ceassoc import kernels
from ceassoc.assoc import Association, LoadCaps, UtilitySpec, evaluate_utility, \
    is_feasible
from ceassoc.ce import (BernoulliParams, CEConfig, SampleStream, ceas_run,
                        elite_log_likelihood, sample_feasible, score_samples,
                        select_elites, smooth_update, update_params)
from ceassoc.errors import ContractError
from ceassoc.netmodel import ScenarioConfig, compute_link_gains, \
    generate_deployment
from conftest import make_gains

LOG = UtilitySpec("logarithmic")


class TestConfig:
    def test_defaults_follow_the_benchmark_setup(self):
        cfg = CEConfig()
        assert (cfg.n_samples, cfg.n_elites, cfg.n_iterations) == (500, 10, 20)
        assert cfg.smoothing_alpha == 0.7

    @pytest.mark.parametrize("kwargs", [
        {"n_samples": 0},
        {"n_elites": 0},
        {"n_elites": 600},
        {"smoothing_alpha": 1.5},
        {"smoothing_alpha": -0.1},
        {"n_iterations": 0},
        {"stop_after_stagnant": 0},
        {"warm_start": [0.5, 0.5]},
    ])
    def test_invalid_configs_rejected(self, kwargs):
        with pytest.raises(ContractError):
            CEConfig(**kwargs)


class TestBernoulliParams:
    def test_uniform_start(self):
        p = BernoulliParams.uniform(3, 2)
        assert np.all(p.u == 0.5)
        assert p.matrix().shape == (3, 2)

    def test_bounds_enforced(self):
        with pytest.raises(ContractError):
            BernoulliParams([1.5, 0.0], 1, 2)
        with pytest.raises(ContractError):
            BernoulliParams([0.5], 1, 2)


class TestUpdateParams:
    def test_unanimous_bits_become_certain(self):
        elites = np.array([[1, 0], [1, 0], [1, 0]])
        v = update_params(elites, n_bs=2)
        assert v.matrix().tolist() == [[0.0, 1.0], [1.0, 0.0]]

    def test_elite_mean_is_exact_rational(self):
        # 10 elites, 4 of which put user 0 on BS 1
        rows = [[1, 0]] * 4 + [[0, 1]] * 6
        elites = np.array(rows)
        v = update_params(elites, n_bs=2)
        assert v.matrix()[0, 1] == float(Fraction(4, 10))
        assert v.matrix()[0, 0] == float(Fraction(6, 10))

    def test_single_elite_copies_its_bits(self):
        a = Association([2, 0, 1], 3)
        v = update_params([a])
        assert np.array_equal(v.u, a.flat().astype(float))

    def test_random_sets_match_fractions(self):
        rng = np.random.default_rng(21)
        for _ in range(20):
            n_elites = int(rng.integers(1, 12))
            n_users, n_bs = int(rng.integers(1, 6)), int(rng.integers(1, 5))
            mat = rng.integers(0, n_bs, size=(n_elites, n_users))
            v = update_params(mat, n_bs=n_bs).matrix()
            for i in range(n_users):
                for j in range(n_bs):
                    count = int(np.sum(mat[:, i] == j))
                    assert v[i, j] == float(Fraction(count, n_elites))

    def test_empty_set_rejected(self):
        with pytest.raises(ContractError):
            update_params(np.zeros((0, 3), dtype=np.int64), n_bs=2)


class TestSmoothUpdate:
    def test_alpha_one_returns_the_new_estimate(self):
        prev = BernoulliParams.uniform(2, 2)
        v = BernoulliParams([0.1, 0.9, 0.4, 0.6], 2, 2)
        assert np.array_equal(smooth_update(prev, v, 1.0).u, v.u)

    def test_alpha_zero_keeps_the_previous(self):
        prev = BernoulliParams.uniform(2, 2)
        v = BernoulliParams([0.1, 0.9, 0.4, 0.6], 2, 2)
        assert np.array_equal(smooth_update(prev, v, 0.0).u, prev.u)

    def test_hand_value(self):
        prev = BernoulliParams([0.5], 1, 1)
        v = BernoulliParams([0.4], 1, 1)
        out = smooth_update(prev, v, 0.7)
        assert out.u[0] == pytest.approx(0.43, abs=1e-15)

    def test_stays_in_unit_interval_and_monotone_in_alpha(self):
        rng = np.random.default_rng(22)
        prev = BernoulliParams(rng.random(12), 3, 4)
        v = BernoulliParams(rng.random(12), 3, 4)
        alphas = np.linspace(0, 1, 11)
        blends = [smooth_update(prev, v, a).u for a in alphas]
        for b in blends:
            assert np.all((b >= 0) & (b <= 1))
        # elementwise monotone from prev toward v
        direction = np.sign(v.u - prev.u)
        for lo, hi in zip(blends, blends[1:]):
            assert np.all(direction * (hi - lo) >= -1e-15)

    def test_dimension_mismatch(self):
        with pytest.raises(ContractError):
            smooth_update(BernoulliParams.uniform(2, 2),
                          BernoulliParams.uniform(2, 3), 0.5)


class TestEliteLogLikelihood:
    def test_perfect_saturated_match_is_zero(self):
        a = Association([1, 0], 2)
        params = update_params([a])  # all entries 0 or 1, matching
        assert elite_log_likelihood([a], params, n_samples=1) == 0.0

    def test_hand_value_with_half_probabilities(self):
        a = Association([0], 2)  # x = (1, 0)
        params = BernoulliParams([0.5, 0.5], 1, 2)
        got = elite_log_likelihood([a], params, n_samples=2)
        assert got == pytest.approx(-math.log(2), rel=1e-12)

    def test_contradicting_saturated_parameter_is_neg_inf(self):
        a = Association([0], 2)
        params = BernoulliParams([0.0, 1.0], 1, 2)  # says BS 1, elite says BS 0
        assert elite_log_likelihood([a], params, n_samples=1) == -np.inf

    def test_elite_mean_maximizes_the_likelihood(self):
        rng = np.random.default_rng(23)
        for _ in range(20):
            n_elites = int(rng.integers(1, 10))
            n_users, n_bs = int(rng.integers(1, 5)), int(rng.integers(2, 5))
            mat = rng.integers(0, n_bs, size=(n_elites, n_users))
            v = update_params(mat, n_bs=n_bs)
            ll_star = elite_log_likelihood(mat_to_assocs(mat, n_bs), v,
                                           n_samples=50)
            for _ in range(100):
                noise = rng.normal(0, 0.1, size=v.u.shape)
                perturbed = BernoulliParams(np.clip(v.u + noise, 0, 1),
                                            v.n_users, v.n_bs)
                ll = elite_log_likelihood(mat_to_assocs(mat, n_bs), perturbed,
                                          n_samples=50)
                assert ll_star >= ll


def mat_to_assocs(mat, n_bs):
    return [Association(row, n_bs) for row in mat]


class TestSelectElites:
    def test_descending_selection(self):
        samples = np.array([[0], [1], [2]])
        elites, scores, idx = select_elites(samples, np.array([3.0, 1.0, 2.0]), 2)
        assert idx.tolist() == [0, 2]
        assert scores.tolist() == [3.0, 2.0]
        assert elites.tolist() == [[0], [2]]

    def test_ties_break_to_lower_index(self):
        samples = np.array([[0], [1], [2], [3]])
        _, _, idx = select_elites(samples, np.zeros(4), 3)
        assert idx.tolist() == [0, 1, 2]

    def test_taking_all_is_a_permutation(self):
        rng = np.random.default_rng(24)
        samples = rng.integers(0, 3, size=(8, 4))
        elites, _, idx = select_elites(samples, rng.random(8), 8)
        assert sorted(idx.tolist()) == list(range(8))
        assert np.array_equal(elites, samples[idx])

    def test_too_many_elites_rejected(self):
        with pytest.raises(ContractError):
            select_elites(np.zeros((2, 1), dtype=np.int64), np.zeros(2), 3)


class TestSampleFeasible:
    def test_forced_rows(self):
        u = np.zeros(8)
        u[[0, 4]] = 1.0  # both users forced to BS 0 of 4
        params = BernoulliParams(u, 2, 4)
        a = sample_feasible(params, LoadCaps.inactive(2, 4), SampleStream(1))
        assert a.assign.tolist() == [0, 0]

    def test_distinct_streams_vary(self):
        params = BernoulliParams.uniform(6, 3)
        caps = LoadCaps.inactive(6, 3)
        draws = {tuple(sample_feasible(params, caps,
                                       SampleStream(9, 0, k)).assign.tolist())
                 for k in range(32)}
        assert len(draws) > 1

    def test_infeasible_caps_error(self):
        params = BernoulliParams.uniform(4, 2)
        with pytest.raises(ContractError):
            sample_feasible(params, LoadCaps([1, 1]), SampleStream(0))

    def test_respects_tight_caps(self):
        params = BernoulliParams.uniform(6, 2)
        caps = LoadCaps([3, 3])
        for k in range(50):
            a = sample_feasible(params, caps, SampleStream(5, 0, k))
            assert is_feasible(a, caps)


class TestScoreSamples:
    def test_singleton_matches_evaluate_utility(self):
        g = make_gains([[4e6, 1e6], [1e6, 3e6]])
        a = Association([0, 1], 2)
        got = score_samples([a], g, LOG)
        assert got.shape == (1,)
        assert got[0] == pytest.approx(evaluate_utility(a, g, LOG), rel=1e-12)

    def test_duplicates_preserved(self):
        g = make_gains([[4e6, 1e6], [1e6, 3e6]])
        a = Association([0, 1], 2)
        got = score_samples([a, a, a], g, LOG)
        assert np.all(got == got[0])

    def test_hand_built_samples(self):
        g = make_gains([[4e6, 2e6], [6e6, 2e6]])
        cases = {
            (0, 0): math.log(2.0) + math.log(3.0),
            (0, 1): math.log(4.0) + math.log(2.0),
            (1, 1): math.log(1.0) + math.log(1.0),
        }
        samples = [Association(list(k), 2) for k in cases]
        got = score_samples(samples, g, LOG)
        for s, expect in zip(got, cases.values()):
            assert s == pytest.approx(expect, rel=1e-12)


class TestCeasRun:
    def test_two_by_two_matches_exhaustive(self):
        from ceassoc.baselines import exhaustive_search

        for seed in range(5):
            cfg = ScenarioConfig(n_users=2, n_sbs=1)
            gains = compute_link_gains(generate_deployment(cfg, seed))
            caps = LoadCaps.inactive(2, 2)
            _, trace = ceas_run(gains, caps, cfg.utility,
                                CEConfig(n_iterations=5, seed=seed))
            _, best = exhaustive_search(gains, caps, cfg.utility)
            assert trace.incumbent_score == pytest.approx(best, rel=1e-12)

    def test_deterministic_traces(self, one_drop_gains):
        caps = LoadCaps.inactive(30, 4)
        cfg = CEConfig(n_samples=100, n_iterations=6, seed=3)
        a1, t1 = ceas_run(one_drop_gains, caps, LOG, cfg)
        a2, t2 = ceas_run(one_drop_gains, caps, LOG, cfg)
        assert a1 == a2
        assert t1.best_score_curve().tolist() == t2.best_score_curve().tolist()
        assert [s.mean_score for s in t1.per_iteration] == \
            [s.mean_score for s in t2.per_iteration]

    def test_every_scored_sample_is_feasible(self, monkeypatch):
        cfg = ScenarioConfig(n_users=8, n_sbs=2)
        gains = compute_link_gains(generate_deployment(cfg, 4))
        caps = LoadCaps([3, 3, 2])
        seen = []
        original = kernels.sample_assignments

        def spy(*args, **kwargs):
            out = original(*args, **kwargs)
            seen.append(out.copy())
            return out

        import ceassoc.ce as ce_mod
        monkeypatch.setattr(ce_mod.kernels, "sample_assignments", spy)
        ceas_run(gains, caps, cfg.utility, CEConfig(n_samples=50,
                                                    n_iterations=4, seed=1))
        assert seen
        for batch in seen:
            loads = kernels.batch_loads(batch, 3)
            assert np.all(loads <= caps.cap[None, :])
            assert np.all(batch >= 0) and np.all(batch < 3)

    def test_incumbent_dominates_and_is_monotone(self, one_drop_gains):
        caps = LoadCaps.inactive(30, 4)
        _, trace = ceas_run(one_drop_gains, caps, LOG,
                            CEConfig(n_samples=100, n_iterations=8, seed=5))
        inc = trace.incumbent_curve()
        assert np.all(np.diff(inc) >= 0)
        assert trace.incumbent_score == inc[-1]
        assert trace.incumbent_score == trace.best_score_curve().max()
        assert trace.final_iteration_best_score <= trace.incumbent_score
        assert trace.iterations_run == 8

    def test_incumbent_is_feasible(self, one_drop_gains):
        caps = LoadCaps([10, 7, 7, 7])
        best, _ = ceas_run(one_drop_gains, caps, LOG,
                           CEConfig(n_samples=200, n_iterations=6, seed=6))
        assert is_feasible(best, caps)

    def test_stagnation_stop_is_config_gated(self, one_drop_gains):
        caps = LoadCaps.inactive(30, 4)
        cfg = CEConfig(n_samples=100, n_iterations=50, seed=7,
                       stop_after_stagnant=3)
        _, trace = ceas_run(one_drop_gains, caps, LOG, cfg)
        assert trace.iterations_run < 50
        full = CEConfig(n_samples=100, n_iterations=12, seed=7)
        _, t2 = ceas_run(one_drop_gains, caps, LOG, full)
        assert t2.iterations_run == 12

    def test_trace_jsonl_round_trip(self, one_drop_gains):
        import json

        caps = LoadCaps.inactive(30, 4)
        _, trace = ceas_run(one_drop_gains, caps, LOG,
                            CEConfig(n_samples=50, n_iterations=3, seed=8))
        lines = trace.to_jsonl().strip().split("\n")
        assert len(lines) == 3
        rec = json.loads(lines[0])
        assert set(rec) == {"t", "best_score", "elite_mean_score", "mean_score"}

    def test_sampler_uniformity_chi_square(self):
        from scipy.stats import chisquare

        n_users, n_bs = 3, 4
        params = BernoulliParams.uniform(n_users, n_bs)
        caps = LoadCaps.inactive(n_users, n_bs)
        draws = kernels.sample_assignments(
            params.matrix(), caps.cap, 2024, 0, 0, 100_000, 20, 100)
        for i in range(n_users):
            counts = np.bincount(draws[:, i], minlength=n_bs)
            _, p = chisquare(counts)
            assert p > 0.001, f"user {i} counts {counts}"
