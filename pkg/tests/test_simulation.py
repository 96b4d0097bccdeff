"""Data generation, seeding discipline, Monte Carlo aggregation, and grid
tuning.  Large-sample distributional checks live in the acceptance suite;
here the sizes are kept small."""
import json
import math

import numpy as np
import pytest
from numpy.random import Generator, Philox, SeedSequence

from robreg import (
    ConfigurationError,
    NormalErrors,
    Scenario,
    SimReport,
    SkewTErrors,
    StudentTErrors,
    builtin_scenario,
    format_table,
    gen_design,
    gen_errors,
    grid_search,
    heteroscedastic_scale,
    make_pipeline,
    reference_pipeline,
    replication_data,
    run_monte_carlo,
    sample_skew_t,
    skew_t_mean,
    standard_beta_star,
)
from robreg.simulation import REFERENCE_TUNING

SKEW_T_MEAN_06_3 = 0.5673127530781173  # (0.6/sqrt(1.36)) sqrt(3/pi) / Gamma(3/2)


def rng_of(seed):
    return Generator(Philox(SeedSequence(seed)))


class TestGenDesign:
    def test_deterministic(self):
        a = gen_design(5, 3, rng_of(7))
        b = gen_design(5, 3, rng_of(7))
        np.testing.assert_array_equal(a, b)

    def test_moments(self):
        n = 10_000
        X = gen_design(n, 2, rng_of(1))
        assert np.all(np.abs(X.mean(axis=0)) < 4 / math.sqrt(n))
        assert np.all(np.abs(X.var(axis=0) - 1.0) < 0.1)

    def test_columns_uncorrelated(self):
        n = 10_000
        X = gen_design(n, 2, rng_of(2))
        corr = np.corrcoef(X.T)[0, 1]
        assert abs(corr) < 4 / math.sqrt(n)


class TestSkewT:
    def test_mean_formula_value(self):
        assert skew_t_mean(0.0, 1.0, 0.6, 3.0) == pytest.approx(SKEW_T_MEAN_06_3, abs=1e-12)

    def test_location_scale_shift(self):
        base = skew_t_mean(0.0, 1.0, 0.6, 3.0)
        assert skew_t_mean(2.0, 3.0, 0.6, 3.0) == pytest.approx(2.0 + 3.0 * base)

    def test_zero_shape_is_symmetric(self):
        # moderate df so third moments exist for the skewness estimate
        draws = sample_skew_t(0.0, 1.0, 0.0, 10.0, rng_of(3), size=200_000)
        skew = float(np.mean(draws**3)) / float(np.std(draws)) ** 3
        assert abs(skew) < 0.05
        # sign symmetry also at df = 3 where moments are fragile
        draws3 = sample_skew_t(0.0, 1.0, 0.0, 3.0, rng_of(4), size=200_000)
        assert abs(np.mean(draws3 > 0) - 0.5) < 0.005

    def test_empirical_mean_matches_formula(self):
        n = 200_000
        draws = sample_skew_t(0.0, 1.0, 0.6, 3.0, rng_of(5), size=n)
        se = float(np.std(draws)) / math.sqrt(n)
        assert abs(float(draws.mean()) - SKEW_T_MEAN_06_3) < 3 * se

    def test_large_df_is_normal(self):
        from scipy import stats

        draws = sample_skew_t(0.0, 1.0, 0.0, 1e6, rng_of(6), size=10_000)
        assert stats.kstest(draws, "norm").pvalue > 0.01

    def test_invalid_params(self):
        with pytest.raises(ConfigurationError):
            sample_skew_t(0.0, -1.0, 0.0, 3.0, rng_of(0))
        with pytest.raises(ConfigurationError):
            sample_skew_t(0.0, 1.0, 0.0, 0.0, rng_of(0))


class TestErrorFamilies:
    def test_family_validation(self):
        with pytest.raises(ConfigurationError):
            NormalErrors(-1.0)
        with pytest.raises(ConfigurationError):
            StudentTErrors(df=2.0)
        with pytest.raises(ConfigurationError):
            SkewTErrors(scale=0.0)

    def test_variances(self):
        assert NormalErrors(4.0).variance() == 4.0
        assert StudentTErrors(3.0, 2.0).variance() == pytest.approx(12.0)
        v = SkewTErrors().variance()
        assert v == pytest.approx(3.0 - SKEW_T_MEAN_06_3**2)


class TestGenErrors:
    def scenario(self, hetero, fam=None):
        return Scenario(
            n=500,
            p=4,
            beta_star=np.array([3.0, 3.0, 0.0, 0.0]),
            error_family=fam or NormalErrors(4.0),
            heteroscedastic=hetero,
        )

    def test_hetero_scaling_formula(self):
        # degenerate hook: unit base noise isolates the multiplier
        sc = self.scenario(True)
        X = gen_design(sc.n, sc.p, rng_of(8))
        ones = np.ones(sc.n)
        scaled = heteroscedastic_scale(X, sc.beta_star, ones)
        proj = X @ sc.beta_star
        expected = proj**2 / (math.sqrt(3.0) * float(sc.beta_star @ sc.beta_star))
        np.testing.assert_allclose(scaled, expected, rtol=1e-12)

    def test_hetero_requires_signal(self):
        with pytest.raises(ConfigurationError):
            Scenario(
                n=10, p=2, beta_star=np.zeros(2), error_family=NormalErrors(1.0),
                heteroscedastic=True,
            )
        with pytest.raises(ConfigurationError):
            heteroscedastic_scale(np.ones((3, 2)), np.zeros(2), np.ones(3))

    def test_centered_families(self):
        # skew-t draws are centered by the exact mean, so averages shrink
        sc = self.scenario(False, SkewTErrors())
        big = Scenario(
            n=200_000, p=sc.p, beta_star=sc.beta_star, error_family=SkewTErrors(),
            heteroscedastic=False,
        )
        X = np.zeros((big.n, big.p))
        eps = gen_errors(big, X, rng_of(9))
        se = float(np.std(eps)) / math.sqrt(big.n)
        assert abs(float(eps.mean())) < 4 * se

    def test_conditional_mean_zero(self):
        # regression of hetero errors on the squared projection has no slope
        big = Scenario(
            n=200_000, p=4, beta_star=np.array([3.0, 3.0, 0.0, 0.0]),
            error_family=NormalErrors(4.0), heteroscedastic=True,
        )
        rng = rng_of(10)
        X = gen_design(big.n, big.p, rng)
        eps = gen_errors(big, X, rng)
        z = (X @ big.beta_star) ** 2
        slope = float(np.cov(z, eps)[0, 1] / np.var(z))
        # crude large-sample standard error of the regression slope
        se = float(np.std(eps)) / (np.std(z) * math.sqrt(big.n))
        assert abs(slope) < 5 * se


class TestScenarioSchema:
    def test_roundtrip(self):
        sc = builtin_scenario("table5", seed=42)
        back = Scenario.from_json(sc.to_json())
        assert back.to_json() == sc.to_json()
        np.testing.assert_array_equal(back.beta_star, sc.beta_star)

    def test_rejects_missing_and_unknown_fields(self):
        sc = builtin_scenario("table1")
        obj = json.loads(sc.to_json())
        del obj["n"]
        obj["extra"] = 1
        with pytest.raises(ConfigurationError) as err:
            Scenario.from_json(json.dumps(obj))
        assert "n" in str(err.value) and "extra" in str(err.value)

    def test_rejects_bad_family(self):
        sc = builtin_scenario("table1")
        obj = json.loads(sc.to_json())
        obj["error_family"] = {"family": "cauchy"}
        with pytest.raises(ConfigurationError):
            Scenario.from_json(json.dumps(obj))

    def test_beta_star_construction(self):
        beta = standard_beta_star()
        assert beta.shape == (400,)
        assert np.sum(beta == 3.0) == 20
        assert np.sum(beta == 0.0) == 380
        np.testing.assert_array_equal(np.flatnonzero(beta), np.arange(20))

    def test_builtin_scenarios(self):
        for name in ("table1", "table2", "table3", "table4", "table5", "table6"):
            sc = builtin_scenario(name)
            assert sc.n == 200 and sc.p == 400
            assert sc.heteroscedastic == (name in ("table2", "table4", "table6"))
        with pytest.raises(ConfigurationError):
            builtin_scenario("table7")


def tiny_scenario(seed=0):
    return Scenario(
        n=40, p=12, beta_star=standard_beta_star(12, 3),
        error_family=NormalErrors(1.0), heteroscedastic=False, seed=seed,
    )


class TestRunMonteCarlo:
    def test_single_replication_equals_direct(self):
        from robreg.diagnostics import support_metrics

        sc = tiny_scenario()
        pipe = make_pipeline("L")
        rep = run_monte_carlo(sc, pipe, 0.05, None, reps=1, seed=3)
        data = replication_data(sc, 3, 0)
        beta, _ = pipe.fit(data, 0.05, None)
        m = support_metrics(beta, sc.beta_star)
        assert rep.mean_l2 == m.l2_error
        assert rep.mean_fp_pct == m.fp_pct
        assert rep.replications == 1

    def test_same_seed_identical(self):
        sc = tiny_scenario()
        pipe = make_pipeline("L")
        a = run_monte_carlo(sc, pipe, 0.05, None, reps=5, seed=11)
        b = run_monte_carlo(sc, pipe, 0.05, None, reps=5, seed=11)
        assert a.to_json() == b.to_json()

    def test_threads_do_not_change_results(self):
        sc = tiny_scenario()
        pipe = make_pipeline("LPH")
        serial = run_monte_carlo(sc, pipe, 0.05, 0.3, reps=8, seed=13, threads=1)
        parallel = run_monte_carlo(sc, pipe, 0.05, 0.3, reps=8, seed=13, threads=4)
        assert serial.to_json() == parallel.to_json()

    def test_replication_independent_of_count(self):
        # replication k sees the same data no matter how many reps run
        sc = tiny_scenario()
        d1 = replication_data(sc, 5, 3)
        d2 = replication_data(sc, 5, 3)
        np.testing.assert_array_equal(d1.x, d2.x)
        np.testing.assert_array_equal(d1.y, d2.y)

    def test_scenario_seed_is_default(self):
        sc = tiny_scenario(seed=21)
        pipe = make_pipeline("L")
        a = run_monte_carlo(sc, pipe, 0.05, None, reps=3)
        b = run_monte_carlo(sc, pipe, 0.05, None, reps=3, seed=21)
        assert a.to_json() == b.to_json()

    def test_report_json_roundtrip(self):
        sc = tiny_scenario()
        rep = run_monte_carlo(sc, make_pipeline("L"), 0.05, None, reps=2, seed=1)
        back = SimReport.from_json(rep.to_json())
        assert back.to_json() == rep.to_json()
        assert json.loads(rep.to_json())["lambda"] == rep.lam


class TestGridSearch:
    def test_singleton_grids(self):
        sc = tiny_scenario()
        pipe = make_pipeline("LPH")
        a, l, rep, surface = grid_search(sc, pipe, [0.5], [0.07], reps=2, seed=5)
        assert (a, l) == (0.5, 0.07)
        assert len(surface) == 1

    def test_dominated_point_does_not_change_argmin(self):
        sc = tiny_scenario()
        pipe = make_pipeline("L")
        lam_grid = [0.03, 0.1]
        _, l1, _, _ = grid_search(sc, pipe, [], lam_grid, reps=3, seed=5)
        _, l2, _, surface = grid_search(sc, pipe, [], lam_grid + [50.0], reps=3, seed=5)
        assert l1 == l2
        worst = max(surface, key=lambda row: row["mean_l2"])
        assert worst["lambda"] == 50.0

    def test_common_random_numbers(self):
        # the same grid point must score identically inside different grids
        sc = tiny_scenario()
        pipe = make_pipeline("L")
        _, _, _, s1 = grid_search(sc, pipe, [], [0.05], reps=3, seed=9)
        _, _, _, s2 = grid_search(sc, pipe, [], [0.02, 0.05, 0.2], reps=3, seed=9)
        row1 = s1[0]
        row2 = next(r for r in s2 if r["lambda"] == 0.05)
        assert row1["mean_l2"] == row2["mean_l2"]

    def test_scale_invariant_argmin(self):
        sc = tiny_scenario()
        pipe = make_pipeline("L")
        _, _, _, surface = grid_search(sc, pipe, [], [0.02, 0.05, 0.2], reps=3, seed=9)
        l2s = [r["mean_l2"] for r in surface]
        assert int(np.argmin(l2s)) == int(np.argmin([3.7 * v for v in l2s]))

    def test_alpha_grid_for_robust_loss(self):
        sc = tiny_scenario()
        pipe = make_pipeline("LPH")
        a, l, rep, surface = grid_search(sc, pipe, [0.1, 1.0], [0.03, 0.1], reps=2, seed=4)
        assert len(surface) == 4
        assert rep.alpha == a and rep.lam == l


class TestReferencePipelines:
    def test_reference_tables_cover_labels(self):
        assert set(REFERENCE_TUNING) == {f"table{i}" for i in range(1, 7)}
        for name, cols in REFERENCE_TUNING.items():
            for label in cols:
                pipe = reference_pipeline(name, label)
                assert pipe.label == label

    def test_adaptive_reference_uses_plain_stage(self):
        pipe = reference_pipeline("table1", "ALPH(LPH)")
        lam, alpha = REFERENCE_TUNING["table1"]["LPH"]
        assert pipe.init_lambda == lam and pipe.init_alpha == alpha


def test_format_table_layout():
    rep = SimReport(
        estimator_label="L", lam=0.154, alpha=None, mean_l2=1.66, mean_linf=0.60,
        mean_fp_pct=16.14, mean_fn_pct=0.0, replications=100, seed=0,
    )
    text = format_table([rep])
    lines = text.strip().splitlines()
    assert lines[0].strip().endswith("L")
    assert [ln.split()[0] for ln in lines[1:]] == ["lambda", "alpha", "l2", "linf", "FP", "FN"]
