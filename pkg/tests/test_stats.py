import itertools
import json
import math
import random
from pathlib import Path

import numpy as np
import pytest
from scipy import stats as sps

from startlab.errors import (
    DegenerateGroupWarning,
    LikertRangeError,
    TooFewGroupsError,
    TooFewSamplesError,
)
from startlab.stats import (
    RunningStats,
    SampleSet,
    bonferroni_pairwise,
    descriptive,
    exclude_outliers_3sigma,
    f_test_var,
    likert_summary,
    shapiro_wilk,
    tukey_kramer,
    welch_t,
)

DATA = json.loads((Path(__file__).parent / "data" / "stats_regression.json").read_text())


def dataset(name):
    return next(d for d in DATA if d["name"] == name)


class TestShapiroWilk:
    @pytest.mark.parametrize("ds", DATA, ids=[d["name"] for d in DATA])
    def test_matches_reference_on_frozen_datasets(self, ds):
        for label, expected in ds["expected"].get("shapiro", {}).items():
            res = shapiro_wilk(ds["groups"][label])
            assert res.statistic == pytest.approx(expected["W"], abs=1e-4)
            assert res.p_value == pytest.approx(expected["p"], abs=1e-4)

    def test_matches_scipy_live_across_sizes(self):
        rng = np.random.default_rng(5)
        for n in (3, 4, 5, 8, 11, 12, 35, 200, 1680, 5000):
            x = rng.normal(100, 12, n)
            res = shapiro_wilk(x)
            w, p = sps.shapiro(x)
            assert res.statistic == pytest.approx(w, abs=1e-4)
            assert res.p_value == pytest.approx(p, abs=1e-4)

    def test_bimodal_sample_rejected_as_nonnormal(self):
        res = shapiro_wilk(dataset("bimodal-60")["groups"]["a"])
        assert res.p_value < 0.01

    def test_bounds(self):
        with pytest.raises(TooFewSamplesError):
            shapiro_wilk([1.0, 2.0])
        with pytest.raises(TooFewSamplesError):
            shapiro_wilk(list(range(5001)))

    def test_permutation_invariant(self):
        values = dataset("fixed-20")["groups"]["a"]
        shuffled = list(values)
        random.Random(3).shuffle(shuffled)
        assert shapiro_wilk(values).statistic == pytest.approx(
            shapiro_wilk(shuffled).statistic, abs=1e-12
        )


class TestWelch:
    @pytest.mark.parametrize(
        "ds", [d for d in DATA if "welch" in d["expected"]], ids=lambda d: d["name"]
    )
    def test_matches_reference(self, ds):
        keys = sorted(ds["groups"])
        res = welch_t(ds["groups"][keys[0]], ds["groups"][keys[1]])
        assert res.statistic == pytest.approx(ds["expected"]["welch"]["t"], abs=1e-6)
        assert res.p_value == pytest.approx(ds["expected"]["welch"]["p"], abs=1e-6)
        assert res.df == pytest.approx(ds["expected"]["welch"]["df"], abs=1e-6)

    def test_identical_samples(self):
        values = [1.0, 2.0, 3.0, 4.0]
        res = welch_t(values, values)
        assert res.statistic == 0.0
        assert res.p_value == 1.0

    def test_too_few(self):
        with pytest.raises(TooFewSamplesError):
            welch_t([1.0, 2.0], [1.0, 2.0, 3.0])

    def test_permutation_invariant(self):
        a = dataset("normal-shift")["groups"]["a"]
        b = dataset("normal-shift")["groups"]["b"]
        a2 = list(a)
        random.Random(1).shuffle(a2)
        assert welch_t(a, b).p_value == pytest.approx(welch_t(a2, b).p_value, abs=1e-12)


class TestPermutationInvariance:
    def test_all_procedures_ignore_sample_order(self):
        ds = dataset("three-balanced")
        keys = sorted(ds["groups"])
        original = [list(ds["groups"][k]) for k in keys]
        shuffled = [list(v) for v in original]
        for v in shuffled:
            random.Random(13).shuffle(v)

        assert f_test_var(original[0], original[1]).p_value == pytest.approx(
            f_test_var(shuffled[0], shuffled[1]).p_value, abs=1e-12
        )
        t1 = tukey_kramer(original)
        t2 = tukey_kramer(shuffled)
        for p1, p2 in zip(t1.pairs, t2.pairs):
            assert p1.adjusted_p == pytest.approx(p2.adjusted_p, abs=1e-12)
        b1 = bonferroni_pairwise(original)
        b2 = bonferroni_pairwise(shuffled)
        for p1, p2 in zip(b1.pairs, b2.pairs):
            assert p1.adjusted_p == pytest.approx(p2.adjusted_p, abs=1e-12)


class TestFVar:
    @pytest.mark.parametrize(
        "ds", [d for d in DATA if "f_var" in d["expected"]], ids=lambda d: d["name"]
    )
    def test_matches_reference(self, ds):
        keys = sorted(ds["groups"])
        res = f_test_var(ds["groups"][keys[0]], ds["groups"][keys[1]])
        assert res.statistic == pytest.approx(ds["expected"]["f_var"]["F"], abs=1e-6)
        assert res.p_value == pytest.approx(ds["expected"]["f_var"]["p"], abs=1e-6)
        assert list(res.df) == ds["expected"]["f_var"]["df"]

    def test_identical_samples(self):
        values = [3.0, 4.0, 5.0, 9.0]
        res = f_test_var(values, values)
        assert res.statistic == 1.0
        assert res.p_value == 1.0

    def test_three_to_one_sd_ratio_at_n480(self):
        # analytic: F = 9 with df (479, 479) is far beyond any critical value
        rng = random.Random(6)
        a = [rng.gauss(0, 30) for _ in range(480)]
        b = [rng.gauss(0, 10) for _ in range(480)]
        res = f_test_var(a, b)
        assert res.p_value < 0.001
        # the analytic tail bound for the configured ratio
        assert 2 * sps.f.sf(9.0, 479, 479) < 1e-100


class TestTukeyKramer:
    @pytest.mark.parametrize(
        "ds", [d for d in DATA if "tukey" in d["expected"]], ids=lambda d: d["name"]
    )
    def test_matches_statsmodels_reference(self, ds):
        keys = sorted(ds["groups"])
        groups = [SampleSet(label=k, values=tuple(ds["groups"][k])) for k in keys]
        matrix = tukey_kramer(groups)
        for pair_key, expected in ds["expected"]["tukey"].items():
            a, b = pair_key.split("|")
            pair = matrix.get(a, b)
            # statsmodels reports b - a; sign-normalize via abs
            assert abs(pair.mean_diff) == pytest.approx(abs(expected["mean_diff"]), abs=1e-9)
            assert pair.adjusted_p == pytest.approx(expected["p"], abs=1e-3)

    def test_identical_groups_p_one(self):
        g = [1.0, 2.0, 3.0, 4.0]
        matrix = tukey_kramer([g, list(g)])
        assert matrix.pairs[0].adjusted_p == 1.0

    def test_huge_separation_flags_p001(self):
        rng = random.Random(2)
        a = [rng.gauss(0, 1) for _ in range(30)]
        b = [rng.gauss(10, 1) for _ in range(30)]  # 10 sigma apart
        matrix = tukey_kramer([a, b])
        assert matrix.pairs[0].adjusted_p < 0.001

    def test_studentized_range_quadrature_oracle(self):
        # verify the distribution itself at a few points by numerical
        # quadrature of the defining double integral
        from scipy.integrate import quad

        def sr_sf_quad(q, k, df):
            def inner(s):
                f = lambda z: sps.norm.pdf(z) * (sps.norm.cdf(z) - sps.norm.cdf(z - q * s)) ** (
                    k - 1
                )
                v, _ = quad(f, -8, 8, limit=200)
                return k * v

            def s_pdf(s):
                x = s * s * df
                return sps.chi2.pdf(x, df) * 2 * s * df

            v, _ = quad(lambda s: s_pdf(s) * inner(s), 1e-6, 5, limit=200)
            return 1 - v

        for q, k, df in [(3.5, 7, 100), (2.0, 3, 20), (4.4, 4, 156)]:
            assert sps.studentized_range.sf(q, k, df) == pytest.approx(
                sr_sf_quad(q, k, df), abs=1e-8
            )

    def test_too_few_groups(self):
        with pytest.raises(TooFewGroupsError):
            tukey_kramer([[1.0, 2.0, 3.0]])


class TestBonferroni:
    @pytest.mark.parametrize(
        "ds", [d for d in DATA if "bonferroni" in d["expected"]], ids=lambda d: d["name"]
    )
    def test_matches_reference(self, ds):
        keys = sorted(ds["groups"])
        groups = [SampleSet(label=k, values=tuple(ds["groups"][k])) for k in keys]
        matrix = bonferroni_pairwise(groups)
        for pair_key, expected in ds["expected"]["bonferroni"].items():
            a, b = pair_key.split("|")
            assert matrix.get(a, b).adjusted_p == pytest.approx(expected, abs=1e-6)

    def test_correction_factor_is_pair_count(self):
        rng = random.Random(4)
        groups = [[rng.gauss(i, 1) for _ in range(10)] for i in range(4)]
        matrix = bonferroni_pairwise(groups)
        n_pairs = len(matrix.pairs)
        assert n_pairs == 4 * 3 // 2
        raw = welch_t(groups[0], groups[1]).p_value
        assert matrix.pairs[0].adjusted_p == pytest.approx(min(1.0, raw * n_pairs), abs=1e-12)

    def test_identical_groups_capped_at_one(self):
        g = [1.0, 5.0, 9.0]
        matrix = bonferroni_pairwise([g, list(g), list(g)])
        assert all(p.adjusted_p == 1.0 for p in matrix.pairs)

    def test_bonferroni_never_below_raw_p(self):
        rng = random.Random(11)
        groups = [[rng.gauss(0, 1) for _ in range(12)] for _ in range(3)]
        matrix = bonferroni_pairwise(groups)
        for pair in matrix.pairs:
            i = matrix.labels.index(pair.label_a)
            j = matrix.labels.index(pair.label_b)
            raw = welch_t(groups[i], groups[j]).p_value
            assert pair.adjusted_p >= raw - 1e-15


class TestTukeyVsBonferroniOrdering:
    def test_tukey_not_more_conservative_on_balanced_designs(self):
        # classical union-bound relation: against a Bonferroni built on the
        # pooled error term (same df as Tukey), the studentized-range p can
        # never exceed the Bonferroni p on balanced designs. (The module's
        # bonferroni_pairwise uses Welch tests per its contract, whose
        # per-pair df breaks this ordering in the deep tail.)
        rng = random.Random(17)
        for _ in range(30):
            k = rng.choice([3, 4, 5])
            n = rng.choice([8, 15, 25])
            shift = rng.uniform(0, 2)
            raw_groups = [[rng.gauss(i * shift, 1.0) for _ in range(n)] for i in range(k)]
            groups = [
                SampleSet(label=f"g{i}", values=tuple(vals))
                for i, vals in enumerate(raw_groups)
            ]
            tukey = tukey_kramer(groups)
            n_total = k * n
            df = n_total - k
            mse = sum(
                (n - 1) * np.var(vals, ddof=1) for vals in raw_groups
            ) / df
            n_pairs = k * (k - 1) // 2
            for pair in tukey.pairs:
                i = int(pair.label_a[1:])
                j = int(pair.label_b[1:])
                se = math.sqrt(mse * 2 / n)
                t_stat = abs(
                    np.mean(raw_groups[i]) - np.mean(raw_groups[j])
                ) / se
                bonf_pooled = min(1.0, n_pairs * 2 * float(sps.t.sf(t_stat, df)))
                assert pair.adjusted_p <= bonf_pooled + 1e-9


class TestOutliers:
    def test_all_equal_group_excludes_nothing(self):
        group = SampleSet(label="flat", values=(5.0,) * 10)
        with pytest.warns(DegenerateGroupWarning):
            kept, report = exclude_outliers_3sigma([group])
        assert report.total_excluded == 0
        assert kept[0].n == 10

    def test_planted_5sigma_point_always_excluded(self):
        rng = random.Random(23)
        for trial in range(20):
            base = [rng.gauss(350, 20) for _ in range(79)]
            stats = descriptive(base)
            planted = stats["mean"] + 5 * stats["sd"]
            values = base + [planted]
            group = SampleSet(label="g", values=tuple(values), condition="push")
            kept, report = exclude_outliers_3sigma([group])
            excluded_values = [e.value for e in report.excluded]
            assert planted in excluded_values
            # brute-force oracle over the same full-group statistics
            full = descriptive(values)
            oracle = [
                v for v in values if abs(v - full["mean"]) > 3 * full["sd"]
            ]
            assert sorted(excluded_values) == sorted(oracle)

    def test_idempotent_under_original_statistics_snapshot(self):
        # one pass removes everything beyond the original 3-sigma band, so
        # re-applying the same band to the kept data excludes nothing
        rng = random.Random(29)
        values = [rng.gauss(0, 1) for _ in range(200)] + [9.0, -8.5]
        group = SampleSet(label="g", values=tuple(values))
        kept1, report1 = exclude_outliers_3sigma([group])
        assert report1.total_excluded >= 2
        full = descriptive(values)
        survivors = [v for v in kept1[0].values if abs(v - full["mean"]) > 3 * full["sd"]]
        assert survivors == []

    def test_single_pass_not_iterative(self):
        # a cluster that would be excluded by iteration survives one pass
        values = (0.0,) * 30 + (10.0, 10.5, 30.0)
        group = SampleSet(label="g", values=values)
        kept, report = exclude_outliers_3sigma([group])
        full = descriptive(list(values))
        expected = [v for v in values if abs(v - full["mean"]) > 3 * full["sd"]]
        assert sorted(e.value for e in report.excluded) == sorted(expected)

    def test_counts_reported_per_condition(self):
        rng = random.Random(31)
        groups = []
        for condition in ("push", "led"):
            vals = [rng.gauss(300, 10) for _ in range(50)] + [400.0]
            groups.append(
                SampleSet(label=condition, values=tuple(vals), participant="P1", condition=condition)
            )
        _, report = exclude_outliers_3sigma(groups)
        assert report.counts_per_condition == {"push": 1, "led": 1}


class TestDescriptive:
    def test_single_value(self):
        stats = descriptive([42.0])
        assert stats == {"mean": 42.0, "sd": 0.0, "median": 42.0, "n": 1}

    def test_fixed_list_hand_computation(self):
        stats = descriptive([1.0, 2.0, 3.0, 4.0])
        assert stats["mean"] == 2.5
        assert stats["median"] == 2.5
        assert stats["sd"] == pytest.approx(math.sqrt(1.25))
        assert stats["n"] == 4

    def test_streaming_matches_batch(self):
        rng = random.Random(37)
        values = [rng.gauss(100, 20) for _ in range(5000)]
        running = RunningStats()
        for v in values:
            running.add(v)
        batch = descriptive(values)
        assert running.mean == pytest.approx(batch["mean"], abs=1e-9)
        assert running.sd == pytest.approx(batch["sd"], abs=1e-9)
        assert running.n == batch["n"]


class TestLikert:
    def test_future_potential_row_from_bruteforce_multiset(self):
        # search all 6-response multisets for median 5.5, mean 5.5, sd 0.5
        matches = set()
        for combo in itertools.combinations_with_replacement(range(1, 8), 6):
            s = likert_summary(list(combo))
            if (
                abs(s["median"] - 5.5) < 1e-12
                and abs(s["mean"] - 5.5) < 1e-12
                and abs(s["sd"] - 0.5) < 1e-12
            ):
                matches.add(combo)
        assert matches == {(5, 5, 5, 6, 6, 6)}
        summary = likert_summary([5, 5, 5, 6, 6, 6])
        assert summary["median"] == 5.5
        assert summary["mean"] == 5.5
        assert summary["sd"] == 0.5

    def test_constant_responses(self):
        summary = likert_summary([4, 4, 4, 4])
        assert summary == {"median": 4, "mean": 4.0, "sd": 0.0, "n": 4}

    def test_out_of_range_rejected(self):
        with pytest.raises(LikertRangeError):
            likert_summary([3, 8])
        with pytest.raises(LikertRangeError):
            likert_summary([0, 4])
        with pytest.raises(LikertRangeError):
            likert_summary([4.5, 4])
