from __future__ import annotations

import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.special import kolmogorov

from conftest import fake_run
from svrobust.bootstrap import with_extra_parameter
from svrobust.mc_filter import (
    ALPHA,
    FilterReport,
    ecdf,
    filter_test,
    group_size,
    kolmogorov_sf,
    ks_statistic,
    ks_two_sample,
    split_by_aare,
    split_values,
)

samples = st.lists(st.floats(-1e6, 1e6, allow_nan=False), min_size=1, max_size=40)


def heston_run(m, aare, seed=0):
    rng = np.random.default_rng(seed)
    thetas = np.array([0.04, 1.5, 0.04, 0.3, -0.6]) + rng.normal(0, 0.01, size=(m, 5))
    return fake_run(thetas, aare=aare)


class TestSplit:
    @pytest.mark.parametrize("m, g", [(200, 75), (8, 3), (16, 6), (10, 4), (9, 3)])
    def test_group_sizes(self, m, g):
        assert group_size(m) == g

    def test_paper_scale(self):
        split = split_values(np.arange(200.0), np.random.default_rng(1).random(200))
        sizes = (len(split.behavioural), len(split.non_behavioural), len(split.grey))
        assert sizes == (75, 75, 50)

    def test_eight_trials(self):
        # AAREs 1..8 for trials 1..8 (trial index 0..7)
        split = split_values(np.arange(8.0), np.arange(1.0, 9.0))
        assert list(split.behavioural_trials + 1) == [1, 2, 3]
        assert list(split.non_behavioural_trials + 1) == [6, 7, 8]
        assert sorted(split.grey_trials + 1) == [4, 5]

    def test_ties_broken_by_trial_index(self):
        split = split_values(np.arange(8.0), np.ones(8))
        assert list(split.behavioural_trials) == [0, 1, 2]
        assert list(split.non_behavioural_trials) == [5, 6, 7]

    def test_too_few_trials(self):
        with pytest.raises(ValueError, match="at least 8"):
            split_values(np.arange(7.0), np.arange(7.0))

    def test_unknown_parameter(self):
        with pytest.raises(KeyError, match="lambda"):
            split_by_aare(heston_run(8, np.arange(8.0)), "lambda")

    @given(st.integers(8, 120), st.integers(0, 2**32 - 1))
    @settings(max_examples=40, deadline=None)
    def test_partition(self, m, seed):
        rng = np.random.default_rng(seed)
        values = rng.normal(size=m)
        aare = rng.integers(0, 4, size=m).astype(float)  # many ties
        split = split_values(values, aare)
        trials = np.concatenate([split.behavioural_trials, split.grey_trials, split.non_behavioural_trials])
        assert sorted(trials) == list(range(m))
        assert len(split.grey) == m - 2 * group_size(m)
        assert np.max(aare[split.behavioural_trials]) <= np.min(aare[split.non_behavioural_trials])
        again = split_values(values, aare)
        assert np.array_equal(again.behavioural_trials, split.behavioural_trials)


class TestKs:
    def test_identical(self):
        assert ks_two_sample([1, 2, 3], [1, 2, 3]) == (0.0, 1.0)

    def test_disjoint(self):
        d, p = ks_two_sample([1, 2, 3], [10, 11, 12])
        assert d == 1.0
        assert p < 1.0

    def test_empty(self):
        with pytest.raises(ValueError):
            ks_statistic([], [1.0])

    def test_known_statistic(self):
        # F_a - F_b peaks at x = 2: 2/3 - 0
        assert ks_statistic([1, 2, 5], [3, 4, 6]) == pytest.approx(2 / 3)

    @pytest.mark.parametrize("z", [0.25, 0.4, 0.6, 0.8, 1.0, 1.36, 1.63, 2.0, 3.0, 5.0])
    def test_sf_matches_reference(self, z):
        assert kolmogorov_sf(z) == pytest.approx(float(kolmogorov(z)), rel=1e-10, abs=1e-14)

    def test_sf_small_z(self):
        assert kolmogorov_sf(0.0) == 1.0 and kolmogorov_sf(0.1) == 1.0

    def test_p_non_increasing_in_d(self):
        n = 75
        ne = n * n / (2 * n)
        ps = [kolmogorov_sf(math.sqrt(ne) * k / n) for k in range(n + 1)]
        assert all(b <= a for a, b in zip(ps, ps[1:]))

    @given(samples, samples)
    @settings(max_examples=80, deadline=None)
    def test_symmetric(self, a, b):
        assert ks_two_sample(a, b) == ks_two_sample(b, a)

    @given(samples, samples)
    @settings(max_examples=80, deadline=None)
    def test_monotone_transform_invariant(self, a, b):
        f = lambda x: np.arctan(np.asarray(x) / 1e3) * 7.0 + 1.0  # strictly increasing
        # strict monotonicity can collapse distinct floats after rounding; keep only injective draws
        if len(set(f(a + b))) != len(set(a + b)):
            return
        assert ks_statistic(a, b) == ks_statistic(f(a), f(b))

    @given(samples, samples)
    @settings(max_examples=80, deadline=None)
    def test_ranges(self, a, b):
        d, p = ks_two_sample(a, b)
        assert 0.0 <= d <= 1.0 and 0.0 <= p <= 1.0

    def test_null_simulation(self):
        accepted = 0
        for rep in range(100):
            rng = np.random.default_rng([2024, rep])
            _, p = ks_two_sample(rng.random(75), rng.random(75))
            accepted += p > ALPHA
        assert accepted >= 90


class TestEcdf:
    def test_steps(self):
        x, f = ecdf([3.0, 1.0, 3.0, 2.0])
        assert list(x) == [1.0, 2.0, 3.0]
        assert list(f) == [0.25, 0.5, 1.0]


class TestFilterTest:
    def test_toy_run(self):
        report = filter_test(heston_run(8, np.arange(8.0)), "kappa")
        assert isinstance(report, FilterReport)
        assert report.to_dict()["sizes"] == {"behavioural": 3, "non_behavioural": 3, "grey": 2}

    def test_reject_flag_consistent(self):
        m = 40
        aare = np.arange(m, dtype=float)
        thetas = np.tile([0.04, 1.5, 0.04, 0.3, -0.6], (m, 1))
        thetas[:, 1] = np.linspace(0.5, 5.0, m)  # kappa tracks the fit quality exactly
        report = filter_test(fake_run(thetas, aare=aare), "kappa")
        assert report.ks_statistic == 1.0
        assert report.reject_at_5pct == (report.p_value < 0.05)
        assert report.reject_at_5pct

    def test_dummy_parameter_rarely_rejected(self):
        run = heston_run(40, np.random.default_rng(9).random(40))
        rejections = 0
        for rep in range(50):
            dummy = np.random.default_rng([77, rep]).random(40)
            rejections += filter_test(with_extra_parameter(run, "dummy", dummy), "dummy").reject_at_5pct
        assert rejections <= 5

    def test_report_dict(self):
        d = filter_test(heston_run(16, np.arange(16.0)), "rho").to_dict()
        assert d["param"] == "rho" and d["alpha"] == 0.05
        assert d["ecdf"]["behavioural"]["F"][-1] == 1.0
        assert len(d["trials"]["behavioural"]) == 6
