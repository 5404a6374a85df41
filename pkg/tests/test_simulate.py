import math

import numpy as np
import pytest

from cpdetect.simulate import (
    DEFAULT_SV_CHANGEPOINTS,
    SVSegmentParams,
    default_sv_params,
    gen_piecewise_gaussian,
    gen_poisson_ar1,
    gen_sv,
)


class TestPiecewiseGaussian:
    def test_shift_shape_and_reproducibility(self):
        y1 = gen_piecewise_gaussian([0.0, 5.0], [1.0, 1.0], [97, 103], seed=1)
        y2 = gen_piecewise_gaussian([0.0, 5.0], [1.0, 1.0], [97, 103], seed=1)
        y3 = gen_piecewise_gaussian([0.0, 5.0], [1.0, 1.0], [97, 103], seed=2)
        assert y1.size == 200
        assert np.array_equal(y1, y2)
        assert not np.array_equal(y1, y3)
        assert y1[97:].mean() - y1[:97].mean() > 3.0

    def test_zero_sd_gives_piecewise_constant(self):
        y = gen_piecewise_gaussian([1.0, -2.0], [0.0, 0.0], [5, 7], seed=0)
        assert np.array_equal(y, np.array([1.0] * 5 + [-2.0] * 7))

    def test_segment_means_within_clt_bound(self):
        means = [0.0, 4.0, -1.0]
        lengths = [300, 200, 400]
        y = gen_piecewise_gaussian(means, [1.0, 1.0, 1.0], lengths, seed=3)
        start = 0
        for mu, m in zip(means, lengths):
            seg = y[start : start + m]
            assert abs(seg.mean() - mu) < 4.0 / math.sqrt(m)
            start += m

    def test_rejects_mismatched_lists(self):
        with pytest.raises(ValueError):
            gen_piecewise_gaussian([0.0], [1.0, 1.0], [10], seed=0)


class TestSV:
    def test_default_layout(self):
        params = default_sv_params()
        y, x = gen_sv(params, seed=0)
        assert y.size == 1000 and x.size == 1000
        bounds = np.cumsum([p.length for p in params])[:-1]
        assert tuple(int(b) for b in bounds) == DEFAULT_SV_CHANGEPOINTS

    def test_zero_innovation_gives_iid_gaussian(self):
        params = [SVSegmentParams(phi=0.5, two_log_beta=0.0, sigma_x=0.0, length=5000)]
        y, x = gen_sv(params, seed=1)
        assert np.all(x == 0.0)
        assert abs(y.std() - 1.0) < 0.03

    def test_segment_variance_matches_lognormal_moment(self):
        params = [
            SVSegmentParams(phi=0.9, two_log_beta=1.0, sigma_x=0.05, length=4000),
            SVSegmentParams(phi=0.8, two_log_beta=0.0, sigma_x=0.05, length=4000),
        ]
        y, x = gen_sv(params, seed=2)
        start = 0
        for p in params:
            seg = y[start : start + p.length]
            var_x = p.sigma_x**2 / (1 - p.phi**2)
            expected = math.exp(p.two_log_beta) * math.exp(var_x / 2)
            assert abs(seg.var() / expected - 1.0) < 0.25
            start += p.length

    def test_reproducible(self):
        a = gen_sv(default_sv_params(), seed=5)[0]
        b = gen_sv(default_sv_params(), seed=5)[0]
        assert np.array_equal(a, b)


class TestPoissonAR1:
    def test_zero_innovation_is_homogeneous(self):
        y = gen_poisson_ar1(3000, alpha=math.log(2.0), phi=0.5, sigma_x=0.0, seed=0)
        assert abs(y.mean() - 2.0) < 0.15

    def test_mean_matches_lognormal_moment(self):
        alpha, phi, sigma = 0.5, 0.8, 0.3
        y = gen_poisson_ar1(10_000, alpha, phi, sigma, seed=1)
        expected = math.exp(alpha + sigma**2 / (2 * (1 - phi**2)))
        assert abs(y.mean() / expected - 1.0) < 0.10

    def test_reproducible(self):
        a = gen_poisson_ar1(100, 0.0, 0.9, 0.1, seed=7)
        b = gen_poisson_ar1(100, 0.0, 0.9, 0.1, seed=7)
        assert np.array_equal(a, b)

    def test_lengths_match(self):
        assert gen_poisson_ar1(57, 0.0, 0.5, 0.1, seed=0).size == 57
