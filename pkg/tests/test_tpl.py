import math

import mpmath
import numpy as np
import pytest
from scipy.integrate import quad

from scalefit import (
    DomainError,
    TplParams,
    DegreeSample,
    pdf_continuous,
    ccdf_continuous,
    log_ccdf_continuous,
    zeta_trunc,
    pmf_discrete,
    ccdf_discrete,
    sample_discrete,
    log_likelihood,
)


class TestParams:
    def test_alpha_must_exceed_one(self):
        with pytest.raises(DomainError):
            TplParams(1.0, 1, 10)
        with pytest.raises(DomainError):
            TplParams(0.5, 1, 10)

    def test_alpha_cap(self):
        with pytest.raises(DomainError):
            TplParams(25.0, 1, 10)

    def test_threshold_order(self):
        with pytest.raises(DomainError):
            TplParams(2.0, 10, 5)
        with pytest.raises(DomainError):
            TplParams(2.0, 0.5, 5)

    def test_x_max_finite(self):
        with pytest.raises(DomainError):
            TplParams(2.0, 1, math.inf)


class TestContinuous:
    def test_degenerate_support_rejected(self):
        p = TplParams(2.0, 3, 3)
        with pytest.raises(DomainError):
            pdf_continuous(3, p)

    def test_pdf_hand_value(self):
        # alpha=2, [1,2]: norm = (-1)/(2^-1 - 1) = 2
        p = TplParams(2.0, 1, 2)
        assert pdf_continuous(1, p) == pytest.approx(2.0, abs=1e-12)

    def test_pdf_normalizes(self):
        p = TplParams(2.7, 2, 150)
        total, _ = quad(lambda x: pdf_continuous(x, p), p.x_min, p.x_max)
        assert total == pytest.approx(1.0, abs=1e-10)

    def test_pdf_domain_error(self):
        p = TplParams(2.0, 1, 2)
        with pytest.raises(DomainError):
            pdf_continuous(0.5, p)
        with pytest.raises(DomainError):
            pdf_continuous(2.5, p)

    def test_ccdf_boundaries(self):
        p = TplParams(2.3, 2, 90)
        assert ccdf_continuous(p.x_min, p) == pytest.approx(1.0, abs=1e-14)
        assert ccdf_continuous(p.x_max, p) == pytest.approx(0.0, abs=1e-14)

    def test_ccdf_hand_value(self):
        p = TplParams(2.0, 1, 2)
        assert ccdf_continuous(1.5, p) == pytest.approx(1.0 / 3.0, abs=1e-12)

    def test_ccdf_monotone(self):
        p = TplParams(2.0, 1, 50)
        xs = np.linspace(1, 50, 200)
        vals = ccdf_continuous(xs, p)
        assert np.all(np.diff(vals) <= 0)


class TestLogCcdf:
    def test_zero_at_x_min(self):
        p = TplParams(3.0, 2, 40)
        assert log_ccdf_continuous(p.x_min, p) == pytest.approx(0.0, abs=1e-12)

    def test_hand_value(self):
        p = TplParams(2.0, 1, 2)
        assert log_ccdf_continuous(1.5, p) == pytest.approx(math.log(1.0 / 3.0), abs=1e-12)

    def test_neg_inf_sentinel_at_x_max(self):
        p = TplParams(2.0, 1, 100)
        assert log_ccdf_continuous(100, p) == -math.inf

    def test_linear_regime_large_x_max(self):
        # far below x_max the log-log CCDF is a line of slope (1 - alpha)
        p = TplParams(2.0, 1, 1e9)
        for x in (1.0, 10.0, 100.0, 300.0):
            line = (1 - p.alpha) * (math.log(x) - math.log(p.x_min))
            assert abs(log_ccdf_continuous(x, p) - line) < 1e-6

    def test_strictly_decreasing(self):
        p = TplParams(2.5, 1, 1e4)
        xs = np.geomspace(1, 9.99e3, 100)
        vals = log_ccdf_continuous(xs, p)
        assert np.all(np.diff(vals) < 0)

    def test_slope_matches_exponent(self):
        # endpoint slope over [x_min, x_max/100] for wide supports
        p = TplParams(2.5, 1, 1e4)
        x2 = p.x_max / 100
        slope = log_ccdf_continuous(x2, p) / (math.log(x2) - math.log(p.x_min))
        assert abs(slope - (1 - p.alpha)) < 1e-3


class TestZetaTrunc:
    def test_single_term(self):
        assert zeta_trunc(2.5, 7, 7) == pytest.approx(7.0**-2.5, rel=1e-15)

    def test_hand_sum(self):
        assert zeta_trunc(2.0, 1, 3) == pytest.approx(49.0 / 36.0, rel=1e-15)

    def test_against_mpmath(self):
        # Hurwitz-zeta difference is an independent arbitrary-precision oracle
        mpmath.mp.dps = 30
        want = float(mpmath.zeta(2.5, 1) - mpmath.zeta(2.5, 10**6 + 1))
        got = zeta_trunc(2.5, 1, 10**6)
        assert abs(got - want) / want < 1e-12

    def test_lo_above_hi_rejected(self):
        with pytest.raises(DomainError):
            zeta_trunc(2.0, 5, 4)


class TestDiscrete:
    def test_single_point_support(self):
        p = TplParams(2.0, 4, 4)
        assert pmf_discrete(4, p) == pytest.approx(1.0, abs=1e-15)
        assert ccdf_discrete(4, p) == pytest.approx(1.0, abs=1e-15)

    def test_pmf_hand_values(self):
        p = TplParams(2.0, 1, 3)
        assert pmf_discrete(1, p) == pytest.approx(36.0 / 49.0, rel=1e-14)
        assert pmf_discrete(2, p) == pytest.approx(9.0 / 49.0, rel=1e-14)
        assert pmf_discrete(3, p) == pytest.approx(4.0 / 49.0, rel=1e-14)

    def test_pmf_normalizes(self):
        p = TplParams(2.5, 5, 5000)
        xs = np.arange(5, 5001)
        assert math.fsum(pmf_discrete(xs, p)) == pytest.approx(1.0, abs=1e-12)

    def test_ccdf_hand_value(self):
        p = TplParams(2.0, 1, 3)
        assert ccdf_discrete(2, p) == pytest.approx(13.0 / 49.0, rel=1e-14)

    def test_ccdf_boundaries(self):
        p = TplParams(2.2, 3, 60)
        assert ccdf_discrete(3, p) == 1.0
        assert ccdf_discrete(60, p) == pytest.approx(pmf_discrete(60, p), rel=1e-14)

    def test_ccdf_pmf_consistency(self):
        # S(x) - S(x+1) == pmf(x) across the support
        p = TplParams(2.1, 2, 400)
        xs = np.arange(2, 400)
        s = ccdf_discrete(np.arange(2, 401), p)
        assert np.max(np.abs((s[:-1] - s[1:]) - pmf_discrete(xs, p))) < 1e-12

    def test_continuous_discrete_agreement_large_support(self):
        p = TplParams(2.5, 1000, 10**6)
        for x in (1000, 5000, 50_000, 999_999):
            ratio = pmf_discrete(x, p) / pdf_continuous(x, p)
            assert abs(ratio - 1.0) < 0.01

    def test_domain_errors(self):
        p = TplParams(2.0, 5, 50)
        for bad in (4, 51, 5.5):
            with pytest.raises(DomainError):
                pmf_discrete(bad, p)
            with pytest.raises(DomainError):
                ccdf_discrete(bad, p)


class TestSampling:
    def test_degenerate_support(self):
        s = sample_discrete(TplParams(2.0, 7, 7), 100, seed=1)
        assert np.all(s.degrees == 7)

    def test_determinism(self):
        p = TplParams(2.5, 5, 500)
        a = sample_discrete(p, 1000, seed=42)
        b = sample_discrete(p, 1000, seed=42)
        assert np.array_equal(a.degrees, b.degrees)

    def test_draws_within_support(self):
        p = TplParams(2.5, 5, 500)
        s = sample_discrete(p, 10_000, seed=3)
        assert s.degrees.min() >= 5 and s.degrees.max() <= 500

    def test_frequencies_match_pmf(self):
        # multinomial 5-sigma band per support point at n = 1e6
        p = TplParams(2.5, 5, 500)
        n = 10**6
        s = sample_discrete(p, n, seed=7)
        xs = np.arange(5, 501)
        probs = pmf_discrete(xs, p)
        counts = np.bincount(s.degrees, minlength=501)[5:501]
        sigma = np.sqrt(probs * (1 - probs) / n)
        assert np.all(np.abs(counts / n - probs) <= 5 * sigma)

    def test_mean_converges(self):
        p = TplParams(2.3, 3, 300)
        n = 10**5
        xs = np.arange(3, 301)
        probs = pmf_discrete(xs, p)
        mean = float(np.sum(xs * probs))
        var = float(np.sum(xs**2 * probs) - mean**2)
        s = sample_discrete(p, n, seed=11)
        assert abs(s.degrees.mean() - mean) <= 3 * math.sqrt(var / n)

    def test_rejection_path_wide_support(self):
        # support wider than the CDF-table cutoff exercises the envelope sampler
        p = TplParams(1.8, 1, 2**21)
        s = sample_discrete(p, 200_000, seed=5)
        assert s.degrees.min() >= 1 and s.degrees.max() <= 2**21
        # coarse frequency check at the head of the distribution
        f1 = np.mean(s.degrees == 1)
        assert abs(f1 - pmf_discrete(1, p)) < 0.01


class TestLogLikelihood:
    def test_single_point_probability_one(self):
        p = TplParams(2.0, 9, 9)
        assert log_likelihood(DegreeSample([9]), p) == pytest.approx(0.0, abs=1e-14)

    def test_hand_value(self):
        p = TplParams(2.0, 1, 3)
        want = math.log(36.0 / 49.0) + math.log(9.0 / 49.0)
        assert log_likelihood(DegreeSample([1, 2]), p) == pytest.approx(want, rel=1e-12)

    def test_permutation_invariance(self):
        p = TplParams(2.4, 1, 100)
        a = log_likelihood(DegreeSample([3, 1, 7, 7, 50]), p)
        b = log_likelihood(DegreeSample([50, 7, 1, 7, 3]), p)
        assert a == b

    def test_out_of_support_rejected(self):
        p = TplParams(2.0, 5, 50)
        with pytest.raises(DomainError):
            log_likelihood(DegreeSample([5, 51]), p)
