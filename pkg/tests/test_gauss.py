"""Closed-form normal-mean cases used as engine-independent oracles."""
import math

import numpy as np
import pytest

from exactci import dist, gauss
from exactci.errors import InputError

SPEC4 = gauss.GaussianSpec(4, 1.0, 0.05)


class TestPointScaleH:
    def test_maximum_at_estimator(self):
        for a, b, xbar in [(1.0, 0.0, 0.3), (0.5, 0.2, -1.1), (2.0, 0.0, 0.0)]:
            assert gauss.h_point_scale(xbar, a * xbar + b, a, b, SPEC4) == pytest.approx(1.0)

    def test_unit_scale_matches_two_tail_formula(self):
        xbar = 0.37
        for mu0 in (-0.8, 0.1, 0.37, 1.4):
            z = math.sqrt(4) * abs(mu0 - xbar)
            expected = 1.0 - dist.std_normal_cdf(z) + dist.std_normal_cdf(-z)
            got = gauss.h_point_scale(xbar, mu0, 1.0, 0.0, SPEC4)
            assert got == pytest.approx(expected, abs=1e-14)

    def test_vanishing_tails_below_two(self):
        # the decay rate scales with 2 - a, so the probe softens near 2
        for a, bound in [(0.5, 1e-12), (1.0, 1e-12), (1.9, 1e-8)]:
            assert gauss.h_point_scale(0.0, 60.0, a, 0.0, SPEC4) < bound
            assert gauss.h_point_scale(0.0, -60.0, a, 0.0, SPEC4) < bound

    def test_unimodal_scan(self):
        xbar, a, b = 0.2, 1.5, -0.3
        mode = a * xbar + b
        grid = np.linspace(mode - 6, mode + 6, 10001)
        vals = np.array([gauss.h_point_scale(xbar, m, a, b, SPEC4) for m in grid])
        rising = np.diff(vals[grid <= mode])
        falling = np.diff(vals[grid >= mode])
        assert np.all(rising >= -1e-12)
        assert np.all(falling <= 1e-12)

    def test_invalid_scale(self):
        with pytest.raises(InputError):
            gauss.h_point_scale(0.0, 0.0, -1.0, 0.0, SPEC4)


class TestPointScaleInterval:
    def test_unit_scale_is_the_usual_interval(self):
        lo, hi, label = gauss.interval_point_scale(0.0, 1.0, 0.0, SPEC4)
        z = dist.std_normal_quantile(0.975)
        assert label == "ii"
        assert lo == pytest.approx(-z / 2, abs=1e-6)
        assert hi == pytest.approx(z / 2, abs=1e-6)

    def test_scale_above_two_whole_line(self):
        lo, hi, label = gauss.interval_point_scale(0.0, 3.0, 0.0, SPEC4)
        assert (lo, hi, label) == (-math.inf, math.inf, "i")

    def test_scale_two_subcases(self):
        spec1 = gauss.GaussianSpec(1, 1.0, 0.05)
        z_a = dist.std_normal_quantile(0.95)
        lo, hi, label = gauss.interval_point_scale(0.0, 2.0, 0.0, spec1)
        assert label == "iii-2" and lo == -math.inf and hi == math.inf
        lo, hi, label = gauss.interval_point_scale(z_a + 0.5, 2.0, 0.0, spec1)
        assert label == "iii-1" and hi == math.inf and math.isfinite(lo)
        # the finite limit solves h = alpha
        assert gauss.h_point_scale(z_a + 0.5, lo, 2.0, 0.0, spec1) == pytest.approx(
            0.05, abs=1e-9
        )
        lo, hi, label = gauss.interval_point_scale(-z_a - 0.5, 2.0, 0.0, spec1)
        assert label == "iii-3" and lo == -math.inf and math.isfinite(hi)

    def test_endpoints_solve_alpha(self):
        lo, hi, _ = gauss.interval_point_scale(0.4, 1.3, -0.2, SPEC4)
        assert gauss.h_point_scale(0.4, lo, 1.3, -0.2, SPEC4) == pytest.approx(
            0.05, abs=1e-8
        )
        assert gauss.h_point_scale(0.4, hi, 1.3, -0.2, SPEC4) == pytest.approx(
            0.05, abs=1e-8
        )


class TestBoxRefinement:
    def test_symmetric_box_gives_usual_interval(self):
        z_half = dist.std_normal_quantile(0.975)
        for a in (z_half, 3.0):
            lo, hi = gauss.refine_box(0.3, a, a, SPEC4)
            assert lo == pytest.approx(0.3 - z_half / 2, abs=1e-6)
            assert hi == pytest.approx(0.3 + z_half / 2, abs=1e-6)

    def test_asymmetric_levels_sum_to_alpha(self):
        lo, hi = gauss.refine_box(0.0, 2.5, 2.0, SPEC4)
        # endpoints have the form xbar + c * sigma/sqrt(n); their one-sided
        # normal levels must add to alpha
        alpha1 = 1.0 - dist.std_normal_cdf((0.0 - lo) / SPEC4.scale)
        alpha2 = 1.0 - dist.std_normal_cdf((hi - 0.0) / SPEC4.scale)
        assert alpha1 + alpha2 == pytest.approx(0.05, abs=1e-8)
        assert gauss.box_h(0.0, lo, 2.5, 2.0, SPEC4) == pytest.approx(0.05, abs=1e-8)
        assert gauss.box_h(0.0, hi, 2.5, 2.0, SPEC4) == pytest.approx(0.05, abs=1e-8)

    def test_mode_value_is_one(self):
        mode = 0.1 + SPEC4.scale * (2.0 - 2.5) / 2.0
        assert gauss.box_h(0.1, mode, 2.5, 2.0, SPEC4) == pytest.approx(1.0)

    def test_narrow_box_rejected(self):
        with pytest.raises(InputError):
            gauss.refine_box(0.0, 1.5, 2.0, SPEC4)


class TestOneSidedT:
    def test_threshold_flip(self):
        t_crit = dist.t_quantile(0.95, 9)
        assert gauss.one_sided_t_modify(-t_crit, 10, 0.05) == "keep"
        assert gauss.one_sided_t_modify(-t_crit + 1e-9, 10, 0.05) == "whole_line"
        assert gauss.one_sided_t_modify(-t_crit - 1e-9, 10, 0.05) == "keep"

    def test_simple_cases(self):
        assert gauss.one_sided_t_modify(0.0, 10, 0.05) == "whole_line"
        t_crit = dist.t_quantile(0.95, 9)
        assert gauss.one_sided_t_modify(-2 * t_crit, 10, 0.05) == "keep"

    def test_domain(self):
        with pytest.raises(InputError):
            gauss.one_sided_t_modify(0.0, 1, 0.05)


class TestStochasticMonotone:
    def test_zero_count_hits_range_floor(self):
        val = gauss.stochastic_lower(
            lambda k, p: dist.binom_cdf(int(k), 10, p), 0, 0.05, (0.0, 1.0)
        )
        assert val == 0.0

    def test_closed_form_top_count(self):
        val = gauss.stochastic_lower(
            lambda k, p: dist.binom_cdf(int(k), 10, p), 10, 0.05, (0.0, 1.0)
        )
        assert val == pytest.approx(0.05 ** 0.1, abs=1e-8)

    def test_monotonicity_violation_detected(self):
        with pytest.raises(InputError):
            gauss.stochastic_lower(lambda k, th: th, 1, 0.05, (0.0, 1.0))
