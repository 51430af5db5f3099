"""Tests for asymptotic regression (inverse-log, power-of-log, product law)."""
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from pinchlab.errors import GridTooShort, IllConditionedFit, UnstableFit
from pinchlab.fitting import (
    FitResult,
    SweepSeries,
    fit_inverse_log,
    fit_loglog_slope,
    fit_power_of_log,
    product_law_check,
)


def geometric_grid(lo_exp=-1.0, hi_exp=-10.0, n=12):
    return np.logspace(lo_exp, hi_exp, n)


class TestSweepSeries:
    def test_sorted_decreasing(self):
        s = geometric_grid()
        rng = np.random.default_rng(1)
        perm = rng.permutation(len(s))
        series = SweepSeries(s=s[perm], values=(1.0 / np.log(1 / s))[perm])
        assert (np.diff(series.s) < 0).all()

    def test_positive_values_required(self):
        s = geometric_grid()
        with pytest.raises(ValueError):
            SweepSeries(s=s, values=np.full_like(s, -1.0))

    def test_duplicate_s_rejected(self):
        s = geometric_grid()
        s[3] = s[2]
        with pytest.raises(ValueError):
            SweepSeries(s=s, values=np.ones_like(s))

    def test_short_span_rejected(self):
        s = np.logspace(-1, -3, 8)
        with pytest.raises(GridTooShort):
            SweepSeries(s=s, values=np.ones_like(s))

    def test_window_is_deepest_fraction(self):
        s = geometric_grid(n=12)
        series = SweepSeries(s=s, values=np.ones_like(s) / np.log(1 / s))
        s_w, _ = series.window(0.5)
        assert len(s_w) == 6
        assert s_w[0] < series.s[5] * 1.0001


class TestFitInverseLog:
    def test_exact_model(self):
        s = geometric_grid()
        series = SweepSeries(s=s, values=3.0 / np.log(1.0 / s))
        res = fit_inverse_log(series)
        assert res.model == "InverseLog"
        assert res.c == pytest.approx(3.0, rel=1e-12)
        assert res.residual == pytest.approx(0.0, abs=1e-12)

    def test_correction_shrinks_with_depth(self):
        def run(hi_exp):
            s = geometric_grid(-1.0, hi_exp, 14)
            L = np.log(1.0 / s)
            series = SweepSeries(s=s, values=3.0 / L + 10.0 / L ** 2)
            return fit_inverse_log(series)

        shallow, deep = run(-10.0), run(-20.0)
        assert deep.c == pytest.approx(3.0, rel=0.1)
        assert deep.residual < shallow.residual
        assert abs(deep.c - 3.0) < abs(shallow.c - 3.0)

    def test_constant_series_rejected(self):
        s = geometric_grid()
        with pytest.raises(UnstableFit):
            fit_inverse_log(SweepSeries(s=s, values=np.full_like(s, 0.7)))

    @settings(max_examples=40, deadline=None)
    @given(c=st.floats(min_value=1e-3, max_value=1e3), seed=st.integers(0, 2 ** 16))
    def test_recovers_constant_under_relabeling(self, c, seed):
        s = geometric_grid()
        perm = np.random.default_rng(seed).permutation(len(s))
        series = SweepSeries(s=s[perm], values=(c / np.log(1.0 / s))[perm])
        res = fit_inverse_log(series)
        assert res.c == pytest.approx(c, rel=1e-10)


class TestFitPowerOfLog:
    def test_exact_square(self):
        s = geometric_grid()
        series = SweepSeries(s=s, values=np.log(1.0 / s) ** -2.0)
        res = fit_power_of_log(series)
        assert res.p == pytest.approx(2.0, abs=1e-10)
        assert res.residual == pytest.approx(0.0, abs=1e-10)

    def test_amplitude_reported(self):
        s = geometric_grid()
        series = SweepSeries(s=s, values=5.0 * np.log(1.0 / s) ** -1.0)
        res = fit_power_of_log(series)
        assert res.c == pytest.approx(5.0, rel=1e-10)

    def test_agreement_with_inverse_log(self):
        # both models apply to an exact inverse-log series
        s = geometric_grid()
        series = SweepSeries(s=s, values=2.5 / np.log(1.0 / s))
        power = fit_power_of_log(series)
        inv = fit_inverse_log(series)
        assert power.p == pytest.approx(1.0, abs=0.1)
        assert power.c == pytest.approx(inv.c, rel=0.1)

    def test_ill_conditioned_window(self):
        # two nearly-identical deepest points leave no loglog spread
        s = np.concatenate([np.logspace(-1, -5, 10), [1e-5 * (1 - 1e-13)]])
        series = SweepSeries(s=s, values=1.0 / np.log(1.0 / s))
        with pytest.raises(IllConditionedFit):
            fit_power_of_log(series, window_fraction=0.15)

    def test_loglog_slope_variant(self):
        s = geometric_grid()
        series = SweepSeries(s=s, values=np.log(1.0 / s) ** 3.0)
        res = fit_loglog_slope(series)
        assert res.model == "LogLogSlope"
        assert res.slope == pytest.approx(3.0, abs=1e-10)


class TestProductLaw:
    def test_synthetic_exact(self):
        s = geometric_grid()
        L = np.log(1.0 / s)
        lam = np.column_stack([1.0 / L, 2.0 / L])
        res = product_law_check(s, lam)
        assert res.model == "ProductLaw"
        assert res.c == pytest.approx(2.0, rel=1e-12)
        assert res.verdict == "PASS"

    def test_two_components_reduce_to_inverse_log(self):
        s = geometric_grid()
        L = np.log(1.0 / s)
        lam1 = 1.7 / L + 0.3 / L ** 2
        res = product_law_check(s, lam1[:, None])
        inv = fit_inverse_log(SweepSeries(s=s, values=lam1))
        assert res.c == pytest.approx(inv.c, rel=1e-12)

    def test_wrong_power_fails(self):
        s = geometric_grid(-1.0, -14.0, 14)
        L = np.log(1.0 / s)
        res = product_law_check(s, (1.0 / L ** 2)[:, None])
        assert res.verdict == "FAIL"

    def test_grid_too_short(self):
        s = geometric_grid(n=6)
        with pytest.raises(GridTooShort):
            product_law_check(s, np.ones((6, 2)))

    def test_relabeling_invariance(self):
        s = geometric_grid()
        L = np.log(1.0 / s)
        lam = np.column_stack([1.0 / L, 2.0 / L])
        res = product_law_check(s, lam)
        swapped = product_law_check(s, lam[:, ::-1])
        assert res.c == pytest.approx(swapped.c, rel=1e-14)


class TestFitResult:
    def test_unknown_model_rejected(self):
        with pytest.raises(ValueError):
            FitResult(model="Quadratic")

    def test_window_diagnostics_present(self):
        s = geometric_grid()
        series = SweepSeries(s=s, values=1.0 / np.log(1.0 / s))
        res = fit_inverse_log(series, window_fraction=0.75)
        assert res.window["fraction"] == 0.75
        assert res.window["points"] == 9
        assert res.window["s_min"] == pytest.approx(s.min())
