import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from sshape import cones, seqlse
from sshape.core import RegressionData, is_sshaped
from sshape.oracle import sshape_enumerate
from sshape.solver import (SolveMethod, check_concat, fit_fixed_inflection, fit_sshape,
                           rss_profile, sargmin, screen)

from conftest import TIE_CONCAVE, random_data

METHODS = [m.value for m in SolveMethod]


@pytest.mark.parametrize("method", METHODS)
def test_four_point_tie(tie4, method):
    fit = fit_sshape(tie4, method)
    assert fit.rss == pytest.approx(1 / 24, rel=1e-12)
    assert np.allclose(fit.theta, TIE_CONCAVE, atol=1e-12)
    assert fit.inflection_index == 0 and fit.inflection == 0.0
    assert fit.method == method


@pytest.mark.parametrize("method", METHODS)
def test_noiseless_sshape(method):
    x = np.arange(1, 41) / 41
    y = 4 / (1 + np.exp(-2 * (x - 0.3)))
    fit = fit_sshape(RegressionData(x, y), method)
    assert fit.rss < 1e-20
    assert np.allclose(fit.theta, y, atol=1e-10)


@pytest.mark.parametrize("method", METHODS)
def test_decreasing_pair_pools(method):
    fit = fit_sshape(RegressionData([0, 1], [1, 0]), method)
    assert np.allclose(fit.theta, 0.5) and fit.rss == pytest.approx(0.5)


def test_single_point():
    fit = fit_sshape(RegressionData([2.0], [5.0]))
    assert fit.rss == 0 and fit.inflection == 2.0


def test_unknown_method(tie4):
    with pytest.raises(ValueError, match="unknown method"):
        fit_sshape(tie4, "fastest")


def test_strictly_convex_data_tie_break():
    # a strictly convex fit is also S-shaped at the second last point, which
    # is the smallest tied index
    x = np.linspace(0, 1, 6)
    fit = fit_sshape(RegressionData(x, x ** 2))
    assert fit.rss == 0.0 and fit.inflection_index == 4


class TestFixedInflection:
    def test_last_index_is_convex_fit(self):
        d = random_data(np.random.default_rng(0), 15)
        assert np.allclose(fit_fixed_inflection(d, 14).theta, seqlse.convex_fit(d), atol=1e-10)

    def test_first_index_is_concave_fit(self):
        d = random_data(np.random.default_rng(1), 15)
        assert np.allclose(fit_fixed_inflection(d, 0).theta, seqlse.concave_fit(d), atol=1e-10)

    def test_four_point_tie(self, tie4):
        assert np.allclose(fit_fixed_inflection(tie4, 0).theta, TIE_CONCAVE, atol=1e-14)

    def test_out_of_range(self, tie4):
        with pytest.raises(IndexError):
            fit_fixed_inflection(tie4, 4)


class TestProfile:
    def test_four_point_tie(self, tie4):
        prof = rss_profile(tie4)
        assert prof.min() == pytest.approx(1 / 24, rel=1e-12)
        assert np.allclose(prof, 1 / 24, rtol=1e-12)

    def test_noiseless_zero_at_true_inflection(self):
        x = np.linspace(0, 1, 21)
        k = 8
        y = np.where(x <= x[k], x ** 2, x[k] ** 2 + 2 * x[k] * (x - x[k]) - 0.5 * (x - x[k]) ** 2)
        assert rss_profile(RegressionData(x, y))[k] < 1e-20

    @settings(max_examples=40, deadline=None)
    @given(st.integers(1, 30), st.integers(0, 2**32 - 1))
    def test_profile_min_is_fit_rss(self, n, seed):
        d = random_data(np.random.default_rng(seed), n, kind="sigmoid")
        prof = rss_profile(d)
        fit = fit_sshape(d)
        assert fit.rss == pytest.approx(prof.min(), rel=1e-9, abs=1e-14)
        assert fit.inflection_index == sargmin(prof, np.sum((d.y - d.y.mean()) ** 2))

    def test_profile_matches_cold_fits(self):
        d = random_data(np.random.default_rng(5), 12)
        prof = rss_profile(d)
        cold = [fit_fixed_inflection(d, j).rss for j in range(d.n)]
        assert np.allclose(prof, cold, rtol=1e-9)


def test_screen():
    assert screen([0, 2, 1, 3]).tolist() == [0, 2, 3]
    assert screen([5.0]).tolist() == [0]


class TestCheckConcat:
    def test_last_index(self):
        assert check_concat(0.0, 0.0, None, 1.0, None)

    def test_single_point_suffix_needs_nondecreasing_bridge(self):
        assert check_concat(1.0, 2.0, None, 0.0, 1.0)
        assert not check_concat(2.0, 1.0, None, 0.0, 1.0)

    @pytest.mark.parametrize("seed", range(100))
    def test_agrees_with_fixed_fit(self, seed):
        rng = np.random.default_rng(seed)
        d = random_data(rng, int(rng.integers(3, 25)), kind="sigmoid" if seed % 2 else "gauss")
        x, y, n = d.x, d.y, d.n
        pre, suf = seqlse.run_prefix(d), seqlse.run_suffix(d)
        for j in range(n):
            if j == n - 1:
                ok = check_concat(pre.value[j], None, None, x[j], None)
            else:
                slope = suf.slope[j + 1] if j + 2 < n else None
                ok = check_concat(pre.value[j], suf.value[j + 1], slope, x[j], x[j + 1])
            relaxed = pre.rss[j] + (suf.rss[j + 1] if j + 1 < n else 0.0)
            fixed = fit_fixed_inflection(d, j).rss
            if ok:
                assert fixed == pytest.approx(relaxed, rel=1e-9, abs=1e-12)
                if j < n - 1:
                    tol = 1e-9 * (1 + np.abs(y).max())
                    assert y[j] <= pre.value[j] + tol
                    assert pre.value[j] <= suf.value[j + 1] + tol
                    assert suf.value[j + 1] <= y[j + 1] + tol
            else:
                assert fixed > relaxed * (1 + 1e-12) + 1e-14


@settings(max_examples=60, deadline=None)
@given(st.integers(1, 9), st.integers(0, 2**32 - 1))
def test_matches_oracle(n, seed):
    d = random_data(np.random.default_rng(seed), n)
    best, argmin, _ = sshape_enumerate(d)
    for m in METHODS:
        fit = fit_sshape(d, m)
        assert fit.rss == pytest.approx(best, rel=1e-8, abs=1e-14)
        assert fit.inflection_index == argmin[0]
        cone = cones.sshape_at(d.x, fit.inflection_index)
        assert cones.kkt_check(cone, d.y, fit.theta)
        assert is_sshaped(d.x, fit.theta, fit.inflection_index)


@pytest.mark.parametrize("seed", range(8))
def test_methods_agree_at_moderate_n(seed):
    d = random_data(np.random.default_rng(100 + seed), 40, kind="sigmoid")
    fits = [fit_sshape(d, m) for m in METHODS]
    assert len({f.inflection_index for f in fits}) == 1
    for f in fits[1:]:
        assert f.rss == pytest.approx(fits[0].rss, rel=1e-9)
        assert np.allclose(f.theta, fits[0].theta, atol=1e-8)


def test_sargmin_prefers_smallest():
    assert sargmin([1.0, 0.5, 0.5 + 1e-15, 0.7]) == 1
    assert sargmin([0.0, 0.0]) == 0
