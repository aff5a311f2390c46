import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from sshape import cones, seqlse
from sshape.core import RegressionData
from sshape.homotopy import project_cone
from sshape.seqlse import SequentialState, push

from conftest import random_data


def cold(kind, x, y):
    fit, _, _ = project_cone(cones.CONSTRUCTORS[kind](x), y)
    return fit


def test_convex_data_is_all_fast_path():
    x = np.linspace(0, 1, 30)
    state = seqlse.sequential_fit(RegressionData(x, x ** 2))
    assert all(s.fast for s in state.per_step_log)
    assert state.rss == 0.0


def test_worked_example_slow_push():
    state = SequentialState()
    for xi, yi in zip([0, 0.5, 1], [0, 1, 1]):
        push(state, xi, yi)
    assert not state.per_step_log[-1].fast
    assert np.allclose(state.fitted, [1 / 6, 2 / 3, 7 / 6], atol=1e-14)
    assert state.rss == pytest.approx(1 / 6, rel=1e-12)


def test_push_rejects_nonincreasing_x():
    state = SequentialState()
    push(state, 1.0, 0.0)
    with pytest.raises(ValueError):
        push(state, 1.0, 2.0)


def test_single_point():
    res = seqlse.run_prefix(RegressionData([0.3], [2.5]))
    assert res.rss.tolist() == [0.0] and res.value.tolist() == [2.5]


def test_concave_data_suffix_rss_zero():
    x = np.linspace(0.01, 1, 40)
    res = seqlse.run_suffix(RegressionData(x, np.sqrt(x)))
    assert np.all(res.rss == 0.0)


@settings(max_examples=30, deadline=None)
@given(st.integers(2, 40), st.integers(0, 2**32 - 1))
def test_prefix_snapshots_match_cold_fits(n, seed):
    rng = np.random.default_rng(seed)
    d = random_data(rng, n)
    pre = seqlse.run_prefix(d)
    suf = seqlse.run_suffix(d)
    for j in range(n):
        left = cold("increasing_convex", d.x[: j + 1], d.y[: j + 1])
        assert pre.rss[j] == pytest.approx(np.sum((d.y[: j + 1] - left) ** 2), rel=1e-8, abs=1e-12)
        assert pre.value[j] == pytest.approx(left[-1], abs=1e-9)
        right = cold("increasing_concave", d.x[j:], d.y[j:])
        assert suf.rss[j] == pytest.approx(np.sum((d.y[j:] - right) ** 2), rel=1e-8, abs=1e-12)
        assert suf.value[j] == pytest.approx(right[0], abs=1e-9)
        if j + 1 < n:
            assert suf.slope[j] == pytest.approx((right[1] - right[0]) / (d.x[j + 1] - d.x[j]),
                                                 abs=1e-8)


@settings(max_examples=30, deadline=None)
@given(st.integers(2, 80), st.integers(0, 2**32 - 1))
def test_sandwich_and_monotone_rss(n, seed):
    d = random_data(np.random.default_rng(seed), n)
    pre = seqlse.run_prefix(d)
    suf = seqlse.run_suffix(d)
    tol = 1e-9 * (1 + np.abs(d.y).max())
    assert np.all(pre.value >= d.y - tol)
    assert np.all(d.y >= suf.value - tol)
    assert np.all(np.diff(pre.rss) >= -tol)
    assert np.all(np.diff(suf.rss) <= tol)


@settings(max_examples=30, deadline=None)
@given(st.integers(1, 60), st.integers(0, 2**32 - 1))
def test_full_fits_match_cold(n, seed):
    d = random_data(np.random.default_rng(seed), n)
    assert np.allclose(seqlse.convex_fit(d), cold("increasing_convex", d.x, d.y), atol=1e-9)
    assert np.allclose(seqlse.concave_fit(d), cold("increasing_concave", d.x, d.y), atol=1e-9)
    assert np.allclose(seqlse.isotonic_fit(d), cold("monotone", d.x, d.y), atol=1e-9)


def test_reflection_maps_concave_to_convex():
    rng = np.random.default_rng(7)
    d = random_data(rng, 25)
    assert np.allclose(seqlse.concave_fit(d), -seqlse.convex_fit(d.reflected())[::-1])


def test_long_prefix_stays_feasible():
    rng = np.random.default_rng(11)
    x = np.sort(rng.uniform(0, 1, 400))
    d = RegressionData(x, np.sin(np.pi * (x - 0.5)) + 0.1 * rng.standard_normal(400))
    fit = seqlse.convex_fit(d)
    assert cones.kkt_check(cones.increasing_convex(d.x), d.y, fit, 1e-8)
