import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from sshape import cones
from sshape.cones import kkt_check, knot_set
from sshape.homotopy import (HomotopyError, advance, make_state, project_cone,
                             project_segment, resolve_degeneracy)
from sshape.oracle import project_enumerate

from conftest import random_design

X3 = np.array([0.0, 0.5, 1.0])
EXAMPLE = np.array([1 / 6, 2 / 3, 7 / 6])


def test_zero_direction_is_immediately_terminal():
    cone = cones.increasing_convex(X3)
    v = np.array([0.0, 0.0, 1.0])
    fit, active, stats = project_segment(cone, v, v, v)
    assert np.array_equal(fit, v) and stats.stages == 0 and active == (2,)


def test_worked_example_from_mean():
    cone = cones.increasing_convex(X3)
    y = np.array([0.0, 1.0, 1.0])
    v0 = np.full(3, y.mean())
    fit, _, _ = project_segment(cone, v0, v0, y)
    assert np.allclose(fit, EXAMPLE, atol=1e-14)


def test_worked_example_cold():
    fit, active, _ = project_cone(cones.increasing_convex(X3), [0, 1, 1])
    assert np.allclose(fit, EXAMPLE, atol=1e-14)
    assert active == (1,)


def test_member_is_fixed_point():
    x = np.array([0.0, 1.0, 2.5, 3.0])
    y = np.array([1.0, 1.5, 3.0, 4.0])
    fit, _, _ = project_cone(cones.increasing_convex(x), y)
    assert np.allclose(fit, y, atol=1e-12)
    v0 = np.array([1.0, 1.0, 1.0, 1.0])
    fit, _, _ = project_segment(cones.increasing_convex(x), v0, v0, y)
    assert np.allclose(fit, y, atol=1e-12)


def test_two_point_pooling():
    for x in ([0.0, 1.0], [-3.0, 10.0]):
        fit, _, _ = project_cone(cones.monotone(x), [1, 0])
        assert np.allclose(fit, [0.5, 0.5])


def test_tied_blockers_resolved():
    # two primal coefficients reach zero at the same t
    cone = cones.monotone([0, 1, 2, 3.0])
    v0 = np.array([0, 1, 2, 3.0])
    y = np.array([0, -1, 4, 3.0])
    fit, _, stats = project_segment(cone, v0, v0, y)
    assert stats.degenerate >= 1
    assert np.all(np.diff(stats.thresholds) > 0)
    assert np.allclose(fit, project_enumerate(cone, y))
    assert np.allclose(fit, [-0.5, -0.5, 3.5, 3.5])


def test_resolve_degeneracy_single_blocker_swaps():
    cone = cones.monotone([0, 1, 2.0])
    state = make_state(cone, (1, 2), np.array([0, 1, 2.0]), np.array([0, 2, 0.0]), 0.0)
    nxt = resolve_degeneracy(cone, state, (1,), 0.5)
    assert nxt.active == (2,)


@settings(max_examples=60, deadline=None)
@given(st.integers(2, 9), st.integers(0, 2**32 - 1), st.sampled_from(
    ["increasing_convex", "increasing_concave", "convex", "monotone", "sshape"]))
def test_matches_oracle(n, seed, kind):
    rng = np.random.default_rng(seed)
    x = random_design(rng, n)
    y = rng.standard_normal(n)
    cone = cones.sshape_at(x, int(rng.integers(n))) if kind == "sshape" else cones.CONSTRUCTORS[kind](x)
    fit, _, stats = project_cone(cone, y)
    assert np.max(np.abs(fit - project_enumerate(cone, y))) < 1e-8
    assert stats.degenerate == 0


@settings(max_examples=40, deadline=None)
@given(st.integers(3, 40), st.integers(0, 2**32 - 1))
def test_fast_rule_agrees_with_general_rule(n, seed):
    rng = np.random.default_rng(seed)
    x = random_design(rng, n)
    y = np.cumsum(np.abs(rng.standard_normal(n)))
    cone = cones.increasing_convex(x)
    prev, _, _ = project_cone(cones.increasing_convex(x[:-1]), y[:-1])
    s = (prev[-1] - prev[-2]) / (x[-2] - x[-3])
    ext = prev[-1] + s * (x[-1] - x[-2])
    v0 = np.append(y[:-1], ext)
    proj0 = np.append(prev, ext)
    y[-1] = ext - abs(rng.standard_normal()) * 3
    fast_fit, _, fast_stats = project_segment(cone, v0, proj0, y, fast=True)
    slow_fit, _, _ = project_segment(cone, v0, proj0, y, fast=False)
    assert np.allclose(fast_fit, slow_fit, atol=1e-9)
    maxes = [max(a) if a else 0 for a in fast_stats.active_sets]
    assert all(a >= b for a, b in zip(maxes, maxes[1:]))


def alternation(a0, j):
    """Active sets predicted for noiseless convex data and u along e_j."""
    seq, a = [tuple(sorted(a0))], set(a0)
    while a:
        m = max(a)
        if m - 1 in a or m == j - 1 or m == 1:
            a = a - {m}
        else:
            a = a | {m - 1}
        seq.append(tuple(sorted(a)))
    return seq


@pytest.mark.parametrize("seed", range(20))
def test_noiseless_alternation(seed):
    rng = np.random.default_rng(seed)
    j = int(rng.integers(4, 50))
    x = np.sort(rng.uniform(0, 1, j))
    kinks, weights = rng.uniform(0, 1, 3), rng.exponential(1, 3)
    y = 0.3 * x + sum(w * np.maximum(x - k, 0) for w, k in zip(weights, kinks))
    slope = (y[-2] - y[-3]) / (x[-2] - x[-3])
    v0 = y.copy()
    v0[-1] = y[-2] + slope * (x[-1] - x[-2])
    v1 = v0.copy()
    v1[-1] -= rng.exponential(5)
    cone = cones.increasing_convex(x)
    a0 = knot_set(cone, v0)
    for fast in (True, False):
        fit, _, stats = project_segment(cone, v0, v0, v1, active0=a0, fast=fast)
        assert len(set(stats.active_sets)) <= 2 * (j - 1)
        assert kkt_check(cone, v1, fit)
    fit, _, stats = project_segment(cone, v0, v0, v1, active0=a0, fast=True)
    assert stats.active_sets == alternation(a0, j)[: len(stats.active_sets)]


def test_stage_limit():
    cone = cones.monotone(np.arange(6.0))
    y = np.array([5, 4, 3, 2, 1, 0.0])
    v0 = np.arange(6.0)
    with pytest.raises(HomotopyError):
        project_segment(cone, v0, v0, y, max_stages=1)


def test_advance_terminal_is_idempotent():
    cone = cones.monotone([0, 1.0])
    state = make_state(cone, (), np.array([1.0, 1.0]), np.zeros(2), 0.0)
    done = advance(cone, state)
    assert done.terminal and advance(cone, done) is done
