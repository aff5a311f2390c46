"""Increasing convex (and, by reflection, increasing concave) least squares
fits over growing prefixes of the data.

Each new observation either lies on or above the linear extension of the
current fit, in which case it is appended as is, or it triggers a homotopy
on the enlarged cone from ``(Y_1..Y_{j-1}, extension)`` to
``(Y_1..Y_j)``.  The direction of that homotopy is a multiple of the last
coordinate vector, which is what the fast breakpoint rule needs.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import cones
from .core import RegressionData
from .homotopy import project_segment


@dataclass
class SequentialState:
    """Fit to the first ``j`` observations, grown one point at a time."""

    kind: str = "increasing_convex"
    j: int = 0
    x: list = field(default_factory=list)
    y: list = field(default_factory=list)
    fitted: np.ndarray = field(default_factory=lambda: np.empty(0))
    active: tuple = ()
    rss: float = 0.0
    per_step_log: list = field(default_factory=list)

    @property
    def boundary_value(self) -> float:
        return float(self.fitted[-1])

    @property
    def boundary_slope(self) -> float:
        if self.j < 2:
            return 0.0
        return float((self.fitted[-1] - self.fitted[-2]) / (self.x[-1] - self.x[-2]))

    def extension(self, x_new: float) -> float:
        """Value of the current fit, linearly extended, at ``x_new``."""
        if self.kind == "monotone":
            return self.boundary_value
        return self.boundary_value + self.boundary_slope * (x_new - self.x[-1])


@dataclass(frozen=True)
class StepRecord:
    boundary_value: float
    boundary_slope: float
    rss: float
    fast: bool
    stages: int = 0
    distinct_active_sets: int = 0


def _cone(kind, x):
    return cones.monotone(x) if kind == "monotone" else cones.increasing_convex(x)


def push(state: SequentialState, x_j: float, y_j: float) -> SequentialState:
    """Absorb one observation (in place) and return the state."""
    x_j, y_j = float(x_j), float(y_j)
    if state.j and not x_j > state.x[-1]:
        raise ValueError(f"abscissa {x_j!r} does not exceed previous {state.x[-1]!r}")
    if state.j == 0:
        state.x.append(x_j)
        state.y.append(y_j)
        state.fitted = np.array([y_j])
        state.j = 1
        state.per_step_log.append(StepRecord(y_j, 0.0, 0.0, True))
        return state

    ext = state.extension(x_j)
    state.x.append(x_j)
    state.y.append(y_j)
    state.j += 1
    if y_j >= ext:
        state.fitted = np.append(state.fitted, y_j)
        if y_j > ext:
            # a kink at the previous end point, i.e. generator j-1
            state.active = tuple(sorted(set(state.active) | {state.j - 1}))
        stages = distinct = 0
        fast = True
    else:
        cone = _cone(state.kind, state.x)
        v1 = np.asarray(state.y)
        v0 = v1.copy()
        v0[-1] = ext
        proj0 = np.append(state.fitted, ext)
        fitted, active, stats = project_segment(
            cone, v0, proj0, v1, active0=state.active,
            fast=state.kind == "increasing_convex", verify=False,
        )
        state.fitted = fitted
        state.active = active
        r = v1 - fitted
        state.rss = float(r @ r)
        stages, distinct = stats.stages, stats.distinct_active_sets
        fast = False
    state.per_step_log.append(
        StepRecord(state.boundary_value, state.boundary_slope, state.rss, fast, stages, distinct)
    )
    return state


@dataclass(frozen=True)
class PassResult:
    """Per-prefix (or per-suffix) summaries, indexed by design position.

    For a prefix pass entry ``j`` describes the fit to points ``0..j``;
    ``value`` is the fit at ``x[j]`` and ``slope`` the slope of its last
    segment.  For a suffix pass entry ``j`` describes the fit to points
    ``j..n-1``; ``value`` is the fit at ``x[j]`` and ``slope`` the slope of its
    first segment (zero for a single point).
    """

    rss: np.ndarray
    value: np.ndarray
    slope: np.ndarray
    fast: np.ndarray
    stages: np.ndarray
    distinct_active_sets: np.ndarray


def _summaries(log) -> PassResult:
    return PassResult(
        rss=np.array([s.rss for s in log]),
        value=np.array([s.boundary_value for s in log]),
        slope=np.array([s.boundary_slope for s in log]),
        fast=np.array([s.fast for s in log]),
        stages=np.array([s.stages for s in log]),
        distinct_active_sets=np.array([s.distinct_active_sets for s in log]),
    )


def sequential_fit(data: RegressionData, kind: str = "increasing_convex") -> SequentialState:
    state = SequentialState(kind=kind)
    for xi, yi in zip(data.x, data.y):
        push(state, xi, yi)
    return state


def run_prefix(data: RegressionData) -> PassResult:
    """Increasing convex fits to every prefix of ``data``."""
    return _summaries(sequential_fit(data).per_step_log)


def run_suffix(data: RegressionData) -> PassResult:
    """Increasing concave fits to every suffix of ``data``.

    An increasing concave fit to ``(x, y)`` is the mirror image of an
    increasing convex fit to ``(-x, -y)`` read backwards; slopes are
    preserved and values change sign.
    """
    res = run_prefix(data.reflected())
    return PassResult(
        rss=res.rss[::-1].copy(),
        value=-res.value[::-1],
        slope=res.slope[::-1].copy(),
        fast=res.fast[::-1].copy(),
        stages=res.stages[::-1].copy(),
        distinct_active_sets=res.distinct_active_sets[::-1].copy(),
    )


def convex_fit(data: RegressionData) -> np.ndarray:
    """Increasing convex least squares fit at the design points."""
    return sequential_fit(data).fitted


def concave_fit(data: RegressionData) -> np.ndarray:
    """Increasing concave least squares fit at the design points."""
    return -sequential_fit(data.reflected()).fitted[::-1]


def isotonic_fit(data: RegressionData) -> np.ndarray:
    """Nondecreasing least squares fit, one observation at a time."""
    return sequential_fit(data, kind="monotone").fitted
