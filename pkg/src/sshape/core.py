"""Data containers and fit-level computations shared by the rest of the package.

Indices are 0-based throughout: ``knots`` are design-point indices of interior
kinks and ``inflection_index`` is the position of the estimated inflection
point in ``x``.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np

KNOT_RTOL = 1e-9


def _readonly(a) -> np.ndarray:
    a = np.array(a, dtype=float)
    a.setflags(write=False)
    return a


@dataclass(frozen=True)
class RegressionData:
    """Observations ``(x_i, y_i)`` with strictly increasing abscissae."""

    x: np.ndarray
    y: np.ndarray

    def __post_init__(self):
        x = _readonly(np.ravel(self.x))
        y = _readonly(np.ravel(self.y))
        if x.size == 0:
            raise ValueError("need at least one observation")
        if x.shape != y.shape:
            raise ValueError(f"x has {x.size} entries but y has {y.size}")
        if not (np.all(np.isfinite(x)) and np.all(np.isfinite(y))):
            raise ValueError("x and y must be finite")
        bad = np.flatnonzero(np.diff(x) <= 0)
        if bad.size:
            i = int(bad[0]) + 1
            raise ValueError(
                f"x must be strictly increasing; x[{i}]={x[i]!r} follows x[{i - 1}]={x[i - 1]!r}"
            )
        object.__setattr__(self, "x", x)
        object.__setattr__(self, "y", y)

    @property
    def n(self) -> int:
        return self.x.size

    def reflected(self) -> "RegressionData":
        """Map (x, y) -> (-x, -y) with the order reversed.

        Increasing concave fits on the original data correspond to increasing
        convex fits on the reflected data.
        """
        return RegressionData(-self.x[::-1], -self.y[::-1])

    def subset(self, start: int, stop: int) -> "RegressionData":
        return RegressionData(self.x[start:stop], self.y[start:stop])


def segment_slopes(x: np.ndarray, theta: np.ndarray) -> np.ndarray:
    return np.diff(theta) / np.diff(x)


def detect_knots(x: np.ndarray, theta: np.ndarray) -> tuple:
    """Interior indices where the slope of the interpolant changes."""
    s = segment_slopes(x, theta)
    if s.size < 2:
        return ()
    tol = KNOT_RTOL * (1.0 + np.max(np.abs(s)))
    return tuple(int(i) + 1 for i in np.flatnonzero(np.abs(np.diff(s)) > tol))


@dataclass(frozen=True)
class PiecewiseLinearFit:
    """Continuous piecewise-linear function through ``(x_i, theta_i)``.

    Outside ``[x[0], x[-1]]`` the first/last segment is extended linearly.
    """

    x: np.ndarray
    theta: np.ndarray
    knots: tuple = field(default=None)

    def __post_init__(self):
        x = _readonly(np.ravel(self.x))
        theta = _readonly(np.ravel(self.theta))
        if x.shape != theta.shape:
            raise ValueError("theta must have one value per design point")
        object.__setattr__(self, "x", x)
        object.__setattr__(self, "theta", theta)
        if self.knots is None:
            object.__setattr__(self, "knots", detect_knots(x, theta))
        else:
            object.__setattr__(self, "knots", tuple(int(k) for k in self.knots))

    @property
    def n(self) -> int:
        return self.x.size

    @property
    def slopes(self) -> np.ndarray:
        return segment_slopes(self.x, self.theta)

    def __call__(self, t):
        return evaluate(self, t)


def evaluate(fit: PiecewiseLinearFit, t):
    """Evaluate ``fit`` at scalar or array ``t``."""
    x, theta = fit.x, fit.theta
    t_arr = np.asarray(t, dtype=float)
    if x.size == 1:
        out = np.full_like(t_arr, theta[0])
    else:
        out = np.interp(t_arr, x, theta)
        s = fit.slopes
        lo = t_arr < x[0]
        hi = t_arr > x[-1]
        out = np.where(lo, theta[0] + s[0] * (t_arr - x[0]), out)
        out = np.where(hi, theta[-1] + s[-1] * (t_arr - x[-1]), out)
    return float(out) if out.ndim == 0 else out


def rss(fit: PiecewiseLinearFit, data: RegressionData) -> float:
    """Plain residual sum of squares on the design points."""
    if fit.n != data.n:
        raise ValueError(f"fit has {fit.n} points but data has {data.n}")
    r = data.y - fit.theta
    return float(r @ r)


@dataclass(frozen=True)
class SShapeFit:
    fit: PiecewiseLinearFit
    inflection_index: int
    inflection: float
    rss: float
    method: str = ""

    @property
    def theta(self) -> np.ndarray:
        return self.fit.theta

    @property
    def knots(self) -> tuple:
        return self.fit.knots

    def __call__(self, t):
        return evaluate(self.fit, t)


@dataclass(frozen=True)
class FitDiagnostics:
    range_v: float
    affine_pieces: int
    l2n_norm: Optional[float] = None
    mean_squared_residual: Optional[float] = None


def diagnostics(fit: PiecewiseLinearFit, reference: Optional[Callable] = None,
                data: Optional[RegressionData] = None) -> FitDiagnostics:
    """Range V(f), number of affine pieces k(f) and optionally the empirical
    L2 distance to ``reference`` over the design points."""
    if isinstance(fit, SShapeFit):
        fit = fit.fit
    l2n = None
    if reference is not None:
        ref = np.asarray(reference(fit.x), dtype=float)
        l2n = float(np.sqrt(np.mean((fit.theta - ref) ** 2)))
    msr = None if data is None else rss(fit, data) / data.n
    return FitDiagnostics(
        range_v=float(fit.theta[-1] - fit.theta[0]),
        affine_pieces=len(fit.knots) + 1,
        l2n_norm=l2n,
        mean_squared_residual=msr,
    )


def is_sshaped(x: np.ndarray, theta: np.ndarray, j: int, tol: float = 1e-9) -> bool:
    """True if the interpolant is increasing, convex up to x[j] and concave after."""
    s = segment_slopes(np.asarray(x, float), np.asarray(theta, float))
    if s.size == 0:
        return True
    atol = tol * (1.0 + np.max(np.abs(s)))
    left, right = s[:j], s[j:]
    return bool(
        np.all(s >= -atol)
        and np.all(np.diff(left) >= -atol)
        and np.all(np.diff(right) <= atol)
    )
