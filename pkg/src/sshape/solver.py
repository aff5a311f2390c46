"""Global S-shaped least squares fits.

The estimator minimises the residual sum of squares over increasing
functions that are convex left of some inflection point and concave right
of it.  An optimal inflection can always be found among the design points,
so the problem reduces to a scan over ``j``: for each candidate the best fit
is the increasing convex fit to ``0..j`` joined to the increasing concave
fit to ``j+1..n-1``, provided the join is itself S-shaped.

Three interchangeable methods are offered:

``seq``
    Two sequential passes (convex over prefixes, concave over suffixes)
    give every candidate's RSS in one sweep.
``scan-selected``
    Same screening, but each surviving candidate's two pieces are fitted
    from scratch.
``scan-all``
    No screening; the data are projected onto the S-shaped cone of every
    design point.
"""
from __future__ import annotations

import enum

import numpy as np

from . import cones, seqlse
from .core import PiecewiseLinearFit, RegressionData, SShapeFit
from .homotopy import project_cone

TIE_RTOL = 1e-10


class SolveMethod(str, enum.Enum):
    SEQ = "seq"
    SCAN_SELECTED = "scan-selected"
    SCAN_ALL = "scan-all"


def _method(method) -> SolveMethod:
    try:
        return SolveMethod(method)
    except ValueError:
        choices = ", ".join(m.value for m in SolveMethod)
        raise ValueError(f"unknown method {method!r}; choose one of {choices}") from None


def tie_tol(best: float, tss: float = 0.0) -> float:
    """RSS values within this of ``best`` count as ties.

    Relative to the minimum, floored at a tiny fraction of the total sum of
    squares so that exact fits still tie.
    """
    return TIE_RTOL * max(best, 1e-8 * tss, 1e-300)


def sargmin(values, tss: float = 0.0) -> int:
    """Smallest index whose value ties the minimum."""
    values = np.asarray(values, dtype=float)
    best = np.min(values)
    return int(np.flatnonzero(values <= best + tie_tol(best, tss))[0])


def screen(y) -> np.ndarray:
    """Candidates kept by the first screening step.

    ``j`` survives when ``y[j] <= y[j+1]``; the last index always survives.
    """
    y = np.asarray(y, dtype=float)
    keep = np.ones(y.size, dtype=bool)
    keep[:-1] = y[:-1] <= y[1:]
    return np.flatnonzero(keep)


def check_concat(prefix_value: float, suffix_value: float, suffix_slope,
                 x_j: float, x_next: float) -> bool:
    """Whether joining the two pieces at ``x_j`` keeps the fit S-shaped.

    ``prefix_value`` is the convex fit at ``x_j``; ``suffix_value`` and
    ``suffix_slope`` are the concave fit's value at ``x_next`` and its first
    slope (``None`` for a single-point suffix, which only needs the bridge
    to be nondecreasing).  Pass ``x_next=None`` for the last index, which is
    always admissible.
    """
    if x_next is None:
        return True
    bridge = (suffix_value - prefix_value) / (x_next - x_j)
    first = 0.0 if suffix_slope is None else suffix_slope
    return bool(first <= bridge)


def _tss(y) -> float:
    return float(np.sum((y - np.mean(y)) ** 2))


def _candidate_scan_seq(data: RegressionData):
    """Per-candidate RSS from one prefix and one suffix pass."""
    n, x = data.n, data.x
    pre = seqlse.run_prefix(data)
    suf = seqlse.run_suffix(data)
    relaxed = pre.rss + np.append(suf.rss[1:], 0.0)
    profile = np.full(n, np.inf)
    admissible = np.zeros(n, dtype=bool)
    for j in screen(data.y):
        if j == n - 1:
            ok = True
        else:
            slope = suf.slope[j + 1] if j + 2 < n else None
            ok = check_concat(pre.value[j], suf.value[j + 1], slope, x[j], x[j + 1])
        if ok:
            admissible[j] = True
            profile[j] = relaxed[j]
    # The joined fits cover every candidate that can be the smallest
    # minimiser except 0, whose cone is simply the increasing concave one.
    if not admissible[0]:
        profile[0] = suf.rss[0]
        admissible[0] = True
    return profile, admissible, relaxed


def _pieces_cold(data: RegressionData, j: int):
    """Convex fit to ``0..j`` and concave fit to ``j+1..n-1``, each from scratch."""
    x, y = data.x, data.y
    left, _, _ = project_cone(cones.increasing_convex(x[: j + 1]), y[: j + 1])
    if j + 1 < data.n:
        right, _, _ = project_cone(cones.increasing_concave(x[j + 1:]), y[j + 1:])
    else:
        right = np.empty(0)
    return left, right


def _candidate_scan_selected(data: RegressionData):
    n, x, y = data.n, data.x, data.y
    profile = np.full(n, np.inf)
    relaxed = np.full(n, np.inf)
    admissible = np.zeros(n, dtype=bool)
    pieces = {}
    for j in screen(y):
        left, right = _pieces_cold(data, j)
        theta = np.concatenate([left, right])
        relaxed[j] = float(np.sum((y - theta) ** 2))
        if j == n - 1:
            ok = True
        else:
            slope = (right[1] - right[0]) / (x[j + 2] - x[j + 1]) if right.size > 1 else None
            ok = check_concat(left[-1], right[0], slope, x[j], x[j + 1])
        if ok:
            admissible[j] = True
            profile[j] = relaxed[j]
            pieces[j] = theta
    if not admissible[0]:
        theta, _, _ = project_cone(cones.increasing_concave(x), y)
        profile[0] = float(np.sum((y - theta) ** 2))
        admissible[0] = True
        pieces[0] = theta
    return profile, admissible, relaxed, pieces


def _refit_seq(data: RegressionData, j: int) -> np.ndarray:
    if j == 0:
        return seqlse.concave_fit(data)
    left = seqlse.convex_fit(data.subset(0, j + 1))
    if j + 1 == data.n:
        return left
    return np.concatenate([left, seqlse.concave_fit(data.subset(j + 1, data.n))])


def fit_fixed_inflection(data: RegressionData, j: int) -> SShapeFit:
    """Least squares fit with the inflection pinned at design point ``j``."""
    if not 0 <= j < data.n:
        raise IndexError(f"inflection index {j} out of range for n={data.n}")
    theta, _, _ = project_cone(cones.sshape_at(data.x, j), data.y)
    r = data.y - theta
    return SShapeFit(PiecewiseLinearFit(data.x, theta), j, float(data.x[j]), float(r @ r),
                     method="fixed")


def _profile_all(data: RegressionData):
    n = data.n
    profile = np.empty(n)
    fits = {}
    for j in range(n):
        f = fit_fixed_inflection(data, j)
        profile[j] = f.rss
        fits[j] = f.theta
    return profile, fits


def fit_sshape(data: RegressionData, method="seq") -> SShapeFit:
    """S-shaped least squares fit; ties in the inflection go to the smallest index.

    Examples
    --------
    >>> d = RegressionData([0, 1/3, 2/3, 1], [0, 0.5, 0.5, 1])
    >>> f = fit_sshape(d)
    >>> f.inflection_index, round(f.rss * 24, 12)
    (0, 1.0)
    """
    method = _method(method)
    tss = _tss(data.y)
    if method is SolveMethod.SEQ:
        profile, admissible, relaxed = _candidate_scan_seq(data)
        j = sargmin(profile, tss)
        theta = _refit_seq(data, j)
    elif method is SolveMethod.SCAN_SELECTED:
        profile, _, _, pieces = _candidate_scan_selected(data)
        j = sargmin(profile, tss)
        theta = pieces[j]
    else:
        profile, fits = _profile_all(data)
        j = sargmin(profile, tss)
        theta = fits[j]
    r = data.y - theta
    return SShapeFit(PiecewiseLinearFit(data.x, theta), j, float(data.x[j]), float(r @ r),
                     method=method.value)


def rss_profile(data: RegressionData) -> np.ndarray:
    """RSS of the best fit with the inflection at each design point.

    Candidates whose sequential pieces join into an S-shape take their RSS
    from the passes; the others are projected onto their cone directly.
    """
    profile, admissible, _ = _candidate_scan_seq(data)
    for j in np.flatnonzero(~admissible):
        profile[j] = fit_fixed_inflection(data, int(j)).rss
    return profile
