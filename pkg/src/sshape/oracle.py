"""Exact projections by exhaustive search over active sets.

Exponential in the number of constrained generators; intended as an
independent referee for small problems (n <= 14).
"""
from __future__ import annotations

from itertools import combinations

import numpy as np

from .cones import ConeSpec, default_tol, kkt_check, sshape_at
from .core import RegressionData

MAX_DIM = 14
DUPLICATE_TOL = 1e-9


class OracleError(RuntimeError):
    pass


def _subsets(indices):
    for k in range(len(indices) + 1):
        yield from combinations(indices, k)


def project_enumerate(cone: ConeSpec, y) -> np.ndarray:
    """Projection of ``y`` onto ``cone``: the unique face projection that
    satisfies primal feasibility, dual feasibility and complementary
    slackness."""
    y = np.asarray(y, dtype=float)
    if cone.dim > MAX_DIM:
        raise OracleError(f"enumeration limited to n <= {MAX_DIM}, got {cone.dim}")
    G = cone.generators
    free = list(range(cone.free_count))
    tol = 10 * default_tol(y)
    found = None
    for A in _subsets(range(cone.free_count, cone.dim)):
        cols = free + list(A)
        if cols:
            coef, *_ = np.linalg.lstsq(G[:, cols], y, rcond=None)
            cand = G[:, cols] @ coef
        else:
            cand = np.zeros_like(y)
        if not kkt_check(cone, y, cand, tol):
            continue
        if found is None:
            found = cand
        elif np.max(np.abs(found - cand)) > DUPLICATE_TOL * (1.0 + np.max(np.abs(y))):
            raise OracleError("two different candidates satisfy the KKT conditions")
    if found is None:
        raise OracleError("no candidate satisfies the KKT conditions")
    return found


def sshape_enumerate(data: RegressionData, tie_rtol: float = 1e-10):
    """Minimum RSS over all design-point inflections and the full argmin set.

    Returns ``(min_rss, argmin_indices, profile)``.
    """
    if data.n > 10:
        raise OracleError("sshape enumeration limited to n <= 10")
    profile = np.empty(data.n)
    for j in range(data.n):
        fit = project_enumerate(sshape_at(data.x, j), data.y)
        r = data.y - fit
        profile[j] = r @ r
    best = profile.min()
    scale = max(best, 1e-300) if best > 0 else 0.0
    ties = tuple(int(j) for j in np.flatnonzero(profile <= best + tie_rtol * (scale + 1e-14 * np.sum(data.y ** 2))))
    return float(best), ties, profile
