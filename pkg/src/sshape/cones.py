"""Simplicial polyhedral cones of shape-restricted sequences.

A cone in R^n is described by ``n`` linearly independent generators, the
first ``free_count`` of which enter with coefficients of either sign and the
remainder with nonnegative coefficients.  Every cone built by the
constructors below consists of piecewise-linear sequences on a design ``x``,
and each generator has the form::

    g(x_i) = offset + scale * (x[clip(i, lo, hi)] - x[lo])

i.e. it is constant except on the segments ``lo, ..., hi-1`` where it has
slope ``scale``.  This lets inner products with all generators be formed in
O(n) and columns be materialised without building the full basis.
"""
from __future__ import annotations

from dataclasses import dataclass
from functools import cached_property
from typing import NamedTuple, Optional

import numpy as np
import scipy.linalg
from scipy.linalg import lapack

from .core import KNOT_RTOL

_geqrf, _ormqr, _trtrs = lapack.dgeqrf, lapack.dormqr, lapack.dtrtrs

_COND_LIMIT = 1e12


def default_tol(y) -> float:
    y = np.asarray(y, dtype=float)
    return 1e-10 * (1.0 + (np.max(np.abs(y)) if y.size else 0.0))


@dataclass(frozen=True, eq=False)
class ConeSpec:
    """Cone generated by ``±g_0..±g_{q-1}, g_q, ..., g_{n-1}``.

    Either ``x`` with the four structure arrays is given (structured cones),
    or ``matrix`` holding the generators as columns (custom cones).
    """

    dim: int
    free_count: int
    label: str
    x: Optional[np.ndarray] = None
    lo: Optional[np.ndarray] = None
    hi: Optional[np.ndarray] = None
    scale: Optional[np.ndarray] = None
    offset: Optional[np.ndarray] = None
    matrix: Optional[np.ndarray] = None
    inflection: Optional[int] = None

    @property
    def structured(self) -> bool:
        return self.matrix is None

    @property
    def nonneg_indices(self) -> np.ndarray:
        return np.arange(self.free_count, self.dim)

    # -- generator access ---------------------------------------------------

    def columns(self, idx) -> np.ndarray:
        """Generators ``idx`` as an ``(n, len(idx))`` array."""
        idx = np.asarray(idx, dtype=int)
        if not self.structured:
            return self.matrix[:, idx]
        # x is increasing, so x[clip(i, lo, hi)] == clip(x_i, x_lo, x_hi)
        xlo, xhi = self.x[self.lo[idx]], self.x[self.hi[idx]]
        out = np.clip(self.x[:, None], xlo, xhi, order="F")
        out -= xlo
        out *= self.scale[idx]
        out += self.offset[idx]
        return out

    @cached_property
    def generators(self) -> np.ndarray:
        G = self.columns(np.arange(self.dim))
        G.setflags(write=False)
        return G

    def dual(self, r) -> np.ndarray:
        """Inner products ``<g_l, r>`` for every generator."""
        r = np.asarray(r, dtype=float)
        if not self.structured:
            return self.matrix.T @ r
        suffix = np.concatenate([np.cumsum(r[::-1])[::-1], [0.0]])
        w = np.concatenate([[0.0], np.cumsum(np.diff(self.x) * suffix[1:-1])])
        return self.offset * suffix[0] + self.scale * (w[self.hi] - w[self.lo])

    def reconstruct(self, coef) -> np.ndarray:
        coef = np.asarray(coef, dtype=float)
        if not self.structured:
            return self.matrix @ coef
        return self.columns(np.arange(self.dim)) @ coef

    @cached_property
    def _norms(self):
        """Sup- and l1-norms of the generators (used to scale tolerances)."""
        if not self.structured:
            G = self.matrix
            return np.abs(G).max(axis=0), np.abs(G).sum(axis=0)
        # structured generators are monotone in i and do not change sign
        x, lo, hi, n = self.x, self.lo, self.hi, self.dim
        cum = np.concatenate([[0.0], np.cumsum(x)])
        total = lo * x[lo] + (cum[hi + 1] - cum[lo]) + (n - 1 - hi) * x[hi]
        first = self.offset
        last = self.offset + self.scale * (x[hi] - x[lo])
        sup = np.maximum(np.abs(first), np.abs(last))
        l1 = np.abs(n * self.offset + self.scale * (total - n * x[lo]))
        return sup, l1

    @cached_property
    def _lu(self):
        return scipy.linalg.lu_factor(self.generators)

    # -- coefficients ---------------------------------------------------------

    def coefficients(self, v) -> np.ndarray:
        v = np.asarray(v, dtype=float)
        if v.shape != (self.dim,):
            raise ValueError(f"expected a vector of length {self.dim}, got shape {v.shape}")
        closed = _CLOSED_FORMS.get(self.label) if self.structured else None
        if closed is not None:
            return closed(self, v)
        return scipy.linalg.lu_solve(self._lu, v)

    @cached_property
    def polar_direction(self) -> np.ndarray:
        """A vector ``r`` orthogonal to the free generators with
        ``<g_l, r> < 0`` for every constrained generator.

        Adding a multiple of ``r`` to a point of the lineality space leaves its
        projection unchanged while making every dual variable strictly
        negative.
        """
        n, q = self.dim, self.free_count
        if q == n:
            return np.zeros(n)
        if self.structured and self.label != "convex":
            # all constrained generators here are increasing and nonconstant
            r = np.zeros(n)
            r[0], r[-1] = 1.0, -1.0
        elif self.structured:
            xc = self.x - self.x.mean()
            _, _, fit = solve_subspace(self, (), xc ** 2)
            r = fit - xc ** 2
        else:
            _, l1 = self._norms
            d = np.r_[np.zeros(q), -l1[q:]]
            r = scipy.linalg.lu_solve(self._lu, d, trans=1)
        d = self.dual(r)
        if not np.all(d[q:] < 0):
            _, l1 = self._norms
            r = scipy.linalg.lu_solve(self._lu, np.r_[np.zeros(q), -l1[q:]], trans=1)
        return r

    def contains(self, v, tol: Optional[float] = None) -> bool:
        tol = default_tol(v) if tol is None else tol
        lam = self.coefficients(v)
        sup, _ = self._norms
        q = self.free_count
        return bool(np.all(lam[q:] * sup[q:] >= -tol))


def _slopes(cone: ConeSpec, v: np.ndarray) -> np.ndarray:
    return np.diff(v) / np.diff(cone.x)


def _coef_convex(cone, v):
    # increasing_convex and convex share the basis 1, ramp, hinges
    lam = np.empty(cone.dim)
    lam[0] = v[0]
    if cone.dim > 1:
        s = _slopes(cone, v)
        lam[1] = s[0]
        lam[2:] = np.diff(s)
    return lam


def _coef_concave(cone, v):
    lam = np.empty(cone.dim)
    lam[0] = v[-1]
    if cone.dim > 1:
        s = _slopes(cone, v)[::-1]
        lam[1] = s[0]
        lam[2:] = np.diff(s)
    return lam


def _coef_monotone(cone, v):
    lam = np.empty(cone.dim)
    lam[0] = v[0]
    lam[1:] = np.diff(v)
    return lam


def _coef_sshape(cone, v):
    n, J = cone.dim, cone.inflection
    lam = np.empty(n)
    lam[0] = v[0]
    if n > 1:
        s = _slopes(cone, v)
        if J > 0:
            lam[1] = s[0]
            lam[2:J + 1] = np.diff(s[:J])
        if J < n - 1:
            lam[J + 1:n - 1] = -np.diff(s[J:])
            lam[n - 1] = s[-1]
    return lam


_CLOSED_FORMS = {
    "increasing_convex": _coef_convex,
    "convex": _coef_convex,
    "increasing_concave": _coef_concave,
    "monotone": _coef_monotone,
    "sshape": _coef_sshape,
}


# -- constructors ----------------------------------------------------------------

def _design(x) -> np.ndarray:
    x = np.array(x, dtype=float).ravel()
    if x.size == 0:
        raise ValueError("empty design")
    if np.any(np.diff(x) <= 0):
        raise ValueError("design points must be strictly increasing")
    x.setflags(write=False)
    return x


def _structured(label, x, free_count, lo, hi, scale, offset, inflection=None) -> ConeSpec:
    return ConeSpec(
        dim=x.size, free_count=free_count, label=label, x=x,
        lo=np.asarray(lo, dtype=int), hi=np.asarray(hi, dtype=int),
        scale=np.asarray(scale, dtype=float), offset=np.asarray(offset, dtype=float),
        inflection=inflection,
    )


def increasing_convex(x) -> ConeSpec:
    """Constant (free), then ``(x - x_l)^+`` for l = 0..n-2 (nonnegative)."""
    x = _design(x)
    n = x.size
    lo = np.r_[0, np.arange(n - 1)]
    hi = np.full(n, n - 1)
    scale = np.r_[0.0, np.ones(n - 1)]
    offset = np.r_[1.0, np.zeros(n - 1)]
    return _structured("increasing_convex", x, 1, lo, hi, scale, offset)


def convex(x) -> ConeSpec:
    """Constant and ramp (free), hinges at the interior points (nonnegative)."""
    x = _design(x)
    n = x.size
    cone = increasing_convex(x)
    return ConeSpec(dim=n, free_count=min(2, n), label="convex", x=x, lo=cone.lo,
                    hi=cone.hi, scale=cone.scale, offset=cone.offset)


def increasing_concave(x) -> ConeSpec:
    """Mirror image of :func:`increasing_convex` under ``(x, v) -> (-x, -v)``.

    Generator ``l >= 1`` is ``-(x_p - x)^+`` with ``p = n - l``.
    """
    x = _design(x)
    n = x.size
    p = n - np.arange(1, n)
    lo = np.zeros(n, dtype=int)
    hi = np.r_[0, p]
    scale = np.r_[0.0, np.ones(n - 1)]
    offset = np.r_[1.0, -(x[p] - x[0])]
    return _structured("increasing_concave", x, 1, lo, hi, scale, offset)


def monotone(x) -> ConeSpec:
    """Constant (free) and the step vectors ``1{i >= l}`` for l = 1..n-1."""
    x = _design(x)
    n = x.size
    lo = np.r_[0, np.arange(n - 1)]
    hi = np.r_[0, np.arange(1, n)]
    scale = np.r_[0.0, 1.0 / np.diff(x)]
    offset = np.r_[1.0, np.zeros(n - 1)]
    return _structured("monotone", x, 1, lo, hi, scale, offset)


def sshape_at(x, j: int) -> ConeSpec:
    """Increasing sequences that are convex up to ``x[j]`` and concave after.

    Generators are the constant (free) and capped hinges
    ``(min(x, x_j) - x_p)^+`` for ``p < j`` and ``(min(x, x_p) - x_j)^+`` for
    ``p > j``; they form the dual basis of the slope constraints
    ``0 <= s_0 <= ... <= s_{j-1}`` and ``s_j >= ... >= s_{n-2} >= 0``.
    """
    x = _design(x)
    n = x.size
    if not 0 <= j < n:
        raise IndexError(f"inflection index {j} out of range for n={n}")
    left = np.arange(j)
    right = np.arange(j + 1, n)
    lo = np.r_[0, left, np.full(right.size, j)]
    hi = np.r_[0, np.full(left.size, j), right]
    scale = np.r_[0.0, np.ones(n - 1)]
    offset = np.r_[1.0, np.zeros(n - 1)]
    return _structured("sshape", x, 1, lo, hi, scale, offset, inflection=j)


def from_generators(matrix, free_count: int, label: str = "custom") -> ConeSpec:
    """Cone from an explicit ``(n, n)`` generator matrix (columns)."""
    G = np.array(matrix, dtype=float)
    if G.ndim != 2 or G.shape[0] != G.shape[1]:
        raise ValueError("generator matrix must be square")
    if not 0 <= free_count <= G.shape[0]:
        raise ValueError("free_count out of range")
    if np.linalg.cond(G) > _COND_LIMIT:
        raise ValueError("generators are not linearly independent")
    G.setflags(write=False)
    return ConeSpec(dim=G.shape[0], free_count=free_count, label=label, matrix=G)


CONSTRUCTORS = {
    "increasing_convex": increasing_convex,
    "increasing_concave": increasing_concave,
    "convex": convex,
    "monotone": monotone,
}


# -- operations ----------------------------------------------------------------

def primal_coefficients(cone: ConeSpec, v) -> np.ndarray:
    return cone.coefficients(v)


def knot_set(cone: ConeSpec, v, tol: Optional[float] = None) -> tuple:
    """Indices of nonnegative generators carrying a nonzero coefficient."""
    lam = cone.coefficients(v)
    sup, _ = cone._norms
    q = cone.free_count
    mag = np.abs(lam[q:]) * sup[q:]
    if tol is None:
        tol = KNOT_RTOL * (1.0 + (mag.max() if mag.size else 0.0))
    return tuple(int(i) + q for i in np.flatnonzero(mag > tol))


def subspace_basis(cone: ConeSpec, active) -> np.ndarray:
    return np.concatenate([np.arange(cone.free_count), np.asarray(sorted(active), dtype=int)])


def solve_subspace(cone: ConeSpec, active, rhs):
    """Least squares of ``rhs`` (vector or matrix) on the free + active generators.

    Returns ``(idx, coef, fitted)`` with ``fitted = G[:, idx] @ coef``.
    """
    idx = subspace_basis(cone, active)
    rhs = np.asarray(rhs, dtype=float)
    if idx.size == 0:
        return idx, np.zeros((0,) + rhs.shape[1:]), np.zeros_like(rhs)
    M = cone.columns(idx)
    norms = np.sqrt(np.einsum("ij,ij->j", M, M))
    M /= norms
    k = idx.size
    # Householder QR through LAPACK directly: the high-level wrappers cost
    # several times more than the factorisation at these sizes.
    qr, tau, _, info = _geqrf(M, overwrite_a=True)
    b = np.asfortranarray(rhs.reshape(rhs.shape[0], -1))
    qtb, _, info = _ormqr("L", "T", qr, tau, b, max(1, 64 * b.shape[1]))
    coef, info = _trtrs(qr[:k, :k], qtb[:k])
    if info > 0:
        raise np.linalg.LinAlgError("singular subspace basis")
    qtb[k:] = 0.0
    fitted, _, _ = _ormqr("L", "N", qr, tau, qtb, max(1, 64 * b.shape[1]))
    coef = coef / norms[:, None]
    if rhs.ndim == 1:
        return idx, coef[:, 0], fitted[:, 0]
    return idx, coef, fitted


def project_subspace(cone: ConeSpec, active, v) -> np.ndarray:
    """Orthogonal projection of ``v`` onto span of free and ``active`` generators."""
    _, _, fitted = solve_subspace(cone, active, v)
    return fitted


class KKTCertificate(NamedTuple):
    feasible_primal: bool
    feasible_dual: bool
    complementary: bool

    def __bool__(self):
        return bool(self.feasible_primal and self.feasible_dual and self.complementary)


def kkt_check(cone: ConeSpec, y, yhat, tol: Optional[float] = None) -> KKTCertificate:
    """Check that ``yhat`` is the projection of ``y`` onto ``cone``.

    Each condition is tested relative to the size of the generators involved,
    so the check does not depend on how ``x`` is scaled.
    """
    y = np.asarray(y, dtype=float)
    yhat = np.asarray(yhat, dtype=float)
    if y.shape != (cone.dim,) or yhat.shape != (cone.dim,):
        raise ValueError("length mismatch")
    tol = default_tol(y) if tol is None else tol
    q = cone.free_count
    sup, l1 = cone._norms
    lam = cone.coefficients(yhat)
    r = y - yhat
    d = cone.dual(r)
    primal = bool(np.all(lam[q:] * sup[q:] >= -tol))
    dual = bool(np.all(np.abs(d[:q]) <= tol * l1[:q]) and np.all(d[q:] <= tol * l1[q:]))
    comp = bool(abs(float(yhat @ r)) <= tol * (1.0 + float(np.sum(np.abs(yhat)))))
    return KKTCertificate(primal, dual, comp)
