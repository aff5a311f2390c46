"""Projection of a moving target onto a simplicial cone.

Given the projection of ``v(0)`` and its active set, the projection of
``v(t) = (1 - t) v(0) + t v(1)`` is piecewise affine in ``t``; each piece is
an orthogonal projection onto the span of the free generators and one active
set.  The engine walks these pieces from ``t = 0`` to ``t = 1``, swapping one
generator in or out of the active set at every breakpoint (a mixed
primal-dual bases method).
"""
from __future__ import annotations

import logging
from dataclasses import dataclass, field, replace
from typing import Optional

import numpy as np
import scipy.optimize

from .cones import ConeSpec, default_tol, kkt_check, knot_set, solve_subspace

log = logging.getLogger(__name__)

TIE_TOL = 1e-12
ZERO_RTOL = 1e-11
# dual values average over many coordinates, so their noise floor is lower
DUAL_ZERO_RTOL = 1e-14
PERTURB_SCALE = 1e-12
MAX_PERTURB = 3
FEASIBLE_LOOKAHEAD = 1e-9


class HomotopyError(RuntimeError):
    """Raised when the path cannot be followed; carries a diagnostic dump."""

    def __init__(self, message, diagnostics=None):
        super().__init__(message)
        self.diagnostics = diagnostics or {}


@dataclass
class HomotopyState:
    """Everything needed to continue the path from parameter ``t``.

    ``beta`` holds the generator coefficients of the current projection,
    ``gamma`` the inner products of every generator with the residual, and
    ``lam_hat``/``zeta`` their rates of decrease in ``t``.  The target is
    ``v(s) = v_t - (s - t) * u``.
    """

    t: float
    active: tuple
    v_t: np.ndarray
    u: np.ndarray
    beta: np.ndarray
    gamma: np.ndarray
    lam_hat: np.ndarray
    zeta: np.ndarray
    fitted: np.ndarray
    fitted_u: np.ndarray
    step_count: int = 0
    terminal: bool = False
    blockers: tuple = ()
    perturbations: int = 0

    def projection(self, s: Optional[float] = None) -> np.ndarray:
        s = self.t if s is None else s
        return self.fitted - (s - self.t) * self.fitted_u


@dataclass
class PathStats:
    stages: int = 0
    degenerate: int = 0
    perturbations: int = 0
    thresholds: list = field(default_factory=list)
    active_sets: list = field(default_factory=list)

    @property
    def distinct_active_sets(self) -> int:
        return len(set(self.active_sets))


def _scales(cone: ConeSpec, state_u: np.ndarray, v_t: np.ndarray):
    sup, l1 = cone._norms
    size_u = float(np.max(np.abs(state_u))) if state_u.size else 0.0
    size_v = float(np.max(np.abs(v_t))) if v_t.size else 0.0
    return sup, l1, size_u, size_v


def make_state(cone: ConeSpec, active, v_t, u, t: float, **extra) -> HomotopyState:
    """Fresh least-squares solve of the stage with the given active set."""
    active = tuple(sorted(int(a) for a in active))
    idx, coef, fitted = solve_subspace(cone, active, np.column_stack([v_t, u]))
    n = cone.dim
    beta = np.zeros(n)
    lam_hat = np.zeros(n)
    beta[idx] = coef[:, 0]
    lam_hat[idx] = coef[:, 1]
    gamma = cone.dual(v_t - fitted[:, 0])
    zeta = cone.dual(u - fitted[:, 1])
    # complementary generators are orthogonal to the residual by construction
    gamma[idx] = 0.0
    zeta[idx] = 0.0
    return HomotopyState(t=t, active=active, v_t=v_t, u=u, beta=beta, gamma=gamma,
                         lam_hat=lam_hat, zeta=zeta, fitted=fitted[:, 0],
                         fitted_u=fitted[:, 1], **extra)


def _ratios(cone: ConeSpec, state: HomotopyState, window=None):
    """Distance in ``t`` until each primal/dual variable hits zero.

    Returns ``(index, ratio)`` arrays; indices not moving towards
    infeasibility are omitted.  ``window = (lo, hi)`` restricts the search
    to generator indices ``lo < l <= hi``.
    """
    q = cone.free_count
    sup, l1, size_u, size_v = _scales(cone, state.u, state.v_t)
    dir_tol_p = ZERO_RTOL * (1.0 + size_u)
    dir_tol_d = ZERO_RTOL * (1.0 + size_u)
    zero_p = ZERO_RTOL * (1.0 + size_v)
    zero_d = DUAL_ZERO_RTOL * (1.0 + size_v)

    mask_active = np.zeros(cone.dim, dtype=bool)
    mask_active[list(state.active)] = True
    candidates = np.zeros(cone.dim, dtype=bool)
    candidates[q:] = True
    if window is not None:
        lo, hi = window
        ell = np.arange(cone.dim)
        candidates &= (ell > lo) & (ell <= hi)

    lam = state.lam_hat * sup
    beta = state.beta * sup
    prim = candidates & mask_active & (lam > dir_tol_p)
    zeta = state.zeta / np.where(l1 > 0, l1, 1.0)
    gamma = state.gamma / np.where(l1 > 0, l1, 1.0)
    dual = candidates & ~mask_active & (zeta < -dir_tol_d)

    ip = np.flatnonzero(prim)
    rp = np.where(beta[ip] <= zero_p, 0.0, beta[ip]) / lam[ip]
    idl = np.flatnonzero(dual)
    rd = np.where(gamma[idl] >= -zero_d, 0.0, gamma[idl]) / zeta[idl]
    idx = np.concatenate([ip, idl])
    ratio = np.maximum(np.concatenate([rp, rd]), 0.0)
    return idx, ratio


def _feasible(cone: ConeSpec, state: HomotopyState) -> bool:
    """Whether the stage is feasible just after ``state.t``.

    Variables are judged a step ``FEASIBLE_LOOKAHEAD`` ahead, so a
    coefficient that rounding left marginally negative but is moving back
    into range does not veto an otherwise correct active set.
    """
    q = cone.free_count
    sup, l1, _, size_v = _scales(cone, state.u, state.v_t)
    tol = 1e3 * ZERO_RTOL * (1.0 + size_v)
    act = list(state.active)
    inact = np.setdiff1d(np.arange(q, cone.dim), act)
    beta = state.beta[act] - FEASIBLE_LOOKAHEAD * state.lam_hat[act]
    gamma = state.gamma[inact] - FEASIBLE_LOOKAHEAD * state.zeta[inact]
    return bool(np.all(beta * sup[act] >= -tol)
                and np.all(gamma <= tol * np.maximum(l1[inact], 1e-300)))


def _next_threshold(cone, state, window=None):
    idx, ratio = _ratios(cone, state, window)
    if idx.size == 0:
        return np.inf, ()
    step = float(ratio.min())
    blockers = tuple(int(i) for i in idx[ratio <= step + TIE_TOL])
    return step, blockers


def _toggle(active, ell) -> tuple:
    s = set(active)
    s.symmetric_difference_update({ell})
    return tuple(sorted(s))


def _terminal(state: HomotopyState) -> HomotopyState:
    dt = 1.0 - state.t
    return replace(
        state,
        t=1.0,
        v_t=state.v_t - dt * state.u,
        beta=state.beta - dt * state.lam_hat,
        gamma=state.gamma - dt * state.zeta,
        fitted=state.fitted - dt * state.fitted_u,
        terminal=True,
        blockers=(),
    )


def _window(cone, state):
    """Index window of the fast rule: ``l_r <= l <= max A_r``.

    ``l_r`` is the largest active index whose successor is also active.
    Coefficients below ``l_r`` do not move, but ``l_r`` itself can, so it
    stays in the window.
    """
    act = state.active
    if not act:
        return (cone.dim, cone.dim)  # empty window
    s = set(act)
    pairs = [a for a in act if a + 1 in s]
    ell_r = max(pairs) if pairs else 0
    return (ell_r - 1, max(act))


def _move_to(cone, state, new_t):
    v_t = state.v_t - (new_t - state.t) * state.u
    return v_t


def _critical_choice(cone, state, minus, plus):
    """Active set suggested by the first-order behaviour of the projection.

    Just past the breakpoint the projection moves along the projection of
    ``-u`` onto the critical cone, spanned by the free generators and the
    active generators that stay positive, plus nonnegative multiples of the
    blocking generators.  Blockers with a positive multiplier are kept.
    """
    keep = sorted(set(state.active) - minus)
    blocking = sorted(minus | plus)
    free_idx = np.r_[np.arange(cone.free_count), keep].astype(int)
    B = cone.columns(np.asarray(blocking, dtype=int))
    target = -state.u
    if free_idx.size:
        F = cone.columns(free_idx)
        Q, _ = np.linalg.qr(F)
        B = B - Q @ (Q.T @ B)
        target = target - Q @ (Q.T @ target)
    norms = np.linalg.norm(B, axis=0)
    norms[norms == 0] = 1.0
    try:
        mu, _ = scipy.optimize.nnls(B / norms, target)
    except RuntimeError:
        return None
    chosen = {b for b, m in zip(blocking, mu) if m > ZERO_RTOL * (1.0 + mu.max())}
    return tuple(sorted(set(keep) | chosen))


def resolve_degeneracy(cone: ConeSpec, state: HomotopyState, blockers, new_t: float):
    """Pick the next active set when several variables block at once.

    Candidates are tried in a fixed order: swap every blocker, then each
    single blocker in decreasing index.  The first candidate that is feasible
    at ``new_t`` and lets ``t`` strictly increase is returned as a fresh
    stage; ``None`` if none qualifies.
    """
    v_t = _move_to(cone, state, new_t)
    act = set(state.active)
    minus = {b for b in blockers if b in act}
    plus = {b for b in blockers if b not in act}
    candidates = [tuple(sorted((act - minus) | plus))]
    crit = _critical_choice(cone, state, minus, plus)
    if crit is not None:
        candidates.append(crit)
    candidates += [_toggle(state.active, b) for b in sorted(blockers, reverse=True)]
    seen = set()
    for cand in candidates:
        if cand in seen:
            continue
        seen.add(cand)
        probe = make_state(cone, cand, v_t, state.u, new_t)
        if not _feasible(cone, probe):
            continue
        step, _ = _next_threshold(cone, probe)
        if step > TIE_TOL:
            return probe
    return None


def _perturbed(cone, state: HomotopyState, attempt: int) -> HomotopyState:
    """Restart the stage at ``state.t`` with a slightly moved endpoint."""
    target = state.v_t - (1.0 - state.t) * state.u
    rng = np.random.default_rng(attempt)
    w = rng.standard_normal(cone.dim)
    w /= np.linalg.norm(w)
    size = np.linalg.norm(state.u) * (1.0 - state.t)
    target = target + PERTURB_SCALE * max(size, 1e-300) * w
    u = (state.v_t - target) / (1.0 - state.t)
    fresh = make_state(cone, state.active, state.v_t, u, state.t)
    fresh.step_count = state.step_count
    fresh.perturbations = state.perturbations + 1
    return fresh


def advance(cone: ConeSpec, state: HomotopyState, fast: bool = False) -> HomotopyState:
    """Follow the current stage to its end and set up the next one.

    With ``fast=True`` the breakpoint search is restricted to the window
    ``l_r <= l <= max A_r`` and ties are broken by toggling the largest
    blocking index; this is valid when ``u`` is a positive multiple of the
    last coordinate vector on an increasing-convex cone.
    """
    if state.terminal:
        return state
    window = _window(cone, state) if fast else None
    step, blockers = _next_threshold(cone, state, window)
    if not blockers or state.t + step >= 1.0:
        out = _terminal(state)
        out.step_count = state.step_count + 1
        return out
    new_t = state.t + step
    if fast or len(blockers) == 1:
        ell = max(blockers)
        nxt = make_state(cone, _toggle(state.active, ell), _move_to(cone, state, new_t),
                         state.u, new_t)
    else:
        nxt = resolve_degeneracy(cone, state, blockers, new_t)
        attempt = 0
        while nxt is None:
            attempt += 1
            if state.perturbations + attempt > MAX_PERTURB:
                raise HomotopyError(
                    "degeneracy could not be resolved",
                    {"t": new_t, "active": state.active, "blockers": blockers},
                )
            log.debug("perturbing endpoint at t=%g (attempt %d)", state.t, attempt)
            pert = _perturbed(cone, state, state.perturbations + attempt)
            step, blockers = _next_threshold(cone, pert)
            if not blockers or pert.t + step >= 1.0:
                nxt = _terminal(pert)
                break
            new_t = pert.t + step
            state = pert
            if len(blockers) == 1:
                nxt = make_state(cone, _toggle(pert.active, blockers[0]),
                                 _move_to(cone, pert, new_t), pert.u, new_t)
            else:
                nxt = resolve_degeneracy(cone, pert, blockers, new_t)
        nxt.perturbations = max(nxt.perturbations, state.perturbations)
    nxt.step_count = state.step_count + 1
    nxt.blockers = blockers
    return nxt


def advance_fast(cone: ConeSpec, state: HomotopyState) -> HomotopyState:
    return advance(cone, state, fast=True)


def project_segment(cone: ConeSpec, v0, proj0, v1, active0=None, fast: bool = False,
                    verify: bool = True, max_stages: Optional[int] = None):
    """Projection of ``v1`` given the projection ``proj0`` of ``v0``.

    Returns ``(projection, active_set, stats)``.  ``active0`` defaults to the
    knot set of ``proj0``.  The walk is aborted after ``4 n^2`` stages.
    """
    v0 = np.asarray(v0, dtype=float)
    v1 = np.asarray(v1, dtype=float)
    proj0 = np.asarray(proj0, dtype=float)
    n = cone.dim
    if verify and not kkt_check(cone, v0, proj0):
        raise ValueError("proj0 is not the projection of v0")
    if active0 is None:
        active0 = knot_set(cone, proj0)
    max_stages = 4 * n * n if max_stages is None else max_stages

    if np.array_equal(v0, v1):
        return proj0.copy(), tuple(sorted(active0)), PathStats(active_sets=[tuple(sorted(active0))],
                                                              thresholds=[0.0])
    state = make_state(cone, active0, v0, v0 - v1, 0.0)
    stats = PathStats(active_sets=[state.active], thresholds=[0.0])
    while not state.terminal:
        if state.step_count >= max_stages:
            raise HomotopyError(
                f"no convergence after {max_stages} stages",
                {"t": state.t, "active": state.active, "label": cone.label, "n": n},
            )
        state = advance(cone, state, fast=fast)
        if len(state.blockers) > 1:
            stats.degenerate += 1
        if not state.terminal:
            stats.active_sets.append(state.active)
            stats.thresholds.append(state.t)
    stats.stages = state.step_count
    stats.perturbations = state.perturbations
    yhat = state.fitted
    if verify:
        target = state.v_t
        tol = 1e2 * default_tol(target)
        if not kkt_check(cone, target, yhat, tol):
            raise HomotopyError("final projection fails the KKT check",
                                {"label": cone.label, "n": n, "active": state.active})
    return yhat, state.active, stats


def project_cone(cone: ConeSpec, y, verify: bool = True, fast: bool = False):
    """Cold-start projection of ``y``.

    The path starts at ``p0 + kappa * r`` where ``p0`` is the projection of
    ``y`` onto the span of the free generators and ``r`` points into the
    interior of the polar cone.  Its projection is ``p0`` with an empty
    active set, and every dual variable starts strictly negative, so the
    first breakpoint is not degenerate.
    """
    y = np.asarray(y, dtype=float)
    _, _, p0 = solve_subspace(cone, (), y)
    r = cone.polar_direction
    size = np.linalg.norm(y - p0)
    rn = np.linalg.norm(r)
    v0 = p0 + (size / rn) * r if size > 0 and rn > 0 else p0
    return project_segment(cone, v0, p0, y, active0=(), fast=fast, verify=verify)
