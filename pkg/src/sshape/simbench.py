"""Simulation harness: test signals, designs, noise, loss metrics and timing.

Every replication draws its noise from its own counter-based stream keyed
by ``(seed, n, rep)``, so results do not depend on execution order or on
the signal being studied (different signals see identical noise).
"""
from __future__ import annotations

import logging
import math
import os
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field
from typing import Callable, Optional, Sequence

import numpy as np
from scipy.special import betaincinv

from .core import RegressionData
from .solver import SolveMethod, fit_sshape

log = logging.getLogger(__name__)

THREADS_ENV = "SSHAPE_THREADS"


# -- signals ------------------------------------------------------------------

@dataclass(frozen=True)
class SignalSpec:
    """Regression function with its inflection point ``m0``.

    ``alpha`` is the local exponent of the curvature at ``m0`` where one
    exists (``None`` otherwise).
    """

    name: str
    func: Callable[[np.ndarray], np.ndarray]
    m0: float
    alpha: Optional[float] = None

    def __call__(self, x):
        return eval_signal(self, x)


def _f1(x):
    # radicands factored to avoid cancellation near x = 0.3
    left = 2.0 * (0.3 - np.sqrt(np.clip((0.3 - x) * (0.3 + x), 0.0, None)))
    right = 2.0 * (0.3 + np.sqrt(np.clip((x - 0.3) * (1.7 - x), 0.0, None)))
    return np.where(x < 0.3, left, right)


def _f2(x):
    return np.where(x >= 0.3, np.sin((x - 0.3) * np.pi / 1.4), 0.0)


def _f3(x):
    return x + (x >= 0.3)


def _f4(x):
    return 4.0 / (1.0 + np.exp(-2.0 * (x - 0.3)))


def _sine(x):
    return np.sin(np.pi * (x - 0.5))


F1 = SignalSpec("f1", _f1, 0.3, alpha=0.5)
F2 = SignalSpec("f2", _f2, 0.3)
F3 = SignalSpec("f3", _f3, 0.3)
F4 = SignalSpec("f4", _f4, 0.3, alpha=3.0)
SINE = SignalSpec("sine", _sine, 0.5)
SIGNALS = {s.name: s for s in (F1, F2, F3, F4, SINE)}


def custom_signal(func: Callable, m0: float, alpha: Optional[float] = None,
                  name: str = "custom") -> SignalSpec:
    return SignalSpec(name, func, float(m0), alpha)


def eval_signal(spec: SignalSpec, x):
    """Evaluate the signal at scalar or array ``x``."""
    out = spec.func(np.asarray(x, dtype=float)) * 1.0
    return float(out) if np.ndim(out) == 0 else out


# -- designs ------------------------------------------------------------------

@dataclass(frozen=True)
class DesignSpec:
    """Design rule: ``uniform`` (``i/(n+1)``), ``beta48`` (Beta(4, 8)
    quantiles at ``i/(n+1)``), ``equispaced`` (``i/n``) or ``custom``."""

    kind: str = "uniform"
    points: Optional[tuple] = None

    def __post_init__(self):
        if self.kind not in DESIGNS:
            raise ValueError(f"unknown design {self.kind!r}; choose one of {', '.join(DESIGNS)}")
        if self.kind == "custom" and self.points is None:
            raise ValueError("a custom design needs its points")


DESIGNS = ("uniform", "beta48", "equispaced", "custom")
UNIFORM = DesignSpec("uniform")
BETA48 = DesignSpec("beta48")
EQUISPACED = DesignSpec("equispaced")


def beta_quantile(p, a: float, b: float):
    """Quantile function of the Beta(a, b) distribution."""
    return betaincinv(a, b, p)


def make_design(spec: DesignSpec, n: int) -> np.ndarray:
    """Strictly increasing design points for sample size ``n``."""
    if n < 1:
        raise ValueError("n must be at least 1")
    i = np.arange(1, n + 1)
    if spec.kind == "uniform":
        return i / (n + 1)
    if spec.kind == "beta48":
        return beta_quantile(i / (n + 1), 4.0, 8.0)
    if spec.kind == "equispaced":
        return i / n
    pts = np.asarray(spec.points, dtype=float)
    if pts.size != n:
        raise ValueError(f"custom design has {pts.size} points, not {n}")
    return pts


# -- noise --------------------------------------------------------------------

@dataclass(frozen=True)
class NoiseSpec:
    """Gaussian noise ``sigma * N(0, 1)`` with a 64-bit master seed."""

    sigma: float = 0.1
    seed: int = 0

    def __post_init__(self):
        if not self.sigma >= 0:
            raise ValueError("sigma must be nonnegative")

    def stream(self, n: int, rep: int) -> np.random.Generator:
        """Independent generator for replication ``rep`` at sample size ``n``."""
        ss = np.random.SeedSequence(self.seed, spawn_key=(int(n), int(rep)))
        return np.random.Generator(np.random.Philox(ss))

    def draw(self, n: int, rep: int) -> np.ndarray:
        return self.sigma * self.stream(n, rep).standard_normal(n)


def simulate_data(signal: SignalSpec, design: DesignSpec, noise: NoiseSpec, n: int,
                  rep: int = 0) -> RegressionData:
    x = make_design(design, n)
    return RegressionData(x, eval_signal(signal, x) + noise.draw(n, rep))


# -- replications and studies -------------------------------------------------

@dataclass(frozen=True)
class ReplicationRecord:
    n: int
    rep: int
    l2n_loss: float
    inflection_abs_err: float
    inflection: float
    rss: float
    wall_time: float
    error: Optional[str] = None


def l2n_distance(a, b) -> float:
    """Empirical L2 distance ``sqrt(mean((a - b)^2))`` over the design."""
    d = np.asarray(a, dtype=float) - np.asarray(b, dtype=float)
    return float(np.sqrt(np.mean(d * d)))


def run_replication(signal: SignalSpec, design: DesignSpec, noise: NoiseSpec, n: int,
                    method="seq", rep: int = 0) -> ReplicationRecord:
    """Fit one simulated data set; solver failures are recorded, not raised."""
    data = simulate_data(signal, design, noise, n, rep)
    truth = eval_signal(signal, data.x)
    start = time.perf_counter()
    try:
        fit = fit_sshape(data, method)
    except Exception as exc:  # recorded for the study summary
        log.warning("replication n=%d rep=%d failed: %s", n, rep, exc)
        return ReplicationRecord(n, rep, math.nan, math.nan, math.nan, math.nan,
                                 time.perf_counter() - start, error=f"{type(exc).__name__}: {exc}")
    elapsed = time.perf_counter() - start
    return ReplicationRecord(
        n=n,
        rep=rep,
        l2n_loss=l2n_distance(fit.theta, truth),
        inflection_abs_err=abs(fit.inflection - signal.m0),
        inflection=fit.inflection,
        rss=fit.rss,
        wall_time=elapsed,
    )


@dataclass
class StudyResult:
    """Per-replication records of a study plus the settings that produced them."""

    signal: str
    design: str
    sigma: float
    seed: int
    method: str
    records: list = field(default_factory=list)

    @property
    def ns(self) -> list:
        return sorted({r.n for r in self.records})

    def column(self, name: str, n: int) -> np.ndarray:
        return np.array([getattr(r, name) for r in self.records if r.n == n and r.error is None])

    def summary(self) -> list:
        """One row of aggregates per sample size."""
        rows = []
        for n in self.ns:
            loss = self.column("l2n_loss", n)
            err = self.column("inflection_abs_err", n)
            secs = self.column("wall_time", n)
            failures = sum(1 for r in self.records if r.n == n and r.error is not None)
            rows.append({
                "n": n,
                "reps": loss.size,
                "failures": failures,
                "mean_l2n_loss": _stat(np.mean, loss),
                "median_l2n_loss": _stat(np.median, loss),
                "sd_l2n_loss": _stat(lambda a: np.std(a, ddof=1), loss, 2),
                "mean_inflection_err": _stat(np.mean, err),
                "median_inflection_err": _stat(np.median, err),
                "sd_inflection_err": _stat(lambda a: np.std(a, ddof=1), err, 2),
                "mean_time": _stat(np.mean, secs),
            })
        return rows

    def slopes(self) -> dict:
        """Log-log slopes of the aggregate losses against ``n``."""
        rows = self.summary()
        ns = [r["n"] for r in rows]
        out = {}
        for key in ("mean_l2n_loss", "median_l2n_loss", "mean_inflection_err",
                    "median_inflection_err"):
            vals = [r[key] for r in rows]
            try:
                out[key] = rate_fit(ns, vals)
            except ValueError:
                out[key] = math.nan
        return out


def _stat(fn, a, minimum=1):
    return float(fn(a)) if a.size >= minimum else math.nan


def worker_count(requested: Optional[int] = None) -> int:
    """Worker threads to use: the request (or CPU count), capped by ``SSHAPE_THREADS``."""
    n = requested or os.cpu_count() or 1
    cap = os.environ.get(THREADS_ENV)
    if cap:
        try:
            n = min(n, max(1, int(cap)))
        except ValueError:
            log.warning("ignoring non-integer %s=%r", THREADS_ENV, cap)
    return max(1, n)


def study(signal: SignalSpec, design: DesignSpec, noise: NoiseSpec, ns: Sequence[int],
          reps: int, method="seq", workers: Optional[int] = None) -> StudyResult:
    """Run ``reps`` replications at every ``n``.

    Records are stored in ``(n, rep)`` order whatever the completion order.
    """
    method = SolveMethod(method)
    jobs = [(int(n), rep) for n in ns for rep in range(reps)]

    def one(job):
        return run_replication(signal, design, noise, job[0], method, job[1])

    nworkers = worker_count(workers)
    if nworkers == 1:
        records = [one(j) for j in jobs]
    else:
        with ThreadPoolExecutor(max_workers=nworkers) as pool:
            records = list(pool.map(one, jobs))
    return StudyResult(signal.name, design.kind, noise.sigma, noise.seed, method.value, records)


def rate_fit(ns: Sequence[float], losses: Sequence[float]) -> float:
    """Least squares slope of ``log(loss)`` on ``log(n)``.

    Examples
    --------
    >>> round(rate_fit([100, 1000], [1.0, 0.1]), 12)
    -1.0
    """
    ns = np.asarray(ns, dtype=float)
    losses = np.asarray(losses, dtype=float)
    if ns.shape != losses.shape or ns.size < 2:
        raise ValueError("need at least two (n, loss) pairs of equal length")
    if np.any(ns <= 0) or np.any(~(losses > 0)):
        raise ValueError("sample sizes and losses must be positive")
    slope, _ = np.polyfit(np.log(ns), np.log(losses), 1)
    return float(slope)


# -- timing -------------------------------------------------------------------

@dataclass(frozen=True)
class TimingRow:
    n: int
    sigma: float
    method: str
    median_time: float
    times: tuple
    rss: float

    def as_dict(self) -> dict:
        return asdict(self)


def timing_study(ns: Sequence[int], sigmas: Sequence[float],
                 methods: Sequence = tuple(SolveMethod), reps: int = 3, seed: int = 0,
                 signal: SignalSpec = SINE, design: DesignSpec = UNIFORM,
                 warmup_n: int = 50) -> list:
    """Median wall-clock time of each method on shared data sets.

    All methods see the same data in each cell.  One untimed fit per method
    at ``n = warmup_n`` runs first so that import and cache effects do not
    land in the first measurement.
    """
    methods = [SolveMethod(m) for m in methods]
    warm = simulate_data(signal, design, NoiseSpec(0.1, seed), warmup_n, 0)
    for m in methods:
        fit_sshape(warm, m)
    rows = []
    for sigma in sigmas:
        noise = NoiseSpec(sigma, seed)
        for n in ns:
            sets = [simulate_data(signal, design, noise, n, rep) for rep in range(reps)]
            for m in methods:
                times, rss = [], math.nan
                for data in sets:
                    start = time.perf_counter()
                    fit = fit_sshape(data, m)
                    times.append(time.perf_counter() - start)
                    rss = fit.rss
                rows.append(TimingRow(int(n), float(sigma), m.value, float(np.median(times)),
                                      tuple(times), float(rss)))
    return rows
