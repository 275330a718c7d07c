"""Greedy parameter sampling driven by the two-level output error estimate."""

import csv
import io
import logging
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .errors import GreedyError, InvalidInputError, SolverError
from .params import ParamBox, ParamSample
from .rom import estimate_errors, offline_build

__all__ = [
    "GreedyConfig",
    "GreedyRecord",
    "GreedyTrace",
    "make_training_grid",
    "default_initial_sample",
    "greedy_sample",
    "sweep_estimates",
]

log = logging.getLogger(__name__)


def make_training_grid(box, dims):
    """Tensor grid with endpoints, lexicographic (first coordinate slowest)."""
    dims = list(np.atleast_1d(dims))
    if len(dims) != box.P:
        raise InvalidInputError(f"need {box.P} grid sizes, got {len(dims)}")
    axes = []
    for lo, hi, n in zip(box.lo, box.hi, dims):
        n = int(n)
        if n < 1:
            raise InvalidInputError("grid sizes must be positive")
        axes.append(np.array([0.5 * (lo + hi)]) if n == 1 else np.linspace(lo, hi, n))
    mesh = np.meshgrid(*axes, indexing="ij")
    return np.column_stack([m.ravel() for m in mesh])


def default_initial_sample(box):
    """Endpoints for one parameter, four corner-like points otherwise."""
    lo, hi = np.array(box.lo), np.array(box.hi)
    P = box.P
    if P == 1:
        return np.array([lo, hi])
    if P == 2:
        return np.array([lo, hi, [hi[0], lo[1]], [lo[0], hi[1]]])
    third = lo.copy()
    third[[0, P - 1]] = hi[[0, P - 1]]
    fourth = lo + hi - third
    return np.array([lo, hi, third, fourth])


@dataclass
class GreedyConfig:
    """Settings for one greedy run.

    ``m1``/``m2`` are ``(k, c)`` pairs giving ``M = k*N + c``; the neighbor
    count is ``min(L_max, N)``.
    """

    training: np.ndarray
    initial: np.ndarray = None
    tol: float = 1e-5
    m1: tuple = (3, 0)
    m2: tuple = (4, 0)
    L_max: int = 5
    max_iter: int = 100
    criterion: str = "relative"
    activation: str = "exp"
    store_bases: bool = True
    threads: int = 1

    def __post_init__(self):
        if not self.tol > 0:
            raise InvalidInputError("tolerance must be positive")
        if self.criterion not in ("relative", "absolute"):
            raise InvalidInputError(f"unknown criterion {self.criterion!r}")
        for N in (1, 10, 100):
            if self.M1(N) > self.M2(N):
                raise InvalidInputError("schedules must give M1 <= M2")
            if self.M1(N) < 1:
                raise InvalidInputError("schedules must give positive dimensions")

    def M1(self, N):
        return int(self.m1[0] * N + self.m1[1])

    def M2(self, N):
        return int(self.m2[0] * N + self.m2[1])

    def L(self, N):
        return min(self.L_max, N)


@dataclass
class GreedyRecord:
    N: int
    mu: np.ndarray
    max_estimate: float
    offline_seconds: float
    sweep_seconds: float
    added: bool
    flagged: int = 0


@dataclass
class GreedyTrace:
    initial: np.ndarray
    records: list = field(default_factory=list)

    def to_csv(self, out=None):
        """CSV with columns N, mu_1..mu_P, max_rel_estimate, offline_s, sweep_s, added."""
        buf = out if out is not None else io.StringIO()
        P = self.initial.shape[1]
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(
            ["N"] + [f"mu_{p + 1}" for p in range(P)]
            + ["max_rel_estimate", "offline_seconds", "sweep_seconds", "added"]
        )
        for n, mu in enumerate(self.initial):
            w.writerow([n + 1] + [_f(v) for v in mu] + ["", "", "", 1])
        for r in self.records:
            w.writerow(
                [r.N + 1] + [_f(v) for v in r.mu]
                + [_f(r.max_estimate), _f(r.offline_seconds), _f(r.sweep_seconds), int(r.added)]
            )
        return buf.getvalue() if out is None else None


def _f(x):
    return format(float(x), ".17g")


def _criterion_value(est, criterion):
    v = est.output_rel if criterion == "relative" else est.output_est
    return v if np.isfinite(v) else np.inf


def sweep_estimates(rm, points, criterion="relative", threads=1):
    """Criterion values at every point; failures and non-finite values give +inf."""

    def one(mu):
        try:
            return _criterion_value(estimate_errors(rm, mu), criterion)
        except SolverError:
            return np.inf

    if threads > 1 and len(points) > 1:
        with ThreadPoolExecutor(threads) as pool:
            vals = list(pool.map(one, points))
    else:
        vals = [one(mu) for mu in points]
    return np.asarray(vals, dtype=float)


def _member(points, mu):
    if len(points) == 0:
        return False
    return bool(np.any(np.all(np.abs(points - mu) <= 1e-12 * (1 + np.abs(mu)), axis=1)))


def greedy_sample(fom, cfg):
    """Run the greedy loop; returns ``(sample, reduced_model, trace)``."""
    box = fom.box
    initial = default_initial_sample(box) if cfg.initial is None else np.atleast_2d(cfg.initial)
    if initial.shape[1] != box.P and box.P == 1:
        initial = initial.reshape(-1, 1)
    sample = ParamSample(initial, box)
    training = np.asarray(cfg.training, dtype=float)
    if training.ndim == 1:
        training = training[:, None]
    if len(training) == 0:
        raise InvalidInputError("empty training set")
    for mu in training:
        box.check(mu)

    trace = GreedyTrace(sample.points.copy())
    snaps = []
    try:
        snaps = [fom.solve(mu) for mu in sample]
    except SolverError as exc:
        raise GreedyError(f"FOM solve failed: {exc}", trace) from exc

    rm = None
    for it in range(cfg.max_iter + 1):
        N = len(sample)
        t0 = time.perf_counter()
        try:
            rm = offline_build(
                fom, sample, cfg.activation, cfg.L(N), cfg.M1(N), cfg.M2(N),
                store_bases=cfg.store_bases, snapshots=np.column_stack(snaps),
            )
        except Exception as exc:
            raise GreedyError(f"offline stage failed at N={N}: {exc}", trace) from exc
        t1 = time.perf_counter()
        cand = np.array(
            [not _member(sample.points, mu) for mu in training], dtype=bool
        )
        pool_idx = np.flatnonzero(cand)
        if len(pool_idx) == 0:
            trace.records.append(
                GreedyRecord(N, np.full(box.P, np.nan), 0.0, t1 - t0, 0.0, False)
            )
            break
        vals = sweep_estimates(rm, training[pool_idx], cfg.criterion, cfg.threads)
        t2 = time.perf_counter()
        flagged = int(np.count_nonzero(~np.isfinite(vals)))
        if flagged:
            log.warning("%d training points gave non-finite estimates at N=%d", flagged, N)
        k = int(np.argmax(vals))
        best, mu_next = float(vals[k]), training[pool_idx[k]]
        stop = best <= cfg.tol or it == cfg.max_iter
        trace.records.append(
            GreedyRecord(N, mu_next.copy(), best, t1 - t0, t2 - t1, not stop, flagged)
        )
        log.info("N=%d max estimate %.3e at %s", N, best, mu_next.tolist())
        if stop:
            break
        try:
            snaps.append(fom.solve(mu_next))
        except SolverError as exc:
            raise GreedyError(f"FOM solve failed: {exc}", trace) from exc
        sample = sample.append(mu_next)
    return sample, rm, trace
