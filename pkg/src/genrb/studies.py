"""Experiment pipelines behind the command-line interface.

Every study returns a :class:`StudyResult` of long-form rows that carry the
hash of the configuration that produced them.
"""

import csv
import hashlib
import io
import json
import logging
import math
import os
import tempfile
import time
from dataclasses import asdict, dataclass, field, fields

import numpy as np

from .activation import ACTIVATION_NAMES
from .errors import InvalidInputError, SolverError
from .fom import (
    build_convdiff_fom,
    build_reacdiff_fom,
    chebyshev_extended,
    manifold_1d,
    manifold_2d,
    manifold_3d,
)
from .fom.analytic import ManifoldProblem
from .genspace import build_generative_spaces
from .greedy import GreedyConfig, greedy_sample, make_training_grid
from .params import ParamSample
from .rom import assemble_reduced, estimate_errors, offline_build, online_solve
from .space import SnapshotSet, error_metric, pod

__all__ = [
    "ExperimentConfig",
    "StudyResult",
    "make_problem",
    "run_approx_study",
    "run_greedy",
    "run_rom_eval",
    "write_atomic",
]

log = logging.getLogger(__name__)

PROBLEMS = ("manifold-1d", "manifold-2d", "manifold-3d", "convdiff", "reacdiff")
ROW_FIELDS = (
    "config_hash", "study", "problem", "activation", "N", "L", "M1", "M2",
    "space", "metric", "value", "seconds",
)

# defaults per problem: manifold sample size K (or grid), test grid, L_max
_DEFAULTS = {
    "manifold-1d": {"K": [200], "L_max": 8, "grid": 2001, "m1": [3, 0], "m2": [5, 0]},
    "manifold-2d": {"K": [40, 40], "L_max": 5, "grid": 101, "m1": [3, 0], "m2": [5, 0]},
    "manifold-3d": {"K": [100], "L_max": 5, "grid": 41, "m1": [3, 0], "m2": [5, 0]},
    "convdiff": {"test_dims": [30, 30], "training_dims": [40, 40], "L_max": 5,
                 "m1": [3, 0], "m2": [4, 0]},
    "reacdiff": {"test_dims": [6, 6, 6, 6], "training_dims": [8, 8, 8, 8], "L_max": 5,
                 "m1": [2, 0], "m2": [4, 0]},
}


@dataclass
class ExperimentConfig:
    """One JSON-serializable experiment description.

    Schedules ``m1``/``m2`` are ``[k, c]`` pairs meaning ``M = k*N + c``;
    unset fields take per-problem defaults.
    ``K`` is the uniform manifold sample size per parameter dimension.
    ``mesh`` holds problem overrides (``nx``, ``degree``, ``multiplier``,
    ``grid``).
    """

    problem: str
    activations: list = field(default_factory=lambda: ["exp"])
    N_list: list = field(default_factory=lambda: [4, 8])
    L_max: int = None
    m1: list = None
    m2: list = None
    K: list = None
    test_dims: list = None
    training_dims: list = None
    initial: list = None
    tol: float = 1e-5
    max_iter: int = 100
    criterion: str = "relative"
    error_modes: list = field(default_factory=lambda: ["absolute", "relative"])
    baseline: bool = True
    out: str = "out"
    seed: int = 0
    threads: int = 1
    store_bases: bool = True
    mesh: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.problem not in PROBLEMS:
            raise InvalidInputError(f"unknown problem {self.problem!r}; choose from {PROBLEMS}")
        if isinstance(self.activations, str):
            self.activations = [self.activations]
        for a in self.activations:
            if a not in ACTIVATION_NAMES:
                raise InvalidInputError(f"unknown activation {a!r}")
        d = _DEFAULTS[self.problem]
        if self.L_max is None:
            self.L_max = d["L_max"]
        if self.m1 is None:
            self.m1 = list(d["m1"])
        if self.m2 is None:
            self.m2 = list(d["m2"])
        if self.K is None and "K" in d:
            self.K = list(d["K"])
        if self.test_dims is None and "test_dims" in d:
            self.test_dims = list(d["test_dims"])
        if self.training_dims is None and "training_dims" in d:
            self.training_dims = list(d["training_dims"])
        for mode in self.error_modes:
            if mode not in ("absolute", "relative"):
                raise InvalidInputError(f"unknown error mode {mode!r}")
        if len(self.m1) != 2 or len(self.m2) != 2:
            raise InvalidInputError("schedules are [k, c] pairs")
        for N in self.N_list:
            if N < 1:
                raise InvalidInputError("N values must be positive")
            if self.M1(N) > self.M2(N):
                raise InvalidInputError("schedules must give M1 <= M2")
        if self.tol is not None and not self.tol > 0:
            raise InvalidInputError("tolerance must be positive")

    @classmethod
    def from_dict(cls, d):
        known = {f.name for f in fields(cls)}
        unknown = set(d) - known
        if unknown:
            raise InvalidInputError(f"unknown config keys {sorted(unknown)}")
        d = dict(d)
        if d.get("tol") in ("inf", "Infinity"):
            d["tol"] = math.inf
        return cls(**d)

    @classmethod
    def from_json(cls, path):
        with open(path) as fh:
            return cls.from_dict(json.load(fh))

    def to_dict(self):
        d = asdict(self)
        if d["tol"] is not None and math.isinf(d["tol"]):
            d["tol"] = "inf"
        return d

    def config_hash(self):
        d = self.to_dict()
        # output location and threading do not change results
        for k in ("out", "threads"):
            d.pop(k)
        blob = json.dumps(d, sort_keys=True, separators=(",", ":")).encode()
        return hashlib.sha256(blob).hexdigest()[:16]

    def M1(self, N):
        return int(self.m1[0] * N + self.m1[1])

    def M2(self, N):
        return int(self.m2[0] * N + self.m2[1])

    def L(self, N):
        return min(self.L_max, N)


def _f(x):
    if isinstance(x, (float, np.floating)):
        return format(float(x), ".17g")
    return x


@dataclass
class StudyResult:
    config_hash: str
    rows: list = field(default_factory=list)

    def add(self, **kw):
        row = {k: kw.get(k, "") for k in ROW_FIELDS}
        row["config_hash"] = self.config_hash
        self.rows.append(row)

    def to_csv(self):
        buf = io.StringIO()
        w = csv.DictWriter(buf, fieldnames=ROW_FIELDS, lineterminator="\n")
        w.writeheader()
        for r in self.rows:
            w.writerow({k: _f(v) for k, v in r.items()})
        return buf.getvalue()

    def select(self, **kw):
        return [r for r in self.rows if all(r.get(k) == v for k, v in kw.items())]

    def value(self, **kw):
        hits = self.select(**kw)
        if len(hits) != 1:
            raise KeyError(f"{len(hits)} rows match {kw}")
        return hits[0]["value"]


def write_atomic(path, text):
    path = os.fspath(path)
    d = os.path.dirname(os.path.abspath(path))
    os.makedirs(d, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=d, prefix=".tmp-")
    try:
        with os.fdopen(fd, "w", newline="") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def make_problem(cfg):
    m = cfg.mesh or {}
    if cfg.problem == "manifold-1d":
        return manifold_1d(m.get("grid", _DEFAULTS["manifold-1d"]["grid"]))
    if cfg.problem == "manifold-2d":
        return manifold_2d(m.get("grid", _DEFAULTS["manifold-2d"]["grid"]))
    if cfg.problem == "manifold-3d":
        return manifold_3d(m.get("grid", _DEFAULTS["manifold-3d"]["grid"]))
    if cfg.problem == "convdiff":
        return build_convdiff_fom(m.get("nx", 32), m.get("ny"), m.get("degree", 3))
    return build_reacdiff_fom(m.get("multiplier", 3), m.get("degree", 3))


def chebyshev_sample(box, N):
    """Extended-Chebyshev sample; tensor ``sqrt(N) x sqrt(N)`` for two parameters."""
    if box.P == 1:
        return chebyshev_extended(N, box.lo[0], box.hi[0])[:, None]
    if box.P == 2:
        n = math.isqrt(N)
        if n * n != N:
            raise InvalidInputError(f"two-parameter samples need a square N, got {N}")
        a = chebyshev_extended(n, box.lo[0], box.hi[0])
        b = chebyshev_extended(n, box.lo[1], box.hi[1])
        A, B = np.meshgrid(a, b, indexing="ij")
        return np.column_stack([A.ravel(), B.ravel()])
    raise InvalidInputError("Chebyshev samples are defined for one or two parameters")


def run_approx_study(cfg):
    """Error metrics of the standard and generative spaces on a uniform manifold sample."""
    prob = make_problem(cfg)
    if not isinstance(prob, ManifoldProblem):
        raise InvalidInputError("approximation studies need an analytic manifold problem")
    res = StudyResult(cfg.config_hash())
    space = prob.space
    grid = make_training_grid(prob.box, cfg.K)
    MK = SnapshotSet(prob.snapshots(grid))
    for N in cfg.N_list:
        pts = chebyshev_sample(prob.box, N)
        S = SnapshotSet(prob.snapshots(pts))
        t0 = time.perf_counter()
        W = pod(space, S)
        tw = time.perf_counter() - t0
        base = dict(study="approx", problem=cfg.problem, N=N, L=cfg.L(N))
        for mode in cfg.error_modes:
            res.add(**base, activation="none", M1=W.dim, M2=W.dim, space="W",
                    metric=f"error_metric_{mode}", value=error_metric(space, W, MK, mode),
                    seconds=tw)
        for act in cfg.activations:
            t0 = time.perf_counter()
            gs = build_generative_spaces(S, pts, act, cfg.L(N), cfg.M1(N), cfg.M2(N), space)
            tg = time.perf_counter() - t0
            for name, B in (("Phi", gs.phi), ("Psi", gs.psi)):
                for mode in cfg.error_modes:
                    res.add(**base, activation=act, M1=gs.phi.dim, M2=gs.psi.dim,
                            space=name, metric=f"error_metric_{mode}",
                            value=error_metric(space, B, MK, mode), seconds=tg)
    return res


def greedy_config(cfg, fom):
    training = make_training_grid(fom.box, cfg.training_dims)
    return GreedyConfig(
        training=training,
        initial=None if cfg.initial is None else np.asarray(cfg.initial, dtype=float),
        tol=cfg.tol,
        m1=tuple(cfg.m1),
        m2=tuple(cfg.m2),
        L_max=cfg.L_max,
        max_iter=cfg.max_iter,
        criterion=cfg.criterion,
        activation=cfg.activations[0],
        store_bases=cfg.store_bases,
        threads=cfg.threads,
    )


def run_greedy(cfg, fom=None):
    """Greedy sampling; returns ``(sample, model, trace)``."""
    fom = make_problem(cfg) if fom is None else fom
    if isinstance(fom, ManifoldProblem):
        raise InvalidInputError("greedy runs need a finite-element problem")
    return greedy_sample(fom, greedy_config(cfg, fom))


class _Truth:
    """FOM solutions, outputs and X-norms on the test grid, computed once."""

    def __init__(self, fom, points):
        self.points = points
        self.u = np.empty((fom.dim, len(points)))
        self.ok = np.ones(len(points), dtype=bool)
        for k, mu in enumerate(points):
            try:
                self.u[:, k] = fom.solve(mu)
            except SolverError:
                self.ok[k] = False
                self.u[:, k] = np.nan
        self.s = fom.affine.output @ np.nan_to_num(self.u)
        self.norm = fom.space.norms(np.nan_to_num(self.u))


def evaluate_model(rm, fom, truth, with_estimates=True):
    """True and estimated relative errors of ``rm`` over the truth grid."""
    n = len(truth.points)
    eu = np.full(n, np.nan)
    es = np.full(n, np.nan)
    bu = np.full(n, np.nan)
    bs = np.full(n, np.nan)
    for k, mu in enumerate(truth.points):
        if not truth.ok[k]:
            continue
        try:
            r1 = online_solve(rm, mu, 1)
            err = truth.u[:, k] - rm.phi @ r1.coeffs
            eu[k] = fom.space.norm(err) / max(truth.norm[k], 1e-14)
            es[k] = abs(truth.s[k] - r1.output) / max(abs(truth.s[k]), 1e-14)
            if with_estimates:
                est = estimate_errors(rm, mu, r1)
                bu[k] = est.solution_rel
                bs[k] = est.output_rel
        except SolverError as exc:
            log.warning("online failure at %s: %s", mu.tolist(), exc)
    out = {
        "eps_u_max_rel": np.nanmax(eu),
        "eps_s_max_rel": np.nanmax(es),
        "eps_u_mean_rel": np.nanmean(eu),
        "eps_s_mean_rel": np.nanmean(es),
        "failures": float(np.count_nonzero(np.isnan(eu) & truth.ok) + np.count_nonzero(~truth.ok)),
    }
    if with_estimates:
        out.update({
            "est_u_max_rel": np.nanmax(bu),
            "est_s_max_rel": np.nanmax(bs),
            "est_u_mean_rel": np.nanmean(bu),
            "est_s_mean_rel": np.nanmean(bs),
        })
    return out


def standard_rb(fom, snapshots, sample=None):
    """Galerkin model on the orthonormalized snapshots (both levels equal)."""
    W = pod(fom.space, SnapshotSet(snapshots))
    return assemble_reduced(fom, W, W, {"activation": "none", "N": snapshots.shape[1]},
                            sample)


def run_rom_eval(cfg, sample, fom=None, model=None):
    """Test-grid accuracy of generative and standard RB models.

    ``sample`` is the ordered parameter sample (e.g. from a greedy run); the
    models are rebuilt on its leading ``N`` points for every ``N`` in
    ``cfg.N_list`` (values above the sample size are skipped). When ``model``
    is given it is evaluated as is, in addition.
    """
    fom = make_problem(cfg) if fom is None else fom
    sample = np.atleast_2d(np.asarray(sample, dtype=float))
    if sample.shape[1] != fom.box.P:
        sample = sample.reshape(-1, fom.box.P)
    res = StudyResult(cfg.config_hash())
    test = make_training_grid(fom.box, cfg.test_dims)
    t0 = time.perf_counter()
    truth = _Truth(fom, test)
    log.info("truth on %d test points in %.1fs", len(test), time.perf_counter() - t0)
    snaps = np.column_stack([fom.solve(mu) for mu in sample])

    def emit(tag, act, N, L, M1, M2, metrics, secs):
        for name, v in metrics.items():
            res.add(study="rom-eval", problem=cfg.problem, activation=act, N=N, L=L,
                    M1=M1, M2=M2, space=tag, metric=name, value=float(v), seconds=secs)

    if model is not None:
        t0 = time.perf_counter()
        m = evaluate_model(model, fom, truth)
        emit("artifact", model.meta.get("activation", ""), model.meta.get("N", ""),
             model.meta.get("L", ""), model.M1, model.M2, m, time.perf_counter() - t0)
    Ns = [N for N in cfg.N_list if N <= len(sample)]
    for N in Ns:
        pts = ParamSample(sample[:N], fom.box)
        if cfg.baseline:
            t0 = time.perf_counter()
            std = standard_rb(fom, snaps[:, :N], pts.points)
            m = evaluate_model(std, fom, truth, with_estimates=False)
            emit("standard", "none", N, 0, std.M1, std.M1, m, time.perf_counter() - t0)
        for act in cfg.activations:
            t0 = time.perf_counter()
            rm = offline_build(fom, pts, act, cfg.L(N), cfg.M1(N), cfg.M2(N),
                               snapshots=snaps[:, :N])
            m = evaluate_model(rm, fom, truth)
            emit("generative", act, N, rm.meta["L"], rm.M1, rm.M2, m,
                 time.perf_counter() - t0)
    return res
