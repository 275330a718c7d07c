"""Two-level Galerkin reduced models on the generative spaces.

The offline stage projects the affine FOM operators onto ``Phi`` (level 1)
and ``Psi`` (level 2) and stores their Gram blocks. The online stage only
touches these small dense arrays: the level-1 solve gives the RB output and
the level-2 solve gives the error estimates

    output:   |s_2 - s_1|
    solution: sqrt(a^T B_1 a + b^T B_2 b - 2 a^T B_12 b)
"""

import time
from dataclasses import dataclass, field, replace

import numpy as np
import scipy.linalg as la
from scipy.linalg import lapack

from .activation import get_activation
from .errors import BasesUnavailableError, InvalidInputError, OnlineSingularityError
from .genspace import build_generative_spaces
from .params import ParamBox, ParamSample
from .space import Basis, SnapshotSet

__all__ = [
    "ReducedModel",
    "OnlineResult",
    "ErrorEstimates",
    "theta_from_names",
    "assemble_reduced",
    "offline_build",
    "online_solve",
    "estimate_errors",
    "reconstruct_field",
]

FORMAT_VERSION = 1
COND_LIMIT = 1e14
DENOM_FLOOR = 1e-14


def theta_from_names(names, mu):
    """Evaluate coefficient descriptors: ``"1"`` or ``"mu<k>"`` (1-based)."""
    mu = np.atleast_1d(np.asarray(mu, dtype=float))
    out = np.empty(len(names))
    for q, name in enumerate(names):
        if name == "1":
            out[q] = 1.0
        elif name.startswith("mu") and name[2:].isdigit():
            out[q] = mu[int(name[2:]) - 1]
        else:
            raise InvalidInputError(f"unknown coefficient descriptor {name!r}")
    return out


@dataclass
class ReducedModel:
    A1: np.ndarray  # (Q, M1, M1)
    l1: np.ndarray
    lo1: np.ndarray
    A2: np.ndarray  # (Q, M2, M2)
    l2: np.ndarray
    lo2: np.ndarray
    B1: np.ndarray
    B2: np.ndarray
    B12: np.ndarray
    theta_names: tuple
    box: ParamBox
    meta: dict = field(default_factory=dict)
    sample: np.ndarray = None
    phi: np.ndarray = field(default=None, repr=False)
    psi: np.ndarray = field(default=None, repr=False)

    @property
    def Q(self):
        return self.A1.shape[0]

    @property
    def M1(self):
        return self.A1.shape[1]

    @property
    def M2(self):
        return self.A2.shape[1]

    @property
    def has_bases(self):
        return self.phi is not None and self.psi is not None

    def theta(self, mu):
        return theta_from_names(self.theta_names, mu)

    def without_bases(self):
        return replace(self, phi=None, psi=None)


@dataclass
class OnlineResult:
    level: int
    coeffs: np.ndarray
    output: float
    seconds: float


@dataclass
class ErrorEstimates:
    output_est: float
    solution_est: float
    output_rel: float
    solution_rel: float
    s1: float
    s2: float
    u2_norm: float
    alpha: np.ndarray = field(repr=False)
    beta: np.ndarray = field(repr=False)


def _congruence(ops, V, W=None):
    W = V if W is None else W
    return np.stack([W.T @ np.asarray(op @ V) for op in ops])


def assemble_reduced(fom, phi, psi, meta=None, sample=None, store_bases=True):
    """Project the FOM onto two given bases (X-orthonormal or not)."""
    Vp = phi.vectors if isinstance(phi, Basis) else np.asarray(phi)
    Vs = psi.vectors if isinstance(psi, Basis) else np.asarray(psi)
    ops = fom.affine.ops
    XVp = fom.space.apply(Vp)
    XVs = fom.space.apply(Vs)
    B1 = Vp.T @ XVp
    B2 = Vs.T @ XVs
    return ReducedModel(
        A1=_congruence(ops, Vp),
        l1=Vp.T @ fom.affine.load,
        lo1=Vp.T @ fom.affine.output,
        A2=_congruence(ops, Vs),
        l2=Vs.T @ fom.affine.load,
        lo2=Vs.T @ fom.affine.output,
        B1=0.5 * (B1 + B1.T),
        B2=0.5 * (B2 + B2.T),
        B12=Vp.T @ XVs,
        theta_names=tuple(fom.affine.theta_names),
        box=fom.box,
        meta=dict(meta or {}, fom=fom.label),
        sample=None if sample is None else np.asarray(sample, dtype=float),
        phi=Vp.copy() if store_bases else None,
        psi=Vs.copy() if store_bases else None,
    )


def offline_build(fom, sample, act, L, M1, M2, store_bases=True, snapshots=None):
    """FOM solves, generative spaces, reduced operators and Gram blocks.

    ``snapshots`` may pass precomputed FOM solutions (columns, in sample
    order) to skip the solves.
    """
    act = get_activation(act)
    if not isinstance(sample, ParamSample):
        sample = ParamSample(sample, fom.box)
    if M1 is not None and M2 is not None and M1 > M2:
        raise InvalidInputError("need M1 <= M2")
    if snapshots is None:
        snapshots = np.column_stack([fom.solve(mu) for mu in sample])
    S = SnapshotSet(snapshots, [f"solution {n}" for n in range(len(sample))])
    spaces = build_generative_spaces(S, sample, act, L, M1, M2, fom.space)
    meta = {
        "activation": act.kind,
        "N": len(sample),
        "L": spaces.neighbors.L,
        "M1_requested": M1,
        "M2_requested": M2,
        "capped": bool(spaces.capped),
        "n_g": spaces.n_g,
        "n_h": spaces.n_h,
    }
    return assemble_reduced(fom, spaces.phi, spaces.psi, meta, sample.points, store_bases)


def _dense_solve(A, b, mu):
    lu, piv = la.lu_factor(A, check_finite=False)
    anorm = np.linalg.norm(A, 1)
    rcond, info = lapack.dgecon(lu, anorm, norm="1")
    if info != 0 or rcond * COND_LIMIT < 1.0 or not np.all(np.isfinite(lu)):
        raise OnlineSingularityError(
            f"reduced system singular to working precision at mu={np.ravel(mu).tolist()}",
            mu,
        )
    return la.lu_solve((lu, piv), b, check_finite=False)


def online_solve(rm, mu, level=1):
    """Solve the level-1 or level-2 reduced system at ``mu``."""
    t0 = time.perf_counter()
    mu = rm.box.check(mu)
    th = rm.theta(mu)
    if level == 1:
        A, l, lo = rm.A1, rm.l1, rm.lo1
    elif level == 2:
        A, l, lo = rm.A2, rm.l2, rm.lo2
    else:
        raise InvalidInputError("level must be 1 or 2")
    K = np.tensordot(th, A, axes=1)
    c = _dense_solve(K, l, mu)
    return OnlineResult(level, c, float(lo @ c), time.perf_counter() - t0)


def estimate_errors(rm, mu, r1=None):
    """Two-level output and solution error estimates at ``mu``."""
    r1 = online_solve(rm, mu, 1) if r1 is None else r1
    r2 = online_solve(rm, mu, 2)
    a, b = r1.coeffs, r2.coeffs
    sq = a @ rm.B1 @ a + b @ rm.B2 @ b - 2.0 * (a @ rm.B12 @ b)
    eu = float(np.sqrt(max(sq, 0.0)))
    es = abs(r2.output - r1.output)
    u2 = float(np.sqrt(max(b @ rm.B2 @ b, 0.0)))
    return ErrorEstimates(
        output_est=es,
        solution_est=eu,
        output_rel=es / max(abs(r2.output), DENOM_FLOOR),
        solution_rel=eu / max(u2, DENOM_FLOOR),
        s1=r1.output,
        s2=r2.output,
        u2_norm=u2,
        alpha=a,
        beta=b,
    )


def reconstruct_field(rm, result):
    coeffs = result.coeffs if isinstance(result, OnlineResult) else np.asarray(result)
    level = result.level if isinstance(result, OnlineResult) else 1
    V = rm.phi if level == 1 else rm.psi
    if V is None:
        raise BasesUnavailableError("reduced model was stored without bases")
    if coeffs.shape != (V.shape[1],):
        raise InvalidInputError("coefficient length does not match basis size")
    return V @ coeffs
