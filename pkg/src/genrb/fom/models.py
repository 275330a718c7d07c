"""Affine finite-element full-order models and their solvers."""

import logging
from dataclasses import dataclass, field
from typing import Callable

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from ..errors import DimensionError, SolverError
from ..params import ParamBox
from ..space import DiscreteSpace
from .fem import Patch, assemble, build_mesh

__all__ = [
    "AffineForm",
    "FullOrderModel",
    "build_convdiff_fom",
    "build_reacdiff_fom",
    "fom_solve",
    "fom_output",
]

log = logging.getLogger(__name__)


@dataclass
class AffineForm:
    """``a(w, v; mu) = sum_q theta_q(mu) a_q(w, v)`` with fixed load and output.

    ``ops`` are sparse matrices with rows indexing test functions.
    """

    theta: Callable = field(repr=False)
    theta_names: tuple
    ops: list = field(repr=False)
    load: np.ndarray = field(repr=False)
    output: np.ndarray = field(repr=False)

    @property
    def Q(self):
        return len(self.ops)

    def theta_values(self, mu):
        return np.asarray(self.theta(np.asarray(mu, dtype=float)), dtype=float)

    def matrix(self, mu):
        th = self.theta_values(mu)
        A = th[0] * self.ops[0]
        for t, op in zip(th[1:], self.ops[1:]):
            A = A + t * op
        return A.tocsc()


@dataclass
class FullOrderModel:
    label: str
    space: DiscreteSpace
    affine: AffineForm
    box: ParamBox
    coords: np.ndarray = field(default=None, repr=False)  # coordinates of free DOFs
    mesh: object = field(default=None, repr=False)
    n_nodes: int = 0
    symmetric: bool = False

    @property
    def dim(self):
        return self.space.dim

    @property
    def Q(self):
        return self.affine.Q

    def solve(self, mu):
        return fom_solve(self, mu)

    def output(self, u):
        return fom_output(self, u)

    def scaled(self, load_factor):
        """Copy with the load multiplied by ``load_factor``."""
        af = self.affine
        new = AffineForm(af.theta, af.theta_names, af.ops, load_factor * af.load, af.output)
        return FullOrderModel(
            self.label, self.space, new, self.box, self.coords, self.mesh,
            self.n_nodes, self.symmetric,
        )


def fom_solve(fom, mu):
    """Sparse direct solve of ``A(mu) u = l``; checks the residual bound."""
    mu = fom.box.check(mu)
    A = fom.affine.matrix(mu)
    l = fom.affine.load
    lnorm = np.linalg.norm(l)
    if lnorm == 0.0:
        return np.zeros(fom.dim)
    try:
        u = spla.splu(A).solve(l)
    except RuntimeError as exc:
        raise SolverError(f"singular system at mu={mu.tolist()}", mu) from exc
    if not np.all(np.isfinite(u)):
        raise SolverError(f"non-finite solution at mu={mu.tolist()}", mu)
    res = np.linalg.norm(A @ u - l)
    if res > 1e-10 * lnorm:
        # one step of iterative refinement before giving up
        u = u + spla.splu(A).solve(l - A @ u)
        res = np.linalg.norm(A @ u - l)
        if res > 1e-10 * lnorm:
            raise SolverError(
                f"residual {res:.3e} above tolerance at mu={mu.tolist()}", mu
            )
    return u


def fom_output(fom, u):
    u = np.asarray(u, dtype=float)
    if u.shape != (fom.dim,):
        raise DimensionError(f"expected a field of length {fom.dim}")
    return float(fom.affine.output @ u)


def _restrict(A, free):
    return A[free][:, free].tocsr()


def _h1_space(mesh, free, label):
    X = assemble(mesh, "stiffness") + assemble(mesh, "mass")
    X = _restrict(X, free)
    X = 0.5 * (X + X.T)
    return DiscreteSpace(X.tocsr(), label)


def _convdiff_theta(mu):
    return np.array([1.0, mu[0], mu[1]])


def build_convdiff_fom(nx=32, ny=None, degree=3):
    """Convection-diffusion on the unit square with homogeneous Dirichlet data.

    ``a = int grad w . grad v - mu_1 int w dv/dx - mu_2 int w dv/dy``,
    ``l(v) = 100 int v``, output ``int v``, box ``[0, 50]^2``.
    """
    ny = nx if ny is None else ny
    mesh = build_mesh([Patch(0.0, 1.0, 0.0, 1.0, nx, ny)], degree)
    dirichlet = mesh.boundary_nodes("boundary")
    free = np.setdiff1d(np.arange(mesh.n_nodes), dirichlet)
    ops = [
        _restrict(assemble(mesh, "stiffness"), free),
        _restrict(assemble(mesh, "convection", direction=0), free),
        _restrict(assemble(mesh, "convection", direction=1), free),
    ]
    ones = assemble(mesh, "load")[free]
    affine = AffineForm(_convdiff_theta, ("1", "mu1", "mu2"), ops, 100.0 * ones, ones)
    label = f"convdiff nx={nx} ny={ny} p={degree}"
    return FullOrderModel(
        label,
        _h1_space(mesh, free, label),
        affine,
        ParamBox((0.0, 0.0), (50.0, 50.0)),
        mesh.nodes[free],
        mesh,
        mesh.n_nodes,
        False,
    )


def _tshape_tagger(mid, normal, subdomain):
    x, y = mid
    if abs(y) < 1e-12:
        return "gamma1"
    if abs(y - 2.0) < 1e-12:
        return "gamma2"
    return "gamma3" if subdomain == "omega1" else "gamma4"


def tshape_patches(multiplier=3, base=5):
    """Stem ``[1,2]x[0,1]`` (omega1) under bar ``[0,3]x[1,2]`` (omega2)."""
    n = base * multiplier
    return [
        Patch(1.0, 2.0, 0.0, 1.0, n, n, "omega1"),
        Patch(0.0, 3.0, 1.0, 2.0, 3 * n, n, "omega2"),
    ]


def _reacdiff_theta(mu):
    return np.array([mu[0], mu[1], mu[2], mu[3], 1.0])


def build_reacdiff_fom(multiplier=3, degree=3):
    """Reaction-diffusion on a T-shaped domain with Robin sides.

    ``a = mu_1 (grad, grad)_omega1 + mu_2 (grad, grad)_omega2
    + mu_3 (w, v)_gamma3 + mu_4 (w, v)_gamma4 + (w, v)_omega``,
    ``l(v) = int_gamma2 v``, output ``int_omega v``, ``v = 0`` on gamma1.
    """
    mesh = build_mesh(tshape_patches(multiplier), degree, _tshape_tagger)
    dirichlet = mesh.boundary_nodes("gamma1")
    free = np.setdiff1d(np.arange(mesh.n_nodes), dirichlet)
    ops = [
        _restrict(assemble(mesh, "stiffness", subdomain="omega1"), free),
        _restrict(assemble(mesh, "stiffness", subdomain="omega2"), free),
        _restrict(assemble(mesh, "boundary_mass", boundary="gamma3"), free),
        _restrict(assemble(mesh, "boundary_mass", boundary="gamma4"), free),
        _restrict(assemble(mesh, "mass"), free),
    ]
    load = assemble(mesh, "boundary_load", boundary="gamma2")[free]
    output = assemble(mesh, "load")[free]
    affine = AffineForm(
        _reacdiff_theta, ("mu1", "mu2", "mu3", "mu4", "1"), ops, load, output
    )
    label = f"reacdiff multiplier={multiplier} p={degree}"
    return FullOrderModel(
        label,
        _h1_space(mesh, free, label),
        affine,
        ParamBox((1.0, 1.0, 0.0, 0.0), (10.0, 10.0, 10.0, 10.0)),
        mesh.nodes[free],
        mesh,
        mesh.n_nodes,
        True,
    )
