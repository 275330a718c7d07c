"""Closed-form parametrized test manifolds with L2 quadrature spaces."""

from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from ..errors import InvalidInputError
from ..params import ParamBox
from ..space import DiscreteSpace, Field

__all__ = [
    "chebyshev_extended",
    "ManifoldProblem",
    "grid_1d",
    "grid_2d",
    "grid_3d_ball",
    "analytic_manifold_1d",
    "analytic_manifold_2d",
    "analytic_manifold_3d",
    "manifold_1d",
    "manifold_2d",
    "manifold_3d",
]

BOX_1D = ParamBox((0.0,), (10.0,))
BOX_2D = ParamBox((1.0, 1.0), (50.0, 50.0))
BOX_3D = ParamBox((1.0,), (20.0,))


def chebyshev_extended(n, lo, hi):
    """Chebyshev nodes stretched so the extreme nodes hit ``lo`` and ``hi``."""
    if n < 1:
        raise InvalidInputError("need at least one point")
    if not lo < hi:
        raise InvalidInputError("need lo < hi")
    mid, half = 0.5 * (lo + hi), 0.5 * (hi - lo)
    if n == 1:
        return np.array([mid])
    k = np.arange(1, n + 1)
    x = mid + half * np.cos((2 * k - 1) * np.pi / (2 * n)) / np.cos(np.pi / (2 * n))
    x = np.sort(x)
    # pin the endpoints against roundoff
    x[0], x[-1] = lo, hi
    return x


def _trapezoid(n, a, b):
    x = np.linspace(a, b, n)
    w = np.full(n, (b - a) / (n - 1))
    w[0] = w[-1] = 0.5 * w[0]
    return x, w


class Grid:
    """Quadrature points ``x`` (shape ``(n, d)``) and weights defining L2."""

    def __init__(self, x, w, label):
        self.x = np.asarray(x, dtype=float)
        if self.x.ndim == 1:
            self.x = self.x[:, None]
        self.space = DiscreteSpace(np.asarray(w, dtype=float), label)

    @property
    def dim(self):
        return self.space.dim


def grid_1d(n=2001):
    x, w = _trapezoid(n, 0.0, 2.0)
    return Grid(x, w, f"L2[0,2] trapezoid n={n}")


def grid_2d(n=101):
    x, w = _trapezoid(n, 0.0, 1.0)
    X1, X2 = np.meshgrid(x, x, indexing="ij")
    W = np.outer(w, w)
    return Grid(np.column_stack([X1.ravel(), X2.ravel()]), W.ravel(), f"L2[0,1]^2 n={n}")


def grid_3d_ball(n=41):
    """Points of an ``n**3`` tensor grid on [-1, 1]^3 with ``r <= 1``."""
    t = np.linspace(-1.0, 1.0, n)
    h = t[1] - t[0]
    X = np.stack(np.meshgrid(t, t, t, indexing="ij"), axis=-1).reshape(-1, 3)
    r = np.linalg.norm(X, axis=1)
    X = X[r <= 1.0 + 1e-12]
    return Grid(X, np.full(len(X), h**3), f"L2 unit ball n={n}")


def _grid_x(grid):
    return grid.x if isinstance(grid, Grid) else np.atleast_2d(np.asarray(grid, float).T).T


def _wrap(grid, values):
    if isinstance(grid, Grid):
        return Field(values, grid.space)
    return values


def analytic_manifold_1d(mu, grid):
    """Shock profile; the huge exponential is evaluated in log space."""
    mu = float(BOX_1D.check(mu)[0])
    x = _grid_x(grid)[:, 0]
    t = 0.5 * np.log(mu + 1.0) - 31.25 + 125.0 * x**2 / (mu + 1.0)
    # x / ((mu+1)(1 + e^t)) = x/(mu+1) * expit(-t)
    u = x / (mu + 1.0) * np.exp(-np.logaddexp(0.0, t))
    return _wrap(grid, u)


def analytic_manifold_2d(mu, grid):
    mu = BOX_2D.check(mu)
    x = _grid_x(grid)
    u = x[:, 0] * x[:, 1] * np.tanh((1 - x[:, 0]) * mu[0]) * np.tanh((1 - x[:, 1]) * mu[1])
    return _wrap(grid, u)


def _sinc(z):
    out = np.empty_like(z)
    small = np.abs(z) < 1e-4
    out[small] = 1.0 - z[small] ** 2 / 6.0
    zs = z[~small]
    out[~small] = np.sin(zs) / zs
    return out


def analytic_manifold_3d(mu, grid):
    """Parametrized spherical Bessel profile on the unit ball."""
    mu = float(BOX_3D.check(mu)[0])
    x = _grid_x(grid)
    r = np.linalg.norm(x, axis=1)
    envelope = np.exp(1.0 - 1.0 / np.sqrt((1.0 - r**3) ** 2 + 1e-6))
    return _wrap(grid, _sinc(mu * np.pi * r) * envelope)


@dataclass
class ManifoldProblem:
    """An analytic manifold: a grid, a parameter box and a pointwise formula."""

    name: str
    grid: Grid
    box: ParamBox
    func: Callable = field(repr=False)

    @property
    def space(self):
        return self.grid.space

    def solve(self, mu):
        return self.func(mu, self.grid).coeffs

    def snapshots(self, points):
        return np.column_stack([self.solve(mu) for mu in points])


def manifold_1d(n=2001):
    return ManifoldProblem("manifold-1d", grid_1d(n), BOX_1D, analytic_manifold_1d)


def manifold_2d(n=101):
    return ManifoldProblem("manifold-2d", grid_2d(n), BOX_2D, analytic_manifold_2d)


def manifold_3d(n=41):
    return ManifoldProblem("manifold-3d", grid_3d_ball(n), BOX_3D, analytic_manifold_3d)
