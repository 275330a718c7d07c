"""Parameter boxes, points and samples."""

from dataclasses import dataclass

import numpy as np

from .errors import InvalidInputError, OutOfDomainError

__all__ = ["ParamBox", "ParamSample"]


@dataclass(frozen=True)
class ParamBox:
    lo: tuple
    hi: tuple

    def __post_init__(self):
        lo = tuple(float(v) for v in np.atleast_1d(self.lo))
        hi = tuple(float(v) for v in np.atleast_1d(self.hi))
        if len(lo) != len(hi) or not lo:
            raise InvalidInputError("box bounds must have equal, nonzero length")
        if any(a > b for a, b in zip(lo, hi)):
            raise InvalidInputError("box lower bound exceeds upper bound")
        object.__setattr__(self, "lo", lo)
        object.__setattr__(self, "hi", hi)

    @property
    def P(self):
        return len(self.lo)

    def contains(self, mu, tol=1e-12):
        mu = np.atleast_1d(np.asarray(mu, dtype=float))
        if mu.shape != (self.P,) or not np.all(np.isfinite(mu)):
            return False
        lo, hi = np.array(self.lo), np.array(self.hi)
        span = np.maximum(hi - lo, 1.0)
        return bool(np.all(mu >= lo - tol * span) and np.all(mu <= hi + tol * span))

    def check(self, mu):
        mu = np.atleast_1d(np.asarray(mu, dtype=float))
        if not self.contains(mu):
            raise OutOfDomainError(f"parameter {mu.tolist()} outside box {self}")
        return mu

    def on_boundary(self, mu, tol=1e-12):
        mu = np.atleast_1d(np.asarray(mu, dtype=float))
        lo, hi = np.array(self.lo), np.array(self.hi)
        span = np.maximum(hi - lo, 1.0)
        return bool(
            np.any(np.abs(mu - lo) <= tol * span) or np.any(np.abs(mu - hi) <= tol * span)
        )

    def corners(self):
        """All ``2**P`` corners in lexicographic order (lo before hi)."""
        grids = np.meshgrid(*[(a, b) for a, b in zip(self.lo, self.hi)], indexing="ij")
        return np.column_stack([g.ravel() for g in grids])

    def to_dict(self):
        return {"lo": list(self.lo), "hi": list(self.hi)}


class ParamSample:
    """An ordered list of distinct parameter points inside a box.

    ``points`` is an ``(N, P)`` array.
    """

    def __init__(self, points, box):
        pts = np.asarray(points, dtype=float)
        if pts.ndim == 1:
            pts = pts[:, None] if box.P == 1 else pts[None, :]
        if pts.ndim != 2 or pts.shape[1] != box.P:
            raise InvalidInputError(f"points must have shape (N, {box.P})")
        for mu in pts:
            box.check(mu)
        if len(pts) > 1:
            d = np.linalg.norm(pts[:, None, :] - pts[None, :, :], axis=-1)
            np.fill_diagonal(d, np.inf)
            if np.any(d == 0.0):
                raise InvalidInputError("sample points must be pairwise distinct")
        self.points = pts
        self.box = box

    def __len__(self):
        return self.points.shape[0]

    def __getitem__(self, n):
        return self.points[n]

    def __iter__(self):
        return iter(self.points)

    def __repr__(self):
        return f"ParamSample(N={len(self)}, P={self.box.P})"

    def append(self, mu):
        return ParamSample(np.vstack([self.points, np.atleast_2d(mu)]), self.box)
