"""Scalar nonlinearities used by the generative snapshot transforms.

Each activation provides the function value, its first and second
derivatives, its inverse and a clamp that pulls arbitrary values strictly
inside the range so the inverse stays finite. All functions accept scalars
or numpy arrays and operate entrywise.
"""

from dataclasses import dataclass

import numpy as np
from scipy.special import expit

from .errors import InvalidInputError, OutOfRangeError

__all__ = ["Activation", "ACTIVATION_NAMES", "get_activation"]

ACTIVATION_NAMES = ("tanh", "sigmoid", "arctan", "softplus", "exp", "quadratic")


def _check_finite(x):
    x = np.asarray(x, dtype=float)
    if not np.all(np.isfinite(x)):
        raise InvalidInputError("activation input must be finite")
    return x


def _ret(x, out):
    # scalars in, python floats out
    return float(out) if np.ndim(x) == 0 else out


@dataclass(frozen=True)
class Activation:
    """One of the six supported nonlinearities.

    ``range_lo``/``range_hi`` bound the image of the function (endpoints
    excluded, except 0 for ``quadratic``); ``safe_lo``/``safe_hi`` is the box
    snapshot values are scaled into before transformation.
    """

    kind: str
    range_lo: float
    range_hi: float
    safe_lo: float
    safe_hi: float
    eps: float = 1e-8

    def __post_init__(self):
        if self.kind not in ACTIVATION_NAMES:
            raise InvalidInputError(f"unknown activation {self.kind!r}")
        if not self.range_lo < self.range_hi:
            raise InvalidInputError("range_lo must be below range_hi")
        if not self.eps > 0:
            raise InvalidInputError("clamp margin must be positive")

    @property
    def name(self):
        return self.kind

    def eval(self, x):
        x = _check_finite(x)
        k = self.kind
        if k == "tanh":
            y = np.tanh(x)
        elif k == "sigmoid":
            y = expit(x)
        elif k == "arctan":
            y = np.arctan(x)
        elif k == "softplus":
            y = np.logaddexp(0.0, x)
        elif k == "exp":
            y = np.exp(x)
        else:
            y = x * x
        return _ret(x, y)

    def deriv1(self, x):
        x = _check_finite(x)
        k = self.kind
        if k == "tanh":
            s = np.tanh(x)
            d = 1.0 - s * s
        elif k == "sigmoid":
            s = expit(x)
            d = s * (1.0 - s)
        elif k == "arctan":
            d = 1.0 / (1.0 + x * x)
        elif k == "softplus":
            d = expit(x)
        elif k == "exp":
            d = np.exp(x)
        else:
            d = 2.0 * x
        return _ret(x, d)

    def deriv2(self, x):
        x = _check_finite(x)
        k = self.kind
        if k == "tanh":
            s = np.tanh(x)
            d = 2.0 * s * (s * s - 1.0)
        elif k == "sigmoid":
            s = expit(x)
            d = s * (1.0 - s) * (1.0 - 2.0 * s)
        elif k == "arctan":
            d = -2.0 * x / (1.0 + x * x) ** 2
        elif k == "softplus":
            s = expit(x)
            d = s * (1.0 - s)
        elif k == "exp":
            d = np.exp(x)
        else:
            d = np.full_like(x, 2.0)
        return _ret(x, d)

    def _in_range(self, y):
        if self.kind == "quadratic":
            return y >= 0.0
        return (y > self.range_lo) & (y < self.range_hi)

    def inverse(self, y):
        """Inverse function; raises :class:`OutOfRangeError` outside the range."""
        y = _check_finite(y)
        ok = self._in_range(y)
        if not np.all(ok):
            bad = y[~ok] if y.ndim else y
            first = float(np.ravel(bad)[0])
            raise OutOfRangeError(
                f"{first!r} is outside the range of {self.kind}", first
            )
        k = self.kind
        if k == "tanh":
            x = np.arctanh(y)
        elif k == "sigmoid":
            x = np.log(y) - np.log1p(-y)
        elif k == "arctan":
            x = np.tan(y)
        elif k == "softplus":
            # log(e^y - 1) without overflow for large y
            x = y + np.log(-np.expm1(-y))
        elif k == "exp":
            x = np.log(y)
        else:
            x = np.sqrt(y)
        return _ret(y, x)

    def clamp_to_range(self, y):
        """Clip into ``[lo + eps*w, hi - eps*w]``; ``w`` is the range width
        when finite and ``max(1, |y|)`` otherwise."""
        y = _check_finite(y)
        lo, hi = self.range_lo, self.range_hi
        if np.isfinite(lo) and np.isfinite(hi):
            w = hi - lo
        else:
            w = np.maximum(1.0, np.abs(y))
        out = y
        if np.isfinite(lo):
            out = np.maximum(out, lo + self.eps * w)
        if np.isfinite(hi):
            out = np.minimum(out, hi - self.eps * w)
        return _ret(y, np.asarray(out, dtype=float))


_TABLE = {
    "tanh": (-1.0, 1.0, -0.4, 0.4),
    "sigmoid": (0.0, 1.0, -0.4, 0.4),
    "arctan": (-np.pi / 2, np.pi / 2, -0.4, 0.4),
    "softplus": (0.0, np.inf, 0.1, 0.9),
    "exp": (0.0, np.inf, 0.1, 0.9),
    "quadratic": (0.0, np.inf, 0.1, 0.9),
}


def get_activation(name, eps=1e-8):
    """Look up an activation by its lower-case name."""
    if isinstance(name, Activation):
        return name
    try:
        lo, hi, slo, shi = _TABLE[name]
    except KeyError:
        raise InvalidInputError(
            f"unknown activation {name!r}; expected one of {ACTIVATION_NAMES}"
        ) from None
    return Activation(name, lo, hi, slo, shi, eps)
