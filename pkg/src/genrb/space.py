"""Discrete function spaces, POD compression and projection errors.

Snapshots are stored column-wise: a :class:`SnapshotSet` of ``K`` fields in
a space of dimension ``n`` holds an ``(n, K)`` array. The inner product is
``(u, v)_X = u^T X v`` where ``X`` is either a sparse SPD matrix or a vector
of positive quadrature weights (diagonal ``X``).
"""

from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from .errors import DimensionError, EmptyBasisError, InvalidInputError

__all__ = [
    "DiscreteSpace",
    "Field",
    "SnapshotSet",
    "Basis",
    "inner",
    "gram",
    "pod",
    "project",
    "error_metric",
    "dual_norm",
]

RANK_TOL = 1e-14
NORM_FLOOR = 1e-14


class DiscreteSpace:
    """A finite-dimensional space with an SPD inner-product operator.

    Parameters
    ----------
    inner_op : (n,) array_like or (n, n) sparse matrix
        Positive weights (diagonal inner product) or an SPD matrix.
    label : str
    """

    def __init__(self, inner_op, label=""):
        if sp.issparse(inner_op):
            op = sp.csr_matrix(inner_op, dtype=float)
            if op.shape[0] != op.shape[1]:
                raise DimensionError("inner-product operator must be square")
            asym = abs(op - op.T).max() if op.nnz else 0.0
            scale = abs(op).max() if op.nnz else 1.0
            if asym > 1e-12 * scale:
                raise InvalidInputError("inner-product operator is not symmetric")
            self._diag = None
            self._op = op
            self.dim = op.shape[0]
        else:
            w = np.asarray(inner_op, dtype=float)
            if w.ndim != 1:
                raise DimensionError("weights must be one-dimensional")
            if not np.all(w > 0):
                raise InvalidInputError("quadrature weights must be positive")
            self._diag = w
            self._op = None
            self.dim = w.size
        if self.dim < 1:
            raise DimensionError("space dimension must be positive")
        self.label = label

    def __repr__(self):
        kind = "diagonal" if self._diag is not None else "sparse"
        return f"DiscreteSpace(dim={self.dim}, {kind}, label={self.label!r})"

    @property
    def is_diagonal(self):
        return self._diag is not None

    @property
    def weights(self):
        return self._diag

    def matrix(self):
        """The inner-product operator as a sparse matrix."""
        if self._diag is not None:
            return sp.diags(self._diag).tocsr()
        return self._op

    def apply(self, arr):
        """Return ``X @ arr`` for a vector or a column block."""
        arr = np.asarray(arr, dtype=float)
        if arr.shape[0] != self.dim:
            raise DimensionError(
                f"expected leading dimension {self.dim}, got {arr.shape[0]}"
            )
        if self._diag is not None:
            return self._diag * arr if arr.ndim == 1 else self._diag[:, None] * arr
        return np.asarray(self._op @ arr)

    def inner(self, u, v):
        u, v = _coeffs(self, u), _coeffs(self, v)
        return float(u @ self.apply(v))

    def norm(self, u):
        return float(np.sqrt(max(0.0, self.inner(u, u))))

    def norms(self, U):
        """Column-wise X-norms of an ``(n, K)`` block."""
        U = np.asarray(U, dtype=float)
        sq = np.einsum("ij,ij->j", U, self.apply(U))
        return np.sqrt(np.maximum(sq, 0.0))


@dataclass(frozen=True)
class Field:
    coeffs: np.ndarray
    space: DiscreteSpace

    def __post_init__(self):
        c = np.asarray(self.coeffs, dtype=float)
        if c.ndim != 1 or c.size != self.space.dim:
            raise DimensionError("field length does not match space dimension")
        if not np.all(np.isfinite(c)):
            raise InvalidInputError("field entries must be finite")
        object.__setattr__(self, "coeffs", c)


def _coeffs(space, u):
    if isinstance(u, Field):
        if u.space is not space and u.space.dim != space.dim:
            raise DimensionError("field belongs to a different space")
        return u.coeffs
    u = np.asarray(u, dtype=float)
    if u.shape != (space.dim,):
        raise DimensionError(f"expected a vector of length {space.dim}")
    return u


@dataclass
class SnapshotSet:
    """Ordered snapshots (columns of ``data``) with one provenance tag each."""

    data: np.ndarray
    tags: list = field(default_factory=list)

    def __post_init__(self):
        d = np.asarray(self.data, dtype=float)
        if d.ndim == 1:
            d = d[:, None]
        if d.ndim != 2:
            raise DimensionError("snapshot data must be a 2-D column block")
        self.data = d
        if not self.tags:
            self.tags = [f"snapshot {k}" for k in range(d.shape[1])]
        if len(self.tags) != d.shape[1]:
            raise InvalidInputError("one provenance tag per snapshot required")

    @classmethod
    def from_fields(cls, fields, tags=None):
        fields = list(fields)
        if not fields:
            raise InvalidInputError("empty snapshot list")
        data = np.column_stack([_as_vec(f) for f in fields])
        return cls(data, list(tags) if tags else [])

    def __len__(self):
        return self.data.shape[1]

    def __getitem__(self, k):
        return self.data[:, k]

    @property
    def dim(self):
        return self.data.shape[0]

    def union(self, other):
        if other.dim != self.dim:
            raise DimensionError("snapshot sets live in different spaces")
        return SnapshotSet(
            np.hstack([self.data, other.data]), list(self.tags) + list(other.tags)
        )


def _as_vec(f):
    return f.coeffs if isinstance(f, Field) else np.asarray(f, dtype=float)


@dataclass
class Basis:
    """X-orthonormal basis stored as the columns of ``vectors``.

    ``eigenvalues`` are the POD eigenvalues of the kept modes, ``n_source``
    the number of snapshots the basis was compressed from and ``capped`` is
    set when fewer modes than requested were available.
    """

    vectors: np.ndarray
    eigenvalues: np.ndarray
    n_source: int = 0
    requested: int = 0
    capped: bool = False

    def __len__(self):
        return self.vectors.shape[1]

    @property
    def dim(self):
        return self.vectors.shape[1]

    def truncate(self, M):
        """Leading ``M`` modes; nested with the full basis by construction."""
        M = min(M, self.dim)
        return Basis(
            self.vectors[:, :M].copy(),
            self.eigenvalues[:M].copy(),
            self.n_source,
            M,
            False,
        )


def _check_set(space, S):
    if not isinstance(S, SnapshotSet):
        S = SnapshotSet(np.asarray(S, dtype=float))
    if S.dim != space.dim:
        raise DimensionError(
            f"snapshots have dimension {S.dim}, space has {space.dim}"
        )
    return S


def inner(space, u, v):
    return space.inner(u, v)


def gram(space, S):
    """Gram matrix ``C[k, k'] = (u_k, u_k')_X``."""
    S = _check_set(space, S)
    if len(S) == 0:
        raise InvalidInputError("empty snapshot set")
    C = S.data.T @ space.apply(S.data)
    return 0.5 * (C + C.T)


def _reorthonormalize(space, V, prefix=None, block=32):
    """Gram-Schmidt in the X inner product, each column orthogonalized twice.

    Columns are processed in blocks: two block passes against the accepted
    columns, then two column passes inside the block. A column that loses
    more than half its norm in the block step gets two more full passes.
    Columns that collapse (relative norm below 1e-10) are dropped; the
    returned index array lists the surviving columns. With ``prefix`` (an
    X-orthonormal block) the columns are also made orthogonal to it and the
    result is ``[prefix, new columns]``.
    """
    n, m = V.shape
    p = 0 if prefix is None else prefix.shape[1]
    # column-major so column slices are contiguous
    Q = np.empty((n, p + m), order="F")
    XQ = np.empty((n, p + m), order="F")
    if p:
        Q[:, :p] = prefix
        XQ[:, :p] = space.apply(prefix)
    keep = []
    k = p
    for b0 in range(0, m, block):
        W = np.array(V[:, b0 : b0 + block], dtype=float, order="F")
        nrm0 = space.norms(W)
        for _ in range(2):
            if k:
                W -= Q[:, :k] @ (XQ[:, :k].T @ W)
        nrm1 = space.norms(W)
        kb = k
        for i in range(W.shape[1]):
            if nrm0[i] == 0.0:
                continue
            w = W[:, i]
            for _ in range(2):
                if k > kb:
                    w -= Q[:, kb:k] @ (XQ[:, kb:k].T @ w)
            xw = space.apply(w)
            nrm = np.sqrt(max(float(w @ xw), 0.0))
            if nrm < 0.5 * nrm1[i] and k:
                for _ in range(2):
                    w -= Q[:, :k] @ (XQ[:, :k].T @ w)
                xw = space.apply(w)
                nrm = np.sqrt(max(float(w @ xw), 0.0))
            if nrm < 1e-10 * nrm0[i]:
                continue
            Q[:, k] = w / nrm
            XQ[:, k] = xw / nrm
            keep.append(b0 + i)
            k += 1
    return Q[:, :k], np.asarray(keep, dtype=int)


def _fix_signs(V):
    idx = np.argmax(np.abs(V), axis=0)
    signs = np.sign(V[idx, np.arange(V.shape[1])])
    signs[signs == 0] = 1.0
    return V * signs


def pod(space, S, M=None, energy_tol=None):
    """POD by the method of snapshots.

    Exactly one of ``M`` (number of modes) or ``energy_tol`` (discarded
    energy fraction) may be given; both are capped at the rank cutoff
    ``lambda_1 * 1e-14``. With neither, the basis spans the numerical span
    of the set: modes above the cutoff, then deflation passes on the
    leftover residuals so every snapshot is reproduced to about 1e-12.

    Returns
    -------
    Basis
        X-orthonormal modes ordered by nonincreasing eigenvalue. The returned
        dimension may be smaller than ``M`` for rank-deficient sets, in which
        case ``Basis.capped`` is set.
    """
    S = _check_set(space, S)
    K = len(S)
    if K == 0:
        raise InvalidInputError("empty snapshot set")
    if M is not None and energy_tol is not None:
        raise InvalidInputError("give M or energy_tol, not both")
    if M is not None:
        if M < 1:
            raise InvalidInputError("M must be positive")
        if M > K:
            raise InvalidInputError(f"M={M} exceeds the {K} snapshots")
    if energy_tol is not None and not 0 <= energy_tol < 1:
        raise InvalidInputError("energy_tol must lie in [0, 1)")

    U = S.data[:, space.norms(S.data) >= NORM_FLOOR]
    if U.shape[1] == 0:
        raise EmptyBasisError("all snapshots have zero norm")
    C = U.T @ space.apply(U)
    C = 0.5 * (C + C.T)
    lam, A = np.linalg.eigh(C)
    order = np.argsort(lam)[::-1]
    lam, A = np.maximum(lam[order], 0.0), A[:, order]
    if lam[0] <= 0.0:
        raise EmptyBasisError("snapshot Gram matrix is zero")
    rank = int(np.count_nonzero(lam >= lam[0] * RANK_TOL))

    if M is not None:
        m = min(M, rank)
    elif energy_tol is not None:
        cum = np.cumsum(lam)
        m = min(int(np.searchsorted(cum, (1.0 - energy_tol) * cum[-1])) + 1, rank)
    else:
        m = rank
    V = U @ (A[:, :m] / np.sqrt(lam[:m]))
    V, keep = _reorthonormalize(space, V)
    lam = lam[keep]
    if M is None and energy_tol is None:
        V, lam = _deflate(space, U, V, lam, max_dim=U.shape[1])
    V = _fix_signs(V)
    requested = M if M is not None else V.shape[1]
    return Basis(V, lam, K, requested, V.shape[1] < requested)


def _deflate(space, U, V, lam, rtol=1e-12, passes=3, max_dim=None):
    """Extend ``V`` until every column of ``U`` is reproduced to ``rtol``.

    The eigenvalue cutoff alone leaves residuals of order
    ``sqrt(RANK_TOL)`` relative to the snapshot norms; each pass runs a
    Gram POD on what ``V`` misses and appends the surviving modes. Modes
    below ``rtol`` times the largest snapshot norm are roundoff and are not
    added; ``max_dim`` caps the final dimension (default ``V`` plus the
    number of columns of ``U``).
    """
    XU = space.apply(U)
    unorm = np.sqrt(np.maximum(np.einsum("ij,ij->j", U, XU), 0.0))
    if max_dim is None:
        max_dim = V.shape[1] + U.shape[1]
    floor = (rtol * unorm.max()) ** 2
    diag = space.is_diagonal
    sqw = np.sqrt(space.weights) if diag else None
    R = U - V @ (V.T @ XU)
    for _ in range(passes):
        room = max_dim - V.shape[1]
        if room <= 0:
            break
        # diagonal X: one scaled copy gives norms and a symmetric product
        XR = R * sqw[:, None] if diag else space.apply(R)
        rn = np.sqrt(np.maximum(np.einsum("ij,ij->j", XR, XR if diag else R), 0.0))
        if not np.any(rn > rtol * unorm):
            break
        # converged columns stay in: their modes fall below the floor
        C = XR.T @ XR if diag else R.T @ XR
        mu, A = np.linalg.eigh(0.5 * (C + C.T))
        order = np.argsort(mu)[::-1]
        mu, A = np.maximum(mu[order], 0.0), A[:, order]
        r = min(int(np.count_nonzero(mu >= max(mu[0] * RANK_TOL, floor))), room)
        if r == 0:
            break
        W = R @ (A[:, :r] / np.sqrt(mu[:r]))
        p = V.shape[1]
        Q, added = _reorthonormalize(space, W, prefix=V)
        if len(added) == 0:
            break
        new = Q[:, p:]
        R -= new @ (new.T @ XU)
        V, lam = Q, np.concatenate([lam, mu[added]])
    return V, lam


def project(space, B, u):
    """Best approximation of ``u`` in ``span(B)``.

    Returns the coefficients ``(u, v_m)_X`` and the X-norm of the residual.
    """
    u = _coeffs(space, u)
    V = B.vectors if isinstance(B, Basis) else np.asarray(B)
    if V.shape[0] != space.dim:
        raise DimensionError("basis and field live in different spaces")
    if V.shape[1] == 0:
        return np.zeros(0), space.norm(u)
    c = V.T @ space.apply(u)
    # explicit residual: subtracting squared norms loses half the digits
    return c, space.norm(u - V @ c)


def projection_residuals(space, B, U):
    """X-norm residuals of every column of ``U`` after projection onto ``B``."""
    U = np.asarray(U, dtype=float)
    V = B.vectors if isinstance(B, Basis) else np.asarray(B)
    if V.shape[1] == 0:
        return space.norms(U)
    R = U - V @ (V.T @ space.apply(U))
    return space.norms(R)


def error_metric(space, B, M_K, mode="absolute"):
    """Worst-case projection error of a snapshot set onto ``span(B)``."""
    if mode not in ("absolute", "relative"):
        raise InvalidInputError(f"unknown error mode {mode!r}")
    M_K = _check_set(space, M_K)
    if len(M_K) == 0:
        raise InvalidInputError("empty manifold sample")
    res = projection_residuals(space, B, M_K.data)
    if mode == "absolute":
        return float(res.max())
    nrm = space.norms(M_K.data)
    ok = nrm >= NORM_FLOOR
    if not np.any(ok):
        return 0.0
    return float((res[ok] / nrm[ok]).max())


def dual_norm(space, vec):
    """Norm in the dual space, ``sqrt(l^T X^{-1} l)``."""
    vec = np.asarray(vec, dtype=float)
    if space.is_diagonal:
        return float(np.sqrt(np.sum(vec**2 / space.weights)))
    r = spla.spsolve(space.matrix().tocsc(), vec)
    return float(np.sqrt(max(vec @ r, 0.0)))
