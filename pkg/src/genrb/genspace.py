"""Generative snapshot enrichment and the two nested generative RB spaces.

From ``N`` solution snapshots ``xi_n`` the pairwise transform

    G(v1, v2) = s(v1) + s'(v1) (v2 - v1)

and the triple transform

    H(v1, v2, v3) = G(v1, v2) + 1/2 s''(v1) (v2 - v1) (v3 - v1)

are applied entrywise to neighboring snapshots and mapped back through the
inverse activation, producing ``N*L`` and ``N*L**2`` new fields. Their POD
compressions are the spaces ``Phi`` (level 1) and ``Psi`` (level 2).
"""

import logging
from dataclasses import dataclass

import numpy as np

from .activation import get_activation
from .errors import GenerationError, InvalidInputError
from .params import ParamSample
from .space import Basis, SnapshotSet, _deflate, _reorthonormalize, pod

__all__ = [
    "NeighborTable",
    "SnapshotNormalization",
    "GenerativeSpaces",
    "neighbor_table",
    "g_transform",
    "h_transform",
    "normalize_snapshots",
    "generate_g_set",
    "generate_h_set",
    "build_generative_spaces",
]

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class NeighborTable:
    """Row ``n`` lists ``n`` followed by its ``L - 1`` nearest sample points
    (0-based indices)."""

    rows: np.ndarray

    @property
    def N(self):
        return self.rows.shape[0]

    @property
    def L(self):
        return self.rows.shape[1]


@dataclass(frozen=True)
class SnapshotNormalization:
    scale: float
    shift: float
    activation: str

    def forward(self, x):
        return self.scale * x + self.shift

    def backward(self, y):
        return (y - self.shift) / self.scale


def neighbor_table(sample, L):
    """Euclidean nearest neighbors on raw parameter coordinates.

    Ties are broken by the smaller index.
    """
    pts = _points(sample)
    N = pts.shape[0]
    if not 1 <= L <= N:
        raise InvalidInputError(f"need 1 <= L <= N, got L={L}, N={N}")
    d = np.linalg.norm(pts[:, None, :] - pts[None, :, :], axis=-1)
    rows = np.empty((N, L), dtype=int)
    idx = np.arange(N)
    for n in range(N):
        others = idx[idx != n]
        # lexsort: last key is primary
        order = np.lexsort((others, d[n, others]))
        rows[n, 0] = n
        rows[n, 1:] = others[order[: L - 1]]
    return NeighborTable(rows)


def _points(sample):
    if isinstance(sample, ParamSample):
        return sample.points
    pts = np.asarray(sample, dtype=float)
    return pts[:, None] if pts.ndim == 1 else pts


def g_transform(act, v1, v2):
    act = get_activation(act)
    return act.eval(v1) + act.deriv1(v1) * (np.asarray(v2) - v1)


def h_transform(act, v1, v2, v3):
    act = get_activation(act)
    d2 = np.asarray(v2) - v1
    return (
        act.eval(v1)
        + act.deriv1(v1) * d2
        + 0.5 * act.deriv2(v1) * d2 * (np.asarray(v3) - v1)
    )


def normalize_snapshots(S, act):
    """Affinely map all snapshot values into the activation's safe box.

    Sets already inside the box are left untouched. Constant sets get scale 1
    and are shifted onto the box midpoint.
    """
    act = get_activation(act)
    S = S if isinstance(S, SnapshotSet) else SnapshotSet(S)
    if len(S) == 0:
        raise InvalidInputError("empty snapshot set")
    data = S.data
    if not np.all(np.isfinite(data)):
        raise InvalidInputError("snapshot entries must be finite")
    lo, hi = act.safe_lo, act.safe_hi
    vmin, vmax = float(data.min()), float(data.max())
    if vmin >= lo and vmax <= hi:
        scale, shift = 1.0, 0.0
    elif vmax == vmin:
        scale, shift = 1.0, 0.5 * (lo + hi) - vmin
    else:
        scale = (hi - lo) / (vmax - vmin)
        shift = lo - scale * vmin
    norm = SnapshotNormalization(scale, shift, act.kind)
    out = np.clip(norm.forward(data), lo, hi) if scale != 1.0 or shift != 0.0 else data
    return SnapshotSet(out.copy(), list(S.tags)), norm


def _safe_inverse(act, values, where):
    out = act.inverse(act.clamp_to_range(values))
    if not np.all(np.isfinite(out)):
        raise GenerationError(f"non-finite generated snapshot at {where}", where)
    return out


def generate_g_set(S, act, nbrs):
    """``N*L`` fields ``inv(clamp(G(xi_n, xi_l)))``, ``n`` outer, neighbor rank inner."""
    act = get_activation(act)
    X = S.data
    cols, tags = [], []
    for n, row in enumerate(nbrs.rows):
        xn = X[:, n]
        sig, d1 = act.eval(xn), act.deriv1(xn)
        for l in row:
            if l == n:
                # G(v, v) = s(v), so the inverse returns v itself
                cols.append(xn.copy())
            else:
                g = sig + d1 * (X[:, l] - xn)
                cols.append(_safe_inverse(act, g, (n, int(l))))
            tags.append(f"G({n},{l})")
    return SnapshotSet(np.column_stack(cols), tags)


def generate_h_set(S, act, nbrs):
    """``N*L**2`` fields from ``H(xi_n, xi_l, xi_l')``, ordered ``(n, l, l')``."""
    act = get_activation(act)
    X = S.data
    N, L = nbrs.N, nbrs.L
    out = np.empty((X.shape[0], N * L * L))
    tags = []
    k = 0
    for n, row in enumerate(nbrs.rows):
        xn = X[:, n]
        sig, d1, half_d2 = act.eval(xn), act.deriv1(xn), 0.5 * act.deriv2(xn)
        for l in row:
            dl = X[:, l] - xn
            g = sig + d1 * dl
            for lp in row:
                if l == n and lp == n:
                    out[:, k] = xn
                else:
                    h = g + half_d2 * dl * (X[:, lp] - xn)
                    out[:, k] = _safe_inverse(act, h, (n, int(l), int(lp)))
                tags.append(f"H({n},{l},{lp})")
                k += 1
    return SnapshotSet(out, tags)


@dataclass
class GenerativeSpaces:
    phi: Basis
    psi: Basis
    normalization: SnapshotNormalization
    neighbors: NeighborTable
    n_g: int
    n_h: int

    @property
    def capped(self):
        return self.phi.capped or self.psi.capped

    def __iter__(self):
        return iter((self.phi, self.psi))


def _pod_capped(space, S, M):
    if M is None:
        return pod(space, S)
    basis = pod(space, S, M=min(M, len(S)))
    if basis.dim < M:
        basis.capped = True
        basis.requested = M
        log.warning("requested %d modes, only %d available", M, basis.dim)
    return basis


def _extend(space, W, T, M):
    """``W`` followed by the leading POD modes of ``T`` orthogonal to ``span(W)``.

    Keeps the snapshot span exactly inside the truncated space; ``M`` counts
    the total dimension.
    """
    if M is not None and M <= W.dim:
        return W.truncate(M)
    if M is None:
        # whole span: deflate T against W directly
        V, lam = _deflate(space, T.data, W.vectors, W.eigenvalues)
        return Basis(V, lam, len(T) + W.n_source, V.shape[1], False)
    R = T.data - W.vectors @ (W.vectors.T @ space.apply(T.data))
    rel = space.norms(R) / np.maximum(space.norms(T.data), np.finfo(float).tiny)
    # members already in span(W), such as the self-neighbor copies
    R = R[:, rel > 1e-10]
    n_req = None if M is None else M - W.dim
    if R.shape[1] == 0:
        extra = np.zeros((space.dim, 0))
        lam = np.zeros(0)
    else:
        rest = _pod_capped(space, SnapshotSet(R), None if n_req is None else min(n_req, R.shape[1]))
        extra, lam = rest.vectors, rest.eigenvalues
    V, keep = _reorthonormalize(space, extra, prefix=W.vectors)
    lam = np.concatenate([W.eigenvalues, lam[keep]])
    requested = V.shape[1] if M is None else M
    basis = Basis(V, lam, len(T) + W.n_source, requested, V.shape[1] < requested)
    if basis.capped:
        log.warning("requested %d modes, only %d available", M, basis.dim)
    return basis


def build_generative_spaces(S, sample, act, L, M1, M2, space):
    """Compress the G- and H-sets into ``Phi``, ``Psi``.

    Each space is the snapshot span followed by the leading POD modes of the
    generated set's component orthogonal to it, ``M1``/``M2`` modes in total.

    ``M1``/``M2`` set to ``None`` give bases spanning the whole sets.
    Generated fields are mapped back to the original value scale, so both
    spaces contain ``span(S)`` whatever normalization was applied.
    """
    act = get_activation(act)
    S = S if isinstance(S, SnapshotSet) else SnapshotSet(S)
    N = len(S)
    if len(_points(sample)) != N:
        raise InvalidInputError("sample size and snapshot count differ")
    nbrs = neighbor_table(sample, min(L, N))
    Sn, norm = normalize_snapshots(S, act)

    W = pod(space, S)
    G = generate_g_set(Sn, act, nbrs)
    G.data = norm.backward(G.data)
    phi = _extend(space, W, G, M1)
    n_g = len(G)
    del G

    H = generate_h_set(Sn, act, nbrs)
    H.data = norm.backward(H.data)
    psi = _extend(space, W, H, M2)
    return GenerativeSpaces(phi, psi, norm, nbrs, n_g, len(H))
