"""Tensor-product Lagrange finite elements on structured rectangular patches.

A mesh is a union of axis-aligned rectangles, each split into ``nx * ny``
equal cells carrying ``Q_p`` elements (``p`` in 1..3, equispaced nodes).
Nodes on shared patch edges are merged by coordinate, so neighboring patches
must agree on their node positions along the interface.
"""

from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp

from ..errors import AssemblyError

__all__ = ["Patch", "QuadMesh", "build_mesh", "assemble"]


@dataclass(frozen=True)
class Patch:
    x0: float
    x1: float
    y0: float
    y1: float
    nx: int
    ny: int
    subdomain: str = "omega"


@dataclass
class BoundaryEdges:
    nodes: np.ndarray  # (n_edges, p + 1) node ids, ordered along the edge
    length: np.ndarray
    tags: np.ndarray  # object array of tag strings


@dataclass
class QuadMesh:
    degree: int
    patches: list
    nodes: np.ndarray  # (n_nodes, 2)
    elements: list  # per patch: (n_el, (p+1)**2) node ids
    boundary: BoundaryEdges
    cell_sizes: list = field(default_factory=list)  # per patch (hx, hy)

    @property
    def n_nodes(self):
        return self.nodes.shape[0]

    @property
    def n_elements(self):
        return sum(len(e) for e in self.elements)

    def boundary_nodes(self, tags):
        tags = {tags} if isinstance(tags, str) else set(tags)
        mask = np.isin(self.boundary.tags, list(tags))
        return np.unique(self.boundary.nodes[mask])

    def boundary_tags(self):
        return sorted(set(self.boundary.tags.tolist()))


def _lagrange_1d(p, t):
    """Values and derivatives of equispaced ``P_p`` Lagrange basis on [0, 1]."""
    xi = np.linspace(0.0, 1.0, p + 1)
    t = np.asarray(t, dtype=float)
    val = np.ones((t.size, p + 1))
    der = np.zeros((t.size, p + 1))
    for i in range(p + 1):
        others = [j for j in range(p + 1) if j != i]
        denom = np.prod([xi[i] - xi[j] for j in others])
        for j in others:
            val[:, i] *= t - xi[j]
        for k in others:
            term = np.ones(t.size)
            for j in others:
                if j != k:
                    term *= t - xi[j]
            der[:, i] += term
        val[:, i] /= denom
        der[:, i] /= denom
    return val, der


def _gauss(n):
    x, w = np.polynomial.legendre.leggauss(n)
    return 0.5 * (x + 1.0), 0.5 * w


def _key(x, y):
    return (round(x, 9), round(y, 9))


def build_mesh(patches, degree=3, tagger=None):
    """Build a conforming mesh from rectangular patches.

    Parameters
    ----------
    patches : sequence of Patch
    degree : int
        Polynomial degree per direction, 1 to 3.
    tagger : callable, optional
        ``tagger(midpoint, normal, subdomain) -> str`` assigning a tag to each
        boundary edge. Defaults to tagging everything ``"boundary"``.
    """
    if degree not in (1, 2, 3):
        raise AssemblyError(f"unsupported degree {degree}")
    if not patches:
        raise AssemblyError("no patches given")
    p = degree
    node_id = {}
    coords = []
    elements, sizes = [], []
    for patch in patches:
        if patch.nx < 1 or patch.ny < 1 or patch.x1 <= patch.x0 or patch.y1 <= patch.y0:
            raise AssemblyError(f"degenerate patch {patch}")
        mx, my = patch.nx * p + 1, patch.ny * p + 1
        xs = np.linspace(patch.x0, patch.x1, mx)
        ys = np.linspace(patch.y0, patch.y1, my)
        local = np.empty((mx, my), dtype=int)
        for i, x in enumerate(xs):
            for j, y in enumerate(ys):
                k = _key(x, y)
                if k not in node_id:
                    node_id[k] = len(coords)
                    coords.append((x, y))
                local[i, j] = node_id[k]
        conn = np.empty((patch.nx * patch.ny, (p + 1) ** 2), dtype=int)
        e = 0
        for cy in range(patch.ny):
            for cx in range(patch.nx):
                block = local[cx * p : cx * p + p + 1, cy * p : cy * p + p + 1]
                conn[e] = block.T.ravel()  # local index a + (p+1) b
                e += 1
        elements.append(conn)
        sizes.append(((patch.x1 - patch.x0) / patch.nx, (patch.y1 - patch.y0) / patch.ny))
    nodes = np.array(coords)

    # element edges: (local node indices along edge, outward normal)
    n1 = p + 1
    a = np.arange(n1)
    edge_local = [
        (a, (0.0, -1.0)),  # bottom
        (p + n1 * a, (1.0, 0.0)),  # right
        (a + n1 * p, (0.0, 1.0)),  # top
        (n1 * a, (-1.0, 0.0)),  # left
    ]
    count = {}
    records = []
    for pi, conn in enumerate(elements):
        for el in conn:
            for loc, normal in edge_local:
                ids = el[loc]
                key = (min(ids[0], ids[-1]), max(ids[0], ids[-1]))
                count[key] = count.get(key, 0) + 1
                records.append((key, ids, normal, pi))
    b_nodes, b_len, b_tags = [], [], []
    for key, ids, normal, pi in records:
        if count[key] != 1:
            continue
        mid = 0.5 * (nodes[ids[0]] + nodes[ids[-1]])
        length = float(np.linalg.norm(nodes[ids[-1]] - nodes[ids[0]]))
        probe = mid + 1e-7 * max(length, 1e-12) * np.asarray(normal)
        for q in patches:
            if q.x0 <= probe[0] <= q.x1 and q.y0 <= probe[1] <= q.y1:
                raise AssemblyError(
                    f"non-conforming interface near {mid.tolist()}"
                )
        tag = tagger(mid, normal, patches[pi].subdomain) if tagger else "boundary"
        b_nodes.append(ids)
        b_len.append(length)
        b_tags.append(tag)
    boundary = BoundaryEdges(
        np.array(b_nodes, dtype=int), np.array(b_len), np.array(b_tags, dtype=object)
    )
    return QuadMesh(p, list(patches), nodes, elements, boundary, sizes)


def _reference(p):
    t, w = _gauss(p + 1)
    val, der = _lagrange_1d(p, t)
    # 2-D tensor quadrature, point index qa + nq qb, basis index a + n1 b
    N = np.einsum("qa,rb->rqba", val, val).reshape(len(t) ** 2, (p + 1) ** 2)
    Nx = np.einsum("qa,rb->rqba", der, val).reshape(len(t) ** 2, (p + 1) ** 2)
    Ny = np.einsum("qa,rb->rqba", val, der).reshape(len(t) ** 2, (p + 1) ** 2)
    W = np.outer(w, w).ravel()
    return N, Nx, Ny, W, val, w


def _element_matrix(p, hx, hy, kind, direction=0):
    N, Nx, Ny, W, _, _ = _reference(p)
    J = hx * hy
    dx, dy = Nx / hx, Ny / hy
    if kind == "mass":
        return J * (N * W[:, None]).T @ N
    if kind == "stiffness":
        return J * ((dx * W[:, None]).T @ dx + (dy * W[:, None]).T @ dy)
    if kind == "convection":
        # rows test, columns trial: -int w dv/dx_d
        d = dx if direction == 0 else dy
        return -J * (d * W[:, None]).T @ N
    if kind == "load":
        return J * (N * W[:, None]).sum(axis=0)
    raise AssemblyError(f"unknown element form {kind!r}")


def _scatter(n, conn, Ke):
    ne, nl = conn.shape
    rows = np.repeat(conn, nl, axis=1).ravel()
    cols = np.tile(conn, (1, nl)).ravel()
    data = np.tile(Ke.ravel(), ne)
    return rows, cols, data


def assemble(mesh, form, subdomain=None, boundary=None, direction=0, func=None):
    """Assemble a global sparse matrix or load vector.

    ``form`` is one of ``"mass"``, ``"stiffness"``, ``"convection"``,
    ``"boundary_mass"``, ``"load"``, ``"boundary_load"``. Domain forms may be
    restricted to one subdomain; boundary forms need a tag (or a list of
    tags). ``func(x, y)`` weights a domain load pointwise.
    Returns a CSR matrix for bilinear forms and a vector for linear ones.
    """
    n = mesh.n_nodes
    p = mesh.degree
    if form in ("mass", "stiffness", "convection"):
        rows, cols, data = [], [], []
        for patch, conn, (hx, hy) in zip(mesh.patches, mesh.elements, mesh.cell_sizes):
            if subdomain is not None and patch.subdomain != subdomain:
                continue
            Ke = _element_matrix(p, hx, hy, form, direction)
            r, c, d = _scatter(n, conn, Ke)
            rows.append(r)
            cols.append(c)
            data.append(d)
        if not rows:
            return sp.csr_matrix((n, n))
        A = sp.coo_matrix(
            (np.concatenate(data), (np.concatenate(rows), np.concatenate(cols))),
            shape=(n, n),
        )
        return A.tocsr()
    if form == "load":
        vec = np.zeros(n)
        N, _, _, W, _, _ = _reference(p)
        t, _ = _gauss(p + 1)
        for patch, conn, (hx, hy) in zip(mesh.patches, mesh.elements, mesh.cell_sizes):
            if subdomain is not None and patch.subdomain != subdomain:
                continue
            if func is None:
                fe = _element_matrix(p, hx, hy, "load")
                np.add.at(vec, conn, np.broadcast_to(fe, conn.shape))
            else:
                x0 = mesh.nodes[conn[:, 0]]
                qx = x0[:, 0:1] + hx * np.tile(t, len(t))[None, :]
                qy = x0[:, 1:2] + hy * np.repeat(t, len(t))[None, :]
                fq = func(qx, qy) * (W * hx * hy)[None, :]
                np.add.at(vec, conn, fq @ N)
        return vec
    if form in ("boundary_mass", "boundary_load"):
        if boundary is None:
            raise AssemblyError("boundary form needs a boundary tag")
        tags = [boundary] if isinstance(boundary, str) else list(boundary)
        mask = np.isin(mesh.boundary.tags, tags)
        edges = mesh.boundary.nodes[mask]
        lengths = mesh.boundary.length[mask]
        t, w = _gauss(p + 1)
        val, _ = _lagrange_1d(p, t)
        if form == "boundary_load":
            vec = np.zeros(n)
            le = (val * w[:, None]).sum(axis=0)
            np.add.at(vec, edges, lengths[:, None] * le[None, :])
            return vec
        Me = (val * w[:, None]).T @ val
        nl = p + 1
        rows = np.repeat(edges, nl, axis=1).ravel()
        cols = np.tile(edges, (1, nl)).ravel()
        data = (lengths[:, None] * Me.ravel()[None, :]).ravel()
        return sp.coo_matrix((data, (rows, cols)), shape=(n, n)).tocsr()
    raise AssemblyError(f"unknown form {form!r}")
