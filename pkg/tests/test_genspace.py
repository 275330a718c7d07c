import math

import numpy as np
import pytest

from genrb.activation import ACTIVATION_NAMES, get_activation
from genrb.errors import InvalidInputError
from genrb.fom import chebyshev_extended, manifold_1d
from genrb.genspace import (
    build_generative_spaces,
    g_transform,
    generate_g_set,
    generate_h_set,
    h_transform,
    neighbor_table,
    normalize_snapshots,
)
from genrb.params import ParamBox, ParamSample
from genrb.space import DiscreteSpace, SnapshotSet, error_metric, pod, projection_residuals


def test_neighbor_table_small():
    assert neighbor_table(np.array([[0.3]]), 1).rows.tolist() == [[0]]
    rows = neighbor_table(np.arange(4.0)[:, None], 2).rows + 1
    assert rows.tolist() == [[1, 2], [2, 1], [3, 2], [4, 3]]
    with pytest.raises(InvalidInputError):
        neighbor_table(np.arange(3.0)[:, None], 4)


def test_neighbor_table_vs_sort(rng):
    pts = rng.uniform(0, 1, (20, 2))
    rows = neighbor_table(pts, 5).rows
    for n in range(20):
        d = np.linalg.norm(pts - pts[n], axis=1)
        d[n] = -1.0
        assert rows[n].tolist() == np.argsort(d, kind="stable")[:5].tolist()


def test_transforms_scalar():
    for name in ACTIVATION_NAMES:
        act = get_activation(name)
        assert g_transform(act, 0.3, 0.3) == pytest.approx(act.eval(0.3), abs=0)
        assert h_transform(act, 0.3, 0.3, 0.3) == pytest.approx(act.eval(0.3), abs=0)
        assert h_transform(act, 0.3, 0.6, 0.3) == pytest.approx(g_transform(act, 0.3, 0.6))
    assert g_transform("exp", 0.0, 1.0) == 2.0
    t = math.tanh(0.2)
    assert g_transform("tanh", 0.2, -0.1) == pytest.approx(t + (1 - t * t) * -0.3, rel=1e-15)
    assert h_transform("quadratic", 0.5, 0.7, 0.6) == pytest.approx(0.47, rel=1e-14)


def test_normalization_examples(rng):
    S = SnapshotSet(np.array([[0.1, -0.2], [0.3, 0.0]]))
    S2, nm = normalize_snapshots(S, "tanh")
    assert (nm.scale, nm.shift) == (1.0, 0.0)
    np.testing.assert_array_equal(S2.data, S.data)
    S = SnapshotSet(np.array([[0.0, 10.0], [5.0, 2.0]]))
    S2, nm = normalize_snapshots(S, "tanh")
    assert nm.scale == pytest.approx(0.08) and nm.shift == pytest.approx(-0.4)
    np.testing.assert_allclose(nm.backward(S2.data), S.data, rtol=1e-14)
    for name in ACTIVATION_NAMES:
        act = get_activation(name)
        S2, _ = normalize_snapshots(SnapshotSet(rng.normal(3, 50, (30, 4))), act)
        assert S2.data.min() >= act.safe_lo and S2.data.max() <= act.safe_hi
    S2, nm = normalize_snapshots(SnapshotSet(np.full((4, 2), 7.0)), "exp")
    assert nm.scale == 1.0 and np.all(S2.data == 0.5)


def test_g_set_against_scalar_oracle():
    prob = manifold_1d()
    pts = np.linspace(0, 10, 3)[:, None]
    S, _ = normalize_snapshots(SnapshotSet(prob.snapshots(pts)), "exp")
    nb = neighbor_table(pts, 3)
    G = generate_g_set(S, "exp", nb)
    assert len(G) == 9
    act = get_activation("exp")
    k = 0
    for n, row in enumerate(nb.rows):
        for l in row:
            xn, xl = S.data[:, n], S.data[:, l]
            arg = np.maximum(np.exp(xn) * (1 + xl - xn), act.eps * 1.0)
            oracle = xn if l == n else np.log(arg)
            np.testing.assert_allclose(G.data[:, k], oracle, rtol=1e-13, atol=1e-15)
            k += 1


def test_h_set_against_scalar_oracle(rng):
    act = get_activation("sigmoid")
    S, _ = normalize_snapshots(SnapshotSet(rng.standard_normal((15, 2))), act)
    nb = neighbor_table(np.array([[0.0], [1.0]]), 2)
    H = generate_h_set(S, act, nb)
    assert len(H) == 8
    sig = lambda x: 1 / (1 + np.exp(-x))
    k = 0
    for n, row in enumerate(nb.rows):
        v1 = S.data[:, n]
        s, d1 = sig(v1), sig(v1) * (1 - sig(v1))
        d2 = d1 * (1 - 2 * sig(v1))
        for l in row:
            for lp in row:
                h = s + d1 * (S.data[:, l] - v1) + 0.5 * d2 * (S.data[:, l] - v1) * (S.data[:, lp] - v1)
                h = np.clip(h, 1e-8, 1 - 1e-8)
                np.testing.assert_allclose(H.data[:, k], np.log(h / (1 - h)), rtol=1e-12, atol=1e-14)
                k += 1


def test_self_entries_exact(rng):
    S = SnapshotSet(rng.uniform(0.1, 0.9, (10, 3)))
    nb = neighbor_table(np.array([[0.0], [1.0], [3.0]]), 2)
    G = generate_g_set(S, "softplus", nb)
    H = generate_h_set(S, "softplus", nb)
    for n in range(3):
        np.testing.assert_array_equal(G.data[:, 2 * n], S.data[:, n])
        np.testing.assert_array_equal(H.data[:, 4 * n], S.data[:, n])
        # H with l' = n equals the G entry
        np.testing.assert_allclose(H.data[:, 4 * n + 2], G.data[:, 2 * n + 1], rtol=1e-13)


def test_single_snapshot_spaces(rng):
    s = DiscreteSpace(np.ones(8))
    u = rng.standard_normal(8)
    gs = build_generative_spaces(SnapshotSet(u[:, None]), np.array([[1.0]]), "tanh", 1, 1, 1, s)
    for B in gs:
        assert B.dim == 1
        assert projection_residuals(s, B, u[:, None])[0] <= 1e-13 * np.linalg.norm(u)


@pytest.mark.parametrize("act", ACTIVATION_NAMES)
def test_nesting_untruncated(act):
    prob = manifold_1d(401)
    pts = chebyshev_extended(5, 0, 10)[:, None]
    U = prob.snapshots(pts)
    gs = build_generative_spaces(SnapshotSet(U), pts, act, 5, None, None, prob.space)
    nrm = prob.space.norms(U)
    assert np.max(projection_residuals(prob.space, gs.phi, U) / nrm) <= 1e-10
    assert np.max(projection_residuals(prob.space, gs.psi, U) / nrm) <= 1e-10
    # every G-set field lies in span(Psi)
    Sn, nm = normalize_snapshots(SnapshotSet(U), act)
    G = nm.backward(generate_g_set(Sn, act, gs.neighbors).data)
    gn = prob.space.norms(G)
    assert np.max(projection_residuals(prob.space, gs.psi, G) / gn) <= 1e-10
    # no roundoff modes beyond the spanned vector count
    assert gs.phi.dim <= gs.n_g and gs.psi.dim <= gs.n_h


def test_cap_warning_flag():
    prob = manifold_1d(201)
    pts = np.array([[0.0], [10.0]])
    gs = build_generative_spaces(
        SnapshotSet(prob.snapshots(pts)), pts, "exp", 2, 4, 100, prob.space
    )
    assert gs.capped and gs.psi.dim <= 8 and gs.n_g == 4 and gs.n_h == 8


def test_ordering_1d_tanh():
    prob = manifold_1d()
    box = prob.box
    pts = chebyshev_extended(12, *box.lo, *box.hi)[:, None]
    S = SnapshotSet(prob.snapshots(pts))
    MK = SnapshotSet(prob.snapshots(np.linspace(0, 10, 200)[:, None]))
    W = pod(prob.space, S)
    gs = build_generative_spaces(S, ParamSample(pts, box), "tanh", 8, 36, 60, prob.space)
    eW, eF, eP = (error_metric(prob.space, B, MK) for B in (W, gs.phi, gs.psi))
    assert eP <= eF <= eW
