import dataclasses

import numpy as np
import pytest

from genrb.errors import BasesUnavailableError, InvalidInputError, OnlineSingularityError, OutOfDomainError
from genrb.fom import fom_output, fom_solve
from genrb.rom import (
    assemble_reduced,
    estimate_errors,
    offline_build,
    online_solve,
    reconstruct_field,
    theta_from_names,
)
from genrb.space import SnapshotSet, pod

SAMPLE8 = np.array(
    [[0, 0], [50, 50], [50, 0], [0, 50], [25, 25], [10, 40], [40, 10], [20, 5]], dtype=float
)


@pytest.fixture(scope="module")
def rm8(convdiff_small):
    return offline_build(convdiff_small, SAMPLE8, "exp", 8, None, None)


def test_theta_from_names():
    np.testing.assert_array_equal(theta_from_names(("1", "mu2", "mu1"), [3.0, 4.0]), [1, 4, 3])
    with pytest.raises(InvalidInputError):
        theta_from_names(("nu1",), [1.0])


def test_single_point_reproduction(convdiff_small):
    mu = np.array([[12.0, 30.0]])
    rm = offline_build(convdiff_small, mu, "tanh", 1, 1, 1)
    u = fom_solve(convdiff_small, mu[0])
    phi = rm.phi[:, 0]
    for q, op in enumerate(convdiff_small.affine.ops):
        assert rm.A1[q, 0, 0] == pytest.approx(phi @ (op @ phi), rel=1e-13)
    r = online_solve(rm, mu[0])
    assert r.output == pytest.approx(fom_output(convdiff_small, u), rel=1e-12)


def test_gram_blocks_identity(rm8):
    np.testing.assert_allclose(rm8.B1, np.eye(rm8.M1), atol=1e-8)
    np.testing.assert_allclose(rm8.B2, np.eye(rm8.M2), atol=1e-8)


def test_congruence_oracle(convdiff_small, rm8):
    for q, op in enumerate(convdiff_small.affine.ops):
        dense = op.toarray()
        np.testing.assert_allclose(rm8.A1[q], rm8.phi.T @ dense @ rm8.phi, rtol=1e-12, atol=1e-12)
        np.testing.assert_allclose(rm8.A2[q], rm8.psi.T @ dense @ rm8.psi, rtol=1e-12, atol=1e-12)


def test_reproduction_at_sample_points(convdiff_small, rm8):
    sp = convdiff_small.space
    for mu in SAMPLE8:
        u = fom_solve(convdiff_small, mu)
        r = online_solve(rm8, mu)
        assert sp.norm(reconstruct_field(rm8, r) - u) <= 1e-8 * sp.norm(u)
        est = estimate_errors(rm8, mu, r)
        assert est.solution_rel <= 1e-7 and est.output_rel <= 1e-9


def test_dense_galerkin_oracle(convdiff_small, rm8):
    mu = np.array([25.0, 25.0])
    A = convdiff_small.affine.matrix(mu).toarray()
    V = rm8.phi
    c = np.linalg.solve(V.T @ A @ V, V.T @ convdiff_small.affine.load)
    s = convdiff_small.affine.output @ (V @ c)
    assert online_solve(rm8, mu).output == pytest.approx(s, rel=1e-10)


def test_zero_load_gives_zero_output(rm8):
    rm0 = dataclasses.replace(rm8, l1=0 * rm8.l1, l2=0 * rm8.l2)
    r = online_solve(rm0, [7.0, 8.0])
    assert r.output == 0.0
    assert estimate_errors(rm0, [7.0, 8.0]).output_rel == 0.0


def test_estimate_matches_full_space(convdiff_small, rm8):
    sp = convdiff_small.space
    for mu in ([3.0, 47.0], [33.3, 12.1]):
        est = estimate_errors(rm8, mu)
        d = rm8.psi @ est.beta - rm8.phi @ est.alpha
        assert est.solution_est == pytest.approx(sp.norm(d), rel=1e-8, abs=1e-14)
        assert est.u2_norm == pytest.approx(sp.norm(rm8.psi @ est.beta), rel=1e-10)
        # alpha = 0 collapses the expansion to the level-2 norm
        b = est.beta
        assert np.sqrt(b @ rm8.B2 @ b) == pytest.approx(est.u2_norm, rel=1e-14)


def test_degenerate_levels_give_zero(convdiff_small):
    W = pod(convdiff_small.space, SnapshotSet(np.column_stack([fom_solve(convdiff_small, m) for m in SAMPLE8[:4]])))
    rm = assemble_reduced(convdiff_small, W, W)
    est = estimate_errors(rm, [10.0, 20.0])
    assert est.output_est <= 1e-12 and est.solution_est <= 1e-12 * est.u2_norm + 1e-14


def test_two_level_consistency(convdiff_small, rm8):
    ext = assemble_reduced(convdiff_small, rm8.psi, rm8.psi)
    for mu in ([5.0, 5.0], [49.0, 1.0]):
        assert online_solve(rm8, mu, 2).output == pytest.approx(online_solve(ext, mu, 1).output, rel=1e-10)


def test_reconstruct(rm8):
    r = online_solve(rm8, [1.0, 2.0])
    np.testing.assert_array_equal(reconstruct_field(rm8, np.eye(rm8.M1)[0]), rm8.phi[:, 0])
    assert np.all(reconstruct_field(rm8, np.zeros(rm8.M1)) == 0)
    with pytest.raises(BasesUnavailableError):
        reconstruct_field(rm8.without_bases(), r)
    with pytest.raises(InvalidInputError):
        reconstruct_field(rm8, np.ones(3))


def test_reconstruct_gram_identity(convdiff_small, rm8, rng):
    c = rng.standard_normal(rm8.M1)
    assert convdiff_small.space.norm(reconstruct_field(rm8, c)) == pytest.approx(np.sqrt(c @ rm8.B1 @ c), rel=1e-10)


def test_online_errors(rm8):
    with pytest.raises(OutOfDomainError):
        online_solve(rm8, [60.0, 1.0])
    with pytest.raises(InvalidInputError):
        online_solve(rm8, [1.0, 1.0], level=3)
    sing = dataclasses.replace(rm8, A1=0 * rm8.A1)
    with pytest.raises(OnlineSingularityError):
        online_solve(sing, [1.0, 1.0])
