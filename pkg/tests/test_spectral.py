import numpy as np
import pytest
from numpy.testing import assert_allclose

from backend.app.errors import AmbiguousSubspaceError, DegenerateRankError, InputError
from backend.app.schemas import Polynomial
from backend.app.services import spectral
from backend.app.services.series import generate
from backend.app.services.trajectory import embed


def rank2_matrix(rng, L=6, K=9):
    u, _ = np.linalg.qr(rng.standard_normal((L, 2)))
    v, _ = np.linalg.qr(rng.standard_normal((K, 2)))
    return u @ np.diag([3.0, 1.5]) @ v.T


def test_decompose_rank_and_extremes(rng):
    h = rank2_matrix(rng)
    dec = spectral.decompose(h)
    assert dec.rank == 2
    assert dec.mu_max == pytest.approx(9.0)
    assert dec.mu_min == pytest.approx(2.25)
    assert_allclose(dec.P0 + dec.P0perp, np.eye(6), atol=1e-12)
    assert_allclose(dec.P0perp @ h, h, atol=1e-12)
    assert_allclose(dec.P0 @ h, 0.0, atol=1e-12)


def test_s0_is_pseudo_inverse(rng):
    h = rank2_matrix(rng)
    dec = spectral.decompose(h)
    assert_allclose(dec.S0, np.linalg.pinv(h @ h.T), atol=1e-10)
    assert_allclose(spectral.s0_power(dec, 2), dec.S0 @ dec.S0, atol=1e-10)
    assert_allclose(spectral.s0_power(dec, 0), -dec.P0)
    with pytest.raises(InputError):
        spectral.s0_power(dec, -1)


def test_equal_eigenvalues_share_one_cluster():
    h = np.zeros((4, 5))
    h[0, 0] = h[1, 1] = 2.0
    h[2, 2] = 1.0
    dec = spectral.decompose(h)
    positive = dec.positive_clusters
    assert [c.multiplicity for c in positive] == [2, 1]
    assert positive[0].mu == pytest.approx(4.0)
    assert sum(c.multiplicity for c in dec.clusters) == 4


def test_known_rank_policy(rng):
    h = rank2_matrix(rng)
    assert spectral.decompose(h, rank=1).rank == 1
    with pytest.raises(DegenerateRankError):
        spectral.decompose(h, rank=3)


def test_zero_signal_rejected():
    with pytest.raises(InputError):
        spectral.decompose(np.zeros((3, 3)))


def test_constant_series_rank_one():
    dec = spectral.decompose(embed(np.ones(20), 5))
    assert dec.rank == 1
    assert_allclose(dec.P0perp, np.full((5, 5), 0.2), atol=1e-12)


def test_leading_subspace_requires_gap():
    with pytest.raises(AmbiguousSubspaceError):
        spectral.leading_subspace(np.diag([1.0, 1.0, 0.5]), 1)
    basis, s = spectral.leading_subspace(np.diag([2.0, 1.0, 0.5]), 2)
    assert_allclose(s, [2.0, 1.0, 0.5])
    assert_allclose(spectral.projector_onto(basis), np.diag([1.0, 1.0, 0.0]), atol=1e-12)


def test_orthonormal_range_truncates(rng):
    m = rank2_matrix(rng)
    q = spectral.orthonormal_range(m)
    assert q.shape == (6, 2)
    assert_allclose(q.T @ q, np.eye(2), atol=1e-12)
    assert spectral.orthonormal_range(np.zeros((3, 2))).shape == (3, 0)


def test_basis_matches_singular_vectors_for_ill_conditioned_series():
    values = generate(Polynomial(coeffs=[0.01, 0.2, -1.0, 3.0]), 24)
    h = embed(values, 9)
    dec = spectral.decompose(h, rank=4)
    svd_basis, s = spectral.leading_subspace(h, 4)
    assert_allclose(dec.P0perp, spectral.projector_onto(svd_basis), atol=1e-12)
    assert_allclose(dec.eigenvalues[:4], s[:4] ** 2, rtol=1e-12)
    assert_allclose(dec.basis.T @ dec.basis, np.eye(4), atol=1e-12)
