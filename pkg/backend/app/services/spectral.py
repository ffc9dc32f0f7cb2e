"""Clustered eigendecomposition of A = H H^T and the S0 family."""

from __future__ import annotations

import logging
from dataclasses import dataclass
from typing import Optional

import numpy as np
from scipy.linalg import qr, svd

from ..config import get_settings
from ..errors import AmbiguousSubspaceError, DegenerateRankError, InputError

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class Cluster:
    """Eigenvalue mu with the orthogonal projector onto its eigenspace."""

    mu: float
    projector: np.ndarray
    multiplicity: int


@dataclass(frozen=True)
class SpectralDecomposition:
    clusters: tuple[Cluster, ...]
    rank: int
    P0: np.ndarray
    P0perp: np.ndarray
    S0: np.ndarray
    mu_min: float
    mu_max: float
    basis: np.ndarray
    eigenvalues: np.ndarray

    @property
    def positive_clusters(self) -> tuple[Cluster, ...]:
        return tuple(c for c in self.clusters if c.mu > 0)

    @property
    def size(self) -> int:
        return self.P0.shape[0]


def _symmetric(a: np.ndarray) -> np.ndarray:
    return 0.5 * (a + a.T)


def _group(values: np.ndarray, tol: float) -> list[list[int]]:
    """Indices of consecutive (descending) values whose relative gap is below tol."""

    groups: list[list[int]] = []
    for i, v in enumerate(values):
        if groups and values[groups[-1][-1]] - v <= tol * values[groups[-1][-1]]:
            groups[-1].append(i)
        else:
            groups.append([i])
    return groups


def decompose(
    h: np.ndarray,
    rank: Optional[int] = None,
    eps: Optional[float] = None,
    cluster_tol: Optional[float] = None,
) -> SpectralDecomposition:
    """Eigen-structure of H H^T, read off the singular value decomposition of H.

    Args:
        h: L x K signal matrix.
        rank: "known d" policy. When given, the d leading eigenvalues form the
            signal part and at least d of them must exceed the threshold.
        eps: relative rank threshold, mu > eps * mu_max.
        cluster_tol: relative gap merging eigenvalues into one projector.
    """

    settings = get_settings()
    eps = settings.rank_eps if eps is None else eps
    cluster_tol = settings.cluster_tol if cluster_tol is None else cluster_tol

    h = np.atleast_2d(np.asarray(h, dtype=float))
    if not np.any(h):
        raise InputError("cannot decompose a zero signal matrix")
    # left singular vectors of H keep the conditioning of H rather than of H H^T
    u, s, _ = svd(h, full_matrices=False)
    size = h.shape[0]
    evals = np.zeros(size)
    evals[: s.size] = s**2
    top = evals[0]
    above = int(np.sum(evals > eps * top))
    if rank is None:
        d = above
    else:
        if rank > above:
            raise DegenerateRankError(
                f"requested rank {rank} but only {above} eigenvalues exceed {eps:g} * mu_max"
            )
        d = rank

    positive = np.clip(evals[:d], 0.0, None)
    basis = u[:, :d]
    clusters = []
    for group in _group(positive, cluster_tol):
        vecs = basis[:, group]
        clusters.append(Cluster(float(np.mean(positive[group])), vecs @ vecs.T, len(group)))

    p0perp = _symmetric(basis @ basis.T)
    p0 = np.eye(size) - p0perp
    if d < size:
        clusters.append(Cluster(0.0, p0, size - d))
    s0 = sum((c.projector / c.mu for c in clusters if c.mu > 0), np.zeros((size, size)))
    logger.debug("rank %d with %d positive clusters", d, len(clusters) - (d < size))

    return SpectralDecomposition(
        clusters=tuple(clusters),
        rank=d,
        P0=p0,
        P0perp=p0perp,
        S0=_symmetric(s0),
        mu_min=float(positive[-1]),
        mu_max=float(positive[0]),
        basis=basis,
        eigenvalues=evals,
    )


def s0_power(dec: SpectralDecomposition, k: int) -> np.ndarray:
    """S0^(0) = -P0 and S0^(k) = sum_mu P_mu / mu^k."""

    if k < 0:
        raise InputError(f"power must be nonnegative, got {k}")
    if k == 0:
        return -dec.P0
    out = np.zeros_like(dec.P0)
    for c in dec.positive_clusters:
        out += c.projector / c.mu**k
    return out


def leading_subspace(m: np.ndarray, d: int, gap_tol: Optional[float] = None) -> tuple[np.ndarray, np.ndarray]:
    """Orthonormal basis of the d leading left singular vectors and all singular values."""

    gap_tol = get_settings().gap_tol if gap_tol is None else gap_tol
    u, s, _ = svd(np.asarray(m, dtype=float), full_matrices=False)
    if d > s.size:
        raise DegenerateRankError(f"rank {d} exceeds min(L, K) = {s.size}")
    if d < s.size and (s[d - 1] == 0 or (s[d - 1] - s[d]) <= gap_tol * s[d - 1]):
        raise AmbiguousSubspaceError(
            f"singular values {s[d - 1]:.6e} and {s[d]:.6e} are not separated (rank {d})"
        )
    return u[:, :d], s


def projector_onto(basis: np.ndarray) -> np.ndarray:
    return _symmetric(basis @ basis.T)


def orthonormal_range(m: np.ndarray, eps: Optional[float] = None) -> np.ndarray:
    """Orthonormal basis of the column space truncated at the numerical rank."""

    eps = get_settings().rank_eps if eps is None else eps
    m = np.atleast_2d(np.asarray(m, dtype=float))
    q, r, _ = qr(m, mode="economic", pivoting=True)
    diag = np.abs(np.diag(r))
    if diag.size == 0 or diag[0] == 0:
        return np.zeros((m.shape[0], 0))
    return q[:, : int(np.sum(diag > np.sqrt(eps) * diag[0]))]
