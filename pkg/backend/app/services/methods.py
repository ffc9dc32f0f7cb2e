"""Subspace methods driven by the signal projector: LRF coefficients, LS-ESPRIT and SSA reconstruction.

Each method has a perturbed counterpart built from P0perp(delta) together
with the computable bound on its deviation from the noiseless answer.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass
from typing import Optional

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view
from scipy.linalg import LinAlgError, eigvals, solve, svdvals
from scipy.optimize import linear_sum_assignment

from ..errors import DegenerateRankError, InputError, RadiusError, SingularSystemError
from . import spectral
from .perturb import PerturbationPair, projector_direct
from .series import Series
from .trajectory import hankelize, matrix_to_series, max_norm, spectral_norm

logger = logging.getLogger(__name__)

NULL_COSINE_FLOOR = 1e-10


# ---------- Linear recurrent formulas ----------

@dataclass(frozen=True)
class LrfResult:
    """Coefficients R = (a_{L-1}, ..., a_1) of x_n = sum_k a_k x_{n-k}."""

    R: np.ndarray
    cos_to_null: float
    residual: Optional[float] = None
    relative_residual: Optional[float] = None

    @property
    def coefficients(self) -> np.ndarray:
        """a_1, ..., a_{L-1} in recurrence order."""
        return self.R[::-1]


@dataclass(frozen=True)
class LrfComparison:
    reference: LrfResult
    perturbed: LrfResult
    delta: float
    delta_p: float
    error: float
    bound: float

    @property
    def within_bound(self) -> bool:
        return self.error <= self.bound


def _lrf_from_null_projector(p0: np.ndarray, values: Optional[np.ndarray]) -> LrfResult:
    window = p0.shape[0]
    if window < 2:
        raise InputError("a recurrence needs window length L >= 2")
    last = p0[:, -1]
    energy = float(last[-1])
    if energy <= NULL_COSINE_FLOOR**2:
        raise DegenerateRankError(
            f"||P0 e_L|| = {math.sqrt(max(energy, 0.0)):.3e} vanishes: e_L lies in the signal subspace",
            precondition="nonvanishing P0 e_L",
        )
    r = -last[:-1] / energy
    cos_to_null = math.sqrt(min(max(1.0 - energy, 0.0), 1.0))
    if values is None:
        return LrfResult(r, cos_to_null)
    residual, relative = lrf_residual(r, values)
    return LrfResult(r, cos_to_null, residual, relative)


def lrf_residual(r: np.ndarray, values: np.ndarray) -> tuple[float, float]:
    """max_n |x_n - sum_k a_k x_{n-k}| over n >= L - 1, absolute and relative to max |x_n|."""

    values = np.asarray(values, dtype=float)
    window = r.size + 1
    if values.size < window:
        raise InputError(f"series of length {values.size} is shorter than the window {window}")
    frames = sliding_window_view(values, window)
    residual = float(np.max(np.abs(frames[:, :-1] @ r - frames[:, -1])))
    scale = float(np.max(np.abs(values)))
    return residual, residual / scale if scale > 0 else residual


def lrf_coefficients(
    dec: spectral.SpectralDecomposition,
    window: Optional[int] = None,
    series: Optional[Series | np.ndarray] = None,
) -> LrfResult:
    """R = -G_L P0 e_L / ||P0 e_L||^2 with an optional check on the generating series."""

    if window is not None and window != dec.size:
        raise InputError(f"window L={window} differs from the decomposition size {dec.size}")
    values = None if series is None else np.asarray(getattr(series, "values", series), dtype=float)
    return _lrf_from_null_projector(dec.P0, values)


def lrf_error_bound(delta_p: float, vartheta: float) -> float:
    """(dP / (1 - t^2)) (1 - dP / s)^-2 (1 + 2 / s) with s = sqrt(1 - t^2)."""

    if delta_p < 0 or not 0.0 <= vartheta < 1.0:
        raise InputError(f"need delta_p >= 0 and 0 <= vartheta < 1, got {delta_p}, {vartheta}")
    s = math.sqrt(1.0 - vartheta**2)
    if delta_p >= s:
        raise RadiusError(
            f"projector gap {delta_p:.4g} >= ||P0 e_L|| = {s:.4g}: LRF bound undefined",
            precondition="projector gap below ||P0 e_L||",
        )
    return delta_p / s**2 * (1.0 - delta_p / s) ** -2 * (1.0 + 2.0 / s)


def lrf_perturbed(
    pair: PerturbationPair,
    delta: float,
    d: Optional[int] = None,
    series: Optional[Series | np.ndarray] = None,
) -> LrfComparison:
    """R(delta) from P0(delta) = I - P0perp(delta), set against R and its bound."""

    d = pair.dec.rank if d is None else d
    if series is None:
        series = matrix_to_series(pair.H)
    values = np.asarray(getattr(series, "values", series), dtype=float)
    reference = _lrf_from_null_projector(pair.dec.P0, values)

    p_delta = projector_direct(pair, delta, d).matrix
    perturbed = _lrf_from_null_projector(np.eye(pair.L) - p_delta, values)
    gap = spectral_norm(p_delta - pair.dec.P0perp)
    try:
        bound = lrf_error_bound(gap, reference.cos_to_null)
    except RadiusError:
        logger.info("LRF bound undefined at delta=%g (gap %.3g)", delta, gap)
        bound = math.inf
    error = float(np.linalg.norm(perturbed.R - reference.R))
    return LrfComparison(reference, perturbed, delta, gap, error, bound)


# ---------- LS-ESPRIT ----------

@dataclass(frozen=True)
class EspritResult:
    D: np.ndarray
    eigenvalues: np.ndarray
    upsilon: float

    @property
    def frequencies(self) -> np.ndarray:
        return np.angle(self.eigenvalues) / (2 * np.pi)

    @property
    def moduli(self) -> np.ndarray:
        return np.abs(self.eigenvalues)


@dataclass(frozen=True)
class EspritComparison:
    """Noiseless D, the projected D_hat(delta) and the SVD-based D(delta) for one basis U."""

    reference: EspritResult
    projected: EspritResult
    observed: EspritResult
    delta: float
    delta_p: float
    vartheta: float
    error: float
    bound: float
    bound_basis_free: float

    @property
    def within_bound(self) -> bool:
        return self.error <= min(self.bound, self.bound_basis_free)


def _shift_blocks(u: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """U^T F1 U and U^T F2 U."""

    up, down = u[:-1], u[1:]
    return up.T @ up, up.T @ down


def esprit(u: np.ndarray) -> EspritResult:
    """D = (U^T F1 U)^-1 U^T F2 U for a basis U of the signal subspace.

    ``upsilon`` is the smallest singular value of U^T F1 U over ||U||^2.
    """

    u = np.atleast_2d(np.asarray(u, dtype=float))
    rows, d = u.shape
    if rows < 2 or d >= rows:
        raise InputError(f"basis of shape {u.shape} needs more rows than columns")
    if spectral.orthonormal_range(u).shape[1] < d:
        raise SingularSystemError(
            "basis columns are linearly dependent", precondition="independent basis columns"
        )
    m1, m2 = _shift_blocks(u)
    sv = svdvals(m1)
    if sv[-1] <= 1e-12 * max(sv[0], 1.0):
        raise SingularSystemError("U^T F1 U is singular", precondition="invertible U^T F1 U")
    try:
        d_matrix = solve(m1, m2, assume_a="sym")
    except LinAlgError as exc:
        raise SingularSystemError(str(exc), precondition="invertible U^T F1 U") from exc
    upsilon = float(sv[-1] / np.linalg.norm(u, 2) ** 2)
    return EspritResult(d_matrix, eigvals(d_matrix), upsilon)


def match_roots(found: np.ndarray, expected: np.ndarray) -> np.ndarray:
    """Distances |z_i - w_pi(i)| under the assignment minimising their sum."""

    found = np.asarray(found, dtype=complex).ravel()
    expected = np.asarray(expected, dtype=complex).ravel()
    if found.size != expected.size:
        raise InputError(f"cannot match {found.size} roots against {expected.size}")
    cost = np.abs(found[:, None] - expected[None, :])
    rows, cols = linear_sum_assignment(cost)
    return cost[rows, cols]


def esprit_error_bound(delta_p: float, upsilon: float) -> float:
    """(2 dP / u) (1 + 1 / (1 - 2 dP / u)) for dP < u / 2."""

    if delta_p < 0 or upsilon <= 0:
        raise InputError(f"need delta_p >= 0 and upsilon > 0, got {delta_p}, {upsilon}")
    ratio = 2.0 * delta_p / upsilon
    if ratio >= 1.0:
        raise RadiusError(
            f"projector gap {delta_p:.4g} >= upsilon / 2 = {upsilon / 2:.4g}: ESPRIT bound undefined",
            precondition="projector gap below upsilon / 2",
        )
    return ratio * (1.0 + 1.0 / (1.0 - ratio))


def esprit_error_bound_basis_free(delta_p: float, vartheta: float) -> float:
    """Same bound with 1 - vartheta^2 in place of upsilon."""

    return esprit_error_bound(delta_p, 1.0 - vartheta**2)


def esprit_perturbed(
    pair: PerturbationPair,
    delta: float,
    d: Optional[int] = None,
    basis: Optional[np.ndarray] = None,
) -> EspritComparison:
    d = pair.dec.rank if d is None else d
    u = pair.dec.basis[:, :d] if basis is None else np.asarray(basis, dtype=float)
    reference = esprit(u)

    p_delta = projector_direct(pair, delta, d).matrix
    gap = spectral_norm(p_delta - pair.dec.P0perp)
    if gap >= 1.0:
        raise SingularSystemError(
            f"projector gap {gap:.4g} >= 1: projected basis may be dependent",
            precondition="projector gap below 1",
        )
    projected = esprit(p_delta @ u)
    observed_basis, _ = spectral.leading_subspace(pair.observed(delta), d)
    observed = esprit(observed_basis)

    vartheta = math.sqrt(min(max(pair.dec.P0perp[-1, -1], 0.0), 1.0))
    bounds = []
    for fn, arg in ((esprit_error_bound, reference.upsilon), (esprit_error_bound_basis_free, vartheta)):
        try:
            bounds.append(fn(gap, arg))
        except RadiusError:
            bounds.append(math.inf)
    error = float(np.linalg.norm(projected.D - reference.D, 2))
    logger.debug("ESPRIT at delta=%g: gap %.3g error %.3g bound %.3g", delta, gap, error, bounds[0])
    return EspritComparison(reference, projected, observed, delta, gap, vartheta, error, *bounds)


# ---------- SSA reconstruction ----------

@dataclass(frozen=True)
class SsaReconstruction:
    series: Series
    errors: np.ndarray
    error_max: float
    delta_matrix: np.ndarray

    @property
    def sandwich(self) -> tuple[float, float, float]:
        """||S Delta||_max <= ||Delta||_max <= ||Delta||."""

        return self.error_max, max_norm(self.delta_matrix), spectral_norm(self.delta_matrix)


def ssa_reconstruct(pair: PerturbationPair, delta: float, d: Optional[int] = None) -> SsaReconstruction:
    """F~(delta) from the rank-d projection of H + delta E, and its deviation from F."""

    d = pair.dec.rank if d is None else d
    observed = pair.observed(delta)
    p_delta = projector_direct(pair, delta, d).matrix
    approx = p_delta @ observed
    reconstructed = matrix_to_series(hankelize(approx))
    signal = matrix_to_series(pair.H)
    errors = reconstructed.values - signal.values
    return SsaReconstruction(
        reconstructed,
        errors,
        float(np.max(np.abs(errors))),
        approx - pair.dec.P0perp @ pair.H,
    )
