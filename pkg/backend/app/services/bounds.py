"""Computable upper bounds on the projector perturbation and orthogonality diagnostics."""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass, fields
from typing import NamedTuple, Optional

import numpy as np

from ..errors import InputError
from . import spectral
from .perturb import TAIL_CONSTANT, PerturbationPair, b_norm_bound, b_of_delta, radius_delta0, series_tail

C = TAIL_CONSTANT


def tail_bound(beta: float, k: int) -> float:
    """C (4 beta)^k / (1 - 4 beta) for 0 < beta < 1/4."""

    if not 0.0 < beta < 0.25:
        raise InputError(f"tail bound needs 0 < beta < 1/4, got {beta}")
    if k < 0:
        raise InputError(f"tail index must be nonnegative, got {k}")
    return series_tail(beta, k)


def _opnorm(m: np.ndarray) -> float:
    return float(np.linalg.norm(m, 2)) if m.size else 0.0


def _ratio(num: float, den: float) -> float:
    return num / den if den > 0 else 0.0


def _scaled(value: float, beta: float) -> float:
    """value / (1 - 4 beta), infinite once beta reaches 1/4."""

    return value / (1.0 - 4.0 * beta) if beta < 0.25 else math.inf


def max_cosine(m1: np.ndarray, m2: np.ndarray) -> float:
    """Cosine of the minimal principal angle between the column spaces of m1 and m2."""

    q1 = spectral.orthonormal_range(m1)
    q2 = spectral.orthonormal_range(m2)
    if q1.shape[1] == 0 or q2.shape[1] == 0:
        return 0.0
    return float(min(np.linalg.svd(q1.T @ q2, compute_uv=False)[0], 1.0))


@dataclass(frozen=True)
class BoundsReport:
    """Every bound at one delta; rhs_* fields come with ``valid_*`` flags."""

    delta: float
    theta1: float
    theta2: float
    theta: float
    beta: float
    beta_bound: float
    cos_theta_r: float
    cos_theta_l: float
    sbp_norm: float
    sb_norm: float
    sb_upper: float
    rhs_thm3: float
    valid_thm3: bool
    rhs_cor1: float
    rhs_cor1_scalar: float
    valid_cor1: bool
    rhs_cor2: float
    rhs_cor2_scalar: float
    valid_cor2: bool
    rhs_thm4: float
    valid_thm4: bool
    rhs_thm5: float
    valid_thm5: bool
    rhs_thm6: float
    valid_thm6: bool
    he_norm: float
    hte_norm: float
    s0_he_p0: float
    s0_ee_p0: float
    he_over_mu: float
    s0_a2_norm: float
    delta0_half: float
    delta0_quarter: float

    def as_row(self) -> dict:
        return asdict(self)


BOUNDS_COLUMNS = tuple(f.name for f in fields(BoundsReport))


def compute_bounds(pair: PerturbationPair, delta: float) -> BoundsReport:
    dec = pair.dec
    h, e = pair.H, pair.E
    mu_min, mu_max, nu_max = dec.mu_min, dec.mu_max, pair.nu_max

    theta1 = math.sqrt(nu_max / mu_max)
    theta2 = mu_max / mu_min
    b = b_of_delta(pair, delta)
    beta = _opnorm(b) / mu_min
    beta_bound = b_norm_bound(pair, delta) / mu_min
    beta_scalar = 2 * abs(delta) * theta1 * theta2 + delta**2 * theta1**2 * theta2

    cos_r = max_cosine(h.T, e.T)
    cos_l = max_cosine(h, e)

    s0b = dec.S0 @ b
    sb = _opnorm(s0b)
    sbp = _opnorm(s0b @ dec.P0)
    sb_upper = abs(delta) * theta1 * theta2 * (2 * cos_r + abs(delta) * theta1 * cos_l)

    # the scalar majorant is monotone in |delta|, so beta_bound < 1/2 keeps the whole path inside the radius
    valid_main = beta < 0.25 and beta_bound < 0.5
    valid_fine = beta_bound < 0.25
    valid_scalar = beta_scalar < 0.25

    he = h @ e.T
    return BoundsReport(
        delta=delta,
        theta1=theta1,
        theta2=theta2,
        theta=theta1 * theta2,
        beta=beta,
        beta_bound=beta_bound,
        cos_theta_r=cos_r,
        cos_theta_l=cos_l,
        sbp_norm=sbp,
        sb_norm=sb,
        sb_upper=sb_upper,
        rhs_thm3=_scaled(4 * C * sbp, beta),
        valid_thm3=valid_main,
        rhs_cor1=_scaled(4 * C * beta, beta),
        rhs_cor1_scalar=_scaled(4 * C * beta_scalar, beta_scalar),
        valid_cor1=valid_main,
        rhs_cor2=_scaled(4 * C * sb, beta),
        rhs_cor2_scalar=_scaled(4 * C * sb_upper, beta_scalar) if valid_scalar else math.inf,
        valid_cor2=valid_main,
        rhs_thm4=_scaled(16 * C * beta**2, beta),
        valid_thm4=valid_main,
        rhs_thm5=_scaled(16 * C * sb * sbp, beta),
        valid_thm5=valid_fine,
        rhs_thm6=_scaled(16 * C * sbp**2, beta),
        valid_thm6=valid_fine,
        he_norm=_opnorm(he),
        hte_norm=_opnorm(h.T @ e),
        s0_he_p0=_opnorm(dec.S0 @ he @ dec.P0),
        s0_ee_p0=_opnorm(dec.S0 @ pair.A2 @ dec.P0),
        he_over_mu=_opnorm(he) / mu_min,
        s0_a2_norm=_opnorm(dec.S0 @ pair.A2),
        delta0_half=radius_delta0(pair, 0.5),
        delta0_quarter=radius_delta0(pair, 0.25),
    )


class Sandwich(NamedTuple):
    lhs: float
    mid: float
    rhs: float


def sandwich_check(m1: np.ndarray, m2: np.ndarray, eps: Optional[float] = None) -> Sandwich:
    """sigma1_min sigma2_min cos <= ||M1^T M2|| <= ||M1|| ||M2|| cos."""

    m1 = np.atleast_2d(np.asarray(m1, dtype=float))
    m2 = np.atleast_2d(np.asarray(m2, dtype=float))
    if not np.any(m1) or not np.any(m2):
        raise InputError("sandwich check needs two nonzero matrices")
    s1 = np.linalg.svd(m1, compute_uv=False)
    s2 = np.linalg.svd(m2, compute_uv=False)
    floor = 1e-10 if eps is None else eps
    s1_min = s1[s1 > math.sqrt(floor) * s1[0]][-1]
    s2_min = s2[s2 > math.sqrt(floor) * s2[0]][-1]
    cos = max_cosine(m1, m2)
    return Sandwich(s1_min * s2_min * cos, _opnorm(m1.T @ m2), s1[0] * s2[0] * cos)


@dataclass(frozen=True)
class ZeroPerturbationReport:
    """Residuals of the zero-perturbation conditions, normalised to be scale free."""

    cond2: tuple[float, float]
    cond4: tuple[float, float]
    cond5: tuple[float, float]
    right_orthogonality: float
    left_orthogonality: float
    he_over_mu: float
    tol: float

    @property
    def pass2(self) -> bool:
        return max(self.cond2) <= self.tol

    @property
    def pass4(self) -> bool:
        return max(self.cond4) <= self.tol

    @property
    def pass5(self) -> bool:
        return max(self.cond5) <= self.tol

    @property
    def right_orthogonal(self) -> bool:
        return self.right_orthogonality <= self.tol

    @property
    def left_orthogonal(self) -> bool:
        return self.left_orthogonality <= self.tol

    @property
    def biorthogonal(self) -> bool:
        return self.right_orthogonal and self.left_orthogonal

    @property
    def zero_perturbation(self) -> bool:
        return self.pass2

    @property
    def consistent(self) -> bool:
        return self.pass2 == self.pass4 == self.pass5


def check_zero_perturbation(pair: PerturbationPair, tol: float = 1e-9) -> ZeroPerturbationReport:
    """Orthogonality conditions under which P0perp(delta) = P0perp for all small delta."""

    dec = pair.dec
    h, e = pair.H, pair.E
    h_norm = math.sqrt(dec.mu_max)
    e_norm = math.sqrt(pair.nu_max)
    he_scale = h_norm * e_norm
    ee_scale = e_norm**2
    mu = dec.mu_min

    he = h @ e.T
    ee = pair.A2
    s_he_p = dec.S0 @ he @ dec.P0
    s_ee_p = dec.S0 @ ee @ dec.P0
    cond2 = (_ratio(mu * _opnorm(s_he_p), he_scale), _ratio(mu * _opnorm(s_ee_p), ee_scale))
    cond4 = (
        _ratio(mu * _opnorm(s_he_p + dec.P0 @ he @ dec.S0), he_scale),
        _ratio(mu * _opnorm(s_ee_p + dec.P0 @ ee @ dec.S0), ee_scale),
    )
    cond5 = (
        _ratio(_opnorm(he @ dec.P0), he_scale),
        _ratio(_opnorm(h.T @ ee @ dec.P0), h_norm * ee_scale),
    )
    return ZeroPerturbationReport(
        cond2=cond2,
        cond4=cond4,
        cond5=cond5,
        right_orthogonality=_ratio(_opnorm(he), he_scale),
        left_orthogonality=_ratio(_opnorm(h.T @ e), he_scale),
        he_over_mu=_opnorm(he) / mu,
        tol=tol,
    )
