"""Rank-one signal/noise pairs whose projector perturbation is known in closed form.

Two families are covered: the exponential signal a^n with a constant noise,
and the constant signal with the saw noise (-1)^n.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass
from typing import Literal, Optional, Sequence

import numpy as np
import pandas as pd

from ..errors import InputError, SeriesRangeError
from ..schemas import Constant, ExponentialSum, ExpTerm, Saw, WindowRule
from . import perturb
from .series import generate
from .trajectory import spectral_norm

logger = logging.getLogger(__name__)

# a^(2N) must stay below this
EXP_RANGE_LIMIT = 1e300

Parity = Literal["even_even", "odd_K_even_L", "odd_L_even_K", "odd_odd"]


# ---------- Exponential signal, constant noise ----------

def _exp_vector(a: float, length: int) -> np.ndarray:
    return np.power(a, np.arange(length, dtype=float))


def max_exp_length(a: float) -> int:
    """Largest N with a^(2N) < EXP_RANGE_LIMIT."""

    return int(math.floor(math.log(EXP_RANGE_LIMIT) / (2.0 * math.log(a))))


def _check_exp(a: float, n: int) -> None:
    if not a > 1.0:
        raise InputError(f"exponential base must exceed 1, got {a}")
    limit = max_exp_length(a)
    if n > limit:
        raise SeriesRangeError(f"a^(2N) overflows for N={n} > {limit} at a={a}", max_safe_n=limit)


@dataclass(frozen=True)
class ExpConstPlane:
    """Operators restricted to span{W_L, E_L}, coordinates (q1, q2) with q1 = W_L / ||W_L||.

    ``off_residual`` is the off-diagonal entry of Delta P - delta V0^(1),
    evaluated without cancellation.
    """

    L: int
    K: int
    delta: float
    delta_p: np.ndarray
    z1: np.ndarray
    z2: np.ndarray
    v01: np.ndarray
    sine: float
    off_residual: float

    @property
    def delta_p_norm(self) -> float:
        return abs(self.sine)

    @property
    def res_z1(self) -> float:
        s2 = self.sine**2
        m = np.array([[-s2 - self.delta * self.z1[0, 0], self.off_residual], [self.off_residual, s2]])
        return float(np.linalg.norm(m, 2))

    @property
    def res_v01(self) -> float:
        return math.hypot(self.sine**2, self.off_residual)


def _split(w: np.ndarray) -> tuple[float, float, float]:
    """||W||, beta = W^T E and the component of E orthogonal to W."""

    w_norm = float(np.linalg.norm(w))
    beta = float(np.sum(w))
    along = beta / w_norm
    across = math.sqrt(max(w.size - along * along, 0.0))
    return w_norm, beta, across


def _off_diagonal_excess(lead: float, g: float, al: float, ak: float, rk: float, K: int, delta: float, m: tuple) -> float:
    """(1/2) sin(2 theta) - lead through logarithms of ratios close to one."""

    m11, m22, m12 = m
    u = delta * al * ak / g
    v = (delta * al * rk / g) ** 2
    w = delta * al * K / (g * ak) if ak else math.inf
    rho, tau = m22 / m11, m12 / m11
    if lead == 0 or not (1.0 + w > 0 and 1.0 + u > 0 and rho < 1.0):
        return m12 / math.hypot(m11 - m22, 2.0 * m12) - lead
    log_ratio = (
        math.log1p(w)
        - 2.0 * math.log1p(u)
        - math.log1p(v / (1.0 + u) ** 2)
        - math.log1p(-rho)
        - 0.5 * math.log1p(4.0 * tau * tau / (1.0 - rho) ** 2)
    )
    return lead * math.expm1(log_ratio)


def exp_const_plane(a: float, delta: float, L: int, K: int) -> ExpConstPlane:
    """Exact projector gap of a^n + delta * 1 at window L, evaluated in two dimensions."""

    if min(L, K) < 2:
        raise InputError(f"need min(L, K) >= 2, got L={L}, K={K}")
    _check_exp(a, L + K - 1)
    wl, beta_l, rl = _split(_exp_vector(a, L))
    wk, beta_k, rk = _split(_exp_vector(a, K))
    al, ak = beta_l / wl, beta_k / wk
    g = wl * wk

    # H + delta E = Q C P^T
    core = np.array(
        [[g + delta * al * ak, delta * al * rk], [delta * rl * ak, delta * rl * rk]]
    )
    m11 = core[0] @ core[0]
    m22 = core[1] @ core[1]
    m12 = core[0] @ core[1]
    angle = 0.5 * math.atan2(2.0 * m12, m11 - m22)
    s, c = math.sin(angle), math.cos(angle)
    delta_p = np.array([[-s * s, s * c], [s * c, s * s]])

    k = beta_k / (wl * wk * wk)
    z1 = k * np.array([[2.0 * al, rl], [rl, 0.0]])
    z2 = k * al * np.array([[1.0, 0.0], [0.0, 0.0]])
    off = _off_diagonal_excess(delta * k * rl, g, al, ak, rk, K, delta, (m11, m22, m12))
    return ExpConstPlane(L, K, delta, delta_p, z1, z2, z1 - 2.0 * z2, s, off)


def h_constant(a: float, L: int) -> float:
    """((a + 1) / a) a^L sqrt(L ||W_L||^2 - beta_L^2) / ||W_L||^2."""

    w = _exp_vector(a, L)
    w2 = float(w @ w)
    beta = float(np.sum(w))
    return (a + 1.0) / a * a**L * math.sqrt(max(L * w2 - beta * beta, 0.0)) / w2


def exp_const_limits(a: float, delta: float, window: WindowRule) -> tuple[float, Optional[float]]:
    """Limits of the normalised gap and of the normalised residual after delta Z1.

    The gap is scaled by a^N / sqrt(N) except for ``fixed_L`` where it is a^N;
    the residual limit is None for ``fixed_L``.
    """

    spread = (a + 1.0) * math.sqrt(a * a - 1.0) / a
    second = 2.0 * abs(delta) * (a + 1.0) ** 2 / a
    if window.kind == "proportional":
        return abs(delta) * math.sqrt(window.alpha) * spread, second
    if window.kind == "fixed_K":
        shrink = 1.0 + a ** (-window.value)
        return abs(delta) * spread / shrink, second / shrink
    return abs(delta) * h_constant(a, int(window.value)), None


@dataclass(frozen=True)
class ExpConstExample:
    a: float
    delta: float
    window: WindowRule
    limit_first: float
    limit_second: Optional[float]
    records: pd.DataFrame

    @property
    def final_ratio(self) -> float:
        """Normalised gap at the largest N over its limit."""
        return float(self.records["first"].iloc[-1] / self.limit_first)


def example_exp_const(a: float, delta: float, window: WindowRule, n_grid: Sequence[int]) -> ExpConstExample:
    _check_exp(a, max(n_grid))
    limit_first, limit_second = exp_const_limits(a, delta, window)
    rows = []
    for n in n_grid:
        L, K = window.dims(n)
        plane = exp_const_plane(a, delta, L, K)
        gap = plane.delta_p_norm
        scale = a**n if window.kind == "fixed_L" else a**n / math.sqrt(n)
        res_z1 = plane.res_z1
        res_v01 = plane.res_v01
        rows.append(
            {
                "N": n,
                "L": L,
                "K": K,
                "delta_p": gap,
                "res_z1": res_z1,
                "res_v01": res_v01,
                "v01_norm": float(np.linalg.norm(plane.v01, 2)),
                "first": scale * gap,
                "second": a**n * res_z1,
                "v01_scaled": a ** (2 * n) / n * res_v01,
            }
        )
    records = pd.DataFrame(rows)
    logger.debug("exp/const a=%g: final ratio %.4f", a, records["first"].iloc[-1] / limit_first)
    return ExpConstExample(a, delta, window, limit_first, limit_second, records)


def exp_const_pair(a: float, L: int, K: int) -> perturb.PerturbationPair:
    """Full-size pair for cross checks at moderate N."""

    n = L + K - 1
    _check_exp(a, n)
    signal = generate(ExponentialSum(terms=[ExpTerm(beta=1.0, a=a)]), n)
    return perturb.pair_from_series(signal, generate(Constant(), n), L, rank=1)


# ---------- Constant signal, saw noise ----------

def parity_case(L: int, K: int) -> Parity:
    if L % 2 == 0 and K % 2 == 0:
        return "even_even"
    if L % 2 == 0:
        return "odd_K_even_L"
    if K % 2 == 0:
        return "odd_L_even_K"
    return "odd_odd"


def _check_const_saw(delta: float, L: int, K: int) -> None:
    if abs(delta) >= 0.5:
        raise InputError(f"const/saw closed forms need |delta| < 1/2, got {delta}")
    if min(L, K) < 2:
        raise InputError(f"need min(L, K) > 1, got L={L}, K={K}")


def const_saw_main_term(delta: float, L: int, K: int) -> np.ndarray:
    """M(delta) built from W_E = W_L E_Lw^T + E_Lw W_L^T with E_Lw = E_L - beta_L W_L / L."""

    _check_const_saw(delta, L, K)
    w = np.ones(L)
    e = np.where(np.arange(L) % 2 == 0, 1.0, -1.0)
    e_w = e - float(w @ e) * w / L
    w_e = np.outer(w, e_w) + np.outer(e_w, w)
    lead = delta / (1.0 - delta**2)
    case = parity_case(L, K)
    if case == "even_even":
        return np.zeros((L, L))
    if case == "odd_K_even_L":
        return lead * w_e / (L * K)
    root = math.sqrt(L * L - 1.0)
    if case == "odd_L_even_K":
        return delta * lead * w_e / (L * root)
    return lead * (1.0 / K + delta / L) * w_e / root


def const_saw_norm(delta: float, L: int, K: int) -> float:
    _check_const_saw(delta, L, K)
    lead = abs(delta) / (1.0 - delta**2)
    case = parity_case(L, K)
    if case == "even_even":
        return 0.0
    if case == "odd_K_even_L":
        return lead / K
    if case == "odd_L_even_K":
        return lead * abs(delta) / L
    return lead * abs(1.0 / K + delta / L)


@dataclass(frozen=True)
class ConstSawExample:
    delta: float
    L: int
    K: int
    parity: Parity
    M: np.ndarray
    norm_closed: float
    norm_matrix: float
    delta_p: float
    residual: float
    cancellation: bool

    @property
    def zero_perturbation(self) -> bool:
        return self.parity == "even_even"


def const_saw_pair(L: int, K: int) -> perturb.PerturbationPair:
    n = L + K - 1
    return perturb.pair_from_series(generate(Constant(), n), generate(Saw(), n), L, rank=1)


def example_const_saw(delta: float, L: int, K: int, pair: Optional[perturb.PerturbationPair] = None) -> ConstSawExample:
    """M(delta) and its norm two ways, plus the oracle gap and residual."""

    m = const_saw_main_term(delta, L, K)
    closed = const_saw_norm(delta, L, K)
    case = parity_case(L, K)
    pair = const_saw_pair(L, K) if pair is None else pair
    gap_matrix = perturb.delta_projector(pair, delta, 1)
    scale = 1.0 / K + abs(delta) / L
    cancellation = case == "odd_odd" and abs(1.0 / K + delta / L) <= 1e-9 * scale
    if cancellation:
        logger.info("const/saw L=%d K=%d delta=%g: first-order term cancels, gap is O(L^-2)", L, K, delta)
    return ConstSawExample(
        delta=delta,
        L=L,
        K=K,
        parity=case,
        M=m,
        norm_closed=closed,
        norm_matrix=spectral_norm(m, method="svd") if m.any() else 0.0,
        delta_p=spectral_norm(gap_matrix, method="svd"),
        residual=spectral_norm(gap_matrix - m, method="svd"),
        cancellation=cancellation,
    )
