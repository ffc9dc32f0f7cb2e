"""Perturbation of the signal projector of H + delta E.

The projector onto the d leading left singular vectors of H + delta E is
expanded in powers of B(delta) = delta A1 + delta^2 A2 around the projector
of H, with A1 = H E^T + E H^T and A2 = E E^T. Besides the truncated series
this module evaluates the closed-form main terms W1, V0^(n), L, K and T, and
an SVD oracle for the exact projector.
"""

from __future__ import annotations

import itertools
import logging
import math
from dataclasses import dataclass
from typing import Iterator, Literal, Optional

import numpy as np
from scipy.linalg import eigvalsh, solve

from ..config import get_settings
from ..errors import InputError, RadiusError
from . import spectral
from .series import Series
from .spectral import SpectralDecomposition
from .trajectory import embed

logger = logging.getLogger(__name__)

# C(2p, p) <= TAIL_CONSTANT * 4^p for p >= 1
TAIL_CONSTANT = math.exp(1.0 / 6.0) / math.sqrt(math.pi)
ENUMERATION_MAX_ORDER = 6

OperatorKind = Literal["direct", "series", "W1", "V01", "V02", "Ldelta", "Kdelta", "Tdelta"]


def _sym(a: np.ndarray) -> np.ndarray:
    return 0.5 * (a + a.T)


def _sym_norm(a: np.ndarray) -> float:
    if not a.size:
        return 0.0
    ev = eigvalsh(a)
    return float(max(abs(ev[0]), abs(ev[-1])))


@dataclass(frozen=True)
class PerturbationPair:
    """Signal H, noise E and the operators derived from them."""

    H: np.ndarray
    E: np.ndarray
    dec: SpectralDecomposition
    A1: np.ndarray
    A2: np.ndarray
    norm_a1: float
    norm_a2: float

    @classmethod
    def build(cls, h: np.ndarray, e: np.ndarray, rank: Optional[int] = None) -> "PerturbationPair":
        h = np.atleast_2d(np.asarray(h, dtype=float))
        e = np.atleast_2d(np.asarray(e, dtype=float))
        if h.shape != e.shape:
            raise InputError(f"signal {h.shape} and noise {e.shape} matrices differ in shape")
        dec = spectral.decompose(h, rank=rank)
        a1 = _sym(h @ e.T + e @ h.T)
        a2 = _sym(e @ e.T)
        return cls(h, e, dec, a1, a2, _sym_norm(a1), _sym_norm(a2))

    @property
    def L(self) -> int:
        return self.H.shape[0]

    @property
    def K(self) -> int:
        return self.H.shape[1]

    @property
    def nu_max(self) -> float:
        return self.norm_a2

    def observed(self, delta: float) -> np.ndarray:
        return self.H + delta * self.E


def pair_from_series(signal: Series, noise: Series, window: int, rank: Optional[int] = None) -> PerturbationPair:
    """Trajectory matrices of two equally long series at window length ``window``."""

    if len(signal) != len(noise):
        raise InputError(f"signal length {len(signal)} differs from noise length {len(noise)}")
    return PerturbationPair.build(embed(signal, window), embed(noise, window), rank=rank)


@dataclass(frozen=True)
class DeltaOperator:
    """An L x L operator evaluated at a concrete delta."""

    delta: float
    matrix: np.ndarray
    kind: OperatorKind
    order: Optional[int] = None
    tail_bound: Optional[float] = None


# ---------- B(delta) and the radius ----------

def b_of_delta(pair: PerturbationPair, delta: float) -> np.ndarray:
    return delta * pair.A1 + delta**2 * pair.A2


def b_norm_bound(pair: PerturbationPair, delta: float) -> float:
    """Scalar majorant |delta| ||A1|| + delta^2 ||A2|| of ||B(delta)||."""

    return abs(delta) * pair.norm_a1 + delta**2 * pair.norm_a2


def radius_delta0(pair: PerturbationPair, fraction: float = 0.5) -> float:
    """Positive root of delta ||A1|| + delta^2 ||A2|| = fraction * mu_min."""

    a1, a2 = pair.norm_a1, pair.norm_a2
    if a1 == 0 and a2 == 0:
        return math.inf
    target = fraction * pair.dec.mu_min
    return 2.0 * target / (a1 + math.sqrt(a1 * a1 + 4.0 * a2 * target))


def expansion_status(pair: PerturbationPair, delta: float) -> str:
    """``certified`` (beta < 1/4), ``valid_no_tail`` (beta < 1/2) or ``divergent``."""

    beta = b_norm_bound(pair, delta) / pair.dec.mu_min
    if beta < 0.25:
        return "certified"
    if beta < 0.5:
        return "valid_no_tail"
    return "divergent"


def series_tail(beta: float, order: int) -> float:
    """C (4 beta)^order / (1 - 4 beta), majorant of sum_{p >= order} C(2p, p) beta^p."""

    return TAIL_CONSTANT * (4.0 * beta) ** order / (1.0 - 4.0 * beta)


def _certified_beta(pair: PerturbationPair, delta: float) -> float:
    beta = b_norm_bound(pair, delta) / pair.dec.mu_min
    if beta >= 0.25:
        raise RadiusError(
            f"B(delta)/mu_min = {beta:.4g} >= 1/4 at delta={delta:g}: "
            + ("expansion valid, tail bound unavailable" if beta < 0.5 else "expansion diverges")
        )
    return beta


# ---------- Oracle ----------

def projector_direct(pair: PerturbationPair, delta: float, rank: Optional[int] = None) -> DeltaOperator:
    """Projector onto the d leading left singular vectors of H + delta E."""

    d = pair.dec.rank if rank is None else rank
    basis, _ = spectral.leading_subspace(pair.observed(delta), d)
    return DeltaOperator(delta, spectral.projector_onto(basis), "direct")


def delta_projector(pair: PerturbationPair, delta: float, rank: Optional[int] = None) -> np.ndarray:
    """P0perp(delta) - P0perp from the oracle."""

    return projector_direct(pair, delta, rank).matrix - pair.dec.P0perp


# ---------- Series of the perturbed projector ----------

def _s0_stack(dec: SpectralDecomposition, top: int) -> np.ndarray:
    return np.stack([spectral.s0_power(dec, k) for k in range(top + 1)])


def compositions(total: int, parts: int) -> Iterator[tuple[int, ...]]:
    """All tuples of ``parts`` nonnegative integers summing to ``total``."""

    for bars in itertools.combinations(range(total + parts - 1), parts - 1):
        edges = (-1,) + bars + (total + parts - 1,)
        yield tuple(edges[i + 1] - edges[i] - 1 for i in range(parts))


def _enumerated_term(spow: np.ndarray, factors: list[np.ndarray], sign: float) -> np.ndarray:
    """sign * sum over compositions l of S^(l1) F1 S^(l2) ... Fp S^(l_{p+1})."""

    p = len(factors)
    out = np.zeros_like(spow[0])
    for ls in compositions(p, p + 1):
        term = spow[ls[0]]
        for factor, l in zip(factors, ls[1:]):
            term = term @ factor @ spow[l]
        out += term
    return sign * out


def _recursive_terms(spow: np.ndarray, b: np.ndarray, order: int) -> list[np.ndarray]:
    """W_1 .. W_order by accumulating partial sums F[m][s] = sum_t F[m-1][s-t] B S^(t)."""

    partial = spow.copy()
    terms = []
    for m in range(2, order + 2):
        left = np.matmul(partial, b)
        nxt = np.zeros_like(partial)
        for t in range(order + 1):
            nxt[t:] += np.matmul(left[: order + 1 - t], spow[t])
        partial = nxt
        terms.append((-1) ** (m - 1) * partial[m - 1])
    return terms


def w_term(pair: PerturbationPair, delta: float, p: int) -> np.ndarray:
    """The order-p term W_p(delta) of the projector series."""

    if p < 1:
        raise InputError(f"series term order must be >= 1, got {p}")
    b = b_of_delta(pair, delta)
    spow = _s0_stack(pair.dec, p)
    if p <= ENUMERATION_MAX_ORDER:
        return _sym(_enumerated_term(spow, [b] * p, (-1.0) ** p))
    return _sym(_recursive_terms(spow, b, p)[-1])


def truncation_order(beta: float, tol: float) -> int:
    """Smallest P with series_tail(beta, P + 1) <= tol."""

    if beta == 0:
        return 0
    order = math.log(tol * (1.0 - 4.0 * beta) / TAIL_CONSTANT) / math.log(4.0 * beta) - 1.0
    return max(0, math.ceil(order))


def series_projector(pair: PerturbationPair, delta: float, tol: Optional[float] = None) -> DeltaOperator:
    """P0perp + W_1 + ... + W_P with a certified truncation tail below ``tol``."""

    settings = get_settings()
    tol = settings.series_tol if tol is None else tol
    beta = _certified_beta(pair, delta)
    order = truncation_order(beta, tol)
    if order > settings.max_series_order:
        raise RadiusError(
            f"truncation order {order} exceeds the cap {settings.max_series_order} (beta={beta:.4g})"
        )
    result = pair.dec.P0perp.copy()
    if order > 0:
        spow = _s0_stack(pair.dec, order)
        for term in _recursive_terms(spow, b_of_delta(pair, delta), order):
            result += term
    tail = series_tail(beta, order + 1) if beta > 0 else 0.0
    logger.debug("series projector: beta=%.3g order=%d tail=%.3g", beta, order, tail)
    return DeltaOperator(delta, _sym(result), "series", order=order, tail_bound=tail)


def v_coefficient(pair: PerturbationPair, n: int) -> np.ndarray:
    """Coefficient of delta^n in the expansion of P0perp(delta)."""

    if not 1 <= n <= ENUMERATION_MAX_ORDER:
        raise InputError(f"coefficient order must lie in [1, {ENUMERATION_MAX_ORDER}], got {n}")
    spow = _s0_stack(pair.dec, n)
    a = {1: pair.A1, 2: pair.A2}
    out = np.zeros_like(pair.A1)
    for p in range(math.ceil(n / 2), n + 1):
        for steps in itertools.product((1, 2), repeat=p):
            if sum(steps) != n:
                continue
            out += _enumerated_term(spow, [a[s] for s in steps], (-1.0) ** p)
    return _sym(out)


# ---------- Main terms ----------

def V0_1(pair: PerturbationPair) -> np.ndarray:
    dec = pair.dec
    return _sym(dec.P0 @ pair.A1 @ dec.S0 + dec.S0 @ pair.A1 @ dec.P0)


def V0_2(pair: PerturbationPair) -> np.ndarray:
    p0, s0, a1, a2 = pair.dec.P0, pair.dec.S0, pair.A1, pair.A2
    s02 = s0 @ s0
    out = (
        p0 @ a2 @ s0 + s0 @ a2 @ p0
        + p0 @ a1 @ p0 @ a1 @ s02
        + p0 @ a1 @ s02 @ a1 @ p0
        + s02 @ a1 @ p0 @ a1 @ p0
        - p0 @ a1 @ s0 @ a1 @ s0
        - s0 @ a1 @ p0 @ a1 @ s0
        - s0 @ a1 @ s0 @ a1 @ p0
    )
    return _sym(out)


def W1(pair: PerturbationPair, delta: float) -> np.ndarray:
    dec = pair.dec
    second = dec.P0 @ pair.A2 @ dec.S0 + dec.S0 @ pair.A2 @ dec.P0
    return _sym(delta * V0_1(pair) + delta**2 * second)


def _resolvents(pair: PerturbationPair, delta: float) -> tuple[np.ndarray, list[np.ndarray]]:
    """A0 = P0 A2 P0 and (I - delta^2 A0 / mu)^-1 for every positive cluster."""

    dec = pair.dec
    if delta**2 * pair.norm_a2 >= dec.mu_min:
        raise RadiusError(
            f"delta^2 ||A2|| / mu_min = {delta**2 * pair.norm_a2 / dec.mu_min:.4g} >= 1: resolvent may be singular"
        )
    a0 = _sym(dec.P0 @ pair.A2 @ dec.P0)
    eye = np.eye(pair.L)
    return a0, [solve(eye - delta**2 * a0 / c.mu, eye) for c in dec.positive_clusters]


def _l1(pair: PerturbationPair, delta: float, b: np.ndarray, resolvents: list[np.ndarray]) -> np.ndarray:
    out = np.zeros_like(b)
    for c, g in zip(pair.dec.positive_clusters, resolvents):
        out += c.projector @ b @ pair.dec.P0 @ g / c.mu
    return out


def L_delta(pair: PerturbationPair, delta: float) -> np.ndarray:
    b = b_of_delta(pair, delta)
    _, resolvents = _resolvents(pair, delta)
    l1 = _l1(pair, delta, b, resolvents)
    return l1 + l1.T


def K_delta(pair: PerturbationPair, delta: float) -> np.ndarray:
    b = b_of_delta(pair, delta)
    a0, resolvents = _resolvents(pair, delta)
    k1 = np.zeros_like(b)
    for c, g in zip(pair.dec.positive_clusters, resolvents):
        k1 += c.projector @ b @ a0 @ g / c.mu**2
    return k1 + k1.T


def T_delta(pair: PerturbationPair, delta: float, tol: Optional[float] = None) -> DeltaOperator:
    """T(delta) = T1 + T1^T with T1 = sum_i (-1)^i X_i, X_0 = L1, X_i = sum_mu P_mu B X_{i-1} G_mu / mu."""

    settings = get_settings()
    tol = settings.series_tol if tol is None else tol
    _certified_beta(pair, delta)
    b = b_of_delta(pair, delta)
    _, resolvents = _resolvents(pair, delta)
    clusters = pair.dec.positive_clusters
    lifts = [c.projector @ b / c.mu for c in clusters]
    # ranges of the P_mu are orthogonal, so ||sum_mu P_mu Y_mu|| <= sqrt(sum ||Y_mu||^2)
    ratio = math.sqrt(
        sum((np.linalg.norm(lift, 2) * np.linalg.norm(g, 2)) ** 2 for lift, g in zip(lifts, resolvents))
    )
    if ratio >= 1.0:
        raise RadiusError(f"T(delta) recursion does not contract (ratio {ratio:.4g})")

    x = _l1(pair, delta, b, resolvents)
    head = np.linalg.norm(x, 2)
    t1 = x.copy()
    i = 0
    tail = head * ratio / (1.0 - ratio)
    while tail > tol and i < settings.max_series_order:
        i += 1
        x = sum(lift @ x @ g for lift, g in zip(lifts, resolvents))
        t1 += (-1) ** i * x
        tail = head * ratio ** (i + 1) / (1.0 - ratio)
    logger.debug("T(delta): %d recursion steps, ratio %.3g", i, ratio)
    return DeltaOperator(delta, t1 + t1.T, "Tdelta", order=i, tail_bound=2.0 * tail)


def main_term(pair: PerturbationPair, delta: float, kind: OperatorKind) -> DeltaOperator:
    """Evaluate one of the closed-form approximations of P0perp(delta) - P0perp."""

    if kind == "W1":
        return DeltaOperator(delta, W1(pair, delta), kind)
    if kind == "V01":
        return DeltaOperator(delta, delta * V0_1(pair), kind, order=1)
    if kind == "V02":
        return DeltaOperator(delta, delta * V0_1(pair) + delta**2 * V0_2(pair), kind, order=2)
    if kind == "Ldelta":
        return DeltaOperator(delta, L_delta(pair, delta), kind)
    if kind == "Kdelta":
        return DeltaOperator(delta, K_delta(pair, delta), kind)
    if kind == "Tdelta":
        return T_delta(pair, delta)
    raise InputError(f"'{kind}' is not a main term")
