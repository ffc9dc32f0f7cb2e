"""Finite segments of the signal and noise families.

Deterministic families (exponential sums, polynomials, sums of cosines, the
constant and the saw) are evaluated exactly; the stationary noises are drawn
from a ``numpy.random.Generator`` seeded by the caller.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np
from scipy.linalg import toeplitz
from scipy.signal import lfilter

from ..errors import InputError, SeriesRangeError
from ..schemas import STOCHASTIC_TYPES, SeriesSpec

logger = logging.getLogger(__name__)

_LOG_MAX_FLOAT = math.log(np.finfo(np.float64).max)


@dataclass(frozen=True)
class Series:
    """A finite series together with the spec and seed it came from."""

    values: np.ndarray
    spec: Optional[SeriesSpec] = None
    seed: Optional[int] = None

    def __post_init__(self):
        values = np.asarray(self.values, dtype=float)
        if values.ndim != 1 or values.size < 1:
            raise InputError("a series needs at least one value")
        if not np.all(np.isfinite(values)):
            raise InputError("series contains non-finite values")
        values.setflags(write=False)
        object.__setattr__(self, "values", values)

    def __len__(self) -> int:
        return self.values.size


def is_stochastic(spec: SeriesSpec) -> bool:
    return spec.type in STOCHASTIC_TYPES


# ---------- Innovations ----------

def draw_innovations(rng: np.random.Generator, kind: str, size: int) -> np.ndarray:
    """Mean-zero, unit-variance i.i.d. innovations."""

    if kind == "normal":
        return rng.standard_normal(size)
    if kind == "rademacher":
        return 2.0 * rng.integers(0, 2, size=size) - 1.0
    if kind == "uniform":
        root3 = math.sqrt(3.0)
        return rng.uniform(-root3, root3, size=size)
    raise InputError(f"unknown innovation distribution '{kind}'")


def derive_seed(master: int, *key: int) -> int:
    """Independent 63-bit seed for the unit (trial, grid index, ...) under ``master``."""

    state = np.random.SeedSequence(master, spawn_key=tuple(int(k) for k in key)).generate_state(1, dtype=np.uint64)
    return int(state[0] >> np.uint64(1))


def innovation_fourth_moment(kind: str) -> float:
    """E eps^4 of the unit-variance innovation."""

    return {"normal": 3.0, "rademacher": 1.0, "uniform": 1.8}[kind]


# ---------- Generation ----------

def max_safe_length(spec: SeriesSpec) -> Optional[int]:
    """Largest n whose exponential-sum segment stays finite; None when unbounded."""

    if spec.type != "exponential":
        return None
    top = abs(spec.terms[0].a)
    if top <= 1.0:
        return None
    amplitude = math.log(sum(abs(t.beta) for t in spec.terms))
    return int(math.floor((_LOG_MAX_FLOAT - amplitude) / math.log(top))) + 1


def generate(spec: SeriesSpec, n: int, seed: Optional[int] = None) -> Series:
    """Evaluate ``spec`` at indices 0..n-1."""

    if n < 1:
        raise InputError(f"series length must be >= 1, got {n}")
    if is_stochastic(spec):
        if seed is None:
            raise InputError(f"stochastic spec '{spec.type}' requires a seed")
        return _generate_stochastic(spec, n, np.random.default_rng(seed), seed)

    idx = np.arange(n, dtype=float)
    if spec.type == "constant":
        values = np.ones(n)
    elif spec.type == "saw":
        values = np.where(np.arange(n) % 2 == 0, 1.0, -1.0)
    elif spec.type == "polynomial":
        values = np.polyval(np.asarray(spec.coeffs, dtype=float), idx)
    elif spec.type == "oscillating":
        values = np.zeros(n)
        for term in spec.terms:
            values += term.gamma * np.cos(2 * np.pi * term.omega * idx + term.phi)
    elif spec.type == "exponential":
        limit = max_safe_length(spec)
        if limit is not None and n > limit:
            raise SeriesRangeError(
                f"exponential sum overflows beyond n={limit} (requested n={n})", max_safe_n=limit
            )
        values = np.zeros(n)
        for term in spec.terms:
            values += term.beta * np.power(term.a, idx)
    else:  # pragma: no cover - union is exhaustive
        raise InputError(f"unsupported spec type '{spec.type}'")
    return Series(values, spec=spec)


def _generate_stochastic(spec: SeriesSpec, n: int, rng: np.random.Generator, seed: int) -> Series:
    if spec.type == "white_noise":
        values = draw_innovations(rng, spec.innovation, n)
    elif spec.type == "ar1":
        eps = draw_innovations(rng, spec.innovation, n)
        scale = math.sqrt(1.0 - spec.rho**2)
        values = np.empty(n)
        values[0] = eps[0]
        if n > 1:
            values[1:], _ = lfilter([scale], [1.0, -spec.rho], eps[1:], zi=[spec.rho * values[0]])
    else:
        coeffs = np.asarray(spec.coeffs)
        eps = draw_innovations(rng, spec.innovation, n + coeffs.size - 1)
        values = np.correlate(eps, coeffs, mode="valid")
    logger.debug("drew %s of length %d (seed %d)", spec.type, n, seed)
    return Series(values, spec=spec, seed=seed)


# ---------- Structure ----------

def theoretical_rank(spec: SeriesSpec) -> Optional[int]:
    """Rank of the series, or None for the stationary (not finite-rank) noises."""

    if spec.type in ("constant", "saw"):
        return 1
    if spec.type == "exponential":
        return len(spec.terms)
    if spec.type == "polynomial":
        return spec.degree + 1
    if spec.type == "oscillating":
        endpoints = sum(1 for t in spec.terms if t.omega in (0.0, 0.5))
        return 2 * len(spec.terms) - endpoints
    return None


def characteristic_roots(spec: SeriesSpec) -> Optional[np.ndarray]:
    """Roots of the characteristic polynomial of the minimal recurrence, with multiplicity."""

    if spec.type == "constant":
        return np.array([1.0 + 0j])
    if spec.type == "saw":
        return np.array([-1.0 + 0j])
    if spec.type == "exponential":
        return np.array([t.a for t in spec.terms], dtype=complex)
    if spec.type == "polynomial":
        return np.ones(spec.degree + 1, dtype=complex)
    if spec.type == "oscillating":
        roots: list[complex] = []
        for t in spec.terms:
            if t.omega == 0.0:
                roots.append(1.0 + 0j)
            elif t.omega == 0.5:
                roots.append(-1.0 + 0j)
            else:
                z = np.exp(2j * np.pi * t.omega)
                roots.extend([z, np.conj(z)])
        return np.asarray(roots)
    return None


# ---------- Second-order structure of the noises ----------

def autocovariance(spec: SeriesSpec, lags: Sequence[int]) -> np.ndarray:
    """R_e(h) of a stationary noise spec."""

    lags = np.abs(np.asarray(lags, dtype=int))
    if spec.type == "white_noise":
        return (lags == 0).astype(float)
    if spec.type == "ar1":
        return np.power(spec.rho, lags.astype(float))
    if spec.type == "linear_stationary":
        coeffs = np.asarray(spec.coeffs)
        full = np.correlate(coeffs, coeffs, mode="full")
        centre = coeffs.size - 1
        out = np.zeros(lags.shape)
        inside = lags <= centre
        out[inside] = full[centre + lags[inside]]
        return out
    raise InputError(f"autocovariance is defined for stationary noises, not '{spec.type}'")


def covariance_matrix(spec: SeriesSpec, window: int) -> np.ndarray:
    """Toeplitz matrix {R_e(i-j)} of size window x window."""

    return toeplitz(autocovariance(spec, range(window)))


def norm_growth_constant(spec: SeriesSpec) -> float:
    """S = sum_j |c_j| of the moving-average representation."""

    if spec.type == "white_noise":
        return 1.0
    if spec.type == "ar1":
        rho = abs(spec.rho)
        return math.sqrt((1.0 + rho) / (1.0 - rho))
    if spec.type == "linear_stationary":
        return float(np.sum(np.abs(spec.coeffs)))
    raise InputError(f"norm growth constant is defined for stationary noises, not '{spec.type}'")
