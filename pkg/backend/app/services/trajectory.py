"""Hankel embedding, diagonal averaging and the two matrix norms used throughout."""

from __future__ import annotations

from typing import Literal, Optional, Union

import numpy as np
from scipy.linalg import eigh, hankel
from scipy.sparse.linalg import svds

from ..config import get_settings
from ..errors import InputError, NonHankelError
from .series import Series

ArrayOrSeries = Union[Series, np.ndarray, list]


def _values(series: ArrayOrSeries) -> np.ndarray:
    if isinstance(series, Series):
        return series.values
    return np.asarray(series, dtype=float)


def embed(series: ArrayOrSeries, window: int) -> np.ndarray:
    """L x K trajectory matrix with entry (i, j) = x_{i+j}, K = N - L + 1."""

    values = _values(series)
    n = values.size
    if not 1 <= window <= n:
        raise InputError(f"window length L={window} must lie in [1, {n}]")
    return hankel(values[:window], values[window - 1:])


def _antidiagonal_means(m: np.ndarray) -> np.ndarray:
    rows, cols = m.shape
    index = np.add.outer(np.arange(rows), np.arange(cols)).ravel()
    sums = np.bincount(index, weights=m.ravel(), minlength=rows + cols - 1)
    counts = np.bincount(index, minlength=rows + cols - 1)
    return sums / counts


def hankelize(m: np.ndarray) -> np.ndarray:
    """Replace every anti-diagonal by its mean."""

    m = np.asarray(m, dtype=float)
    return embed(_antidiagonal_means(m), m.shape[0])


def matrix_to_series(m: np.ndarray, tol: Optional[float] = None) -> Series:
    """Series of length L + K - 1 read off a Hankel matrix."""

    m = np.asarray(m, dtype=float)
    tol = get_settings().hankel_tol if tol is None else tol
    values = np.concatenate([m[:, 0], m[-1, 1:]])
    deviation = max_norm(m - embed(values, m.shape[0]))
    if deviation > tol * max(max_norm(m), 1.0):
        raise NonHankelError(f"matrix is not Hankel (max anti-diagonal deviation {deviation:.3e})")
    return Series(values)


def max_norm(m: np.ndarray) -> float:
    return float(np.max(np.abs(m)))


def spectral_norm(m: np.ndarray, method: Literal["gram", "lanczos", "svd"] = "gram") -> float:
    """Largest singular value.

    ``gram`` solves the symmetric eigenproblem of the smaller Gram matrix,
    ``lanczos`` runs ARPACK on the matrix itself (large Monte Carlo draws),
    ``svd`` is the dense reference.
    """

    m = np.atleast_2d(np.asarray(m, dtype=float))
    rows, cols = m.shape
    if method == "svd":
        return float(np.linalg.svd(m, compute_uv=False)[0])
    if method == "lanczos" and min(rows, cols) > 2:
        start = np.ones(min(rows, cols))
        return float(svds(m, k=1, v0=start, return_singular_vectors=False)[0])
    gram = m @ m.T if rows <= cols else m.T @ m
    gram = 0.5 * (gram + gram.T)
    top = eigh(gram, eigvals_only=True, subset_by_index=[gram.shape[0] - 1, gram.shape[0] - 1])[0]
    return float(np.sqrt(max(top, 0.0)))
