"""Monte Carlo checks of the almost-sure and distributional statements about noise matrices.

Every (trial, grid index) unit draws from its own seed derived from the
master seed, so summaries do not depend on the number of workers.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field

import numpy as np
import pandas as pd
from joblib import Parallel, delayed
from tqdm import tqdm

from ..config import get_settings
from ..errors import InputError
from ..schemas import Constant, MonteCarloConfig, WhiteNoise
from . import perturb
from .series import covariance_matrix, derive_seed, generate, innovation_fourth_moment
from .trajectory import embed, spectral_norm

logger = logging.getLogger(__name__)

CLT_VARIANCE_SHARE = 0.1


@dataclass
class MonteCarloResult:
    config: MonteCarloConfig
    records: pd.DataFrame
    summary: dict = field(default_factory=dict)


def suffix_envelope(values: np.ndarray) -> np.ndarray:
    """env_i = max_{j >= i} values_j."""

    return np.maximum.accumulate(np.asarray(values, dtype=float)[::-1])[::-1]


def _top_half(grid: list[int]) -> slice:
    return slice(len(grid) // 2, None) if len(grid) >= 4 else slice(None)


def _trend(grid, values) -> float:
    x, y = np.log(np.asarray(grid, dtype=float)), np.log(np.asarray(values, dtype=float))
    if x.size < 2 or not np.all(np.isfinite(y)):
        return math.nan
    return float(np.polyfit(x, y, 1)[0])


def _run(fn, cfg: MonteCarloConfig, threads: int, progress: bool) -> list:
    trials = tqdm(range(cfg.trials), desc=cfg.statistic, disable=not progress, leave=False)
    return Parallel(n_jobs=threads)(delayed(fn)(cfg, t) for t in trials)


# ---------- ||E|| / sqrt(N ln N) ----------

def _norm_growth_trial(cfg: MonteCarloConfig, trial: int) -> list[dict]:
    rows = []
    for i, n in enumerate(cfg.n_grid):
        L, K = cfg.window.dims(n)
        noise = generate(cfg.noise, n, seed=derive_seed(cfg.seed, trial, i))
        norm = spectral_norm(embed(noise, L), method="lanczos")
        rows.append({"trial": trial, "N": n, "L": L, "K": K, "norm": norm, "ratio": norm / math.sqrt(n * math.log(n))})
    return rows


def _norm_growth_summary(cfg: MonteCarloConfig, records: pd.DataFrame) -> dict:
    top = _top_half(cfg.n_grid)
    monotone, trends = True, []
    for _, group in records.groupby("trial"):
        ratios = group.sort_values("N")["ratio"].to_numpy()
        env = suffix_envelope(ratios)[top]
        monotone &= bool(np.all(np.diff(env) <= 0))
        trends.append(_trend(np.asarray(cfg.n_grid)[top], ratios[top]))
    return {
        "max_ratio": float(records["ratio"].max()),
        "envelope_nonincreasing": monotone,
        "mean_trend": float(np.nanmean(trends)) if trends else math.nan,
    }


# ---------- ||E E^T / K - Sigma|| ----------

def _covariance_trial(cfg: MonteCarloConfig, trial: int) -> list[dict]:
    rows = []
    for i, n in enumerate(cfg.n_grid):
        L, K = cfg.window.dims(n)
        e = embed(generate(cfg.noise, n, seed=derive_seed(cfg.seed, trial, i)), L)
        deviation = e @ e.T / K - covariance_matrix(cfg.noise, L)
        rows.append({"trial": trial, "N": n, "L": L, "K": K, "deviation": spectral_norm(deviation, method="svd")})
    return rows


def _covariance_summary(cfg: MonteCarloConfig, records: pd.DataFrame) -> dict:
    per_n = records.groupby("N")["deviation"].max()
    return {
        "max_deviation": float(records["deviation"].max()),
        "max_deviation_last": float(per_n.iloc[-1]),
        "trend": _trend(per_n.index.to_numpy(), per_n.to_numpy()),
    }


# ---------- cross term sum x_{m+j} eps_{l+j} ----------

def _cross_signal(cfg: MonteCarloConfig):
    if cfg.signal is None or cfg.signal.type != "oscillating":
        raise InputError("cross_term_lil needs an oscillating 'signal'")
    return cfg.signal


def _cross_trial(cfg: MonteCarloConfig, trial: int) -> list[dict]:
    signal = _cross_signal(cfg)
    top = max(cfg.n_grid)
    x = generate(signal, cfg.shift_signal + top).values[cfg.shift_signal:]
    eps = generate(cfg.noise, cfg.shift_noise + top, seed=derive_seed(cfg.seed, trial)).values[cfg.shift_noise:]
    partial = np.cumsum(x * eps)
    rows = []
    for n in cfg.n_grid:
        rows.append({"trial": trial, "N": n, "sum": partial[n - 1], "ratio": abs(partial[n - 1]) / math.sqrt(n * math.log(math.log(n)))})
    return rows


def lil_constant(cfg: MonteCarloConfig) -> float:
    """sqrt(sum gamma^2 / 2) * sqrt(2)."""

    gamma2 = sum(t.gamma**2 for t in _cross_signal(cfg).terms)
    return math.sqrt(gamma2 / 2.0) * math.sqrt(2.0)


def _cross_summary(cfg: MonteCarloConfig, records: pd.DataFrame) -> dict:
    per_n = records.groupby("N")["ratio"].max()
    constant = lil_constant(cfg)
    return {
        "lil_constant": constant,
        "max_ratio": float(per_n.max()),
        "max_ratio_top_half": float(per_n.iloc[_top_half(cfg.n_grid)].max()),
        "max_over_constant": float(per_n.max() / constant),
    }


# ---------- sqrt(N) (P0perp(delta) - P0perp) for const + white noise ----------

def _clt_trial(cfg: MonteCarloConfig, trial: int) -> dict:
    n = cfg.n_grid[-1]
    L, K = cfg.window.dims(n)
    noise = generate(cfg.noise, n, seed=derive_seed(cfg.seed, trial))
    pair = perturb.pair_from_series(generate(Constant(), n), noise, L, rank=1)
    b_norm = spectral_norm(perturb.b_of_delta(pair, cfg.delta))
    if b_norm >= pair.dec.mu_min / 2:
        return {"trial": trial, "accepted": False}
    gap = perturb.delta_projector(pair, cfg.delta, 1)
    gram = math.sqrt(K) * (pair.A2 / K - np.eye(L))
    return {"trial": trial, "accepted": True, "scaled": math.sqrt(n) * gap, "gram": gram}


def clt_predicted_variance(window: int, delta: float, fourth_moment: float) -> np.ndarray:
    """Entrywise variance of (delta^2 / L0)(P0perp Psi P0 + P0 Psi P0perp)."""

    p_perp = np.full((window, window), 1.0 / window)
    p0 = np.eye(window) - p_perp
    variance = np.zeros((window, window))
    for lag in range(window):
        basis = np.eye(window, k=lag) + (np.eye(window, k=-lag) if lag else 0.0)
        coeff = p_perp @ basis @ p0 + p0 @ basis @ p_perp
        variance += coeff**2 * (fourth_moment - 1.0 if lag == 0 else 1.0)
    return (delta**2 / window) ** 2 * variance


def _clt_summary(cfg: MonteCarloConfig, outcomes: list[dict]) -> tuple[pd.DataFrame, dict]:
    accepted = [o for o in outcomes if o["accepted"]]
    rejected = len(outcomes) - len(accepted)
    if len(accepted) < 2:
        raise InputError(f"only {len(accepted)} trials satisfy ||B|| < mu_min / 2")
    n = cfg.n_grid[-1]
    L, _ = cfg.window.dims(n)
    scaled = np.stack([o["scaled"] for o in accepted])
    grams = np.stack([o["gram"] for o in accepted])
    kind = getattr(cfg.noise, "innovation", "normal")
    predicted = clt_predicted_variance(L, cfg.delta, innovation_fourth_moment(kind))
    empirical = scaled.var(axis=0, ddof=1)
    compared = predicted >= CLT_VARIANCE_SHARE * predicted.max()
    rows = []
    for i in range(L):
        for j in range(L):
            rel = abs(empirical[i, j] / predicted[i, j] - 1.0) if predicted[i, j] > 0 else math.nan
            rows.append(
                {"i": i, "j": j, "empirical_var": empirical[i, j], "predicted_var": predicted[i, j], "rel_error": rel, "compared": bool(compared[i, j])}
            )

    correlations = []
    for lag in range(L):
        for i in range(L - lag - 1):
            a, b = grams[:, i, i + lag], grams[:, i + 1, i + 1 + lag]
            correlations.append(float(np.corrcoef(a, b)[0, 1]))
    records = pd.DataFrame(rows)
    summary = {
        "accepted": len(accepted),
        "rejected": rejected,
        "rejection_rate": rejected / len(outcomes),
        "max_rel_error": float(records.loc[records["compared"], "rel_error"].max()),
        "min_lag_correlation": min(correlations) if correlations else math.nan,
    }
    return records, summary


# ---------- entry point ----------

def monte_carlo(cfg: MonteCarloConfig, threads: int | None = None, progress: bool = False) -> MonteCarloResult:
    """Run ``cfg.trials`` seeded trials of one statistic and summarise them."""

    threads = get_settings().threads if threads is None else threads
    logger.info("monte carlo '%s': %d trials", cfg.statistic, cfg.trials)
    if cfg.statistic == "clt_const_whitenoise":
        if not isinstance(cfg.noise, WhiteNoise):
            raise InputError("clt_const_whitenoise needs a white_noise spec")
        if cfg.window.kind != "fixed_L":
            raise InputError("clt_const_whitenoise needs a fixed_L window")
        outcomes = _run(_clt_trial, cfg, threads, progress)
        records, summary = _clt_summary(cfg, outcomes)
        logger.debug("rejected %d of %d trials", summary["rejected"], cfg.trials)
        return MonteCarloResult(cfg, records, summary)

    trial_fn, summarise = {
        "hankel_norm_growth": (_norm_growth_trial, _norm_growth_summary),
        "covariance_convergence": (_covariance_trial, _covariance_summary),
        "cross_term_lil": (_cross_trial, _cross_summary),
    }[cfg.statistic]
    if cfg.statistic == "cross_term_lil" and min(cfg.n_grid) < 16:
        raise InputError("cross_term_lil needs N >= 16 so that ln ln N > 1")
    chunks = _run(trial_fn, cfg, threads, progress)
    records = pd.DataFrame([row for chunk in chunks for row in chunk])
    return MonteCarloResult(cfg, records, summarise(cfg, records))
