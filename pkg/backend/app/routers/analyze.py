"""FastAPI router running the bounds report on a generated signal/noise pair."""

from __future__ import annotations

import math

from fastapi import APIRouter, HTTPException

from ..errors import InputError, NumericalPreconditionError
from ..schemas import AnalyzeRequest, AnalyzeResponse
from ..services import bounds, perturb
from ..services.series import derive_seed, generate, theoretical_rank
from ..services.trajectory import spectral_norm


router = APIRouter(prefix="/analyze", tags=["analyze"])


def _finite(value):
    if isinstance(value, float) and not math.isfinite(value):
        return None
    return value


@router.post("", response_model=AnalyzeResponse)
def analyze(payload: AnalyzeRequest) -> AnalyzeResponse:
    """Bounds, radius and oracle projector gap for signal + delta * noise."""

    seed = payload.seed if payload.seed is not None else 0
    try:
        rank = payload.rank or theoretical_rank(payload.signal)
        if rank is None:
            raise InputError("signal rank is unknown; pass 'rank'")
        signal = generate(payload.signal, payload.n, seed=derive_seed(seed, 0))
        noise = generate(payload.noise, payload.n, seed=derive_seed(seed, 1))
        pair = perturb.pair_from_series(signal, noise, payload.L, rank=rank)
        gap = spectral_norm(perturb.delta_projector(pair, payload.delta, rank))
        report = bounds.compute_bounds(pair, payload.delta)
    except InputError as exc:
        raise HTTPException(status_code=422, detail=f"Invalid analysis request: {exc}") from exc
    except NumericalPreconditionError as exc:
        raise HTTPException(
            status_code=409, detail=f"Precondition '{exc.precondition}' failed: {exc}"
        ) from exc
    except Exception as exc:  # pragma: no cover - bubble up to client
        raise HTTPException(status_code=500, detail=f"Analysis failed: {exc}") from exc

    return AnalyzeResponse(
        L=pair.L,
        K=pair.K,
        rank=rank,
        delta=payload.delta,
        delta_p_norm=gap,
        expansion=perturb.expansion_status(pair, payload.delta),
        report={k: _finite(v) for k, v in report.as_row().items()},
    )
