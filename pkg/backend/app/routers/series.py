"""FastAPI router for series generation and rank queries."""

from __future__ import annotations

from typing import Any

from fastapi import APIRouter, Body, HTTPException
from pydantic import ValidationError

from ..errors import InputError
from ..schemas import GenerateRequest, GenerateResponse, RankResponse, parse_series_spec
from ..services.series import generate, theoretical_rank


router = APIRouter(prefix="/series", tags=["series"])


@router.post("/generate", response_model=GenerateResponse)
def generate_series(payload: GenerateRequest) -> GenerateResponse:
    """Evaluate a series spec at indices 0..n-1."""

    try:
        series = generate(payload.spec, payload.n, seed=payload.seed)
    except InputError as exc:
        raise HTTPException(status_code=422, detail=f"Generation failed: {exc}") from exc

    return GenerateResponse(values=series.values.tolist(), rank=theoretical_rank(payload.spec))


@router.post("/rank", response_model=RankResponse)
def rank(payload: dict[str, Any] = Body(...)) -> RankResponse:
    """Theoretical rank of a spec (null for the stationary noises)."""

    try:
        spec = parse_series_spec(payload)
    except ValidationError as exc:
        raise HTTPException(status_code=422, detail=f"Invalid series spec: {exc.errors()[0]['msg']}") from exc
    return RankResponse(rank=theoretical_rank(spec))
