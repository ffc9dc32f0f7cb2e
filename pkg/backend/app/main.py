"""FastAPI application exposing series generation and projector analysis."""

from __future__ import annotations

from fastapi import FastAPI
from fastapi.middleware.cors import CORSMiddleware

from .config import get_settings
from .logging_config import configure_logging
from .routers import analyze as analyze_router
from .routers import series as series_router

DESCRIPTION = (
    "Generate signal and noise series, query their Hankel rank, and report how far the "
    "signal subspace of the trajectory matrix moves under `delta` times the noise."
)

settings = get_settings()
configure_logging(settings.log_level)

app = FastAPI(title=settings.api_title, description=DESCRIPTION, version="0.1.0")

app.add_middleware(
    CORSMiddleware,
    allow_origins=settings.cors_origins,
    allow_credentials=False,
    allow_methods=["GET", "POST"],
    allow_headers=["Content-Type"],
)


@app.get("/healthz", tags=["system"])
def healthcheck() -> dict[str, str]:
    return {"status": "ok"}


app.include_router(series_router.router)
app.include_router(analyze_router.router)


if __name__ == "__main__":  # pragma: no cover
    import uvicorn

    uvicorn.run("backend.app.main:app", host=settings.api_host, port=settings.api_port)
