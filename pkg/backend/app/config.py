"""Runtime settings, read from ``HANKELPERT_*`` environment variables or ``.env``."""

from __future__ import annotations

from functools import lru_cache

from pydantic import Field
from pydantic_settings import BaseSettings, SettingsConfigDict


class Settings(BaseSettings):
    model_config = SettingsConfigDict(
        env_prefix="HANKELPERT_",
        env_file=".env",
        env_file_encoding="utf-8",
        extra="ignore",
    )

    rank_eps: float = Field(1e-10, gt=0, description="Relative threshold mu > eps * mu_max for the rank")
    cluster_tol: float = Field(1e-8, gt=0, description="Relative gap below which eigenvalues share one projector")
    gap_tol: float = Field(1e-8, gt=0, description="Required relative gap between the d-th and (d+1)-th singular values")
    hankel_tol: float = Field(1e-12, gt=0, description="Relative tolerance of the Hankel structure check")
    series_tol: float = Field(1e-10, gt=0, description="Default truncation tolerance of the projector series")
    max_series_order: int = Field(200, ge=1, description="Hard cap on the truncation order of series expansions")
    threads: int = Field(1, ge=1, description="Worker count for Monte Carlo trials and sweeps")
    output_dir: str = Field("results", description="Default directory for CSV / SVG artifacts")
    log_level: str = Field("INFO", description="Root log level")
    float_format: str = Field("%.17g", description="printf format used for every float written to CSV")
    api_title: str = Field("Hankelpert API", description="Title shown in the OpenAPI docs")
    api_host: str = Field("0.0.0.0", description="Bind address when the app is started directly")
    api_port: int = Field(8000, ge=1, le=65535, description="Port when the app is started directly")
    cors_origins: list[str] = Field(default_factory=lambda: ["*"], description="Origins allowed to call the API")


@lru_cache(maxsize=1)
def get_settings() -> Settings:
    """Process-wide settings instance."""

    return Settings()
