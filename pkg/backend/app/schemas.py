"""Pydantic schemas: series specs, experiment configs and the HTTP payloads."""

from __future__ import annotations

import math
from typing import Annotated, List, Literal, Optional, Union

from pydantic import BaseModel, ConfigDict, Field, TypeAdapter, field_validator, model_validator

Innovation = Literal["normal", "rademacher", "uniform"]


# ---------- Series specs ----------

class ExpTerm(BaseModel):
    model_config = ConfigDict(frozen=True)

    beta: float = Field(..., description="Amplitude, nonzero")
    a: float = Field(..., description="Base of the exponent, nonzero")

    @field_validator("beta", "a")
    @classmethod
    def _nonzero(cls, v: float) -> float:
        if v == 0 or not math.isfinite(v):
            raise ValueError("exponential term needs finite nonzero beta and a")
        return v


class OscTerm(BaseModel):
    model_config = ConfigDict(frozen=True)

    gamma: float = Field(..., gt=0, description="Amplitude")
    omega: float = Field(..., ge=0.0, le=0.5, description="Frequency in cycles per sample")
    phi: float = Field(0.0, ge=0.0, lt=2 * math.pi, description="Phase in radians")


class ExponentialSum(BaseModel):
    """f_n = sum_k beta_k a_k^n with |a_k| strictly decreasing."""

    model_config = ConfigDict(frozen=True)

    type: Literal["exponential"] = "exponential"
    terms: List[ExpTerm] = Field(..., min_length=1)

    @model_validator(mode="after")
    def _decreasing(self) -> "ExponentialSum":
        moduli = [abs(t.a) for t in self.terms]
        if any(b >= a for a, b in zip(moduli, moduli[1:])):
            raise ValueError("|a_k| must be strictly decreasing")
        return self


class Polynomial(BaseModel):
    """f_n = gamma_p n^p + ... + gamma_0, coefficients highest degree first."""

    model_config = ConfigDict(frozen=True)

    type: Literal["polynomial"] = "polynomial"
    coeffs: List[float] = Field(..., min_length=1)

    @field_validator("coeffs")
    @classmethod
    def _leading(cls, v: List[float]) -> List[float]:
        if v[0] == 0:
            raise ValueError("leading polynomial coefficient must be nonzero")
        return v

    @property
    def degree(self) -> int:
        return len(self.coeffs) - 1


class Oscillating(BaseModel):
    """f_n = sum_l gamma_l cos(2 pi omega_l n + phi_l)."""

    model_config = ConfigDict(frozen=True)

    type: Literal["oscillating"] = "oscillating"
    terms: List[OscTerm] = Field(..., min_length=1)

    @model_validator(mode="after")
    def _frequencies(self) -> "Oscillating":
        omegas = [t.omega for t in self.terms]
        if any(b <= a for a, b in zip(omegas, omegas[1:])):
            raise ValueError("oscillating frequencies must be strictly increasing")
        for t in self.terms:
            if t.omega in (0.0, 0.5) and abs(math.cos(t.phi)) < 1e-12:
                raise ValueError(f"term with omega={t.omega} and cos(phi)=0 is identically zero")
        return self


class LinearStationary(BaseModel):
    """e_n = sum_{j=-m..m} c_j eps_{n+j}; coefficients rescaled to unit energy."""

    model_config = ConfigDict(frozen=True)

    type: Literal["linear_stationary"] = "linear_stationary"
    coeffs: List[float] = Field(..., min_length=1, description="c_{-m}..c_{m}, odd length")
    innovation: Innovation = "normal"

    @field_validator("coeffs")
    @classmethod
    def _normalize(cls, v: List[float]) -> List[float]:
        if len(v) % 2 != 1:
            raise ValueError("coefficient window must have odd length (c_-m .. c_m)")
        energy = math.fsum(c * c for c in v)
        if energy == 0:
            raise ValueError("coefficient window is identically zero")
        scale = math.sqrt(energy)
        return [c / scale for c in v]


class AR1(BaseModel):
    model_config = ConfigDict(frozen=True)

    type: Literal["ar1"] = "ar1"
    rho: float = Field(..., gt=-1.0, lt=1.0)
    innovation: Innovation = "normal"


class WhiteNoise(BaseModel):
    model_config = ConfigDict(frozen=True)

    type: Literal["white_noise"] = "white_noise"
    innovation: Innovation = "normal"


class Constant(BaseModel):
    model_config = ConfigDict(frozen=True)

    type: Literal["constant"] = "constant"


class Saw(BaseModel):
    model_config = ConfigDict(frozen=True)

    type: Literal["saw"] = "saw"


SeriesSpec = Annotated[
    Union[ExponentialSum, Polynomial, Oscillating, LinearStationary, AR1, WhiteNoise, Constant, Saw],
    Field(discriminator="type"),
]
STOCHASTIC_TYPES = frozenset({"linear_stationary", "ar1", "white_noise"})

series_spec_adapter: TypeAdapter = TypeAdapter(SeriesSpec)


def parse_series_spec(data: dict) -> SeriesSpec:
    """Validate a ``{"type": ..., params...}`` object into a spec model."""

    return series_spec_adapter.validate_python(data)


# ---------- Experiment configs ----------

class WindowRule(BaseModel):
    """How the window length L follows the series length N."""

    model_config = ConfigDict(frozen=True)

    kind: Literal["fixed_L", "fixed_K", "proportional"] = "proportional"
    value: Optional[int] = Field(default=None, ge=1, description="L0 or K0 for the fixed rules")
    alpha: Optional[float] = Field(default=0.5, gt=0.0, lt=1.0, description="L ~ alpha N")

    @model_validator(mode="after")
    def _complete(self) -> "WindowRule":
        if self.kind != "proportional" and self.value is None:
            raise ValueError(f"window rule '{self.kind}' needs a value")
        return self

    def dims(self, n: int) -> tuple[int, int]:
        """Return (L, K) for series length ``n``."""

        if self.kind == "fixed_L":
            window = int(self.value)
        elif self.kind == "fixed_K":
            window = n - int(self.value) + 1
        else:
            window = int(math.floor(self.alpha * n + 0.5))
        if not 1 <= window <= n:
            raise ValueError(f"window rule {self.kind} gives L={window} outside [1, {n}]")
        return window, n - window + 1


SWEEP_QUANTITIES = (
    "delta_p",
    "res_v01",
    "res_w1",
    "res_l",
    "res_t",
    "theta",
    "beta",
    "rhs_thm3",
    "rhs_cor1",
    "rhs_cor2",
    "rhs_thm4",
    "rhs_thm5",
    "rhs_thm6",
    "he_over_mu",
    "s0_a2",
)


class SweepConfig(BaseModel):
    """One N-sweep of a signal/noise pair."""

    signal: SeriesSpec
    noise: SeriesSpec
    deltas: List[float] = Field(..., min_length=1)
    n_grid: List[int] = Field(..., min_length=2)
    window: WindowRule = Field(default_factory=WindowRule)
    rank: Optional[int] = Field(default=None, ge=1, description="Signal rank; theoretical rank if omitted")
    quantities: List[str] = Field(default_factory=lambda: list(SWEEP_QUANTITIES))
    rate_axis: Literal["N", "L", "K", "min_LK"] = "N"
    rate_scale: Literal["loglog", "semilog"] = "loglog"
    seed: int = Field(0, ge=0)

    @field_validator("n_grid")
    @classmethod
    def _increasing(cls, v: List[int]) -> List[int]:
        if any(b <= a for a, b in zip(v, v[1:])):
            raise ValueError("N grid must be strictly increasing")
        if v[0] < 2:
            raise ValueError("N grid values must be at least 2")
        return v

    @field_validator("quantities")
    @classmethod
    def _known(cls, v: List[str]) -> List[str]:
        unknown = sorted(set(v) - set(SWEEP_QUANTITIES))
        if unknown:
            raise ValueError(f"unknown sweep quantities: {unknown}")
        return v


MonteCarloStatistic = Literal[
    "hankel_norm_growth", "covariance_convergence", "cross_term_lil", "clt_const_whitenoise"
]


class MonteCarloConfig(BaseModel):
    """Monte Carlo verification run."""

    noise: SeriesSpec = Field(default_factory=WhiteNoise)
    statistic: MonteCarloStatistic
    trials: int = Field(..., ge=1)
    n_grid: List[int] = Field(..., min_length=1)
    window: WindowRule = Field(default_factory=WindowRule)
    seed: int = Field(0, ge=0)
    delta: float = Field(0.5, description="Noise level of the CLT check")
    signal: Optional[SeriesSpec] = Field(
        default=None, description="Oscillating signal of the cross-term check"
    )
    shift_signal: int = Field(0, ge=0, description="Offset m of the signal in the cross term")
    shift_noise: int = Field(0, ge=0, description="Offset l of the noise in the cross term")

    @field_validator("n_grid")
    @classmethod
    def _increasing(cls, v: List[int]) -> List[int]:
        if any(b <= a for a, b in zip(v, v[1:])):
            raise ValueError("N grid must be strictly increasing")
        return v


class CliConfig(BaseModel):
    """Validated options of one command-line invocation."""

    model_config = ConfigDict(extra="allow")

    command: Literal["generate", "analyze", "expand", "sweep", "reconstruct", "esprit", "lrf", "mc"]
    output_dir: str = "results"
    threads: int = Field(1, ge=1)
    seed: Optional[int] = Field(default=None, ge=0)
    plot: bool = False
    delta: Optional[float] = None
    L: Optional[int] = Field(default=None, ge=1)
    d: Optional[int] = Field(default=None, ge=1)
    n: Optional[int] = Field(default=None, ge=1)
    tol: Optional[float] = Field(default=None, gt=0)


# ---------- HTTP payloads ----------

class GenerateRequest(BaseModel):
    spec: SeriesSpec
    n: int = Field(..., ge=1, le=1_000_000, description="Series length")
    seed: Optional[int] = Field(default=None, ge=0, description="Required for stochastic specs")


class GenerateResponse(BaseModel):
    values: List[float]
    rank: Optional[int] = Field(default=None, description="Theoretical rank, absent for stochastic specs")


class RankResponse(BaseModel):
    rank: Optional[int]


class AnalyzeRequest(BaseModel):
    """Signal + delta * noise analysed at one window length."""

    signal: SeriesSpec
    noise: SeriesSpec
    n: int = Field(..., ge=2, le=20_000)
    L: int = Field(..., ge=1)
    delta: float
    rank: Optional[int] = Field(default=None, ge=1)
    seed: Optional[int] = Field(default=None, ge=0)


class AnalyzeResponse(BaseModel):
    model_config = ConfigDict(extra="allow")

    L: int
    K: int
    rank: int
    delta: float
    delta_p_norm: float = Field(description="Spectral norm of P0perp(delta) - P0perp from the SVD oracle")
    expansion: str = Field(description="certified / valid_no_tail / divergent")
    report: dict[str, Union[float, bool, None]]
