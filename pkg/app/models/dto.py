"""
Domain types for the periodic drift estimator.

This module contains the Pydantic models shared between the numerical
services, the file repositories and the command-line front-end.
"""

import hashlib
import math
from enum import Enum
from typing import Any, Callable, Dict, List, Literal, Optional, Tuple

import numpy as np
import numpy.typing as npt
from pydantic import BaseModel, ConfigDict, Field, field_validator, model_validator

from app.models.errors import InvalidArgumentError

FloatArray = npt.NDArray[np.float64]
IndexArray = npt.NDArray[np.integer[Any]]
BoolArray = npt.NDArray[np.bool_]


# ============================================================================
# Basis
# ============================================================================

class BasisFamily(str, Enum):
    """Periodic basis families."""
    FOURIER = "fourier"
    SCHAUDER = "schauder"


DEFAULT_J_MAX: Dict[BasisFamily, int] = {
    BasisFamily.FOURIER: 25,
    BasisFamily.SCHAUDER: 12,
}


class BasisSpec(BaseModel):
    """Basis family, prior regularity and the cap on the model index."""
    model_config = ConfigDict(frozen=True)

    family: BasisFamily = Field(BasisFamily.FOURIER, description="Basis family")
    beta: float = Field(1.5, gt=0, description="Prior regularity")
    j_max: int = Field(..., ge=1, description="Largest model index")

    @model_validator(mode="before")
    @classmethod
    def _default_j_max(cls, data: Any) -> Any:
        if isinstance(data, dict):
            data = dict(data)
            family = data.get("family", BasisFamily.FOURIER)
            if isinstance(family, str):
                family = BasisFamily(family.lower())
                data["family"] = family
            if data.get("j_max") is None:
                data["j_max"] = DEFAULT_J_MAX[family]
        return data


# ============================================================================
# Paths
# ============================================================================

class Path(BaseModel):
    """A uniformly sampled stretch of a diffusion path."""
    model_config = ConfigDict(frozen=True, arbitrary_types_allowed=True)

    t0: float = Field(0.0, description="Start time")
    dt: float = Field(..., description="Uniform time step")
    values: np.ndarray = Field(..., description="Path values on the grid")

    @field_validator("dt", mode="before")
    @classmethod
    def _check_dt(cls, value: Any) -> float:
        if not (isinstance(value, (int, float, np.floating)) and math.isfinite(value) and value > 0):
            raise InvalidArgumentError(["dt"], f"must be a positive finite step, got {value!r}")
        return float(value)

    @field_validator("values", mode="before")
    @classmethod
    def _check_values(cls, value: Any) -> np.ndarray:
        array = np.array(value, dtype=np.float64)
        if array.ndim != 1 or array.size < 2:
            raise InvalidArgumentError(["values"], "a path needs at least 2 values")
        if not np.all(np.isfinite(array)):
            bad = int(np.flatnonzero(~np.isfinite(array))[0])
            raise InvalidArgumentError(["values"], f"non-finite value at index {bad}")
        array.flags.writeable = False
        return array

    @property
    def n_points(self) -> int:
        return int(self.values.size)

    @property
    def duration(self) -> float:
        return (self.n_points - 1) * self.dt

    @property
    def times(self) -> np.ndarray:
        return self.t0 + self.dt * np.arange(self.n_points)


class Segment(BaseModel):
    """The latent path between two consecutive observations."""
    model_config = ConfigDict(frozen=True, arbitrary_types_allowed=True)

    k: int = Field(..., ge=1, description="Segment index, 1-based")
    path: Path


# ============================================================================
# Prior and chain
# ============================================================================

DEFAULT_PROPOSAL: Dict[BasisFamily, Tuple[float, float, float]] = {
    BasisFamily.FOURIER: (0.5, 0.25, 0.25),
    BasisFamily.SCHAUDER: (0.9, 0.05, 0.05),
}


class PriorConfig(BaseModel):
    """Inverse-gamma scale prior, geometric model prior and model-proposal kernel."""
    model_config = ConfigDict(frozen=True)

    ig_shape: float = Field(2.5, gt=0)
    ig_rate: float = Field(2.5, gt=0)
    model_decay: float = Field(-math.log(0.95), ge=0)
    q_stay: float = Field(0.5, ge=0, le=1)
    q_up: float = Field(0.25, ge=0, le=1)
    q_down: float = Field(0.25, ge=0, le=1)

    @model_validator(mode="after")
    def _check_kernel(self) -> "PriorConfig":
        total = self.q_stay + self.q_up + self.q_down
        if abs(total - 1.0) > 1e-9:
            raise ValueError(f"q_stay + q_up + q_down must equal 1, got {total}")
        return self

    @classmethod
    def for_family(cls, family: BasisFamily, **overrides: Any) -> "PriorConfig":
        """Build a prior with the family's default proposal kernel."""
        q_stay, q_up, q_down = DEFAULT_PROPOSAL[BasisFamily(family)]
        values: Dict[str, Any] = {"q_stay": q_stay, "q_up": q_up, "q_down": q_down}
        values.update({key: value for key, value in overrides.items() if value is not None})
        return cls(**values)


class ChainRecord(BaseModel):
    """One post-burn-in iteration of the chain."""
    model_config = ConfigDict(arbitrary_types_allowed=True)

    iteration: int
    j_from: int
    j: int
    s_sq: float
    theta: np.ndarray
    posterior_mean: np.ndarray
    proposed_j: int
    model_accept_prob: float
    model_accepted: bool
    bridge_accept_rate: Optional[float] = None


class Chain(BaseModel):
    """Output of a sampler run."""
    model_config = ConfigDict(arbitrary_types_allowed=True)

    mode: Literal["continuous", "discrete"]
    iters: int
    burn_in: int
    records: List[ChainRecord] = Field(default_factory=list)
    n_segments: int = 0
    segment_accept_counts: Optional[np.ndarray] = None


# ============================================================================
# Posterior summaries
# ============================================================================

class ChainDiagnostics(BaseModel):
    """Trace, model and scale diagnostics of a chain."""
    model_config = ConfigDict(arbitrary_types_allowed=True)

    design_points: np.ndarray
    traces: np.ndarray  # (iterations, design points)
    running_means: np.ndarray
    model_series: np.ndarray
    model_histogram: Dict[int, int]
    acceptance: Dict[str, float]  # "j->j'" -> mean Move II acceptance probability
    s_sq_mean: float
    s_sq_median: float
    s_sq_autocorr_time: float
    s_sq_hist_counts: np.ndarray
    s_sq_hist_edges: np.ndarray
    mean_j: float
    bridge_accept_mean: Optional[float] = None
    segment_acceptance: Optional[np.ndarray] = None


class PosteriorSummary(BaseModel):
    """Rao-Blackwellized mean curve, pointwise bands and diagnostics."""
    model_config = ConfigDict(arbitrary_types_allowed=True)

    grid: np.ndarray
    mean: np.ndarray
    band_lo: np.ndarray
    band_hi: np.ndarray
    alpha: float
    band_method: str = "pointwise-empirical-quantile"
    s_sq_samples: np.ndarray
    j_samples: np.ndarray
    model_histogram: Dict[int, int]
    acceptance: Dict[str, float]
    segment_acceptance: Optional[np.ndarray] = None
    diagnostics: ChainDiagnostics


# ============================================================================
# Test drifts
# ============================================================================

class NamedDrift(BaseModel):
    """A 1-periodic benchmark drift function."""
    model_config = ConfigDict(frozen=True, arbitrary_types_allowed=True)

    name: str
    fn: Callable[[Any], Any]

    def __call__(self, x: Any) -> Any:
        return self.fn(x)


# ============================================================================
# Run configuration
# ============================================================================

class RunConfig(BaseModel):
    """Every parameter of a fit, validated before any work starts."""
    model_config = ConfigDict(frozen=True, extra="forbid")

    mode: Literal["continuous", "discrete"] = "continuous"
    basis: BasisSpec
    prior: PriorConfig
    iters: int = Field(3000, ge=0)
    burn_in: int = Field(500, ge=0)
    n_interior: int = Field(49, ge=0)
    seed: int = Field(..., ge=0)
    grid_size: int = Field(201, ge=2)
    alpha: float = Field(0.10, gt=0, le=1)
    fixed_level: Optional[int] = Field(None, ge=1)
    fixed_scale: Optional[float] = Field(None, gt=0)
    sparse_schauder: bool = True
    resync_every: int = Field(1000, ge=1)
    chunk_size: int = Field(65536, ge=1)
    factor_cache_size: int = Field(64, ge=0)
    label: Optional[str] = None

    @model_validator(mode="after")
    def _check_run(self) -> "RunConfig":
        if self.iters < self.burn_in:
            raise ValueError(f"iters ({self.iters}) must be >= burn_in ({self.burn_in})")
        if self.fixed_level is not None and self.fixed_level > self.basis.j_max:
            raise ValueError(
                f"fixed_level ({self.fixed_level}) exceeds j_max ({self.basis.j_max})"
            )
        return self

    def config_hash(self) -> str:
        """Short sha256 of the canonical JSON form, label excluded."""
        canonical = self.model_dump_json(exclude={"label"})
        return hashlib.sha256(canonical.encode("utf-8")).hexdigest()[:16]


class SimulationConfig(BaseModel):
    """Parameters of a simulated data set."""
    model_config = ConfigDict(frozen=True, extra="forbid")

    drift: str
    T: float = Field(..., gt=0)
    dt: float = Field(..., gt=0)
    x0: float = 0.0
    keep_every: int = Field(1, ge=1)
    seed: int = Field(0, ge=0)

    def config_hash(self) -> str:
        """Short sha256 of the canonical JSON form."""
        return hashlib.sha256(self.model_dump_json().encode("utf-8")).hexdigest()[:16]
