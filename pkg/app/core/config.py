"""
Core configuration settings for the periodic drift estimator.

This module uses pydantic-settings for configuration management, supporting
environment variables and .env files. Command-line flags override these
values when a run is assembled (see app.cli.deps).
"""

import math
from functools import lru_cache
from typing import Optional

from pydantic import BaseModel, Field
from pydantic_settings import BaseSettings


class BasisSettings(BaseModel):
    """Basis family and prior regularity."""
    family: str = "fourier"
    beta: float = 1.5
    j_max: Optional[int] = None


class PriorSettings(BaseModel):
    """Hyperparameters of the hierarchical prior and the model-proposal kernel."""
    ig_shape: float = 2.5
    ig_rate: float = 2.5
    model_decay: float = -math.log(0.95)
    q_stay: Optional[float] = None
    q_up: Optional[float] = None
    q_down: Optional[float] = None


class SamplerSettings(BaseModel):
    """Markov chain run lengths and numerical knobs."""
    iters: int = 3000
    burn_in: int = 500
    n_interior: int = 49
    resync_every: int = 1000
    chunk_size: int = 65536
    sparse_schauder: bool = True
    factor_cache_size: int = 64


class OutputSettings(BaseModel):
    """Posterior summary output settings."""
    grid_size: int = 201
    alpha: float = 0.10
    csv_digits: int = 17


class Settings(BaseSettings):
    """Application settings loaded from environment variables."""

    # Basis
    basis_family: str = Field(default="fourier", alias="BASIS_FAMILY")
    basis_beta: float = Field(default=1.5, alias="BASIS_BETA")
    basis_j_max: Optional[int] = Field(default=None, alias="BASIS_J_MAX")

    # Prior
    prior_ig_shape: float = Field(default=2.5, alias="PRIOR_IG_SHAPE")
    prior_ig_rate: float = Field(default=2.5, alias="PRIOR_IG_RATE")
    prior_model_decay: float = Field(
        default=-math.log(0.95),
        alias="PRIOR_MODEL_DECAY"
    )
    prior_q_stay: Optional[float] = Field(default=None, alias="PRIOR_Q_STAY")
    prior_q_up: Optional[float] = Field(default=None, alias="PRIOR_Q_UP")
    prior_q_down: Optional[float] = Field(default=None, alias="PRIOR_Q_DOWN")

    # Sampler
    sampler_iters: int = Field(default=3000, alias="SAMPLER_ITERS")
    sampler_burn_in: int = Field(default=500, alias="SAMPLER_BURN_IN")
    sampler_n_interior: int = Field(default=49, alias="SAMPLER_N_INTERIOR")
    sampler_resync_every: int = Field(
        default=1000,  # segment replacements between full recomputes
        alias="SAMPLER_RESYNC_EVERY"
    )
    sampler_chunk_size: int = Field(
        default=65536,  # path rows per accumulation chunk
        alias="SAMPLER_CHUNK_SIZE"
    )
    sampler_sparse_schauder: bool = Field(
        default=True,
        alias="SAMPLER_SPARSE_SCHAUDER"
    )
    sampler_factor_cache_size: int = Field(
        default=64,
        alias="SAMPLER_FACTOR_CACHE_SIZE"
    )

    # Output
    output_grid_size: int = Field(default=201, alias="OUTPUT_GRID_SIZE")
    output_alpha: float = Field(default=0.10, alias="OUTPUT_ALPHA")
    output_csv_digits: int = Field(default=17, alias="OUTPUT_CSV_DIGITS")

    # Logging
    log_level: str = Field(default="INFO", alias="LOG_LEVEL")
    log_format: str = Field(default="console", alias="LOG_FORMAT")  # json or console

    model_config = {
        "extra": "ignore",
        "env_file": ".env",
        "case_sensitive": False,
        "populate_by_name": True,
    }

    # Nested settings properties
    @property
    def basis(self) -> BasisSettings:
        """Get basis settings."""
        return BasisSettings(
            family=self.basis_family,
            beta=self.basis_beta,
            j_max=self.basis_j_max
        )

    @property
    def prior(self) -> PriorSettings:
        """Get prior settings."""
        return PriorSettings(
            ig_shape=self.prior_ig_shape,
            ig_rate=self.prior_ig_rate,
            model_decay=self.prior_model_decay,
            q_stay=self.prior_q_stay,
            q_up=self.prior_q_up,
            q_down=self.prior_q_down
        )

    @property
    def sampler(self) -> SamplerSettings:
        """Get sampler settings."""
        return SamplerSettings(
            iters=self.sampler_iters,
            burn_in=self.sampler_burn_in,
            n_interior=self.sampler_n_interior,
            resync_every=self.sampler_resync_every,
            chunk_size=self.sampler_chunk_size,
            sparse_schauder=self.sampler_sparse_schauder,
            factor_cache_size=self.sampler_factor_cache_size
        )

    @property
    def output(self) -> OutputSettings:
        """Get output settings."""
        return OutputSettings(
            grid_size=self.output_grid_size,
            alpha=self.output_alpha,
            csv_digits=self.output_csv_digits
        )


@lru_cache()
def get_settings() -> Settings:
    """Get cached application settings."""
    return Settings()
