"""
Shared dependencies of the command-line front-end.

This module merges parsed flags over the environment settings and builds
the validated run configuration and the sampler a command works with.
"""

import argparse
import json
from pathlib import Path as FilePath
from typing import Any, Optional

from app.core.config import Settings
from app.core.logging import get_logger
from app.models.dto import BasisSpec, NamedDrift, PriorConfig, RunConfig
from app.models.errors import InvalidArgumentError
from app.services.basis import drift_function
from app.services.sampler import DriftSampler
from app.services.testdrifts import get_drift

logger = get_logger(__name__)


# ============================================================================
# Helpers
# ============================================================================

def _first(*values: Any) -> Any:
    """First value that is not None."""
    for value in values:
        if value is not None:
            return value
    return None


# ============================================================================
# Run configuration
# ============================================================================

def build_basis_spec(args: argparse.Namespace, settings: Settings) -> BasisSpec:
    return BasisSpec(
        family=_first(getattr(args, "basis", None), settings.basis.family),
        beta=_first(getattr(args, "beta", None), settings.basis.beta),
        j_max=_first(getattr(args, "j_max", None), settings.basis.j_max),
    )


def build_prior(args: argparse.Namespace, settings: Settings, spec: BasisSpec) -> PriorConfig:
    prior = settings.prior
    return PriorConfig.for_family(
        spec.family,
        ig_shape=_first(args.ig_shape, prior.ig_shape),
        ig_rate=_first(args.ig_rate, prior.ig_rate),
        model_decay=_first(args.model_decay, prior.model_decay),
        q_stay=_first(args.q_stay, prior.q_stay),
        q_up=_first(args.q_up, prior.q_up),
        q_down=_first(args.q_down, prior.q_down),
    )


def build_run_config(args: argparse.Namespace, settings: Settings) -> RunConfig:
    """
    Merge fit flags over settings into a validated RunConfig.

    Raises:
        pydantic.ValidationError: If any parameter is out of range
    """
    spec = build_basis_spec(args, settings)
    sampler = settings.sampler
    output = settings.output
    return RunConfig(
        mode=args.mode,
        basis=spec,
        prior=build_prior(args, settings, spec),
        iters=_first(args.iters, sampler.iters),
        burn_in=_first(args.burn_in, sampler.burn_in),
        n_interior=_first(args.n_interior, sampler.n_interior),
        seed=args.seed,
        grid_size=_first(args.grid_size, output.grid_size),
        alpha=_first(args.alpha, output.alpha),
        fixed_level=args.fixed_level,
        fixed_scale=args.fixed_scale,
        sparse_schauder=_first(args.sparse, sampler.sparse_schauder),
        resync_every=_first(args.resync_every, sampler.resync_every),
        chunk_size=_first(args.chunk_size, sampler.chunk_size),
        factor_cache_size=_first(args.factor_cache_size, sampler.factor_cache_size),
        label=args.label,
    )


def build_sampler(config: RunConfig) -> DriftSampler:
    """Sampler for a validated run configuration."""
    return DriftSampler(
        config.basis,
        config.prior,
        config.seed,
        fixed_level=config.fixed_level,
        fixed_scale=config.fixed_scale,
        use_sparse=config.sparse_schauder,
        cache_size=config.factor_cache_size,
        chunk_size=config.chunk_size,
        resync_every=config.resync_every,
    )


# ============================================================================
# Drift resolution
# ============================================================================

def resolve_drift(value: str) -> NamedDrift:
    """
    Resolve a benchmark drift name or a coefficient JSON file.

    A coefficient file holds ``{"family": ..., "beta": ..., "theta": [...]}``.

    Raises:
        InvalidArgumentError: If the name is unknown or the file is malformed
    """
    candidate = FilePath(value)
    if candidate.suffix.lower() == ".json":
        if not candidate.is_file():
            raise InvalidArgumentError(["drift"], f"coefficient file {value!r} does not exist")
        try:
            document = json.loads(candidate.read_text())
            spec = BasisSpec(family=document.get("family", "fourier"), beta=document.get("beta", 1.5))
            theta = [float(v) for v in document["theta"]]
        except (ValueError, KeyError, TypeError, AttributeError) as exc:
            raise InvalidArgumentError(["drift"], f"malformed coefficient file {value!r}: {exc}")
        logger.debug("Loaded drift coefficients", file=value, family=spec.family.value, m=len(theta))
        return NamedDrift(name=candidate.stem, fn=drift_function(spec, theta))
    return get_drift(value)


def default_label(source: str, override: Optional[str] = None) -> str:
    """Run label: explicit override or the parent directory name of the file."""
    if override:
        return override
    parent = FilePath(source).resolve().parent.name
    return parent or FilePath(source).stem
