"""
``fit``: run the sampler on a path file and write summary, chain and metadata.
"""

import argparse
import time
from typing import Any, Dict

from app.cli.deps import build_run_config, build_sampler
from app.core.config import Settings
from app.core.logging import bind_run_context, get_logger
from app.models.dto import PosteriorSummary, RunConfig
from app.models.errors import ExitCode
from app.repositories.artifacts import ArtifactRepository
from app.repositories.paths import PathRepository
from app.services.posterior import default_grid, summarize

logger = get_logger(__name__)

# observation step above which treating data as continuous is questionable
CONTINUOUS_DT_WARNING = 0.01


def register(subparsers: argparse._SubParsersAction) -> None:
    parser = subparsers.add_parser(
        "fit",
        help="Estimate the drift from a path file",
        description="Run the reversible-jump sampler and write summary.csv, chain.csv and meta.json.",
    )
    parser.add_argument("data", help="Input t,x CSV file")
    parser.add_argument("--out", required=True, help="Output directory")
    parser.add_argument("--seed", type=int, required=True, help="Master seed")
    parser.add_argument("--mode", choices=["continuous", "discrete"], default="continuous")
    parser.add_argument("--label", default=None, help="Run label stored in meta.json")

    basis = parser.add_argument_group("basis")
    basis.add_argument("--basis", choices=["fourier", "schauder"], default=None)
    basis.add_argument("--beta", type=float, default=None)
    basis.add_argument("--j-max", type=int, default=None)

    prior = parser.add_argument_group("prior")
    prior.add_argument("--ig-shape", type=float, default=None)
    prior.add_argument("--ig-rate", type=float, default=None)
    prior.add_argument("--model-decay", type=float, default=None)
    prior.add_argument("--q-stay", type=float, default=None)
    prior.add_argument("--q-up", type=float, default=None)
    prior.add_argument("--q-down", type=float, default=None)

    sampler = parser.add_argument_group("sampler")
    sampler.add_argument("--iters", type=int, default=None)
    sampler.add_argument("--burn-in", type=int, default=None)
    sampler.add_argument("--n-interior", type=int, default=None)
    sampler.add_argument("--fixed-level", type=int, default=None, help="Keep the model index fixed")
    sampler.add_argument("--fixed-scale", type=float, default=None, help="Keep s^2 fixed")
    sampler.add_argument("--sparse", action=argparse.BooleanOptionalAction, default=None)
    sampler.add_argument("--resync-every", type=int, default=None)
    sampler.add_argument("--chunk-size", type=int, default=None)
    sampler.add_argument("--factor-cache-size", type=int, default=None)

    output = parser.add_argument_group("output")
    output.add_argument("--grid-size", type=int, default=None)
    output.add_argument("--alpha", type=float, default=None)
    parser.set_defaults(handler=run)


def _meta(config: RunConfig, summary: PosteriorSummary, data: str, n_points: int, dt: float, runtime: float) -> Dict[str, Any]:
    diag = summary.diagnostics
    return {
        "config": config.model_dump(mode="json"),
        "config_hash": config.config_hash(),
        "seed": config.seed,
        "label": config.label,
        "data": {"file": data, "n_points": n_points, "dt": dt},
        "runtime_seconds": runtime,
        "band_method": summary.band_method,
        "alpha": summary.alpha,
        "s_sq_mean": diag.s_sq_mean,
        "s_sq_median": diag.s_sq_median,
        "s_sq_autocorr_time": diag.s_sq_autocorr_time,
        "mean_j": diag.mean_j,
        "model_histogram": {str(j): count for j, count in summary.model_histogram.items()},
        "acceptance": summary.acceptance,
        "bridge_accept_mean": diag.bridge_accept_mean,
    }


def run(args: argparse.Namespace, settings: Settings) -> int:
    """Fit a path file and write the three artifacts."""
    config = build_run_config(args, settings)
    config_hash = config.config_hash()
    bind_run_context(command="fit", config_hash=config_hash, seed=config.seed, mode=config.mode)

    path = PathRepository().read(args.data)
    if config.mode == "continuous" and path.dt > CONTINUOUS_DT_WARNING:
        logger.warning(
            "Observation step is coarse for the continuous-data algorithm",
            dt=path.dt,
            threshold=CONTINUOUS_DT_WARNING
        )

    started = time.perf_counter()
    sampler = build_sampler(config)
    if config.mode == "continuous":
        chain = sampler.run_continuous(path, config.iters, config.burn_in)
    else:
        chain = sampler.run_discrete(path, config.n_interior, config.iters, config.burn_in)
    summary = summarize(chain, config.basis, grid=default_grid(config.grid_size), alpha=config.alpha)
    runtime = time.perf_counter() - started

    repository = ArtifactRepository(args.out, digits=settings.output.csv_digits)
    provenance = {"config_hash": config_hash, "seed": config.seed}
    repository.write_summary(summary, provenance)
    repository.write_chain(chain, provenance)
    repository.write_meta(_meta(config, summary, args.data, path.n_points, path.dt, runtime))

    logger.info("Fit complete", out=args.out, runtime_seconds=round(runtime, 3))
    return ExitCode.OK
