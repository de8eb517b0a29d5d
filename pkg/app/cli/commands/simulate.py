"""
``simulate``: write an Euler-simulated path of a benchmark drift.
"""

import argparse

from app.cli.deps import resolve_drift
from app.core.config import Settings
from app.core.logging import bind_run_context, get_logger
from app.core.rng import Stream, get_rng
from app.models.dto import SimulationConfig
from app.models.errors import ExitCode
from app.repositories.paths import PathRepository
from app.services.diffusion import euler_simulate, thin

logger = get_logger(__name__)


def register(subparsers: argparse._SubParsersAction) -> None:
    parser = subparsers.add_parser(
        "simulate",
        help="Simulate dX = b(X) dt + dW with the Euler scheme",
        description="Simulate a path and write it as a t,x CSV file.",
    )
    parser.add_argument("--drift", required=True, help="main, b1, b2, b3 or a coefficient JSON file")
    parser.add_argument("--T", dest="T", type=float, required=True, help="Time horizon")
    parser.add_argument("--dt", type=float, required=True, help="Euler step")
    parser.add_argument("--x0", type=float, default=0.0, help="Initial value")
    parser.add_argument("--keep-every", type=int, default=1, help="Write every k-th simulated value")
    parser.add_argument("--seed", type=int, default=0, help="Master seed")
    parser.add_argument("--out", required=True, help="Output CSV file")
    parser.set_defaults(handler=run)


def run(args: argparse.Namespace, settings: Settings) -> int:
    """Simulate, thin and write the path; echoes the seed and config hash."""
    config = SimulationConfig(
        drift=args.drift,
        T=args.T,
        dt=args.dt,
        x0=args.x0,
        keep_every=args.keep_every,
        seed=args.seed,
    )
    config_hash = config.config_hash()
    bind_run_context(command="simulate", config_hash=config_hash, seed=config.seed)

    drift = resolve_drift(config.drift)
    path = euler_simulate(drift, config.x0, config.T, config.dt, get_rng(config.seed, Stream.SIMULATION))
    if config.keep_every > 1:
        path = thin(path, config.keep_every)

    PathRepository(digits=settings.output.csv_digits).write(
        path, args.out, provenance={"config_hash": config_hash, "seed": config.seed}
    )
    logger.info("Simulation written", out=args.out, n_points=path.n_points, dt=path.dt)
    return ExitCode.OK
