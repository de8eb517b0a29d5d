"""
Diffusion path simulation, Brownian bridges and Girsanov likelihoods.

Paths of dX_t = b(X_t) dt + dW_t are simulated with the Euler scheme.
Stochastic integrals are left-point (Ito) sums and time integrals left-point
Riemann sums, so the log-likelihood of a concatenated path is the sum of the
log-likelihoods of its pieces.
"""

import math
from typing import Callable, Optional

import numpy as np

from app.core.logging import get_logger
from app.core.rng import SeedLike, as_generator
from app.models.dto import FloatArray, Path
from app.models.errors import (
    InvalidArgumentError,
    NonFiniteDriftError,
    SimulationDivergedError,
    require_index,
    require_positive,
)

logger = get_logger(__name__)

Drift = Callable[[object], object]

# normals drawn per block during Euler simulation
_EULER_BLOCK = 1 << 16


def euler_simulate(
    drift: Drift,
    x0: float,
    T: float,
    dt: float,
    seed: SeedLike
) -> Path:
    """
    Simulate x_{i+1} = x_i + b(x_i) dt + sqrt(dt) Z_i.

    Args:
        drift: Scalar drift function
        x0: Initial value
        T: Time horizon
        dt: Euler step; T is covered by round(T / dt) steps
        seed: Seed or generator for the i.i.d. standard normals

    Returns:
        Path on [0, n dt] with n + 1 values

    Raises:
        InvalidArgumentError: If T or dt is invalid
        SimulationDivergedError: If the drift or the state becomes non-finite
    """
    T = require_positive("T", T)
    dt = require_positive("dt", dt)
    if dt > T:
        raise InvalidArgumentError(["dt"], f"step {dt} exceeds horizon {T}")
    n_steps = int(round(T / dt))
    rng = as_generator(seed)
    sqrt_dt = math.sqrt(dt)

    logger.debug("Simulating diffusion", x0=x0, T=T, dt=dt, n_steps=n_steps)

    values = np.empty(n_steps + 1, dtype=np.float64)
    x = float(x0)
    values[0] = x
    i = 0
    while i < n_steps:
        block = rng.standard_normal(min(_EULER_BLOCK, n_steps - i)) * sqrt_dt
        for dw in block:
            b = float(drift(x))
            x = x + b * dt + dw
            if not (math.isfinite(b) and math.isfinite(x)):
                raise SimulationDivergedError(index=i, value=x)
            i += 1
            values[i] = x

    return Path(t0=0.0, dt=dt, values=values)


def thin(path: Path, keep_every: int) -> Path:
    """
    Keep every ``keep_every``-th value, starting with the first.

    Trailing values that do not complete a block are dropped.
    """
    keep_every = require_index("keep_every", keep_every)
    values = path.values[::keep_every]
    if values.size < 2:
        raise InvalidArgumentError(["keep_every"], "thinned path would have fewer than 2 points")
    return Path(t0=path.t0, dt=path.dt * keep_every, values=values)


def sample_bridges(
    xa: FloatArray,
    xb: FloatArray,
    t_len: float,
    n_interior: int,
    rng: np.random.Generator
) -> FloatArray:
    """
    Draw one Brownian bridge per row, pinned at xa[r] and xb[r].

    Row r uses the r-th block of normals from ``rng``.

    Returns:
        Array of shape (len(xa), n_interior + 2)
    """
    xa = np.atleast_1d(np.asarray(xa, dtype=np.float64))
    normals = rng.standard_normal((xa.size, n_interior + 1))
    return bridges_from_normals(xa, xb, t_len, normals)


def bridges_from_normals(
    xa: FloatArray,
    xb: FloatArray,
    t_len: float,
    normals: FloatArray
) -> FloatArray:
    """
    Turn standard normals of shape (rows, n_interior + 1) into pinned bridges.

    A Brownian path W on the grid is corrected to
    xa + W_t - (t / t_len)(W_{t_len} - xb + xa); endpoints are then set
    exactly.
    """
    xa = np.atleast_1d(np.asarray(xa, dtype=np.float64))
    xb = np.atleast_1d(np.asarray(xb, dtype=np.float64))
    normals = np.atleast_2d(normals)
    n_steps = normals.shape[1]
    step = t_len / n_steps
    walk = np.zeros((xa.size, n_steps + 1))
    np.cumsum(normals * math.sqrt(step), axis=1, out=walk[:, 1:])
    frac = np.arange(n_steps + 1) / n_steps
    bridges = xa[:, None] + walk - frac[None, :] * (walk[:, -1:] - xb[:, None] + xa[:, None])
    bridges[:, 0] = xa
    bridges[:, -1] = xb
    return bridges


def sample_bridge(
    xa: float,
    xb: float,
    t_len: float,
    n_interior: int,
    seed: SeedLike,
    t0: float = 0.0
) -> Path:
    """
    Sample a Brownian bridge from xa to xb over a time span t_len.

    Args:
        xa: Start value (kept exactly)
        xb: End value (kept exactly)
        t_len: Duration of the bridge
        n_interior: Number of interior grid points
        seed: Seed or generator
        t0: Start time of the returned path

    Returns:
        Path of n_interior + 2 points
    """
    t_len = require_positive("t_len", t_len)
    n_interior = require_index("n_interior", n_interior, 0)
    values = sample_bridges(np.array([xa]), np.array([xb]), t_len, n_interior, as_generator(seed))[0]
    return Path(t0=t0, dt=t_len / (n_interior + 1), values=values)


def _checked_drift(drift: Drift, x: FloatArray) -> FloatArray:
    values = np.asarray(drift(x), dtype=np.float64)
    if values.shape != x.shape:
        values = np.broadcast_to(values, x.shape)
    finite = np.isfinite(values)
    if not np.all(finite):
        raise NonFiniteDriftError(float(x[~finite][0]))
    return values


def log_girsanov(drift: Drift, path: Path) -> float:
    """
    Discretized log Girsanov density of a path relative to Brownian motion.

    Returns sum_i b(x_i)(x_{i+1} - x_i) - 1/2 sum_i b(x_i)^2 dt.

    Raises:
        NonFiniteDriftError: If the drift is not finite along the path
    """
    left = path.values[:-1]
    b = _checked_drift(drift, left)
    return float(np.sum(b * np.diff(path.values)) - 0.5 * np.sum(b * b) * path.dt)


def log_girsanov_segments(drift: Drift, segments: FloatArray, dt: float) -> FloatArray:
    """Per-row log Girsanov density for an array of segments (rows share dt)."""
    left = segments[:, :-1]
    b = _checked_drift(drift, left)
    return np.sum(b * np.diff(segments, axis=1), axis=1) - 0.5 * np.sum(b * b, axis=1) * dt


def linear_interpolation(observations: Path, n_interior: int) -> Path:
    """
    Fill n_interior equally spaced points between consecutive observations.

    Observation values are reproduced exactly at observation indices.
    """
    n_interior = require_index("n_interior", n_interior, 0)
    obs = observations.values
    stride = n_interior + 1
    frac = np.arange(stride) / stride
    body = obs[:-1, None] + frac[None, :] * (obs[1:, None] - obs[:-1, None])
    values = np.empty((obs.size - 1) * stride + 1)
    values[:-1] = body.ravel()
    values[::stride] = obs
    return Path(t0=observations.t0, dt=observations.dt / stride, values=values)


def path_segments(path: Path, n_interior: int, n_segments: Optional[int] = None) -> FloatArray:
    """View a latent path as (n_segments, n_interior + 2) rows sharing endpoints."""
    stride = n_interior + 1
    n = (path.n_points - 1) // stride if n_segments is None else n_segments
    idx = np.arange(n)[:, None] * stride + np.arange(stride + 1)[None, :]
    return path.values[idx]
