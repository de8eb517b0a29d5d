"""
Sufficient statistics of a path for the drift posterior.

mu_l = sum_i psi_l(x_i)(x_{i+1} - x_i) and
Sigma_{l,l'} = sum_i psi_l(x_i) psi_l'(x_i) dt are computed once at the
maximal model j_max; every sub-model reads leading blocks of them.

Fourier Sigma is held dense. Schauder Sigma is held as values on its
structural pattern (see basis.schauder_pattern), ordered by column, so the
pattern of model j is a prefix of the pattern of model j_max.

In discrete-data mode the latent path lives here as an (n, p) array of
segments sharing endpoints; Move III swaps segments through
replace_segments, which subtracts the old and adds the new contributions.
"""

from typing import Dict, Iterable, Optional, Tuple, Union

import numpy as np
from scipy import sparse

from app.core.logging import get_logger
from app.models.dto import BasisFamily, BasisSpec, FloatArray, IndexArray, Path, Segment
from app.models.errors import InvalidArgumentError, require_index
from app.services.basis import design_matrix, model_dim, schauder_levels, schauder_pattern

logger = get_logger(__name__)

SigmaView = Union[FloatArray, sparse.csr_array]


class _Compensated:
    """Neumaier-compensated running sum of equally shaped arrays."""

    def __init__(self, shape: Tuple[int, ...]):
        self.total = np.zeros(shape)
        self.comp = np.zeros(shape)

    def add(self, value: FloatArray) -> None:
        t = self.total + value
        big = np.abs(self.total) >= np.abs(value)
        self.comp += np.where(big, (self.total - t) + value, (value - t) + self.total)
        self.total = t

    def result(self) -> FloatArray:
        return self.total + self.comp


# ============================================================================
# Accumulation kernels
# ============================================================================

def _pattern_col_start(j: int) -> IndexArray:
    _, cols = schauder_pattern(j)
    return np.searchsorted(cols, np.arange(2 ** (j - 1)))


def _chunk_contribution(
    spec: BasisSpec,
    j_max: int,
    m: int,
    x_left: FloatArray,
    dx: FloatArray
) -> Tuple[FloatArray, FloatArray]:
    """mu and Sigma/dt contributions of a block of left points (Sigma in storage layout)."""
    if spec.family is BasisFamily.FOURIER:
        psi = design_matrix(spec, x_left, m)
        return psi.T @ dx, psi.T @ psi

    idx, val = schauder_levels(x_left, j_max)
    mu = np.bincount(idx.ravel(), weights=(val * dx[:, None]).ravel(), minlength=m)
    col_start = _pattern_col_start(j_max)
    n_pattern = schauder_pattern(j_max)[0].size
    sigma = np.zeros(n_pattern)
    for b in range(j_max):
        base = col_start[idx[:, b]]
        for a in range(b + 1):
            sigma += np.bincount(base + a, weights=val[:, a] * val[:, b], minlength=n_pattern)
    return mu, sigma


def _accumulate(
    spec: BasisSpec,
    j_max: int,
    m: int,
    x_left: FloatArray,
    dx: FloatArray,
    dt: float,
    chunk_size: int
) -> Tuple[FloatArray, FloatArray]:
    """Chunked, compensated accumulation over all left points."""
    mu_sum: Optional[_Compensated] = None
    sigma_sum: Optional[_Compensated] = None
    for start in range(0, x_left.size, chunk_size):
        stop = start + chunk_size
        mu_c, sigma_c = _chunk_contribution(spec, j_max, m, x_left[start:stop], dx[start:stop])
        if mu_sum is None:
            mu_sum = _Compensated(mu_c.shape)
            sigma_sum = _Compensated(sigma_c.shape)
        mu_sum.add(mu_c)
        sigma_sum.add(sigma_c)
    if mu_sum is None or sigma_sum is None:
        empty_sigma = _chunk_contribution(spec, j_max, m, x_left[:0], dx[:0])[1]
        return np.zeros(m), empty_sigma
    return mu_sum.result(), sigma_sum.result() * dt


# ============================================================================
# Statistics
# ============================================================================

class SegmentCache:
    """Latent segments of a discretely observed path."""

    def __init__(self, values: FloatArray, dt: float, t0: float = 0.0):
        self.values = values  # (n, p), rows share endpoints
        self.dt = dt
        self.t0 = t0
        self.replaced_since_resync = 0

    @property
    def n_segments(self) -> int:
        return int(self.values.shape[0])

    @property
    def points_per_segment(self) -> int:
        return int(self.values.shape[1])

    def left_points(self, rows: Optional[FloatArray] = None) -> Tuple[FloatArray, FloatArray]:
        block = self.values if rows is None else rows
        return block[:, :-1].ravel(), np.diff(block, axis=1).ravel()


class SuffStats:
    """
    Sufficient statistics at j_max with nested sub-model views.

    Instances are mutated in place by replace_segment(s) under a single
    writer; ``version`` increases with every change.
    """

    def __init__(
        self,
        spec: BasisSpec,
        j_max: int,
        mu: FloatArray,
        sigma_store: FloatArray,
        segments: Optional[SegmentCache] = None,
        chunk_size: int = 65536,
        resync_every: int = 1000
    ):
        self.spec = spec
        self.j_max = j_max
        self.m = model_dim(spec, j_max)
        self.mu = mu
        self._sigma_store = sigma_store
        self.segments = segments
        self.chunk_size = chunk_size
        self.resync_every = resync_every
        self.version = 0
        self._view_cache: Dict[Tuple[int, int], sparse.csr_array] = {}

    @property
    def is_sparse(self) -> bool:
        return self.spec.family is BasisFamily.SCHAUDER

    # ------------------------------------------------------------------
    # Views
    # ------------------------------------------------------------------

    def view(self, j: int) -> Tuple[FloatArray, SigmaView]:
        """
        Leading m_j block of (mu, Sigma).

        Fourier views share memory with the stored arrays; Schauder views
        are CSR arrays built from the pattern prefix and cached per version.
        """
        j = require_index("j", j, 1, self.j_max)
        m_j = model_dim(self.spec, j)
        if not self.is_sparse:
            return self.mu[:m_j], self._sigma_store[:m_j, :m_j]

        key = (self.version, j)
        cached = self._view_cache.get(key)
        if cached is None:
            rows, cols, values = self.pattern_view(j)
            off = rows != cols
            cached = sparse.csr_array(
                (
                    np.concatenate([values, values[off]]),
                    (np.concatenate([rows, cols[off]]), np.concatenate([cols, rows[off]])),
                ),
                shape=(m_j, m_j),
            )
            self._view_cache = {k: v for k, v in self._view_cache.items() if k[0] == self.version}
            self._view_cache[key] = cached
        return self.mu[:m_j], cached

    def pattern_view(self, j: int) -> Tuple[IndexArray, IndexArray, FloatArray]:
        """Schauder only: (rows, cols, values) of the upper pattern of Sigma^j."""
        if not self.is_sparse:
            raise InvalidArgumentError(["family"], "pattern views exist for the Schauder basis only")
        j = require_index("j", j, 1, self.j_max)
        rows, cols = schauder_pattern(self.j_max)
        count = schauder_pattern(j)[0].size
        return rows[:count], cols[:count], self._sigma_store[:count]

    def dense_sigma(self, j: Optional[int] = None) -> FloatArray:
        """Sigma^j as a dense array (copy for Schauder)."""
        _, sigma = self.view(j or self.j_max)
        return sigma.toarray() if sparse.issparse(sigma) else np.array(sigma)

    # ------------------------------------------------------------------
    # Segment updates
    # ------------------------------------------------------------------

    def segment(self, k: int) -> Segment:
        """Segment k (1-based) as a path on its own time window."""
        cache = self._require_cache()
        k = require_index("k", k, 1, cache.n_segments)
        t_start = cache.t0 + (k - 1) * cache.dt * (cache.points_per_segment - 1)
        return Segment(k=k, path=Path(t0=t_start, dt=cache.dt, values=cache.values[k - 1].copy()))

    def segment_contribution(self, k: int) -> Tuple[FloatArray, SigmaView]:
        """(mu, Sigma) contribution of segment k (1-based) at j_max."""
        cache = self._require_cache()
        k = require_index("k", k, 1, cache.n_segments)
        x_left, dx = cache.left_points(cache.values[k - 1 : k])
        mu, store = _accumulate(self.spec, self.j_max, self.m, x_left, dx, cache.dt, self.chunk_size)
        return mu, self._materialize(store)

    def replace_segment(self, k: int, new_segment: Union[Path, Segment]) -> "SuffStats":
        """
        Swap segment k (1-based) for ``new_segment`` and update mu and Sigma.

        Raises:
            InvalidArgumentError: If the cache is inactive, k is out of range,
                or the new segment does not fit the grid and endpoints
        """
        cache = self._require_cache()
        k = require_index("k", k, 1, cache.n_segments)
        if isinstance(new_segment, Segment):
            if new_segment.k != k:
                raise InvalidArgumentError(["new_segment"], f"segment {new_segment.k} given for slot {k}")
            new_segment = new_segment.path
        if new_segment.n_points != cache.points_per_segment:
            raise InvalidArgumentError(
                ["new_segment"],
                f"expected {cache.points_per_segment} points, got {new_segment.n_points}"
            )
        if not np.isclose(new_segment.dt, cache.dt, rtol=1e-12, atol=0.0):
            raise InvalidArgumentError(["new_segment"], f"step {new_segment.dt} differs from {cache.dt}")
        return self.replace_segments(np.array([k - 1]), new_segment.values[None, :])

    def replace_segments(self, rows: Iterable[int], new_values: FloatArray) -> "SuffStats":
        """
        Batch form of replace_segment with 0-based segment rows.

        Args:
            rows: 0-based segment indices (distinct)
            new_values: Array (len(rows), points per segment)
        """
        cache = self._require_cache()
        rows = np.asarray(list(rows) if not isinstance(rows, np.ndarray) else rows, dtype=np.int64)
        new_values = np.asarray(new_values, dtype=np.float64)
        if rows.size == 0:
            return self
        old_values = cache.values[rows]
        if (
            new_values.shape != old_values.shape
            or not np.array_equal(new_values[:, 0], old_values[:, 0])
            or not np.array_equal(new_values[:, -1], old_values[:, -1])
        ):
            raise InvalidArgumentError(["new_segment"], "endpoints must equal the pinned observations")

        new_left, new_dx = cache.left_points(new_values)
        old_left, old_dx = cache.left_points(old_values)
        mu_new, store_new = _accumulate(
            self.spec, self.j_max, self.m, new_left, new_dx, cache.dt, self.chunk_size
        )
        mu_old, store_old = _accumulate(
            self.spec, self.j_max, self.m, old_left, old_dx, cache.dt, self.chunk_size
        )
        self.mu += mu_new - mu_old
        self._sigma_store += store_new - store_old
        cache.values[rows] = new_values
        cache.replaced_since_resync += int(rows.size)
        self.version += 1

        if cache.replaced_since_resync >= self.resync_every:
            self.resync()
        return self

    def resync(self) -> None:
        """Recompute mu and Sigma from the cached segments."""
        cache = self._require_cache()
        x_left, dx = cache.left_points()
        self.mu, self._sigma_store = _accumulate(
            self.spec, self.j_max, self.m, x_left, dx, cache.dt, self.chunk_size
        )
        logger.debug(
            "Resynchronized sufficient statistics",
            replaced=cache.replaced_since_resync,
            n_segments=cache.n_segments
        )
        cache.replaced_since_resync = 0
        self.version += 1

    def latent_path(self) -> Path:
        """Concatenate the cached segments into one path."""
        cache = self._require_cache()
        values = np.concatenate([cache.values[:, :-1].ravel(), cache.values[-1:, -1]])
        return Path(t0=cache.t0, dt=cache.dt, values=values)

    def _require_cache(self) -> SegmentCache:
        if self.segments is None:
            raise InvalidArgumentError(["stats"], "segment cache is not active (continuous-data statistics)")
        return self.segments

    def _materialize(self, store: FloatArray) -> SigmaView:
        if not self.is_sparse:
            return store
        rows, cols = schauder_pattern(self.j_max)
        off = rows != cols
        return sparse.csr_array(
            (
                np.concatenate([store, store[off]]),
                (np.concatenate([rows, cols[off]]), np.concatenate([cols, rows[off]])),
            ),
            shape=(self.m, self.m),
        )


# ============================================================================
# Construction
# ============================================================================

def compute(
    spec: BasisSpec,
    path: Path,
    j_max: Optional[int] = None,
    n_interior: Optional[int] = None,
    chunk_size: int = 65536,
    resync_every: int = 1000
) -> SuffStats:
    """
    Compute mu and Sigma of a path at level j_max.

    Args:
        spec: Basis specification
        path: Observed (continuous mode) or latent (discrete mode) path
        j_max: Maximal model index (defaults to spec.j_max)
        n_interior: When given, activates the segment cache with segments of
            n_interior + 2 points; the path length must fit whole segments
        chunk_size: Rows per accumulation chunk
        resync_every: Segment replacements between full recomputes

    Returns:
        SuffStats
    """
    j_max = require_index("j_max", j_max if j_max is not None else spec.j_max, 1, spec.j_max)
    m = model_dim(spec, j_max)
    x_left = path.values[:-1]
    dx = np.diff(path.values)
    mu, store = _accumulate(spec, j_max, m, x_left, dx, path.dt, chunk_size)

    segments = None
    if n_interior is not None:
        stride = require_index("n_interior", n_interior, 0) + 1
        if (path.n_points - 1) % stride:
            raise InvalidArgumentError(
                ["n_interior"], f"path of {path.n_points} points does not split into segments of {stride} steps"
            )
        n_segments = (path.n_points - 1) // stride
        idx = np.arange(n_segments)[:, None] * stride + np.arange(stride + 1)[None, :]
        segments = SegmentCache(np.array(path.values[idx]), path.dt, path.t0)

    logger.debug(
        "Computed sufficient statistics",
        family=spec.family.value,
        j_max=j_max,
        m=m,
        n_points=path.n_points,
        segmented=segments is not None
    )
    return SuffStats(spec, j_max, mu, store, segments, chunk_size, resync_every)


def view(stats: SuffStats, j: int) -> Tuple[FloatArray, SigmaView]:
    """Leading m_j sub-vector of mu and principal block of Sigma."""
    return stats.view(j)
