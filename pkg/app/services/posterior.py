"""
Posterior summaries of a drift chain.

Turns chain records into the Rao-Blackwellized posterior mean drift,
pointwise credible bands and the trace, model and scale diagnostics.
"""

from collections import Counter
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np

from app.core.logging import get_logger
from app.models.dto import (
    BasisSpec,
    Chain,
    ChainDiagnostics,
    ChainRecord,
    FloatArray,
    IndexArray,
    PosteriorSummary,
)
from app.models.errors import InvalidArgumentError
from app.services.basis import eval_drift

logger = get_logger(__name__)

MIN_BAND_RECORDS = 10
DEFAULT_DESIGN_POINTS = (0.1, 0.3, 0.5, 0.7, 0.9)


def default_grid(size: int = 201) -> FloatArray:
    """Uniform grid on [0, 1]."""
    return np.linspace(0.0, 1.0, size)


def _ordered(records: Sequence[ChainRecord]) -> List[ChainRecord]:
    return sorted(records, key=lambda record: record.iteration)


def _curves(records: Sequence[ChainRecord], spec: BasisSpec, grid: FloatArray) -> FloatArray:
    """Sampled drift curves, one row per record."""
    return np.vstack([eval_drift(spec, record.theta, grid) for record in _ordered(records)])


def rao_blackwell_mean(records: Sequence[ChainRecord], spec: BasisSpec, grid: FloatArray) -> FloatArray:
    """
    Average of the per-iteration posterior-mean curves.

    Coefficient vectors of different models are averaged as functions on the
    grid. Records are summed in iteration order, so the result does not
    depend on the order they are passed in.

    Raises:
        InvalidArgumentError: If there are no records
    """
    if not records:
        raise InvalidArgumentError(["records"], "no post-burn-in records to average")
    grid = np.asarray(grid, dtype=np.float64)
    total = np.zeros(grid.shape)
    for record in _ordered(records):
        total += eval_drift(spec, record.posterior_mean, grid)
    return total / len(records)


def credible_bands(
    records: Sequence[ChainRecord],
    spec: BasisSpec,
    grid: FloatArray,
    alpha: float = 0.10
) -> Tuple[FloatArray, FloatArray]:
    """
    Pointwise empirical alpha/2 and 1 - alpha/2 quantiles of the sampled drift.

    Returns:
        (lo, hi) arrays on the grid

    Raises:
        InvalidArgumentError: If alpha is outside (0, 1] or fewer than 10 records
    """
    if not 0.0 < alpha <= 1.0:
        raise InvalidArgumentError(["alpha"], f"must lie in (0, 1], got {alpha!r}")
    if len(records) < MIN_BAND_RECORDS:
        raise InvalidArgumentError(
            ["records"], f"credible bands need at least {MIN_BAND_RECORDS} records, got {len(records)}"
        )
    curves = _curves(records, spec, np.asarray(grid, dtype=np.float64))
    lo, hi = np.quantile(curves, [alpha / 2.0, 1.0 - alpha / 2.0], axis=0)
    return lo, hi


def integrated_autocorr_time(series: FloatArray) -> float:
    """
    Integrated autocorrelation time, summing lags until the first
    non-positive autocorrelation.
    """
    x = np.asarray(series, dtype=np.float64)
    n = x.size
    if n < 2:
        return 1.0
    x = x - x.mean()
    variance = float(np.dot(x, x))
    if variance == 0.0:
        return 1.0
    size = 1 << (2 * n - 1).bit_length()
    spectrum = np.fft.rfft(x, size)
    acf = np.fft.irfft(spectrum * np.conj(spectrum), size)[:n] / variance
    tau = 1.0
    for lag in range(1, n):
        if acf[lag] <= 0.0:
            break
        tau += 2.0 * acf[lag]
    return float(tau)


def acceptance_table(records: Sequence[ChainRecord], j_max: Optional[int] = None) -> Dict[str, float]:
    """Mean Move II acceptance probability per "j->j'" pair; out-of-range proposals are left out."""
    sums: Dict[str, List[float]] = {}
    for record in records:
        if record.proposed_j < 1 or (j_max is not None and record.proposed_j > j_max):
            continue
        entry = sums.setdefault(f"{record.j_from}->{record.proposed_j}", [0.0, 0.0])
        entry[0] += record.model_accept_prob
        entry[1] += 1.0
    return {key: total / count for key, (total, count) in sorted(sums.items())}


def diagnostics(
    records: Sequence[ChainRecord],
    spec: BasisSpec,
    design_points: Optional[Sequence[float]] = None,
    segment_accept_counts: Optional[IndexArray] = None,
    n_iterations: Optional[int] = None,
    bins: int = 30
) -> ChainDiagnostics:
    """
    Trace, running-mean, model and scale diagnostics.

    Args:
        records: Post-burn-in chain records
        spec: Basis specification
        design_points: Points at which drift traces are taken
        segment_accept_counts: Per-segment Move III acceptance counts
        n_iterations: Iterations behind the counts (all iterations of the run)
        bins: Bins of the s^2 histogram
    """
    ordered = _ordered(records)
    points = np.asarray(design_points if design_points is not None else DEFAULT_DESIGN_POINTS, dtype=np.float64)
    if ordered:
        traces = np.vstack([eval_drift(spec, record.theta, points) for record in ordered])
    else:
        traces = np.empty((0, points.size))
    counts = np.arange(1, traces.shape[0] + 1)[:, None]
    running = np.cumsum(traces, axis=0) / counts if traces.size else traces

    s_sq = np.array([record.s_sq for record in ordered])
    js = np.array([record.j for record in ordered], dtype=np.int64)
    hist_counts, hist_edges = np.histogram(s_sq, bins=bins) if s_sq.size else (np.zeros(0, int), np.zeros(0))
    rates = [record.bridge_accept_rate for record in ordered if record.bridge_accept_rate is not None]

    segment_acceptance = None
    if segment_accept_counts is not None and n_iterations:
        segment_acceptance = np.asarray(segment_accept_counts, dtype=np.float64) / n_iterations

    return ChainDiagnostics(
        design_points=points,
        traces=traces,
        running_means=running,
        model_series=js,
        model_histogram=dict(sorted(Counter(js.tolist()).items())),
        acceptance=acceptance_table(ordered, spec.j_max),
        s_sq_mean=float(np.mean(s_sq)) if s_sq.size else float("nan"),
        s_sq_median=float(np.median(s_sq)) if s_sq.size else float("nan"),
        s_sq_autocorr_time=integrated_autocorr_time(s_sq),
        s_sq_hist_counts=hist_counts,
        s_sq_hist_edges=hist_edges,
        mean_j=float(np.mean(js)) if js.size else float("nan"),
        bridge_accept_mean=float(np.mean(rates)) if rates else None,
        segment_acceptance=segment_acceptance,
    )


def summarize(
    chain: Chain,
    spec: BasisSpec,
    grid: Optional[FloatArray] = None,
    alpha: float = 0.10,
    design_points: Optional[Sequence[float]] = None
) -> PosteriorSummary:
    """
    Build the posterior summary of a chain.

    Raises:
        InvalidArgumentError: If the chain has too few records for bands
    """
    grid = default_grid() if grid is None else np.asarray(grid, dtype=np.float64)
    mean = rao_blackwell_mean(chain.records, spec, grid)
    lo, hi = credible_bands(chain.records, spec, grid, alpha)
    diag = diagnostics(
        chain.records,
        spec,
        design_points=design_points,
        segment_accept_counts=chain.segment_accept_counts,
        n_iterations=chain.iters,
    )
    logger.info(
        "Summarized chain",
        records=len(chain.records),
        s_sq_mean=round(diag.s_sq_mean, 6),
        s_sq_median=round(diag.s_sq_median, 6),
        mean_j=round(diag.mean_j, 3)
    )
    return PosteriorSummary(
        grid=grid,
        mean=mean,
        band_lo=lo,
        band_hi=hi,
        alpha=alpha,
        s_sq_samples=np.array([r.s_sq for r in _ordered(chain.records)]),
        j_samples=diag.model_series,
        model_histogram=diag.model_histogram,
        acceptance=diag.acceptance,
        segment_acceptance=diag.segment_acceptance,
        diagnostics=diag,
    )
