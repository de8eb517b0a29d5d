"""
Gaussian linear algebra for the conditional drift posterior.

Given (mu^j, Sigma^j) and a scale s^2, the coefficients of model j have
posterior N(W^-1 mu, W^-1) with W = Sigma^j + diag(1 / (s^2 xi_l^2)).
Every quantity is derived from one triangular factor M with W = M^T M and
the solution z of M^T z = mu:

    posterior mean     M^-1 z
    posterior draw     M^-1 (z + Z),  Z standard normal
    log predictive     1/2 |z|^2 - sum_i (1/2 log(s^2 xi_i^2) + log M_ii)

The dense factor is upper triangular and nested: its leading m_j block is
the factor of model j, so one factorization at the larger model yields the
Bayes factor between two models. For the Schauder basis the factor is
computed on the structural pattern of Sigma by eliminating fine levels
first; it is then lower triangular and not nested.
"""

import math
from typing import Optional, Tuple, Union

import numpy as np
from pydantic import BaseModel, ConfigDict
from scipy import sparse
from scipy.linalg import lapack, solve_triangular
from scipy.sparse.linalg import spsolve_triangular

from app.core.logging import get_logger
from app.core.rng import SeedLike, as_generator
from app.models.dto import BasisFamily, BasisSpec, FloatArray, IndexArray
from app.models.errors import InvalidArgumentError, NumericalError, require_index, require_positive
from app.services.basis import model_dim, schauder_pattern, xi_sq_vector
from app.services.suffstats import SuffStats

logger = get_logger(__name__)

StatsView = Tuple[FloatArray, Union[FloatArray, sparse.csr_array]]


class PosteriorFactor(BaseModel):
    """Triangular factor of W^j with the solved right-hand side."""
    model_config = ConfigDict(frozen=True, arbitrary_types_allowed=True)

    j: int
    m: int
    s_sq: float
    chol: Union[FloatArray, sparse.csr_array]
    z: FloatArray
    logdet_terms: FloatArray  # log M_ii
    prior_log_scale: FloatArray  # 1/2 log(s^2 xi_i^2)
    lower: bool = False

    @property
    def is_sparse(self) -> bool:
        return bool(sparse.issparse(self.chol))

    def leading(self, j: int, m: int) -> "PosteriorFactor":
        """
        Factor of the nested sub-model with m coefficients.

        Raises:
            InvalidArgumentError: For sparse factors, which are not nested
        """
        if self.is_sparse or self.lower:
            raise InvalidArgumentError(["factor"], "only dense upper factors are nested")
        if m > self.m:
            raise InvalidArgumentError(["m"], f"sub-model of size {m} exceeds factor size {self.m}")
        return PosteriorFactor(
            j=j,
            m=m,
            s_sq=self.s_sq,
            chol=self.chol[:m, :m],
            z=self.z[:m],
            logdet_terms=self.logdet_terms[:m],
            prior_log_scale=self.prior_log_scale[:m],
        )

    def dense_chol(self) -> FloatArray:
        return self.chol.toarray() if self.is_sparse else np.asarray(self.chol)


# ============================================================================
# Dense factorization
# ============================================================================

def _prior_precision(spec: BasisSpec, s_sq: float, m: int) -> FloatArray:
    return 1.0 / (s_sq * xi_sq_vector(spec, m))


def factorize(stats_view: StatsView, spec: BasisSpec, s_sq: float, j: int) -> PosteriorFactor:
    """
    Cholesky factor of W^j = Sigma^j + (s^2 Xi^j)^-1 and z with M^T z = mu.

    Args:
        stats_view: (mu^j, Sigma^j) from suffstats.view
        spec: Basis specification
        s_sq: Prior scale s^2
        j: Model index

    Returns:
        Dense upper-triangular PosteriorFactor

    Raises:
        NumericalError: If a pivot is not positive
    """
    s_sq = require_positive("s_sq", s_sq)
    mu, sigma = stats_view
    m = model_dim(spec, j)
    if mu.shape != (m,):
        raise InvalidArgumentError(["stats_view"], f"expected {m} coefficients for model {j}, got {mu.shape}")
    sigma = sigma.toarray() if sparse.issparse(sigma) else np.asarray(sigma, dtype=np.float64)

    w = np.array(sigma, dtype=np.float64, order="F")
    w[np.diag_indices(m)] += _prior_precision(spec, s_sq, m)
    chol, info = lapack.dpotrf(w, lower=0, clean=1)
    if info > 0:
        raise NumericalError(f"W^{j} is not positive definite at pivot {info}", pivot=int(info))
    if info < 0:
        raise NumericalError(f"dpotrf rejected argument {-info}")

    z = solve_triangular(chol, mu, trans="T", lower=False)
    return PosteriorFactor(
        j=j,
        m=m,
        s_sq=s_sq,
        chol=chol,
        z=z,
        logdet_terms=np.log(np.diag(chol)),
        prior_log_scale=0.5 * np.log(s_sq * xi_sq_vector(spec, m)),
    )


# ============================================================================
# Sparse Schauder factorization
# ============================================================================

def _bit_length(values: IndexArray) -> IndexArray:
    values = np.asarray(values, dtype=np.int64)
    return np.where(values > 0, np.frexp(values.astype(np.float64))[1], 0).astype(np.int64)


def _pattern_values(sigma: Union[FloatArray, sparse.csr_array], j: int) -> Optional[FloatArray]:
    """Values of Sigma on the pattern of model j, or None on entries outside it."""
    rows_p, cols_p = schauder_pattern(j)
    col_start = np.searchsorted(cols_p, np.arange(2 ** (j - 1)))
    upper = sparse.triu(sparse.coo_array(sigma)).tocoo()
    r = upper.row.astype(np.int64)
    c = upper.col.astype(np.int64)
    lev_r = _bit_length(r)
    lev_c = _bit_length(c)
    shift = np.maximum(lev_c - lev_r, 0)
    inside = (r == c) | (r == 0) | ((lev_r >= 1) & (lev_r < lev_c) & ((c >> shift) == r))
    stray = (~inside) & (upper.data != 0.0)
    if np.any(stray):
        return None
    values = np.zeros(rows_p.size)
    np.add.at(values, col_start[c[inside]] + lev_r[inside], upper.data[inside])
    return values


def _cint_csr(matrix: Union[sparse.csr_array, sparse.csc_array]) -> sparse.csr_array:
    """CSR copy with C int index arrays, as spsolve_triangular requires."""
    out = sparse.csr_array(matrix)
    out.indices = out.indices.astype(np.intc, copy=False)
    out.indptr = out.indptr.astype(np.intc, copy=False)
    return out


def factorize_pattern(
    mu: FloatArray,
    values: FloatArray,
    spec: BasisSpec,
    s_sq: float,
    j: int
) -> PosteriorFactor:
    """
    Sparse factor from Sigma^j given on its structural pattern.

    Levels are eliminated finest first. Within a level the columns have
    disjoint supports and are eliminated together; the updates they send to
    their ancestors stay on the pattern, so there is no fill-in. The
    elimination gives W = G G^T with G upper triangular; M = G^T.

    Raises:
        NumericalError: If a pivot is not positive
    """
    s_sq = require_positive("s_sq", s_sq)
    m = model_dim(spec, j)
    rows_p, cols_p = schauder_pattern(j)
    n_pattern = rows_p.size
    col_start = np.searchsorted(cols_p, np.arange(m))
    levels = _bit_length(np.arange(m))
    diag_pos = col_start + levels

    w = np.array(values[:n_pattern], dtype=np.float64)
    w[diag_pos] += _prior_precision(spec, s_sq, m)
    g = np.zeros(n_pattern)

    for i in range(j - 1, -1, -1):
        cols = np.arange(1) if i == 0 else np.arange(2 ** (i - 1), 2**i)
        pivots = w[diag_pos[cols]]
        bad = ~(pivots > 0.0)
        if np.any(bad):
            pivot = int(cols[np.flatnonzero(bad)[0]]) + 1
            raise NumericalError(f"W^{j} is not positive definite at pivot {pivot}", pivot=pivot)
        d = np.sqrt(pivots)
        g[diag_pos[cols]] = d
        if i == 0:
            continue
        u = np.empty((cols.size, i))
        anc = np.empty((cols.size, i), dtype=np.int64)
        for a in range(i):
            u[:, a] = w[col_start[cols] + a] / d
            g[col_start[cols] + a] = u[:, a]
            anc[:, a] = 0 if a == 0 else cols >> (i - a)
        for b in range(i):
            base = col_start[anc[:, b]]
            for a in range(b + 1):
                w -= np.bincount(base + a, weights=u[:, a] * u[:, b], minlength=n_pattern)

    upper = _cint_csr(sparse.csr_array((g, (rows_p, cols_p)), shape=(m, m)))
    z = spsolve_triangular(upper, mu, lower=False)
    return PosteriorFactor(
        j=j,
        m=m,
        s_sq=s_sq,
        chol=_cint_csr(upper.T),
        z=np.asarray(z, dtype=np.float64),
        logdet_terms=np.log(g[diag_pos]),
        prior_log_scale=0.5 * np.log(s_sq * xi_sq_vector(spec, m)),
        lower=True,
    )


def sparse_factorize_schauder(stats_view: StatsView, spec: BasisSpec, s_sq: float, j: int) -> PosteriorFactor:
    """
    Schauder factorization on the sparse representation.

    Falls back to the dense factorization, with a warning, when Sigma has
    nonzero entries outside the structural pattern.

    Raises:
        InvalidArgumentError: If the basis is not Schauder
    """
    if spec.family is not BasisFamily.SCHAUDER:
        raise InvalidArgumentError(["spec"], "sparse factorization requires the Schauder basis")
    mu, sigma = stats_view
    values = _pattern_values(sigma, j)
    if values is None:
        logger.warning("Sigma has entries outside the Schauder pattern, using dense factorization", j=j)
        return factorize(stats_view, spec, s_sq, j)
    return factorize_pattern(mu, values, spec, s_sq, j)


def factor_for(stats: SuffStats, s_sq: float, j: int, use_sparse: bool = True) -> PosteriorFactor:
    """Factorize model j straight from the statistics, sparse for Schauder when enabled."""
    j = require_index("j", j, 1, stats.j_max)
    if stats.is_sparse and use_sparse:
        _, _, values = stats.pattern_view(j)
        return factorize_pattern(stats.mu[: model_dim(stats.spec, j)], values, stats.spec, s_sq, j)
    return factorize(stats.view(j), stats.spec, s_sq, j)


# ============================================================================
# Posterior quantities
# ============================================================================

def _solve_m(factor: PosteriorFactor, rhs: FloatArray) -> FloatArray:
    """Solve M x = rhs."""
    if factor.is_sparse:
        return np.asarray(spsolve_triangular(factor.chol, rhs, lower=factor.lower), dtype=np.float64)
    return solve_triangular(factor.chol, rhs, lower=factor.lower)


def sample_coefficients(factor: PosteriorFactor, seed: SeedLike) -> FloatArray:
    """Draw theta ~ N(W^-1 mu, W^-1) by solving M theta = z + Z."""
    rng = as_generator(seed)
    noise = rng.standard_normal(factor.m)
    return _solve_m(factor, factor.z + noise)


def posterior_mean(factor: PosteriorFactor) -> FloatArray:
    """W^-1 mu, by solving M x = z."""
    return _solve_m(factor, factor.z)


def log_predictive(
    factor: PosteriorFactor,
    spec: Optional[BasisSpec] = None,
    s_sq: Optional[float] = None
) -> float:
    """
    log p(x | j, s^2) = 1/2 |z|^2 - sum_i (1/2 log(s^2 xi_i^2) + log M_ii).

    The prior scales are taken from the factor unless ``spec`` is given, in
    which case they are rebuilt from its xi_l^2. A given ``s_sq`` must be the
    scale the factor was built at.

    Raises:
        InvalidArgumentError: If s_sq differs from the factor's scale
    """
    if s_sq is not None and not math.isclose(float(s_sq), factor.s_sq, rel_tol=1e-12):
        raise InvalidArgumentError(["s_sq"], f"factor was built at s^2={factor.s_sq}, got {s_sq}")
    prior_log_scale = factor.prior_log_scale
    if spec is not None:
        prior_log_scale = 0.5 * np.log(factor.s_sq * xi_sq_vector(spec, factor.m))
    return float(0.5 * np.dot(factor.z, factor.z) - np.sum(prior_log_scale + factor.logdet_terms))


def log_bayes_factor_from_factor(factor: PosteriorFactor, m_small: int) -> float:
    """
    log p(x | larger model) - log p(x | nested model with m_small coefficients).

    Only the trailing entries g = z[m_small:] and the trailing diagonal of
    the nested factor enter.
    """
    if factor.is_sparse or factor.lower:
        raise InvalidArgumentError(["factor"], "incremental Bayes factors need a nested dense factor")
    g = factor.z[m_small:]
    tail = factor.prior_log_scale[m_small:] + factor.logdet_terms[m_small:]
    return float(0.5 * np.dot(g, g) - np.sum(tail))


def log_bayes_factor(
    stats: SuffStats,
    spec: BasisSpec,
    s_sq: float,
    j_from: int,
    j_to: int,
    use_sparse: bool = False
) -> float:
    """
    log B(j_to | j_from) = log p(x | j_to, s^2) - log p(x | j_from, s^2).

    Dense bases factorize once at the larger model and read the smaller one
    off the nested factor. Sparse Schauder factors are not nested and take
    the difference of two predictive densities.

    Raises:
        InvalidArgumentError: If a model index is out of range
    """
    j_from = require_index("j_from", j_from, 1, spec.j_max)
    j_to = require_index("j_to", j_to, 1, spec.j_max)
    if j_from > stats.j_max or j_to > stats.j_max:
        raise InvalidArgumentError(["j_from", "j_to"], f"statistics only reach j_max={stats.j_max}")
    if j_from == j_to:
        return 0.0
    big, small = max(j_from, j_to), min(j_from, j_to)
    sign = 1.0 if j_to > j_from else -1.0

    if stats.is_sparse and use_sparse:
        value = log_predictive(factor_for(stats, s_sq, big)) - log_predictive(factor_for(stats, s_sq, small))
        return sign * value
    factor = factorize(stats.view(big), spec, s_sq, big)
    return sign * log_bayes_factor_from_factor(factor, model_dim(spec, small))
