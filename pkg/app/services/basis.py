"""
Periodic basis functions for the hierarchical drift prior.

This module evaluates the Fourier and Faber-Schauder families, their level
structure (model dimensions m_j) and the prior coefficient variances xi_l^2.
All functions are 1-periodic; inputs are reduced modulo 1 before evaluation.

Schauder indexing: psi_1 is the constant function and, for i >= 1 and
k = 1..2^(i-1), psi_{2^(i-1)+k}(x) = hat(2^(i-1) * (x mod 1) - k + 1), where
hat is the continuous tent 2u on [0, 1/2) and 2(1-u) on [1/2, 1]. Model j
holds psi_1..psi_{2^(j-1)}, i.e. Schauder levels 0..j-1.
"""

import math
from functools import lru_cache
from typing import Callable, Tuple, Union

import numpy as np
from scipy import sparse

from app.models.dto import BasisFamily, BasisSpec, FloatArray, IndexArray
from app.models.errors import InvalidArgumentError, require_index

ArrayLike = Union[float, FloatArray]

SQRT2 = math.sqrt(2.0)


# ============================================================================
# Level structure
# ============================================================================

def model_dim(spec: BasisSpec, j: int) -> int:
    """
    Number of basis functions in model j.

    Args:
        spec: Basis specification
        j: Model index, 1 <= j <= j_max

    Returns:
        m_j (2j - 1 for Fourier, 2^(j-1) for Schauder)

    Raises:
        InvalidArgumentError: If j is out of range
    """
    j = require_index("j", j, 1, spec.j_max)
    if spec.family is BasisFamily.FOURIER:
        return 2 * j - 1
    return 2 ** (j - 1)


def level_of(spec: BasisSpec, l: int) -> int:
    """Smallest model index whose span contains psi_l."""
    l = require_index("l", l)
    if spec.family is BasisFamily.FOURIER:
        return l // 2 + 1
    return 1 if l == 1 else (l - 1).bit_length() + 1


def _schauder_position(l: int) -> Tuple[int, int]:
    """Split l >= 2 into (i, k) with l = 2^(i-1) + k, 1 <= k <= 2^(i-1)."""
    i = (l - 1).bit_length()
    return i, l - 2 ** (i - 1)


def support(spec: BasisSpec, l: int) -> Tuple[float, float]:
    """
    Support of psi_l within one period.

    Fourier functions and psi_1 are supported on [0, 1]; the Schauder
    function l = 2^(i-1) + k lives on [(k-1) 2^-(i-1), k 2^-(i-1)].
    """
    l = require_index("l", l)
    if spec.family is BasisFamily.FOURIER or l == 1:
        return 0.0, 1.0
    i, k = _schauder_position(l)
    width = 2.0 ** -(i - 1)
    return (k - 1) * width, k * width


# ============================================================================
# Prior variances
# ============================================================================

def xi_sq(spec: BasisSpec, l: int) -> float:
    """
    Prior variance xi_l^2 of coefficient l.

    Fourier: l^(-1-2 beta). Schauder: 1 for the constant function and
    2^(-2 beta i) for l = 2^(i-1) + k.
    """
    l = require_index("l", l)
    if spec.family is BasisFamily.FOURIER:
        return float(l) ** (-1.0 - 2.0 * spec.beta)
    if l == 1:
        return 1.0
    i, _ = _schauder_position(l)
    return 2.0 ** (-2.0 * spec.beta * i)


@lru_cache(maxsize=128)
def xi_sq_vector(spec: BasisSpec, m: int) -> FloatArray:
    """xi_1^2..xi_m^2 as a read-only array."""
    values = np.array([xi_sq(spec, l) for l in range(1, m + 1)], dtype=np.float64)
    values.flags.writeable = False
    return values


# ============================================================================
# Evaluation
# ============================================================================

def hat(u: ArrayLike) -> FloatArray:
    """Continuous tent function on [0, 1], zero elsewhere."""
    u = np.asarray(u, dtype=np.float64)
    rising = (u >= 0.0) & (u < 0.5)
    falling = (u >= 0.5) & (u <= 1.0)
    return np.where(rising, 2.0 * u, np.where(falling, 2.0 * (1.0 - u), 0.0))


def eval_basis(spec: BasisSpec, l: int, x: ArrayLike) -> ArrayLike:
    """
    Evaluate psi_l at x (reduced modulo 1).

    Args:
        spec: Basis specification
        l: Basis index, l >= 1
        x: Scalar or array of points

    Returns:
        psi_l(x mod 1), same shape as x
    """
    l = require_index("l", l)
    scalar = np.ndim(x) == 0
    xt = np.mod(np.asarray(x, dtype=np.float64), 1.0)

    if l == 1:
        out = np.ones_like(xt)
    elif spec.family is BasisFamily.FOURIER:
        freq = 2.0 * math.pi * (l // 2)
        out = SQRT2 * (np.sin(freq * xt) if l % 2 == 0 else np.cos(freq * xt))
    else:
        i, k = _schauder_position(l)
        out = hat(2.0 ** (i - 1) * xt - k + 1)

    return float(out) if scalar else out


def schauder_levels(x: FloatArray, n_levels: int) -> Tuple[IndexArray, FloatArray]:
    """
    Active Schauder function per level at each point.

    Every point activates exactly one function per level. Level 0 is psi_1.

    Args:
        x: 1-D array of points
        n_levels: Number of levels (j for model j)

    Returns:
        (idx, val): 0-based basis indices and values, both (len(x), n_levels)
    """
    xt = np.mod(np.asarray(x, dtype=np.float64).ravel(), 1.0)
    idx = np.empty((xt.size, n_levels), dtype=np.int64)
    val = np.empty((xt.size, n_levels), dtype=np.float64)
    idx[:, 0] = 0
    val[:, 0] = 1.0
    for i in range(1, n_levels):
        width = 2 ** (i - 1)
        scaled = width * xt
        k = np.minimum(np.floor(scaled).astype(np.int64), width - 1)  # 0-based
        idx[:, i] = width + k  # psi_{2^(i-1)+k+1} in 1-based indexing
        val[:, i] = hat(scaled - k)
    return idx, val


def design_matrix(spec: BasisSpec, x: FloatArray, m: int) -> Union[FloatArray, sparse.csr_array]:
    """
    Evaluate psi_1..psi_m at every point.

    Returns a dense (len(x), m) array for Fourier and a CSR array of the
    same shape for Schauder, whose rows hold one entry per level.
    """
    xt = np.mod(np.asarray(x, dtype=np.float64).ravel(), 1.0)
    if spec.family is BasisFamily.FOURIER:
        out = np.empty((xt.size, m), dtype=np.float64)
        out[:, 0] = 1.0
        n_freq = m // 2
        if n_freq:
            angles = 2.0 * math.pi * np.outer(xt, np.arange(1, n_freq + 1))
            sines = SQRT2 * np.sin(angles)
            cosines = SQRT2 * np.cos(angles)
            out[:, 1::2] = sines[:, : out[:, 1::2].shape[1]]
            out[:, 2::2] = cosines[:, : out[:, 2::2].shape[1]]
        return out

    n_levels = max(1, (m - 1).bit_length() + 1) if m > 1 else 1
    idx, val = schauder_levels(xt, n_levels)
    keep = idx < m
    rows = np.broadcast_to(np.arange(xt.size)[:, None], idx.shape)[keep]
    return sparse.csr_array((val[keep], (rows, idx[keep])), shape=(xt.size, m))


def eval_drift(spec: BasisSpec, theta: FloatArray, x: ArrayLike) -> ArrayLike:
    """
    Evaluate b(x) = sum_l theta_l psi_l(x mod 1).

    Args:
        spec: Basis specification
        theta: Coefficient vector (length m_j for some model j)
        x: Scalar or array of points of any shape

    Returns:
        Drift values with the shape of x

    Raises:
        InvalidArgumentError: If theta is empty
    """
    theta = np.asarray(theta, dtype=np.float64).ravel()
    if theta.size == 0:
        raise InvalidArgumentError(["theta"], "coefficient vector is empty")
    scalar = np.ndim(x) == 0
    xa = np.asarray(x, dtype=np.float64)

    if spec.family is BasisFamily.FOURIER:
        # frequency by frequency keeps memory linear in the number of points
        xt = 2.0 * math.pi * np.mod(xa.ravel(), 1.0)
        values = np.full(xt.shape, theta[0])
        for freq in range(1, theta.size // 2 + 1):
            values += SQRT2 * theta[2 * freq - 1] * np.sin(freq * xt)
            if 2 * freq < theta.size:
                values += SQRT2 * theta[2 * freq] * np.cos(freq * xt)
    else:
        n_levels = (theta.size - 1).bit_length() + 1 if theta.size > 1 else 1
        idx, val = schauder_levels(xa.ravel(), n_levels)
        padded = np.zeros(2 ** (n_levels - 1))
        padded[: theta.size] = theta
        values = np.sum(padded[idx] * val, axis=1)

    values = values.reshape(xa.shape)
    return float(values) if scalar else values


def drift_function(spec: BasisSpec, theta: FloatArray) -> Callable[[ArrayLike], ArrayLike]:
    """Bind a coefficient vector into a callable drift b(x)."""
    theta = np.array(theta, dtype=np.float64)

    def drift(x: ArrayLike) -> ArrayLike:
        return eval_drift(spec, theta, x)

    return drift


# ============================================================================
# Sparsity structure
# ============================================================================

@lru_cache(maxsize=32)
def schauder_pattern(j: int) -> Tuple[IndexArray, IndexArray]:
    """
    Structural upper-triangle pattern of Sigma^j for the Schauder basis.

    Entry (a, c) with a <= c is structural when the supports of psi_a and
    psi_c overlap in more than a point, which for this nested family means a
    is c itself or one of its ancestors. The count is 2^(j-1)(j-1) + 1.

    Returns:
        (rows, cols): 0-based indices, ordered by column then by row
    """
    rows = []
    cols = []
    for c in range(1, 2 ** (j - 1) + 1):
        for a in ancestors(c):
            rows.append(a - 1)
            cols.append(c - 1)
        rows.append(c - 1)
        cols.append(c - 1)
    out_rows = np.array(rows, dtype=np.int64)
    out_cols = np.array(cols, dtype=np.int64)
    out_rows.flags.writeable = False
    out_cols.flags.writeable = False
    return out_rows, out_cols


def ancestors(l: int) -> Tuple[int, ...]:
    """1-based indices of the coarser Schauder functions whose support contains supp(psi_l)."""
    if l == 1:
        return ()
    i, k = _schauder_position(l)
    found = [1]
    for level in range(1, i):
        k_level = -(-k // 2 ** (i - level))  # ceil
        found.append(2 ** (level - 1) + k_level)
    return tuple(found)
