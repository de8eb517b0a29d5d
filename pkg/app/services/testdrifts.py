"""
Benchmark drift functions.

All drifts are 1-periodic and evaluated at x~ = x mod 1.
"""

import math
from typing import Callable, Dict, List

import numpy as np

from app.models.dto import FloatArray, NamedDrift
from app.models.errors import InvalidArgumentError
from app.services.basis import ArrayLike


def _a(xt: FloatArray) -> FloatArray:
    """Hoelder-1.5 profile: 2/7 - x - 2/7 (1 - 3x) sqrt|1 - 3x| on [0, 2/3), -2/7 + 2/7 x after."""
    left = 2.0 / 7.0 - xt - (2.0 / 7.0) * (1.0 - 3.0 * xt) * np.sqrt(np.abs(1.0 - 3.0 * xt))
    right = -2.0 / 7.0 + (2.0 / 7.0) * xt
    return np.where(xt < 2.0 / 3.0, left, right)


def _scalar_or_array(fn: Callable[[FloatArray], FloatArray]) -> Callable[[ArrayLike], ArrayLike]:
    def wrapped(x: ArrayLike) -> ArrayLike:
        xt = np.mod(np.asarray(x, dtype=np.float64), 1.0)
        out = fn(xt)
        return float(out) if np.ndim(x) == 0 else out

    wrapped.__doc__ = fn.__doc__
    return wrapped


@_scalar_or_array
def main_drift(xt: FloatArray) -> FloatArray:
    """b(x) = 12 (a(x~) + 0.05)."""
    return 12.0 * (_a(xt) + 0.05)


@_scalar_or_array
def _b1(xt: FloatArray) -> FloatArray:
    return 8.0 * np.sin(4.0 * math.pi * xt)


@_scalar_or_array
def _b2(xt: FloatArray) -> FloatArray:
    left = 200.0 * xt * (1.0 - 2.0 * xt) ** 3
    right = (400.0 / 3.0) * (1.0 - xt) * (2.0 * xt - 1.0) ** 3
    return np.where(xt < 0.5, left, -right)


@_scalar_or_array
def _b3(xt: FloatArray) -> FloatArray:
    window = (xt >= 0.25) & (xt <= 0.75)
    return np.where(window, -8.0 * np.sin(math.pi * (4.0 * xt - 1.0)), 0.0)


_GALLERY: Dict[str, Callable] = {
    "b1": _b1,
    "b2": _b2,
    "b3": _b3,
}


def gallery(name: str) -> NamedDrift:
    """
    Look up a gallery drift.

    Args:
        name: One of b1, b2, b3

    Raises:
        InvalidArgumentError: If the name is unknown
    """
    fn = _GALLERY.get(str(name).lower())
    if fn is None:
        raise InvalidArgumentError(["drift"], f"unknown drift {name!r}; expected one of {sorted(_GALLERY)}")
    return NamedDrift(name=str(name).lower(), fn=fn)


def available_drifts() -> List[str]:
    return ["main", *sorted(_GALLERY)]


def get_drift(name: str) -> NamedDrift:
    """Resolve a drift name, ``main`` included."""
    if str(name).lower() == "main":
        return NamedDrift(name="main", fn=main_drift)
    return gallery(name)
