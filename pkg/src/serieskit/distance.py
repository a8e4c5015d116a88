"""Exact distance computations: L2-squared and banded DTW.

Both measures work on squared pointwise differences and never take a
final square root, so their values are directly comparable and the
diagonal warping path makes dtw(a, b, r) <= l2_squared(a, b) for any
radius.  Bounded calls may return :data:`ABANDONED`, which guarantees
the exact value is >= the bound.
"""

import math
from dataclasses import dataclass

import numpy as np

from . import kernels
from .errors import DimensionError, ParameterError

L2_SQUARED = "l2sq"
DTW = "dtw"
MEASURES = (L2_SQUARED, DTW)


class _Abandoned:
    __slots__ = ()

    def __repr__(self):
        return "ABANDONED"


ABANDONED = _Abandoned()


def default_dtw_radius(n: int) -> int:
    """Community-default warping band: 5% of the series length."""
    return math.ceil(0.05 * n)


def _check_pair(a, b):
    a = np.ascontiguousarray(a, dtype=np.float32)
    b = np.ascontiguousarray(b, dtype=np.float32)
    if a.ndim != 1 or b.ndim != 1 or a.shape[0] != b.shape[0]:
        raise DimensionError(
            f"series lengths differ: {a.shape} vs {b.shape}"
        )
    return a, b


def _check_bound(bound):
    if bound is None:
        return np.inf
    if bound < 0:
        raise ParameterError(f"bound must be >= 0, got {bound}")
    return float(bound)


def l2_squared(a, b, bound=None):
    """Sum of squared differences; ABANDONED once the partial sum >= bound."""
    a, b = _check_pair(a, b)
    val = kernels.l2_block_bounded(b[None, :], a.astype(np.float64), _check_bound(bound))[0]
    if val == np.inf:
        return ABANDONED
    return float(val)


def dtw(a, b, radius, bound=None):
    """Band-constrained DTW over squared differences.

    ABANDONED is returned only when every band cell of some DP row has
    already reached the bound, which proves the exact value is >= bound.
    """
    a, b = _check_pair(a, b)
    n = a.shape[0]
    if not 0 <= radius <= n:
        raise ParameterError(f"radius must be in [0, {n}], got {radius}")
    val = kernels.dtw_block_bounded(
        b[None, :], a.astype(np.float64), int(radius), _check_bound(bound)
    )[0]
    if val == np.inf:
        return ABANDONED
    return float(val)


@dataclass(frozen=True)
class Envelope:
    """Per-position min/max of a series over its +-radius window."""

    lower: np.ndarray
    upper: np.ndarray
    radius: int


def build_envelope(q, radius) -> Envelope:
    q = np.asarray(q, dtype=np.float64)
    n = q.shape[0]
    if not 0 <= radius <= n:
        raise ParameterError(f"radius must be in [0, {n}], got {radius}")
    lower = np.empty(n)
    upper = np.empty(n)
    for i in range(n):
        window = q[max(0, i - radius) : min(n, i + radius + 1)]
        lower[i] = window.min()
        upper[i] = window.max()
    return Envelope(lower=lower, upper=upper, radius=int(radius))


def lb_dtw(env: Envelope, c) -> float:
    """Envelope lower bound: provably <= dtw(q, c, env.radius)."""
    c = np.ascontiguousarray(c, dtype=np.float32)
    if c.ndim != 1 or c.shape[0] != env.lower.shape[0]:
        raise DimensionError(
            f"series length {c.shape} does not match envelope length "
            f"{env.lower.shape[0]}"
        )
    return float(kernels.lb_keogh_block(c[None, :], env.lower, env.upper)[0])
