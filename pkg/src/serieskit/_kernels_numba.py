"""Numba-jitted hot kernels.

Every real distance computed anywhere in the library goes through one of
these block kernels so that summation order (left-to-right within a row)
is identical across engines, which keeps answer files byte-stable.
Abandoned rows are marked with +inf; finite inputs can never produce a
true +inf distance, so the marker is unambiguous.
"""

import numpy as np
from numba import njit

_JIT = dict(cache=True, nogil=True)


@njit(**_JIT)
def l2_block_bounded(data, q, bound):
    n_rows, n = data.shape
    out = np.empty(n_rows, dtype=np.float64)
    for i in range(n_rows):
        acc = 0.0
        abandoned = False
        for j in range(n):
            d = q[j] - data[i, j]
            acc += d * d
            if acc >= bound:
                abandoned = True
                break
        out[i] = np.inf if abandoned else acc
    return out


@njit(**_JIT)
def dtw_block_bounded(data, q, radius, bound):
    # Banded DP with two rolling rows; rows are padded by one guard cell
    # on each side so window edges never read stale values.
    n_rows, n = data.shape
    r = radius if radius < n else n
    out = np.empty(n_rows, dtype=np.float64)
    prev = np.empty(n + 2, dtype=np.float64)
    cur = np.empty(n + 2, dtype=np.float64)
    for row in range(n_rows):
        prev[:] = np.inf
        cur[:] = np.inf
        abandoned = False
        for i in range(n):
            lo = i - r
            if lo < 0:
                lo = 0
            hi = i + r
            if hi > n - 1:
                hi = n - 1
            cur[lo] = np.inf  # left guard (offset +1)
            row_min = np.inf
            for j in range(lo, hi + 1):
                d = q[i] - data[row, j]
                cost = d * d
                if i == 0 and j == 0:
                    cell = cost
                else:
                    best = prev[j + 1]
                    if prev[j] < best:
                        best = prev[j]
                    if cur[j] < best:
                        best = cur[j]
                    cell = cost + best
                cur[j + 1] = cell
                if cell < row_min:
                    row_min = cell
            cur[hi + 2] = np.inf  # right guard
            if row_min >= bound:
                abandoned = True
                break
            tmp = prev
            prev = cur
            cur = tmp
        out[row] = np.inf if abandoned else prev[n]
    return out


@njit(**_JIT)
def lb_keogh_block(data, lower, upper):
    n_rows, n = data.shape
    out = np.empty(n_rows, dtype=np.float64)
    for i in range(n_rows):
        acc = 0.0
        for j in range(n):
            v = data[i, j]
            if v > upper[j]:
                d = v - upper[j]
                acc += d * d
            elif v < lower[j]:
                d = lower[j] - v
                acc += d * d
        out[i] = acc
    return out
