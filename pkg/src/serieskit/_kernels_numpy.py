"""Pure-numpy fallback kernels.

Same contracts as the numba versions, without early abandoning: the full
value is computed and rows at or above the bound are marked +inf
afterwards, which satisfies the same abandon guarantee.
"""

import numpy as np


def l2_block_bounded(data, q, bound):
    d = data.astype(np.float64) - q
    out = np.sum(d * d, axis=1)
    if bound != np.inf:
        out[out >= bound] = np.inf
    return out


def dtw_block_bounded(data, q, radius, bound):
    n_rows, n = data.shape
    r = min(radius, n)
    block = data.astype(np.float64)
    prev = np.full((n_rows, n + 2), np.inf)
    cur = np.full((n_rows, n + 2), np.inf)
    for i in range(n):
        lo = max(0, i - r)
        hi = min(n - 1, i + r)
        cur[:, lo] = np.inf
        for j in range(lo, hi + 1):
            cost = (q[i] - block[:, j]) ** 2
            if i == 0 and j == 0:
                cur[:, 1] = cost
            else:
                best = np.minimum(prev[:, j + 1], prev[:, j])
                np.minimum(best, cur[:, j], out=best)
                cur[:, j + 1] = cost + best
        cur[:, hi + 2] = np.inf
        prev, cur = cur, prev
    out = prev[:, n].copy()
    if bound != np.inf:
        out[out >= bound] = np.inf
    return out


def lb_keogh_block(data, lower, upper):
    block = data.astype(np.float64)
    over = np.maximum(block - upper, 0.0)
    under = np.maximum(lower - block, 0.0)
    gap = over + under
    return np.sum(gap * gap, axis=1)
