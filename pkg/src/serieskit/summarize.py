"""PAA, Gaussian breakpoints, iSAX words and summary-level lower bounds.

Breakpoints for cardinality 2^c are the equiprobable standard-normal
quantiles.  All tables are strided views of one base table computed at
the maximum cardinality (2^8), which makes breakpoint nesting bit-exact.
"""

from dataclasses import dataclass

import numpy as np
from scipy.special import ndtri

from .errors import DimensionError, ParameterError

MAX_BITS = 8
DEFAULT_SEGMENTS = 16
DEFAULT_MAX_BITS = 8

# 255 quantiles at j/256, j = 1..255; every lower-cardinality table is a
# strided subset of this one.
_BASE_BREAKPOINTS = ndtri(np.arange(1, 2**MAX_BITS) / 2**MAX_BITS)
_BASE_BREAKPOINTS.setflags(write=False)

# Region bound lookups: _REGION_LO[c, sym] / _REGION_HI[c, sym] give the
# [low, high) threshold interval of symbol `sym` at cardinality 2^c.
_REGION_LO = np.full((MAX_BITS + 1, 2**MAX_BITS), -np.inf)
_REGION_HI = np.full((MAX_BITS + 1, 2**MAX_BITS), np.inf)
for _c in range(1, MAX_BITS + 1):
    _bp = _BASE_BREAKPOINTS[2 ** (MAX_BITS - _c) - 1 :: 2 ** (MAX_BITS - _c)]
    _REGION_LO[_c, 1 : 2**_c] = _bp
    _REGION_HI[_c, 0 : 2**_c - 1] = _bp
    _REGION_HI[_c, 2**_c :] = np.inf
_REGION_LO.setflags(write=False)
_REGION_HI.setflags(write=False)


def breakpoints(c_bits: int, max_bits: int = MAX_BITS) -> np.ndarray:
    """Sorted thresholds (2^c_bits - 1 of them) for one cardinality."""
    if not 1 <= c_bits <= max_bits or max_bits > MAX_BITS:
        raise ParameterError(
            f"c_bits must be in [1, {min(max_bits, MAX_BITS)}], got {c_bits}"
        )
    step = 2 ** (MAX_BITS - c_bits)
    return _BASE_BREAKPOINTS[step - 1 :: step]


def segment_lengths(n: int, w: int) -> np.ndarray:
    """True segment lengths; the last segment absorbs any remainder."""
    if not 1 <= w <= n:
        raise ParameterError(f"segment count must be in [1, {n}], got {w}")
    base = n // w
    lengths = np.full(w, base, dtype=np.int64)
    lengths[-1] += n - base * w
    return lengths


def segment_starts(n: int, w: int) -> np.ndarray:
    return np.arange(w, dtype=np.int64) * (n // w)


def paa(series, w: int) -> np.ndarray:
    """Per-segment means of one series."""
    return paa_block(np.asarray(series, dtype=np.float64)[None, :], w)[0]


def paa_block(block: np.ndarray, w: int) -> np.ndarray:
    """Per-segment means for a (B, n) block, as float64 (B, w)."""
    n = block.shape[1]
    starts = segment_starts(n, w)
    sums = np.add.reduceat(block.astype(np.float64), starts, axis=1)
    return sums / segment_lengths(n, w)


@dataclass(frozen=True)
class ISaxWord:
    """Per-segment (symbol, bit count) pairs."""

    symbols: np.ndarray  # uint8, len w
    bits: np.ndarray  # uint8, len w, each in [1, max_bits]

    @property
    def w(self) -> int:
        return self.symbols.shape[0]

    def truncate(self, c_bits) -> "ISaxWord":
        """Drop low-order bits down to the given per-segment cardinality."""
        bits = np.broadcast_to(np.asarray(c_bits, dtype=np.uint8), self.bits.shape)
        if np.any(bits > self.bits):
            raise ParameterError("cannot truncate to a higher cardinality")
        shift = (self.bits - bits).astype(np.uint8)
        return ISaxWord(
            symbols=(self.symbols >> shift).astype(np.uint8),
            bits=bits.astype(np.uint8).copy(),
        )


def isax_word(paa_values, c_bits) -> ISaxWord:
    """Discretize a PAA vector; values on a threshold go to the upper region."""
    paa_values = np.asarray(paa_values, dtype=np.float64)
    w = paa_values.shape[0]
    bits = np.broadcast_to(np.asarray(c_bits, dtype=np.int64), (w,))
    if np.any(bits < 1) or np.any(bits > MAX_BITS):
        raise ParameterError(f"per-segment bits must be in [1, {MAX_BITS}]")
    symbols = np.empty(w, dtype=np.uint8)
    for j in range(w):
        # count of thresholds <= value
        symbols[j] = np.searchsorted(breakpoints(int(bits[j])), paa_values[j], side="right")
    return ISaxWord(symbols=symbols, bits=bits.astype(np.uint8).copy())


def words_block(block: np.ndarray, w: int, max_bits: int = MAX_BITS) -> np.ndarray:
    """Full-cardinality iSAX symbols for a (B, n) block, as uint8 (B, w)."""
    if not 1 <= max_bits <= MAX_BITS:
        raise ParameterError(f"max_bits must be in [1, {MAX_BITS}]")
    pa = paa_block(block, w)
    return np.searchsorted(breakpoints(max_bits), pa, side="right").astype(np.uint8)


def _region_gaps(values, symbols, bits):
    """Gap from per-segment values to word regions; 0 inside the region."""
    lo = _REGION_LO[bits, symbols]
    hi = _REGION_HI[bits, symbols]
    return np.maximum(0.0, np.maximum(lo - values, values - hi))


def mindist_paa_isax(paa_q, word: ISaxWord, n: int, w: int) -> float:
    """Lower bound on l2_squared(q, s) for every s summarized by `word`."""
    paa_q = np.asarray(paa_q, dtype=np.float64)
    if paa_q.shape[0] != w or word.w != w:
        raise ParameterError(
            f"segment count mismatch: query {paa_q.shape[0]}, word {word.w}, w {w}"
        )
    gaps = _region_gaps(paa_q, word.symbols, word.bits)
    return float(np.sum(segment_lengths(n, w) * gaps * gaps))


def mindist_paa_block(paa_q, symbols, bits, seg_lengths) -> np.ndarray:
    """Vectorized mindist_paa_isax over (L, w) symbol/bit matrices."""
    gaps = _region_gaps(paa_q, symbols, bits)
    return np.sum(seg_lengths * gaps * gaps, axis=-1)


def envelope_segment_intervals(env, n: int, w: int):
    """Per-segment [min(lower), max(upper)] hull of a query envelope."""
    starts = segment_starts(n, w)
    emin = np.minimum.reduceat(env.lower, starts)
    emax = np.maximum.reduceat(env.upper, starts)
    return emin, emax


def _interval_gaps(emin, emax, symbols, bits):
    lo = _REGION_LO[bits, symbols]
    hi = _REGION_HI[bits, symbols]
    return np.maximum(0.0, np.maximum(lo - emax, emin - hi))


def mindist_dtw(env_intervals, word: ISaxWord, n: int, w: int) -> float:
    """Lower bound on dtw(q, s, radius) for every s summarized by `word`.

    `env_intervals` is the (emin, emax) pair from
    :func:`envelope_segment_intervals`, built with the search radius.
    """
    emin, emax = env_intervals
    if emin.shape[0] != w or word.w != w:
        raise ParameterError("segment count mismatch")
    gaps = _interval_gaps(emin, emax, word.symbols, word.bits)
    return float(np.sum(segment_lengths(n, w) * gaps * gaps))


def mindist_dtw_block(env_intervals, symbols, bits, seg_lengths) -> np.ndarray:
    emin, emax = env_intervals
    gaps = _interval_gaps(emin, emax, symbols, bits)
    return np.sum(seg_lengths * gaps * gaps, axis=-1)
