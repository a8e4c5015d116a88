"""Data series and dataset access.

Dataset files are raw little-endian IEEE-754 binary32 values, series
concatenated back to back, no header; the dimension is supplied
out-of-band.  A :class:`DatasetHandle` gives uniform by-id access whether
the payload is resident in memory or memory-mapped from disk.
"""

from dataclasses import dataclass, field

import numpy as np

from .errors import BoundsError, ParameterError, SizeMismatchError, ValidationError

ITEM_BYTES = 4  # float32 storage
_DEGENERATE_STD = 1e-12

MODE_MEMORY = "memory"
MODE_FILE = "file"


def z_normalize(series) -> np.ndarray:
    """Shift/scale a series to population mean 0 and std 1.

    Zero-variance series (std below 1e-12) map to the all-zeros series.
    """
    values = np.asarray(series, dtype=np.float64)
    if values.ndim != 1 or values.size < 1:
        raise ParameterError("z_normalize expects a non-empty 1-D series")
    if not np.all(np.isfinite(values)):
        raise ValidationError("series contains non-finite values")
    mean = values.mean()
    std = values.std()  # population std
    if std < _DEGENERATE_STD:
        return np.zeros_like(values)
    return (values - mean) / std


def _normalize_block_f32(block: np.ndarray) -> np.ndarray:
    # Single normalization path shared by both storage modes so that
    # memory-resident and file-backed handles stay bit-identical.
    values = block.astype(np.float64)
    mean = values.mean(axis=1, keepdims=True)
    std = values.std(axis=1, keepdims=True)
    degenerate = std < _DEGENERATE_STD
    std[degenerate] = 1.0
    out = (values - mean) / std
    out[degenerate[:, 0]] = 0.0
    return out.astype(np.float32)


@dataclass
class DatasetHandle:
    """Immutable read access to N series of dimension `dim`."""

    count: int
    dim: int
    normalized: bool
    mode: str
    path: str | None = None
    _data: np.ndarray = field(repr=False, default=None)

    def get_series(self, series_id: int) -> np.ndarray:
        if not 0 <= series_id < self.count:
            raise BoundsError(
                f"series id {series_id} out of range [0, {self.count})"
            )
        row = np.array(self._data[series_id], dtype=np.float32)
        if self.normalized and self.mode == MODE_FILE:
            row = _normalize_block_f32(row[None, :])[0]
        return row

    def rows(self, ids) -> np.ndarray:
        """Gather the given series ids as a (len(ids), dim) float32 block."""
        ids = np.asarray(ids, dtype=np.int64)
        if ids.size and (ids.min() < 0 or ids.max() >= self.count):
            raise BoundsError("series id out of range")
        block = np.array(self._data[ids], dtype=np.float32)
        if self.normalized and self.mode == MODE_FILE and block.size:
            block = _normalize_block_f32(block)
        return block

    def iter_blocks(self, rows_per_block: int = 4096):
        """Yield (start_id, float32 block) without materializing everything."""
        for start in range(0, self.count, rows_per_block):
            stop = min(start + rows_per_block, self.count)
            yield start, self.rows(np.arange(start, stop))

    def matrix(self) -> np.ndarray:
        """Full (N, dim) float32 view; materializes file-backed data."""
        return self.rows(np.arange(self.count))


def _validate_finite(data: np.ndarray, rows_per_block: int = 8192) -> None:
    for start in range(0, data.shape[0], rows_per_block):
        block = np.asarray(data[start : start + rows_per_block])
        if not np.all(np.isfinite(block)):
            bad = np.where(~np.isfinite(block).all(axis=1))[0][0]
            raise ValidationError(
                f"non-finite value in series id {start + int(bad)}"
            )


def load_dataset(
    path, dim: int, mode: str = MODE_MEMORY, normalize: bool = False
) -> DatasetHandle:
    """Open a raw float32 dataset file.

    `mode="memory"` loads the payload; `mode="file"` memory-maps it and
    never materializes the full payload.
    """
    import os

    if dim <= 0:
        raise ParameterError(f"dim must be positive, got {dim}")
    if mode not in (MODE_MEMORY, MODE_FILE):
        raise ParameterError(f"unknown mode {mode!r}")
    size = os.path.getsize(path)
    series_bytes = dim * ITEM_BYTES
    if size % series_bytes != 0:
        raise SizeMismatchError(
            f"file size {size} bytes is not a multiple of "
            f"{series_bytes} bytes (dim {dim} x {ITEM_BYTES}); "
            f"trailing fragment starts at byte offset {size - size % series_bytes}"
        )
    count = size // series_bytes

    if mode == MODE_MEMORY:
        data = np.fromfile(path, dtype="<f4").reshape(count, dim)
        _validate_finite(data)
        if normalize:
            data = _normalize_block_f32(data)
    else:
        data = np.memmap(path, dtype="<f4", mode="r", shape=(count, dim))
        _validate_finite(data)

    return DatasetHandle(
        count=count,
        dim=dim,
        normalized=normalize,
        mode=mode,
        path=str(path),
        _data=data,
    )


def from_array(array, normalize: bool = False) -> DatasetHandle:
    """Wrap an in-memory (N, dim) array as a dataset handle."""
    arr = np.asarray(array)
    if arr.ndim != 2 or arr.shape[0] < 1:
        raise ParameterError(
            f"expected a 2-D (N, dim) array with N >= 1, got shape {arr.shape}"
        )
    data = np.ascontiguousarray(arr, dtype=np.float32)
    _validate_finite(data)
    if normalize:
        data = _normalize_block_f32(data)
    return DatasetHandle(
        count=data.shape[0],
        dim=data.shape[1],
        normalized=normalize,
        mode=MODE_MEMORY,
        path=None,
        _data=data,
    )


def get_series(handle: DatasetHandle, series_id: int) -> np.ndarray:
    return handle.get_series(series_id)
