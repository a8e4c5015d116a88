"""Two-call facade (buildIndex / searchIndex) and engine selection."""

import os
import tempfile
from dataclasses import dataclass
from typing import NamedTuple

import numpy as np

from . import distance, engines
from .data import DatasetHandle, _normalize_block_f32, from_array, load_dataset
from .errors import ParameterError, StateError
from .index import RAW_ON_DISK, Index, IndexConfig, build_index, deserialize, serialize

SENTINEL_ID = -1


@dataclass(frozen=True)
class EnvironmentProfile:
    dataset_bytes: int
    available_memory_bytes: int
    gpu_available: bool = False
    distributed_available: bool = False


class EngineChoice(NamedTuple):
    engine: str  # implemented engine to run
    recommendation: str  # decision-tree leaf: parallel | disk | distributed | gpu
    note: str


def select_engine(profile: EnvironmentProfile) -> EngineChoice:
    """Map an environment profile to an engine, mirroring the selection tree:
    fits in memory -> distributed? -> GPU? -> parallel; otherwise disk."""
    if profile.dataset_bytes < 0 or profile.available_memory_bytes < 0:
        raise ParameterError("byte counts must be >= 0")
    if profile.dataset_bytes >= profile.available_memory_bytes:
        return EngineChoice("disk", "disk", "dataset exceeds memory; disk-resident engine")
    if profile.distributed_available:
        return EngineChoice(
            "parallel",
            "distributed",
            "recommended: distributed execution — not implemented in this "
            "artifact; falling back to the parallel in-memory engine",
        )
    if profile.gpu_available:
        return EngineChoice(
            "parallel",
            "gpu",
            "recommended: GPU execution — not implemented in this artifact; "
            "falling back to the parallel in-memory engine",
        )
    return EngineChoice("parallel", "parallel", "parallel in-memory engine")


class SearchSession:
    """Owns one dataset + optional index and serves top-k queries.

    `buildIndex` must succeed before `searchIndex` for every engine.
    """

    def __init__(
        self,
        engine: str = "parallel",
        config: IndexConfig | None = None,
        measure: str | None = None,
        radius: int | None = None,
        workers: int = 4,
        batch_bytes: int = 4 * 1024 * 1024,
    ):
        if engine not in engines.ENGINE_NAMES:
            raise ParameterError(
                f"unknown engine {engine!r}; choose from {engines.ENGINE_NAMES}"
            )
        self.engine = engine
        self.config = config or IndexConfig()
        if engine == "disk" and self.config.storage_mode != RAW_ON_DISK:
            self.config = IndexConfig(
                segments=self.config.segments,
                max_bits=self.config.max_bits,
                leaf_capacity=self.config.leaf_capacity,
                storage_mode=RAW_ON_DISK,
                normalize=self.config.normalize,
                distance=self.config.distance,
            )
        self.measure = measure or self.config.distance
        self.radius = radius
        self.workers = workers
        self.batch_bytes = batch_bytes
        self.counters = engines.Counters()
        self.handle: DatasetHandle | None = None
        self.index: Index | None = None
        self.summaries: engines.Summaries | None = None
        self._spill_path: str | None = None

    @property
    def built(self) -> bool:
        return self.handle is not None

    # -- build ----------------------------------------------------------

    def buildIndex(self, db, n_db: int | None = None, d: int | None = None) -> "SearchSession":
        """Accepts an (N, d) array, or a flat block plus explicit n_db and d."""
        arr = np.asarray(db, dtype=np.float32)
        if arr.ndim == 1:
            if n_db is None or d is None:
                raise ParameterError("flat blocks need explicit n_db and d")
            if arr.size != n_db * d:
                raise ParameterError(
                    f"block of {arr.size} values is not n_db*d = {n_db * d}"
                )
            arr = arr.reshape(n_db, d)
        elif n_db is not None and arr.shape[0] != n_db:
            raise ParameterError(f"n_db {n_db} does not match block rows {arr.shape[0]}")
        if self.engine == "disk":
            # the disk engine refines from a raw file; spill the block
            fd, path = tempfile.mkstemp(suffix=".f32.bin")
            with os.fdopen(fd, "wb") as fh:
                np.ascontiguousarray(arr, dtype="<f4").tofile(fh)
            self._spill_path = path
            return self.build_from_file(path, arr.shape[1])
        handle = from_array(arr, normalize=self.config.normalize)
        return self.build_from_handle(handle)

    def build_from_file(self, path, dim: int) -> "SearchSession":
        mode = "file" if self.engine == "disk" else "memory"
        handle = load_dataset(path, dim, mode=mode, normalize=self.config.normalize)
        return self.build_from_handle(handle)

    def build_from_handle(self, handle: DatasetHandle) -> "SearchSession":
        self.handle = handle
        if self.engine in ("serial", "parallel", "disk"):
            self.index = build_index(handle, self.config)
        elif self.engine == "lb-bruteforce":
            self.summaries = engines.build_summaries(
                handle, self.config.segments, self.config.max_bits
            )
        return self

    # -- search ---------------------------------------------------------

    def _prep_queries(self, q, n_q: int | None) -> np.ndarray:
        arr = np.asarray(q, dtype=np.float32)
        if arr.ndim == 1:
            if n_q is not None and n_q > 1:
                arr = arr.reshape(n_q, -1)
            else:
                arr = arr[None, :]
        if arr.shape[1] != self.handle.dim:
            raise ParameterError(
                f"query dim {arr.shape[1]} does not match dataset dim {self.handle.dim}"
            )
        if self.config.normalize:
            arr = _normalize_block_f32(arr)
        return np.ascontiguousarray(arr, dtype=np.float32)

    def search_answers(self, q, n_q: int | None = None, k: int = 1):
        """Raw per-query answer lists (min(k, N) entries each)."""
        if not self.built:
            raise StateError("searchIndex called before buildIndex")
        queries = self._prep_queries(q, n_q)
        if self.engine == "bruteforce":
            return engines.bruteforce_search(
                self.handle, queries, k, self.measure, self.radius, self.counters
            )
        if self.engine == "lb-bruteforce":
            return engines.lb_bruteforce_search(
                self.handle, self.summaries, queries, k, self.measure,
                self.radius, self.counters,
            )
        if self.engine == "serial":
            return [
                engines.serial_indexed_search(
                    self.index, self.handle, row, k, self.measure, self.radius,
                    self.counters,
                )
                for row in queries
            ]
        if self.engine == "parallel":
            return [
                engines.parallel_search(
                    self.index, self.handle, row, k, self.measure, self.radius,
                    self.workers, self.counters,
                )
                for row in queries
            ]
        return [
            engines.disk_search(
                self.index, row, k, self.measure, self.radius, self.counters,
                self.batch_bytes,
            )
            for row in queries
        ]

    def searchIndex(self, q, n_q: int | None = None, k: int = 1):
        """Top-k search: (n_q, k) id matrix and distance matrix.

        When k > N, surplus cells hold id -1 and +inf.
        """
        results = self.search_answers(q, n_q, k)
        ids = np.full((len(results), k), SENTINEL_ID, dtype=np.int64)
        dists = np.full((len(results), k), np.inf)
        for qi, answers in enumerate(results):
            for rank, ans in enumerate(answers):
                ids[qi, rank] = ans.id
                dists[qi, rank] = ans.dist
        return ids, dists

    # -- persistence ------------------------------------------------------

    def save_index(self, path) -> None:
        if self.index is None:
            raise StateError("no index to save (exhaustive engine or unbuilt)")
        with open(path, "wb") as fh:
            fh.write(serialize(self.index))

    def load_index(self, path) -> None:
        if self.handle is None:
            raise StateError("load the dataset before the index")
        with open(path, "rb") as fh:
            self.index = deserialize(fh.read(), self.handle)


def build_session(engine: str = "parallel", **kwargs) -> SearchSession:
    return SearchSession(engine=engine, **kwargs)
