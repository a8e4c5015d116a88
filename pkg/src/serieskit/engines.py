"""The five exact k-NN engines.

All engines return the same answer sets: the k nearest ids ordered by
(distance, id).  Pruning and early abandoning are tie-aware so that
answers are identical across engines and worker counts even when many
candidates share a distance: a candidate is only skipped when its
(lower bound, id) pair lexicographically reaches the current k-th best
(distance, id) pair, and bounded kernels are called with the next float
above the best-so-far so exact ties are never abandoned.
"""

import heapq
import threading
from dataclasses import dataclass, field
from typing import NamedTuple

import numpy as np

from . import distance, summarize
from .data import ITEM_BYTES, DatasetHandle, _normalize_block_f32
from .errors import DimensionError, ParameterError
from .index import RAW_ON_DISK, Index, verify_raw_data

ENGINE_NAMES = ("bruteforce", "lb-bruteforce", "serial", "parallel", "disk")

_NO_ID = 2**62  # larger than any real series id; pairs with bsf = +inf


class Answer(NamedTuple):
    id: int
    dist: float


@dataclass
class Counters:
    """Per-workload operation counters; first-class engine outputs."""

    real_dists: int = 0
    lb_skips: int = 0
    peak_resident_raw_bytes: int = 0
    bsf_trace: list = field(default_factory=list)


class _KnnHeap:
    """Size-k max-heap under (dist, id) lexicographic order."""

    __slots__ = ("k", "_heap", "_trace")

    def __init__(self, k: int, trace=None):
        self.k = k
        self._heap = []  # entries (-dist, -id)
        self._trace = trace

    def bound(self):
        """(k-th best dist, its id); (+inf, sentinel) while not full."""
        if len(self._heap) < self.k:
            return np.inf, _NO_ID
        d, i = self._heap[0]
        return -d, -i

    def full(self) -> bool:
        return len(self._heap) >= self.k

    def offer(self, dist_val: float, series_id: int) -> None:
        entry = (-dist_val, -series_id)
        if len(self._heap) < self.k:
            heapq.heappush(self._heap, entry)
        elif entry > self._heap[0]:  # (dist, id) < current worst
            heapq.heapreplace(self._heap, entry)
        else:
            return
        if self._trace is not None and self.full():
            self._trace.append(self.bound()[0])

    def copy(self) -> "_KnnHeap":
        clone = _KnnHeap(self.k, self._trace)
        clone._heap = list(self._heap)
        return clone

    def items(self):
        return [(-d, -i) for d, i in self._heap]

    def answers(self) -> list:
        return [Answer(i, d) for d, i in sorted((d, i) for d, i in self.items())]


def _skip(lb: float, cand_min_id: int, bsf: float, bsf_id: int) -> bool:
    """True when nothing at or under (lb, cand_min_id) can still win."""
    return lb > bsf or (lb == bsf and cand_min_id >= bsf_id)


def _abandon_bound(bsf: float) -> float:
    # abandon strictly above the bsf so exact ties survive refinement
    return np.nextafter(bsf, np.inf)


def _check_queries(queries, dim: int) -> np.ndarray:
    q = np.ascontiguousarray(queries, dtype=np.float32)
    if q.ndim == 1:
        q = q[None, :]
    if q.ndim != 2 or q.shape[1] != dim:
        raise DimensionError(
            f"queries shape {np.asarray(queries).shape} does not match dim {dim}"
        )
    return q


def _check_k(k: int) -> None:
    if k < 1:
        raise ParameterError(f"k must be >= 1, got {k}")


def _check_measure(measure: str, radius, dim: int) -> int:
    if measure not in distance.MEASURES:
        raise ParameterError(f"unknown measure {measure!r}")
    if measure == distance.L2_SQUARED:
        return 0
    r = distance.default_dtw_radius(dim) if radius is None else int(radius)
    if not 0 <= r <= dim:
        raise ParameterError(f"dtw radius must be in [0, {dim}], got {r}")
    return r


def _distance_block(block, q64, measure: str, radius: int, bound: float):
    from . import kernels

    if measure == distance.L2_SQUARED:
        return kernels.l2_block_bounded(block, q64, bound)
    return kernels.dtw_block_bounded(block, q64, radius, bound)


def _offer_block(heap: _KnnHeap, dists: np.ndarray, ids: np.ndarray) -> None:
    # only the k lex-smallest rows of a block can enter the heap
    finite = dists != np.inf
    if not finite.any():
        return
    d, i = dists[finite], ids[finite]
    take = min(heap.k, d.size)
    for pos in np.lexsort((i, d))[:take]:
        heap.offer(float(d[pos]), int(i[pos]))


# -- exhaustive engines -------------------------------------------------


def bruteforce_search(
    data: DatasetHandle,
    queries,
    k: int,
    measure: str = distance.L2_SQUARED,
    radius=None,
    counters: Counters | None = None,
):
    """Exhaustive scan over the raw data; the oracle for every other engine."""
    _check_k(k)
    q_block = _check_queries(queries, data.dim)
    radius = _check_measure(measure, radius, data.dim)
    counters = counters if counters is not None else Counters()
    results = []
    for q in q_block:
        heap = _KnnHeap(k, trace=counters.bsf_trace)
        q64 = q.astype(np.float64)
        for start, block in data.iter_blocks():
            bound = _abandon_bound(heap.bound()[0])
            dists = _distance_block(block, q64, measure, radius, bound)
            counters.real_dists += block.shape[0]
            _offer_block(heap, dists, np.arange(start, start + block.shape[0]))
        results.append(heap.answers())
    return results


@dataclass
class Summaries:
    """Per-series full-cardinality words used by the lower-bounded scan."""

    symbols: np.ndarray  # (N, w) intp
    bits: np.ndarray  # (N, w) intp, all max_bits
    w: int
    max_bits: int
    seg_lengths: np.ndarray


def build_summaries(
    data: DatasetHandle,
    w: int = summarize.DEFAULT_SEGMENTS,
    max_bits: int = summarize.DEFAULT_MAX_BITS,
) -> Summaries:
    symbols = np.empty((data.count, w), dtype=np.intp)
    for start, block in data.iter_blocks():
        symbols[start : start + block.shape[0]] = summarize.words_block(
            block, w, max_bits
        )
    return Summaries(
        symbols=symbols,
        bits=np.full((data.count, w), max_bits, dtype=np.intp),
        w=w,
        max_bits=max_bits,
        seg_lengths=summarize.segment_lengths(data.dim, w),
    )


def lb_bruteforce_search(
    data: DatasetHandle,
    summaries: Summaries,
    queries,
    k: int,
    measure: str = distance.L2_SQUARED,
    radius=None,
    counters: Counters | None = None,
    batch: int = 128,
):
    """Exhaustive scan that skips real distances via summary lower bounds."""
    _check_k(k)
    q_block = _check_queries(queries, data.dim)
    radius = _check_measure(measure, radius, data.dim)
    counters = counters if counters is not None else Counters()
    results = []
    for q in q_block:
        q64 = q.astype(np.float64)
        if measure == distance.L2_SQUARED:
            paa_q = summarize.paa_block(q[None, :], summaries.w)[0]
            lbs = summarize.mindist_paa_block(
                paa_q, summaries.symbols, summaries.bits, summaries.seg_lengths
            )
        else:
            env = distance.build_envelope(q64, radius)
            intervals = summarize.envelope_segment_intervals(env, data.dim, summaries.w)
            lbs = summarize.mindist_dtw_block(
                intervals, summaries.symbols, summaries.bits, summaries.seg_lengths
            )
        order = np.argsort(lbs, kind="stable")  # (lb, id) ascending
        heap = _KnnHeap(k, trace=counters.bsf_trace)
        pos = 0
        while pos < order.size:
            bsf, bsf_id = heap.bound()
            head = int(order[pos])
            if heap.full() and _skip(float(lbs[head]), head, bsf, bsf_id):
                counters.lb_skips += order.size - pos
                break
            ids = order[pos : pos + batch].astype(np.int64)
            block = data.rows(ids)
            dists = _distance_block(block, q64, measure, radius, _abandon_bound(bsf))
            counters.real_dists += ids.size
            _offer_block(heap, dists, ids)
            pos += ids.size
        results.append(heap.answers())
    return results


# -- indexed engines ----------------------------------------------------


class _QueryContext:
    """Per-query summaries shared by the indexed engines."""

    def __init__(self, index: Index, q: np.ndarray, measure: str, radius: int):
        self.q32 = q
        self.q64 = q.astype(np.float64)
        self.measure = measure
        self.radius = radius
        w = index.cfg.segments
        self.word = summarize.words_block(q[None, :], w, index.cfg.max_bits)[0]
        self.paa_q = None
        self.env_intervals = None
        if measure == distance.L2_SQUARED:
            self.paa_q = summarize.paa_block(q[None, :], w)[0]
        else:
            env = distance.build_envelope(self.q64, radius)
            self.env_intervals = summarize.envelope_segment_intervals(
                env, index.dim, w
            )

    def leaf_lbs(self, index: Index) -> np.ndarray:
        return index.leaf_lower_bounds(
            self.measure, paa_q=self.paa_q, env_intervals=self.env_intervals
        )

    def entry_lbs(self, index: Index, ids) -> np.ndarray:
        return index.entry_lower_bounds(
            ids, self.measure, paa_q=self.paa_q, env_intervals=self.env_intervals
        )


def _check_indexed(index: Index, data: DatasetHandle, measure: str) -> None:
    if index.dim != data.dim or index.count != data.count:
        raise ParameterError("index and dataset shapes do not match")
    if index.cfg.normalize != data.normalized:
        raise ParameterError(
            "refusing query: index normalize flag does not match the dataset, "
            "lower bounds would not be guaranteed"
        )


def _refine_ids(
    heap: _KnnHeap,
    ctx: _QueryContext,
    index: Index,
    ids: np.ndarray,
    read_rows,
    counters: Counters,
    filter_bound=None,
) -> None:
    """Refine a batch of entry ids: optional word-level lower-bound filter,
    then real (early-abandoned) distances into the heap."""
    if ids.size == 0:
        return
    ids = np.sort(np.asarray(ids, dtype=np.int64))
    if filter_bound is not None and filter_bound[0] != np.inf:
        bsf, bsf_id = filter_bound
        elbs = ctx.entry_lbs(index, ids)
        keep = (elbs < bsf) | ((elbs == bsf) & (ids < bsf_id))
        counters.lb_skips += int(ids.size - keep.sum())
        ids = ids[keep]
        if ids.size == 0:
            return
    block = read_rows(ids)
    dists = _distance_block(
        block, ctx.q64, ctx.measure, ctx.radius, _abandon_bound(heap.bound()[0])
    )
    counters.real_dists += ids.size
    _offer_block(heap, dists, ids)


_BATCH_ENTRIES = 1024


def _serial_scan(
    index: Index,
    ctx: _QueryContext,
    heap: _KnnHeap,
    read_rows,
    counters: Counters,
    batch_entries: int = _BATCH_ENTRIES,
) -> _KnnHeap:
    """Seed from the home leaf, then consume remaining leaves in ascending
    lower-bound order, refining entry batches between bound refreshes."""
    home = index.home_leaf(ctx.word)
    if home is not None and len(home.ids):
        _refine_ids(heap, ctx, index, home.ids, read_rows, counters)

    lbs = ctx.leaf_lbs(index)
    order = [
        int(li)
        for li in np.argsort(lbs, kind="stable")
        if index.leaves[li] is not home
    ]
    pending: list = []
    pending_n = 0

    def flush():
        nonlocal pending, pending_n
        if pending:
            ids = pending[0] if len(pending) == 1 else np.concatenate(pending)
            _refine_ids(
                heap, ctx, index, ids, read_rows, counters, filter_bound=heap.bound()
            )
            pending = []
            pending_n = 0

    i = 0
    while i < len(order):
        # flush early while the heap is short so a bound exists at all
        if pending_n >= batch_entries or (pending_n and not heap.full()):
            flush()
        li = order[i]
        leaf = index.leaves[li]
        lb = float(lbs[li])
        bsf, bsf_id = heap.bound()
        if bsf != np.inf:
            min_id = int(leaf.ids[0]) if leaf.ids.size else _NO_ID
            if _skip(lb, min_id, bsf, bsf_id):
                if pending_n:
                    flush()  # tighten the bound, then re-check this leaf
                    continue
                if lb > bsf:
                    # order is lb-ascending: everything left is prunable
                    counters.lb_skips += int(
                        sum(index.leaves[j].ids.size for j in order[i:])
                    )
                    break
                counters.lb_skips += int(leaf.ids.size)
                i += 1
                continue
        pending.append(leaf.ids)
        pending_n += int(leaf.ids.size)
        i += 1
    flush()
    return heap


def serial_indexed_search(
    index: Index,
    data: DatasetHandle,
    query,
    k: int,
    measure: str = distance.L2_SQUARED,
    radius=None,
    counters: Counters | None = None,
):
    """Single-threaded index-guided search: seed from the home leaf, then
    refine remaining leaves in ascending lower-bound order."""
    _check_k(k)
    q = _check_queries(query, data.dim)[0]
    radius = _check_measure(measure, radius, data.dim)
    _check_indexed(index, data, measure)
    counters = counters if counters is not None else Counters()
    ctx = _QueryContext(index, q, measure, radius)
    heap = _KnnHeap(k, trace=counters.bsf_trace)
    _serial_scan(index, ctx, heap, data.rows, counters)
    return heap.answers()


def parallel_search(
    index: Index,
    data: DatasetHandle,
    query,
    k: int,
    measure: str = distance.L2_SQUARED,
    radius=None,
    workers: int = 1,
    counters: Counters | None = None,
):
    """Multi-worker variant of the indexed search.

    One shared monotone (bsf, id) threshold, one shared lower-bound-ordered
    leaf pool, per-worker result heaps merged at the end.  Answers are
    identical to the serial engine for every worker count.
    """
    if workers < 1:
        raise ParameterError(f"workers must be >= 1, got {workers}")
    _check_k(k)
    q = _check_queries(query, data.dim)[0]
    radius = _check_measure(measure, radius, data.dim)
    _check_indexed(index, data, measure)
    counters = counters if counters is not None else Counters()
    ctx = _QueryContext(index, q, measure, radius)
    read_rows = data.rows

    seed = _KnnHeap(k, trace=counters.bsf_trace)
    home = index.home_leaf(ctx.word)
    if home is not None and len(home.ids):
        _refine_ids(seed, ctx, index, home.ids, read_rows, counters)

    lbs = ctx.leaf_lbs(index)
    pool = [int(li) for li in np.argsort(lbs, kind="stable") if index.leaves[li] is not home]
    lock = threading.Lock()
    shared = {"bound": seed.bound(), "next": 0}
    counters.bsf_trace.append(shared["bound"][0])
    worker_heaps = [seed.copy() for _ in range(workers)]
    for wh in worker_heaps:
        wh._trace = None  # the shared bound, not local heaps, is the BSF here
    worker_counters = [Counters() for _ in range(workers)]

    def run(wi: int) -> None:
        heap = worker_heaps[wi]
        wc = worker_counters[wi]
        while True:
            batch: list = []
            batch_n = 0
            with lock:
                g_bsf, g_id = shared["bound"]
                pos = shared["next"]
                while pos < len(pool) and batch_n < _BATCH_ENTRIES:
                    leaf = index.leaves[pool[pos]]
                    lb = float(lbs[pool[pos]])
                    if g_bsf != np.inf:
                        min_id = int(leaf.ids[0]) if leaf.ids.size else _NO_ID
                        if _skip(lb, min_id, g_bsf, g_id):
                            if lb > g_bsf:
                                # pool is lb-ordered and the shared bound
                                # only shrinks: everything left is prunable
                                for rest in pool[pos:]:
                                    wc.lb_skips += int(index.leaves[rest].ids.size)
                                pos = len(pool)
                                break
                            wc.lb_skips += int(leaf.ids.size)
                            pos += 1
                            continue
                    batch.append(leaf.ids)
                    batch_n += int(leaf.ids.size)
                    pos += 1
                shared["next"] = pos
            if not batch:
                return
            ids = batch[0] if len(batch) == 1 else np.concatenate(batch)
            _refine_ids(
                heap, ctx, index, ids, read_rows, wc,
                filter_bound=(g_bsf, g_id) if g_bsf != np.inf else None,
            )
            if heap.full():
                local = heap.bound()
                with lock:
                    if local < shared["bound"]:
                        shared["bound"] = local
                        counters.bsf_trace.append(local[0])

    if workers == 1:
        run(0)
    else:
        threads = [threading.Thread(target=run, args=(wi,)) for wi in range(workers)]
        for t in threads:
            t.start()
        for t in threads:
            t.join()

    for wc in worker_counters:
        counters.real_dists += wc.real_dists
        counters.lb_skips += wc.lb_skips

    merged = {}
    for heap in worker_heaps:
        for d, sid in heap.items():
            merged[sid] = d
    best = sorted((d, sid) for sid, d in merged.items())[:k]
    return [Answer(sid, d) for d, sid in best]


class _BatchedRawReader:
    """Positioned batched reads over the raw file, ascending offsets."""

    def __init__(self, index: Index, counters: Counters, batch_bytes: int):
        self.path = index.raw_path
        self.dim = index.dim
        self.normalize = index.cfg.normalize
        self.counters = counters
        self.batch_rows = max(1, batch_bytes // (index.dim * ITEM_BYTES))
        self.fh = open(self.path, "rb")

    def close(self):
        self.fh.close()

    def __call__(self, ids: np.ndarray) -> np.ndarray:
        ids = np.sort(np.asarray(ids, dtype=np.int64))
        out = np.empty((ids.size, self.dim), dtype=np.float32)
        row_bytes = self.dim * ITEM_BYTES
        for start in range(0, ids.size, self.batch_rows):
            chunk = ids[start : start + self.batch_rows]
            buf = np.empty((chunk.size, self.dim), dtype=np.float32)
            for i, sid in enumerate(chunk):
                self.fh.seek(int(sid) * row_bytes)
                buf[i] = np.frombuffer(self.fh.read(row_bytes), dtype="<f4")
            self.counters.peak_resident_raw_bytes = max(
                self.counters.peak_resident_raw_bytes, buf.nbytes
            )
            if self.normalize:
                buf = _normalize_block_f32(buf)
            out[start : start + chunk.size] = buf
        return out


def disk_search(
    index: Index,
    query,
    k: int,
    measure: str = distance.L2_SQUARED,
    radius=None,
    counters: Counters | None = None,
    batch_bytes: int = 4 * 1024 * 1024,
):
    """Disk-resident search: summaries in memory, raw series read in
    offset-ordered batches bounded by `batch_bytes`."""
    if index.cfg.storage_mode != RAW_ON_DISK:
        raise ParameterError("disk_search requires an index built in disk mode")
    if not getattr(index, "_raw_verified", False):
        verify_raw_data(index)
        index._raw_verified = True
    _check_k(k)
    q = _check_queries(query, index.dim)[0]
    radius = _check_measure(measure, radius, index.dim)
    counters = counters if counters is not None else Counters()
    ctx = _QueryContext(index, q, measure, radius)
    reader = _BatchedRawReader(index, counters, batch_bytes)
    try:
        heap = _KnnHeap(k, trace=counters.bsf_trace)
        _serial_scan(index, ctx, heap, reader, counters)
        return heap.answers()
    finally:
        reader.close()
