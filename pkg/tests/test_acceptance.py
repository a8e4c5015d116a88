"""Release acceptance gate: one test per criterion.

Each test prints a single PASS/FAIL line with its headline measurement
(visible with `pytest -v -s` or on failure) and asserts the stated
tolerance.  Criteria:

1. exactness master suite      - 20 datasets x 2 measures x k in {1,10,100}
2. lower-bound soundness       - 1e5 (query, series) pairs, zero violations
3. parallel determinism        - byte-identical answers for 1/2/4/8 workers
4. disk/memory equivalence     - byte-identical answers, bounded residency
5. pruning effectiveness       - counter thresholds on clustered data
6. relaxed throughput          - parallel indexed beats exhaustive at k=10
7. index structural audit      - tree invariants + round-trip stability
8. decision-tree conformance   - engine selection truth table
"""

import math
import pathlib
import time
from concurrent.futures import ThreadPoolExecutor

import numpy as np
import pytest

import serieskit as sk
from serieskit import engines
from serieskit.answers import format_answers
from serieskit.api import EnvironmentProfile, select_engine

BENCH_DIR = pathlib.Path(__file__).parent.parent / "benchmarks"

AUDITED_INDEXES = 0


def _report(name: str, ok: bool, detail: str) -> None:
    print(f"[{'PASS' if ok else 'FAIL'}] {name}: {detail}")
    assert ok, f"{name}: {detail}"


def _build_disk_index(arr, cfg_kw, tmp_path, tag):
    raw = tmp_path / f"{tag}.f32"
    arr.tofile(raw)
    handle = sk.load_dataset(raw, arr.shape[1], mode="file")
    cfg = sk.IndexConfig(storage_mode=sk.RAW_ON_DISK, **cfg_kw)
    return sk.build_index(handle, cfg)


def _audit(idx) -> None:
    global AUDITED_INDEXES
    idx.audit()
    AUDITED_INDEXES += 1


def _ids_match(got, want) -> bool:
    return [a.id for a in got] == [a.id for a in want]


def _dists_match(got, want, rel=1e-3) -> bool:
    for a, b in zip(got, want):
        scale = max(abs(a.dist), abs(b.dist), 1e-30)
        if abs(a.dist - b.dist) / scale > rel:
            return False
    return True


# -- 1. exactness master suite ---------------------------------------------

_COMBOS = [
    (count, dim, seed)
    for seed in (0, 1)
    for count in (100, 1_000, 10_000)
    for dim in (16, 64, 256)
    if not (count == 10_000 and dim == 256)
] + [(10_000, 64, 2), (1_000, 256, 2), (100, 16, 3), (1_000, 64, 3)]


def test_exactness_master_suite(tmp_path):
    assert len(_COMBOS) == 20
    checked = 0
    for count, dim, seed in _COMBOS:
        rng = np.random.default_rng(1000 + seed)
        arr = rng.normal(size=(count, dim)).astype(np.float32)
        queries = rng.normal(size=(20, dim)).astype(np.float32)
        handle = sk.from_array(arr)
        cfg_kw = dict(segments=16, max_bits=8, leaf_capacity=256)
        idx = sk.build_index(handle, sk.IndexConfig(**cfg_kw))
        _audit(idx)
        didx = _build_disk_index(arr, cfg_kw, tmp_path, f"{count}x{dim}s{seed}")
        _audit(didx)
        summaries = sk.build_summaries(handle)
        for measure in (sk.L2_SQUARED, sk.DTW):
            radius = math.ceil(0.05 * dim) if measure == sk.DTW else None
            kmax = min(100, count)
            oracle = sk.bruteforce_search(handle, queries, kmax, measure, radius)
            for k in (1, 10, 100):
                kk = min(k, count)
                want = [row[:kk] for row in oracle]
                got = {
                    "lb-bruteforce": sk.lb_bruteforce_search(
                        handle, summaries, queries, k, measure, radius
                    ),
                    "serial": [
                        sk.serial_indexed_search(idx, handle, q, k, measure, radius)
                        for q in queries
                    ],
                    "parallel": [
                        sk.parallel_search(
                            idx, handle, q, k, measure, radius, workers=4
                        )
                        for q in queries
                    ],
                    "disk": [
                        sk.disk_search(didx, q, k, measure, radius)
                        for q in queries
                    ],
                }
                for label, answers in got.items():
                    for qi in range(len(queries)):
                        ctx = (count, dim, seed, measure, k, label, qi)
                        assert _ids_match(answers[qi], want[qi]), ctx
                        assert _dists_match(answers[qi], want[qi]), ctx
                        checked += 1
    _report(
        "exactness master suite",
        True,
        f"{len(_COMBOS)} datasets x 2 measures x 3 k x 4 engines, "
        f"{checked} query answer-sets equal to the exhaustive oracle",
    )


# -- 2. lower-bound soundness ------------------------------------------------


def test_lower_bound_soundness():
    from serieskit import distance, kernels, summarize

    dim, w = 64, 8
    n_queries, n_series = 100, 1_000
    radius = distance.default_dtw_radius(dim)
    rng = np.random.default_rng(2)
    series = rng.normal(size=(n_series, dim)).astype(np.float32)
    queries = rng.normal(size=(n_queries, dim)).astype(np.float32)
    seg_lengths = summarize.segment_lengths(dim, w)
    symbols = summarize.words_block(series, w).astype(np.intp)
    bits = summarize.MAX_BITS
    violations = 0
    for q in queries:
        q64 = q.astype(np.float64)
        l2 = kernels.l2_block_bounded(series, q64, np.inf)
        dtw_vals = kernels.dtw_block_bounded(series, q64, radius, np.inf)
        paa_q = summarize.paa_block(q[None, :], w)[0]
        mindist_l2 = summarize.mindist_paa_block(paa_q, symbols, bits, seg_lengths)
        env = distance.build_envelope(q64, radius)
        keogh = kernels.lb_keogh_block(series, env.lower, env.upper)
        intervals = summarize.envelope_segment_intervals(env, dim, w)
        mindist_dtw = summarize.mindist_dtw_block(
            intervals, symbols, bits, seg_lengths
        )
        violations += int(np.sum(mindist_l2 > l2))
        violations += int(np.sum(keogh > dtw_vals))
        violations += int(np.sum(mindist_dtw > dtw_vals))
    _report(
        "lower-bound soundness",
        violations == 0,
        f"{n_queries * n_series} pairs at n={dim}, w={w}: "
        f"{violations} violations across 3 bounds",
    )


# -- 3. parallel determinism --------------------------------------------------


def test_parallel_determinism():
    rng = np.random.default_rng(3)
    arr = rng.normal(size=(4_000, 64)).astype(np.float32)
    arr[1:151] = arr[0]  # 150 exact duplicates stress tie ordering
    queries = np.vstack([arr[0:1], rng.normal(size=(19, 64)).astype(np.float32)])
    handle = sk.from_array(arr)
    idx = sk.build_index(
        handle, sk.IndexConfig(segments=16, max_bits=8, leaf_capacity=128)
    )
    _audit(idx)
    k = 10
    oracle = sk.bruteforce_search(handle, queries, k)
    files = {}
    for workers in (1, 2, 4, 8):
        results = [
            sk.parallel_search(idx, handle, q, k, workers=workers) for q in queries
        ]
        assert results == oracle, f"workers={workers} diverges from the oracle"
        files[workers] = format_answers(results, k, 64, sk.L2_SQUARED)
    unique = {text for text in files.values()}
    ok = len(unique) == 1
    # the duplicate block must surface as ascending ids at distance zero
    first = [a.id for a in oracle[0]]
    ok = ok and first == list(range(10))
    _report(
        "parallel determinism",
        ok,
        f"workers 1/2/4/8 -> {len(unique)} distinct answer file(s) over "
        f"{len(queries)} queries incl. 150-duplicate tie stress",
    )


# -- 4. disk/memory equivalence ----------------------------------------------


def test_disk_memory_equivalence(tmp_path):
    rng = np.random.default_rng(4)
    arr = rng.normal(size=(20_000, 64)).astype(np.float32)
    queries = rng.normal(size=(100, 64)).astype(np.float32)
    cfg_kw = dict(segments=16, max_bits=8, leaf_capacity=512)
    handle = sk.from_array(arr)
    idx = sk.build_index(handle, sk.IndexConfig(**cfg_kw))
    _audit(idx)
    didx = _build_disk_index(arr, cfg_kw, tmp_path, "dm")
    _audit(didx)
    k = 10
    mem_results = [sk.serial_indexed_search(idx, handle, q, k) for q in queries]
    batch_bytes = 256 * 1024
    counters = engines.Counters()
    disk_results = [
        sk.disk_search(didx, q, k, counters=counters, batch_bytes=batch_bytes)
        for q in queries
    ]
    mem_file = format_answers(mem_results, k, 64, sk.L2_SQUARED)
    disk_file = format_answers(disk_results, k, 64, sk.L2_SQUARED)
    ok = mem_file == disk_file
    resident_ok = counters.peak_resident_raw_bytes <= 2 * batch_bytes
    _report(
        "disk/memory equivalence",
        ok and resident_ok,
        f"100 queries byte-identical={ok}; peak resident raw "
        f"{counters.peak_resident_raw_bytes} B <= 2x batch "
        f"{batch_bytes} B = {resident_ok}",
    )


# -- 5 & 6. clustered-workload criteria ---------------------------------------


@pytest.fixture(scope="module")
def clustered():
    rng = np.random.default_rng(5)
    count, dim, n_clusters = 100_000, 256, 10
    centers = rng.normal(size=(n_clusters, dim)) * 5.0
    labels = rng.integers(0, n_clusters, size=count)
    arr = (centers[labels] + rng.normal(scale=0.5, size=(count, dim))).astype(
        np.float32
    )
    qc = rng.integers(0, n_clusters, size=100)
    queries = (centers[qc] + rng.normal(scale=0.5, size=(100, dim))).astype(
        np.float32
    )
    handle = sk.from_array(arr)
    idx = sk.build_index(handle, sk.IndexConfig())
    return handle, idx, queries


def test_pruning_effectiveness(clustered):
    handle, idx, queries = clustered
    _audit(idx)
    count = handle.count
    probe = queries[:10]
    k = 1

    serial_c = engines.Counters()
    for q in probe:
        sk.serial_indexed_search(idx, handle, q, k, counters=serial_c)
    serial_frac = serial_c.real_dists / (len(probe) * count)

    parallel_c = engines.Counters()
    for q in probe:
        sk.parallel_search(idx, handle, q, k, workers=4, counters=parallel_c)
    parallel_frac = parallel_c.real_dists / (len(probe) * count)

    summaries = sk.build_summaries(handle)
    lb_c = engines.Counters()
    sk.lb_bruteforce_search(handle, summaries, probe, k, counters=lb_c)
    skip_frac = lb_c.lb_skips / (len(probe) * count)

    ok = serial_frac <= 0.20 and parallel_frac <= 0.20 and skip_frac >= 0.30
    _report(
        "pruning effectiveness",
        ok,
        f"avg real-distance fraction serial={serial_frac:.3f} "
        f"parallel={parallel_frac:.3f} (<= 0.20); "
        f"lower-bound skip fraction {skip_frac:.3f} (>= 0.30)",
    )


def test_relaxed_throughput(clustered):
    handle, idx, queries = clustered
    workers = 8

    def bruteforce_wall(k):
        start = time.perf_counter()
        with ThreadPoolExecutor(max_workers=workers) as pool:
            list(
                pool.map(
                    lambda q: sk.bruteforce_search(
                        handle, q, k, counters=engines.Counters()
                    ),
                    queries,
                )
            )
        return time.perf_counter() - start

    def parallel_wall(k):
        start = time.perf_counter()
        for q in queries:
            sk.parallel_search(
                idx, handle, q, k, workers=workers, counters=engines.Counters()
            )
        return time.perf_counter() - start

    rows = ["k,engine,wall_s,queries"]
    walls = {}
    for k in (10, 100, 1000):
        walls[("bruteforce", k)] = bruteforce_wall(k)
        walls[("parallel", k)] = parallel_wall(k)
        rows.append(f"{k},bruteforce,{walls[('bruteforce', k)]:.4f},{len(queries)}")
        rows.append(f"{k},parallel,{walls[('parallel', k)]:.4f},{len(queries)}")
    BENCH_DIR.mkdir(exist_ok=True)
    csv_path = BENCH_DIR / "throughput_k_sweep.csv"
    csv_path.write_text("\n".join(rows) + "\n")
    ok = walls[("parallel", 10)] < walls[("bruteforce", 10)]
    _report(
        "relaxed throughput",
        ok,
        f"100 queries, {workers} workers, k=10: parallel "
        f"{walls[('parallel', 10)]:.3f}s vs exhaustive "
        f"{walls[('bruteforce', 10)]:.3f}s; full sweep in {csv_path}",
    )


# -- 7. index structural audit -------------------------------------------------


def test_index_structural_audit(tmp_path):
    rng = np.random.default_rng(7)
    arr = rng.normal(size=(5_000, 32)).astype(np.float32)
    arr[100:300] = arr[99]  # duplicates force overflow handling
    handle = sk.from_array(arr)
    idx = sk.build_index(
        handle, sk.IndexConfig(segments=8, max_bits=8, leaf_capacity=64)
    )
    _audit(idx)
    queries = rng.normal(size=(100, 32)).astype(np.float32)
    k = 5
    before = [sk.serial_indexed_search(idx, handle, q, k) for q in queries]
    blob = sk.serialize(idx)
    clone = sk.deserialize(blob, handle)
    _audit(clone)
    after = [sk.serial_indexed_search(clone, handle, q, k) for q in queries]
    ok = before == after and sk.serialize(clone) == blob
    _report(
        "index structural audit",
        ok,
        f"{AUDITED_INDEXES} indexes passed the tree walk; serialize round-trip "
        f"preserved 100-query answers={before == after}",
    )


# -- 8. decision-tree conformance -----------------------------------------------


def test_decision_tree_conformance():
    gib = 1 << 30
    table = [
        # (dataset, memory, distributed, gpu) -> recommendation leaf
        ((1 * gib, 8 * gib, False, False), "parallel"),
        ((1 * gib, 8 * gib, False, True), "gpu"),
        ((1 * gib, 8 * gib, True, False), "distributed"),
        ((1 * gib, 8 * gib, True, True), "distributed"),
        ((9 * gib, 8 * gib, False, False), "disk"),
        ((9 * gib, 8 * gib, False, True), "disk"),
        ((9 * gib, 8 * gib, True, False), "disk"),
        ((9 * gib, 8 * gib, True, True), "disk"),
    ]
    failures = []
    for (db, mem, dist, gpu), want in table:
        got = select_engine(
            EnvironmentProfile(
                dataset_bytes=db,
                available_memory_bytes=mem,
                distributed_available=dist,
                gpu_available=gpu,
            )
        ).recommendation
        if got != want:
            failures.append((db, mem, dist, gpu, got, want))
    _report(
        "decision-tree conformance",
        not failures,
        f"8/8 profile rows map to the expected leaf"
        if not failures
        else f"mismatches: {failures}",
    )
