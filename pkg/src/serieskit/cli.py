"""Command-line interface.

Subcommands: build, search, groundtruth, bench, verify.
Exit codes: 0 success, 1 verification mismatch, 2 usage / input errors.
"""

import argparse
import csv
import os
import sys
import time
from concurrent.futures import ThreadPoolExecutor

import numpy as np

from . import distance, engines
from .answers import compare_answer_files, write_answers
from .api import SearchSession
from .data import load_dataset
from .errors import SerieskitError
from .index import IndexConfig, RAW_IN_MEMORY, RAW_ON_DISK

USAGE_ERROR = 2
MISMATCH_ERROR = 1


def _add_common(p: argparse.ArgumentParser, queries: bool = True) -> None:
    p.add_argument("--dataset", required=True, help="raw float32 dataset file")
    p.add_argument("--dim", type=int, required=True, help="series length")
    if queries:
        p.add_argument("--queries", required=True, help="raw float32 queries file")
        p.add_argument("--k", default="10", help="k (bench accepts a comma list)")
    p.add_argument("--distance", choices=[distance.L2_SQUARED, distance.DTW],
                   default=distance.L2_SQUARED)
    p.add_argument("--dtw-radius", type=int, default=None)
    p.add_argument("--segments", type=int, default=16)
    p.add_argument("--max-bits", type=int, default=8)
    p.add_argument("--leaf-capacity", type=int, default=2000)
    p.add_argument("--threads", type=int, default=4)
    p.add_argument("--normalize", action="store_true")
    p.add_argument("--storage", choices=["memory", "disk"], default="memory")
    p.add_argument("--index-file", default=None)
    p.add_argument("--output", default=None)
    p.add_argument("--seed", type=int, default=0)


def _config(args) -> IndexConfig:
    return IndexConfig(
        segments=args.segments,
        max_bits=args.max_bits,
        leaf_capacity=args.leaf_capacity,
        storage_mode=RAW_ON_DISK if args.storage == "disk" else RAW_IN_MEMORY,
        normalize=args.normalize,
        distance=args.distance,
    )


def _require_file(path, what: str) -> None:
    if not os.path.exists(path):
        raise SerieskitError(f"{what} file does not exist: {path}")


def _session(args, engine: str) -> SearchSession:
    _require_file(args.dataset, "dataset")
    session = SearchSession(
        engine=engine,
        config=_config(args),
        measure=args.distance,
        radius=args.dtw_radius,
        workers=args.threads,
    )
    if (
        engine in ("serial", "parallel", "disk")
        and args.index_file
        and os.path.exists(args.index_file)
    ):
        mode = "file" if engine == "disk" else "memory"
        session.handle = load_dataset(
            args.dataset, args.dim, mode=mode, normalize=args.normalize
        )
        session.load_index(args.index_file)
    else:
        session.build_from_file(args.dataset, args.dim)
    return session


def _load_queries(args) -> np.ndarray:
    _require_file(args.queries, "queries")
    return load_dataset(args.queries, args.dim).matrix()


def cmd_build(args) -> int:
    _require_file(args.dataset, "dataset")
    if not args.index_file:
        raise SerieskitError("build requires --index-file")
    session = SearchSession(engine="serial", config=_config(args))
    session.build_from_file(args.dataset, args.dim)
    session.save_index(args.index_file)
    print(f"indexed {session.handle.count} series -> {args.index_file}")
    return 0


def _run_search(args, engine: str) -> int:
    if not args.output:
        raise SerieskitError("search requires --output")
    session = _session(args, engine)
    queries = _load_queries(args)
    k = int(args.k)
    results = session.search_answers(queries, k=k)
    radius = args.dtw_radius
    if radius is None:
        radius = (
            distance.default_dtw_radius(args.dim)
            if args.distance == distance.DTW
            else 0
        )
    write_answers(args.output, results, k, args.dim, args.distance, radius)
    print(
        f"{engine}: {len(results)} queries, k={k}, "
        f"real_dists={session.counters.real_dists}, "
        f"lb_skips={session.counters.lb_skips}"
    )
    return 0


def cmd_search(args) -> int:
    return _run_search(args, args.engine)


def cmd_groundtruth(args) -> int:
    return _run_search(args, "bruteforce")


def cmd_verify(args) -> int:
    _require_file(args.answers, "answers")
    _require_file(args.groundtruth, "groundtruth")
    mismatch = compare_answer_files(args.answers, args.groundtruth)
    if mismatch is None:
        print("verify: OK")
        return 0
    qi, rank, msg = mismatch
    print(f"verify: MISMATCH at query {qi} rank {rank}: {msg}", file=sys.stderr)
    return MISMATCH_ERROR


def _bench_one(session: SearchSession, queries: np.ndarray, k: int, threads: int):
    session.counters = engines.Counters()
    start = time.perf_counter()
    if session.engine in ("bruteforce", "lb-bruteforce") and threads > 1:
        # exhaustive engines are serial per query; parallelize across queries
        # with per-thread counters to keep the totals race-free
        def one(row):
            local = engines.Counters()
            prepped = session._prep_queries(row, None)
            if session.engine == "bruteforce":
                res = engines.bruteforce_search(
                    session.handle, prepped, k, session.measure, session.radius, local
                )
            else:
                res = engines.lb_bruteforce_search(
                    session.handle, session.summaries, prepped, k,
                    session.measure, session.radius, local,
                )
            return res[0], local

        with ThreadPoolExecutor(max_workers=threads) as pool:
            out = list(pool.map(one, queries))
        results = [r for r, _ in out]
        for _, local in out:
            session.counters.real_dists += local.real_dists
            session.counters.lb_skips += local.lb_skips
    else:
        results = session.search_answers(queries, k=k)
    wall_ms = (time.perf_counter() - start) * 1000.0
    return results, wall_ms, session.counters


def cmd_bench(args) -> int:
    ks = [int(v) for v in str(args.k).split(",")]
    engine_list = args.engine.split(",")
    rows = []
    for engine in engine_list:
        session = _session(args, engine)
        queries = _load_queries(args)
        for k in ks:
            _, wall_ms, counters = _bench_one(session, queries, k, args.threads)
            rows.append(
                dict(
                    engine=engine,
                    k=k,
                    threads=args.threads,
                    wall_ms=f"{wall_ms:.3f}",
                    real_dists=counters.real_dists,
                    lb_skips=counters.lb_skips,
                )
            )
    out = open(args.output, "w", newline="") if args.output else sys.stdout
    try:
        writer = csv.DictWriter(
            out, fieldnames=["engine", "k", "threads", "wall_ms", "real_dists", "lb_skips"]
        )
        writer.writeheader()
        writer.writerows(rows)
    finally:
        if args.output:
            out.close()
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="serieskit",
        description="Exact k-NN similarity search for data series and vectors.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("build", help="build and persist an index")
    _add_common(p, queries=False)
    p.set_defaults(func=cmd_build)

    p = sub.add_parser("search", help="answer top-k queries")
    _add_common(p)
    p.add_argument("--engine", choices=engines.ENGINE_NAMES, default="parallel")
    p.set_defaults(func=cmd_search)

    p = sub.add_parser("groundtruth", help="exact answers via the bruteforce oracle")
    _add_common(p)
    p.set_defaults(func=cmd_groundtruth)

    p = sub.add_parser("bench", help="counter/time sweep over engines and k")
    _add_common(p)
    p.add_argument("--engine", default="bruteforce,lb-bruteforce,serial,parallel")
    p.set_defaults(func=cmd_bench)

    p = sub.add_parser("verify", help="compare an answers file against groundtruth")
    p.add_argument("answers")
    p.add_argument("groundtruth")
    p.set_defaults(func=cmd_verify)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return exc.code if exc.code is not None else USAGE_ERROR
    try:
        return args.func(args)
    except (SerieskitError, OSError) as exc:
        print(f"serieskit {args.command}: error: {exc}", file=sys.stderr)
        return USAGE_ERROR


def _entry() -> None:
    sys.exit(main())


if __name__ == "__main__":
    _entry()
