"""Plain-text answer / groundtruth files.

One header line with the workload parameters, then one line per
(query index, rank): `qi rank id dist`, distance with 6 significant
digits.  Rows where k exceeds N carry the sentinel id -1 / inf.
The format carries no engine name so equal workloads produce
byte-identical files across engines.
"""

import math

import numpy as np

from .errors import ValidationError

SENTINEL_ID = -1


def format_answers(results, k: int, dim: int, measure: str, radius: int = 0) -> str:
    lines = [
        f"# serieskit-answers v1 n_q={len(results)} k={k} dim={dim} "
        f"measure={measure} radius={radius}"
    ]
    for qi, answers in enumerate(results):
        for rank in range(k):
            if rank < len(answers):
                sid, dist = answers[rank].id, answers[rank].dist
            else:
                sid, dist = SENTINEL_ID, math.inf
            lines.append(f"{qi} {rank} {sid} {dist:.6g}")
    return "\n".join(lines) + "\n"


def write_answers(path, results, k, dim, measure, radius=0) -> None:
    with open(path, "w") as fh:
        fh.write(format_answers(results, k, dim, measure, radius))


def read_answers(path):
    """Returns (meta dict, float64 dist matrix, int64 id matrix)."""
    with open(path) as fh:
        header = fh.readline().strip()
        if not header.startswith("# serieskit-answers v1 "):
            raise ValidationError(f"{path}: not a serieskit answers file")
        meta = dict(kv.split("=") for kv in header.split()[3:])
        n_q, k = int(meta["n_q"]), int(meta["k"])
        ids = np.full((n_q, k), SENTINEL_ID, dtype=np.int64)
        dists = np.full((n_q, k), np.inf)
        for line in fh:
            qi, rank, sid, dist = line.split()
            ids[int(qi), int(rank)] = int(sid)
            dists[int(qi), int(rank)] = float(dist)
    return meta, ids, dists


def compare_answer_files(answers_path, truth_path, rel_tol: float = 1e-3):
    """First mismatch as (query, rank, message), or None when equal.

    Ids must match exactly; distances within `rel_tol` relative.
    """
    meta_a, ids_a, dists_a = read_answers(answers_path)
    meta_t, ids_t, dists_t = read_answers(truth_path)
    if ids_a.shape != ids_t.shape:
        return (-1, -1, f"shape mismatch: {ids_a.shape} vs {ids_t.shape}")
    for qi in range(ids_a.shape[0]):
        for rank in range(ids_a.shape[1]):
            if ids_a[qi, rank] != ids_t[qi, rank]:
                return (
                    qi,
                    rank,
                    f"id {ids_a[qi, rank]} != expected {ids_t[qi, rank]}",
                )
            da, dt = dists_a[qi, rank], dists_t[qi, rank]
            if da == dt:
                continue
            scale = max(abs(da), abs(dt), 1e-30)
            if abs(da - dt) / scale > rel_tol:
                return (qi, rank, f"distance {da} != expected {dt}")
    return None
