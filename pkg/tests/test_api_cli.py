import numpy as np
import pytest

import serieskit as sk
from serieskit import cli
from serieskit.answers import (
    compare_answer_files,
    format_answers,
    read_answers,
    write_answers,
)
from serieskit.api import EnvironmentProfile, select_engine
from serieskit.engines import Answer
from serieskit.errors import ParameterError, StateError, ValidationError

from conftest import make_dataset

GIB = 1 << 30


# -- engine selection ----------------------------------------------------


def test_select_engine_truth_table():
    cases = [
        # (fits, distributed, gpu) -> (engine, recommendation)
        ((1 * GIB, 8 * GIB, False, False), ("parallel", "parallel")),
        ((1 * GIB, 8 * GIB, False, True), ("parallel", "gpu")),
        ((1 * GIB, 8 * GIB, True, False), ("parallel", "distributed")),
        ((1 * GIB, 8 * GIB, True, True), ("parallel", "distributed")),
        ((9 * GIB, 8 * GIB, False, False), ("disk", "disk")),
        ((9 * GIB, 8 * GIB, True, True), ("disk", "disk")),
        ((8 * GIB, 8 * GIB, False, False), ("disk", "disk")),  # boundary
    ]
    for (db, mem, dist, gpu), (engine, rec) in cases:
        choice = select_engine(
            EnvironmentProfile(
                dataset_bytes=db,
                available_memory_bytes=mem,
                distributed_available=dist,
                gpu_available=gpu,
            )
        )
        assert (choice.engine, choice.recommendation) == (engine, rec)
    with pytest.raises(ParameterError):
        select_engine(EnvironmentProfile(-1, 1))


# -- facade --------------------------------------------------------------


def test_session_build_then_search_matrix_shapes(rng):
    arr = make_dataset(rng, 120, 16)
    session = sk.SearchSession(engine="parallel", workers=2)
    session.buildIndex(arr)
    ids, dists = session.searchIndex(make_dataset(rng, 4, 16), k=5)
    assert ids.shape == (4, 5) and dists.shape == (4, 5)
    assert np.all(ids >= 0) and np.all(np.isfinite(dists))
    assert np.all(np.diff(dists, axis=1) >= 0)


def test_session_accepts_flat_blocks(rng):
    arr = make_dataset(rng, 50, 8)
    cfg = sk.IndexConfig(segments=4, max_bits=4)
    session = sk.SearchSession(engine="serial", config=cfg)
    session.buildIndex(arr.ravel(), n_db=50, d=8)
    ids, _ = session.searchIndex(arr[7].ravel(), k=1)
    assert ids[0, 0] == 7
    with pytest.raises(ParameterError):
        sk.SearchSession(engine="serial", config=cfg).buildIndex(arr.ravel())


def test_session_pads_when_k_exceeds_count(rng):
    arr = make_dataset(rng, 5, 8)
    session = sk.SearchSession(engine="bruteforce")
    session.buildIndex(arr)
    ids, dists = session.searchIndex(arr[0], k=9)
    assert list(ids[0, 5:]) == [-1] * 4
    assert np.all(np.isinf(dists[0, 5:]))


def test_session_search_before_build_raises(rng):
    with pytest.raises(StateError):
        sk.SearchSession().searchIndex(np.zeros(8, dtype=np.float32), k=1)


def test_session_rejects_unknown_engine():
    with pytest.raises(ParameterError):
        sk.SearchSession(engine="quantum")


def test_all_session_engines_agree(rng):
    arr = make_dataset(rng, 300, 16)
    queries = make_dataset(rng, 5, 16)
    reference = None
    for engine in sk.engines.ENGINE_NAMES:
        session = sk.SearchSession(
            engine=engine, config=sk.IndexConfig(segments=8, max_bits=6,
                                                 leaf_capacity=32)
        )
        session.buildIndex(arr)
        ids, dists = session.searchIndex(queries, k=6)
        if reference is None:
            reference = (ids, dists)
        else:
            assert np.array_equal(ids, reference[0]), engine
            assert np.array_equal(dists, reference[1]), engine


def test_session_index_save_load_roundtrip(rng, tmp_path):
    arr = make_dataset(rng, 200, 16)
    session = sk.SearchSession(engine="serial",
                               config=sk.IndexConfig(segments=8, max_bits=6))
    session.buildIndex(arr)
    before = session.searchIndex(arr[:3], k=4)
    path = tmp_path / "idx.bin"
    session.save_index(path)
    session.load_index(path)
    after = session.searchIndex(arr[:3], k=4)
    assert np.array_equal(before[0], after[0])


# -- answer files ----------------------------------------------------------


def test_answer_file_roundtrip(tmp_path):
    results = [
        [Answer(3, 1.25), Answer(9, 2.5)],
        [Answer(1, 0.0)],  # short row: padded with sentinels
    ]
    path = tmp_path / "a.txt"
    write_answers(path, results, k=2, dim=8, measure="l2sq")
    meta, ids, dists = read_answers(path)
    assert meta["measure"] == "l2sq" and int(meta["k"]) == 2
    assert ids.tolist() == [[3, 9], [1, -1]]
    assert dists[1, 1] == np.inf
    assert compare_answer_files(path, path) is None


def test_answer_file_has_no_engine_field():
    text = format_answers([[Answer(0, 1.0)]], 1, 4, "l2sq")
    assert "engine" not in text


def test_compare_answer_files_reports_first_mismatch(tmp_path):
    a = tmp_path / "a.txt"
    b = tmp_path / "b.txt"
    write_answers(a, [[Answer(3, 1.0), Answer(4, 2.0)]], 2, 4, "l2sq")
    write_answers(b, [[Answer(3, 1.0), Answer(5, 2.0)]], 2, 4, "l2sq")
    qi, rank, msg = compare_answer_files(a, b)
    assert (qi, rank) == (0, 1) and "id" in msg
    # distance tolerance: 1e-3 relative passes, 1e-2 fails
    write_answers(b, [[Answer(3, 1.0005), Answer(4, 2.0)]], 2, 4, "l2sq")
    assert compare_answer_files(a, b) is None
    write_answers(b, [[Answer(3, 1.02), Answer(4, 2.0)]], 2, 4, "l2sq")
    assert compare_answer_files(a, b) is not None


def test_read_answers_rejects_foreign_files(tmp_path):
    path = tmp_path / "x.txt"
    path.write_text("not an answers file\n")
    with pytest.raises(ValidationError):
        read_answers(path)


# -- CLI -------------------------------------------------------------------


@pytest.fixture
def workload(tmp_path, rng):
    arr = make_dataset(rng, 400, 16, kind="clustered")
    queries = make_dataset(rng, 6, 16)
    dataset = tmp_path / "data.f32"
    qfile = tmp_path / "queries.f32"
    arr.tofile(dataset)
    queries.tofile(qfile)
    return tmp_path, str(dataset), str(qfile)


def _common(dataset, qfile):
    return [
        "--dataset", dataset, "--queries", qfile, "--dim", "16",
        "--segments", "8", "--max-bits", "6", "--leaf-capacity", "32",
    ]


def test_cli_full_pipeline(workload, capsys):
    tmp_path, dataset, qfile = workload
    truth = str(tmp_path / "truth.txt")
    assert cli.main(["groundtruth", *_common(dataset, qfile),
                     "--k", "5", "--output", truth]) == 0
    answer_files = []
    for engine in ("bruteforce", "lb-bruteforce", "serial", "parallel", "disk"):
        out = str(tmp_path / f"{engine}.txt")
        code = cli.main(["search", *_common(dataset, qfile), "--k", "5",
                         "--engine", engine, "--output", out])
        assert code == 0, capsys.readouterr().err
        assert cli.main(["verify", out, truth]) == 0
        answer_files.append(out)
    truth_bytes = open(truth, "rb").read()
    for path in answer_files:  # byte-identical across engines
        assert open(path, "rb").read() == truth_bytes


def test_cli_build_then_search_saved_index(workload):
    tmp_path, dataset, qfile = workload
    index_file = str(tmp_path / "idx.bin")
    assert cli.main(["build", "--dataset", dataset, "--dim", "16",
                     "--segments", "8", "--max-bits", "6",
                     "--leaf-capacity", "32", "--index-file", index_file]) == 0
    out = str(tmp_path / "ans.txt")
    truth = str(tmp_path / "truth.txt")
    assert cli.main(["groundtruth", *_common(dataset, qfile),
                     "--k", "3", "--output", truth]) == 0
    assert cli.main(["search", *_common(dataset, qfile), "--k", "3",
                     "--engine", "serial", "--index-file", index_file,
                     "--output", out]) == 0
    assert cli.main(["verify", out, truth]) == 0


def test_cli_verify_detects_mismatch(workload):
    tmp_path, dataset, qfile = workload
    truth = str(tmp_path / "truth.txt")
    assert cli.main(["groundtruth", *_common(dataset, qfile),
                     "--k", "2", "--output", truth]) == 0
    tampered = tmp_path / "tampered.txt"
    lines = open(truth).read().splitlines()
    qi, rank, sid, dist = lines[1].split()
    lines[1] = f"{qi} {rank} {int(sid) + 1} {dist}"
    tampered.write_text("\n".join(lines) + "\n")
    assert cli.main(["verify", str(tampered), truth]) == 1


def test_cli_usage_and_io_errors(workload, capsys):
    tmp_path, dataset, qfile = workload
    # missing dataset file
    assert cli.main(["search", "--dataset", str(tmp_path / "nope.f32"),
                     "--queries", qfile, "--dim", "16",
                     "--output", str(tmp_path / "o.txt")]) == 2
    # unknown engine is an argparse error
    assert cli.main(["search", *_common(dataset, qfile),
                     "--engine", "quantum",
                     "--output", str(tmp_path / "o.txt")]) == 2
    # build without --index-file
    assert cli.main(["build", "--dataset", dataset, "--dim", "16"]) == 2
    capsys.readouterr()


def test_cli_bench_csv(workload):
    tmp_path, dataset, qfile = workload
    out = tmp_path / "bench.csv"
    assert cli.main(["bench", *_common(dataset, qfile), "--k", "1,5",
                     "--engine", "bruteforce,serial", "--threads", "2",
                     "--output", str(out)]) == 0
    lines = out.read_text().strip().splitlines()
    assert lines[0] == "engine,k,threads,wall_ms,real_dists,lb_skips"
    assert len(lines) == 1 + 4  # 2 engines x 2 k values
    rows = [line.split(",") for line in lines[1:]]
    bf = {int(r[1]): int(r[4]) for r in rows if r[0] == "bruteforce"}
    serial = {int(r[1]): int(r[4]) for r in rows if r[0] == "serial"}
    assert bf[1] == bf[5] == 6 * 400  # bruteforce always scans everything
    assert serial[1] <= serial[5] <= bf[5]  # pruning never looks at more


def test_cli_dtw_search(workload):
    tmp_path, dataset, qfile = workload
    truth = str(tmp_path / "truth.txt")
    out = str(tmp_path / "ans.txt")
    args = [*_common(dataset, qfile), "--k", "4",
            "--distance", "dtw", "--dtw-radius", "2"]
    assert cli.main(["groundtruth", *args, "--output", truth]) == 0
    assert cli.main(["search", *args, "--engine", "parallel",
                     "--output", out]) == 0
    assert cli.main(["verify", out, truth]) == 0
    assert open(out, "rb").read() == open(truth, "rb").read()
