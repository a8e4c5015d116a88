"""Hierarchical iSAX index: bulk build, splitting, persistence.

The index is a service, not a search algorithm: it stores (series id,
full-cardinality word) entries in leaf buffers under a 2^w-way 1-bit root
fan-out with binary cardinality splits below, and exposes lower-bound
queries that the search engines drive.
"""

import io
import os
import struct
import zlib
from dataclasses import dataclass, field

import numpy as np

from . import distance, summarize
from .data import ITEM_BYTES, MODE_FILE, DatasetHandle
from .errors import (
    ChecksumMismatchError,
    IntegrityError,
    ParameterError,
    TruncatedIndexError,
    VersionMismatchError,
)

RAW_IN_MEMORY = "memory"
RAW_ON_DISK = "disk"

_MAGIC = b"SKIDX\x00\x01\x00"
_VERSION = 1
_STORAGE_CODES = {RAW_IN_MEMORY: 0, RAW_ON_DISK: 1}
_DISTANCE_CODES = {distance.L2_SQUARED: 0, distance.DTW: 1}

LEAF = 0
INNER = 1


@dataclass(frozen=True)
class IndexConfig:
    segments: int = summarize.DEFAULT_SEGMENTS
    max_bits: int = summarize.DEFAULT_MAX_BITS
    leaf_capacity: int = 2000
    storage_mode: str = RAW_IN_MEMORY
    normalize: bool = False
    distance: str = distance.L2_SQUARED

    def validate(self) -> None:
        if self.segments < 1:
            raise ParameterError(f"segments must be >= 1, got {self.segments}")
        if not 1 <= self.max_bits <= summarize.MAX_BITS:
            raise ParameterError(
                f"max_bits must be in [1, {summarize.MAX_BITS}], got {self.max_bits}"
            )
        if self.leaf_capacity < 1:
            raise ParameterError(
                f"leaf_capacity must be >= 1, got {self.leaf_capacity}"
            )
        if self.storage_mode not in _STORAGE_CODES:
            raise ParameterError(f"unknown storage_mode {self.storage_mode!r}")
        if self.distance not in _DISTANCE_CODES:
            raise ParameterError(f"unknown distance {self.distance!r}")


class IndexNode:
    """Tree node; a leaf buffers entry ids, an inner node has two children."""

    __slots__ = ("syms", "bits", "kind", "split_seg", "children", "ids", "overflow")

    def __init__(self, syms, bits):
        self.syms = syms  # uint8[w], symbol prefix at this node's bits
        self.bits = bits  # uint8[w]
        self.kind = LEAF
        self.split_seg = -1
        self.children = None
        self.ids = []
        self.overflow = False

    def mask_word(self) -> summarize.ISaxWord:
        return summarize.ISaxWord(symbols=self.syms.copy(), bits=self.bits.copy())


class Index:
    def __init__(self, cfg: IndexConfig, dim: int, count: int):
        self.cfg = cfg
        self.dim = dim
        self.count = count
        self.root: dict[int, IndexNode] = {}
        self.words: np.ndarray = np.empty((count, cfg.segments), dtype=np.uint8)
        self.seg_lengths = summarize.segment_lengths(dim, cfg.segments)
        self.raw_path: str | None = None
        self.raw_crc: int = 0
        # filled by _seal()
        self.leaves: list[IndexNode] = []
        self.leaf_syms: np.ndarray | None = None
        self.leaf_bits: np.ndarray | None = None
        self.leaf_min_ids: np.ndarray | None = None

    # -- construction -------------------------------------------------

    def _branch_key(self, word_row: np.ndarray) -> int:
        bits1 = word_row >> (self.cfg.max_bits - 1)
        key = 0
        for b in bits1:
            key = (key << 1) | int(b)
        return key

    def _insert(self, series_id: int) -> None:
        word = self.words[series_id]
        key = self._branch_key(word)
        node = self.root.get(key)
        if node is None:
            syms = (word >> (self.cfg.max_bits - 1)).astype(np.uint8)
            node = IndexNode(syms, np.ones(self.cfg.segments, dtype=np.uint8))
            self.root[key] = node
        while node.kind == INNER:
            child_bits = int(node.children[0].bits[node.split_seg])
            bit = (int(word[node.split_seg]) >> (self.cfg.max_bits - child_bits)) & 1
            node = node.children[bit]
        node.ids.append(series_id)
        if len(node.ids) > self.cfg.leaf_capacity and not node.overflow:
            self._split(node)

    def _pick_split_segment(self, node: IndexNode) -> int:
        # Round-robin effect: lowest-index segment among those with the
        # fewest bits, skipping segments already at max cardinality.
        best = -1
        best_bits = self.cfg.max_bits
        for s in range(self.cfg.segments):
            b = int(node.bits[s])
            if b < self.cfg.max_bits and b < best_bits:
                best, best_bits = s, b
        return best

    def _split(self, node: IndexNode) -> None:
        pending = [node]
        while pending:
            cur = pending.pop()
            if len(cur.ids) <= self.cfg.leaf_capacity or cur.overflow:
                continue
            ids = np.asarray(cur.ids, dtype=np.int64)
            entry_words = self.words[ids]
            if np.all(entry_words == entry_words[0]):
                cur.overflow = True  # identical full words: never splittable
                continue
            s = self._pick_split_segment(cur)
            if s < 0:
                cur.overflow = True
                continue
            child_bits = int(cur.bits[s]) + 1
            bitvals = (entry_words[:, s] >> (self.cfg.max_bits - child_bits)) & 1
            children = []
            for b in (0, 1):
                syms = cur.syms.copy()
                syms[s] = (int(cur.syms[s]) << 1) | b
                bits = cur.bits.copy()
                bits[s] = child_bits
                child = IndexNode(syms, bits)
                child.ids = [int(i) for i in ids[bitvals == b]]
                children.append(child)
            cur.kind = INNER
            cur.split_seg = s
            cur.children = children
            cur.ids = None
            pending.extend(children)

    def _walk(self):
        """Pre-order traversal over sorted root branches."""
        for key in sorted(self.root):
            stack = [self.root[key]]
            while stack:
                node = stack.pop()
                yield node
                if node.kind == INNER:
                    stack.append(node.children[1])
                    stack.append(node.children[0])

    def _seal(self) -> None:
        self.leaves = [n for n in self._walk() if n.kind == LEAF]
        for leaf in self.leaves:
            leaf.ids = np.asarray(leaf.ids, dtype=np.int64)
        w = self.cfg.segments
        n_leaves = len(self.leaves)
        self.leaf_syms = np.zeros((n_leaves, w), dtype=np.intp)
        self.leaf_bits = np.zeros((n_leaves, w), dtype=np.intp)
        self.leaf_min_ids = np.full(n_leaves, 2**62, dtype=np.int64)
        for i, leaf in enumerate(self.leaves):
            self.leaf_syms[i] = leaf.syms
            self.leaf_bits[i] = leaf.bits
            if leaf.ids.size:
                self.leaf_min_ids[i] = leaf.ids[0]

    # -- query-side helpers --------------------------------------------

    def home_leaf(self, word_row: np.ndarray) -> IndexNode | None:
        node = self.root.get(self._branch_key(word_row))
        while node is not None and node.kind == INNER:
            child_bits = int(node.children[0].bits[node.split_seg])
            bit = (int(word_row[node.split_seg]) >> (self.cfg.max_bits - child_bits)) & 1
            node = node.children[bit]
        return node

    def leaf_lower_bounds(self, measure: str, paa_q=None, env_intervals=None) -> np.ndarray:
        if measure == distance.L2_SQUARED:
            return summarize.mindist_paa_block(
                paa_q, self.leaf_syms, self.leaf_bits, self.seg_lengths
            )
        return summarize.mindist_dtw_block(
            env_intervals, self.leaf_syms, self.leaf_bits, self.seg_lengths
        )

    def entry_lower_bounds(self, ids, measure: str, paa_q=None, env_intervals=None):
        """Word-level lower bounds for individual entries (full cardinality)."""
        syms = self.words[ids].astype(np.intp)
        bits = self.cfg.max_bits
        if measure == distance.L2_SQUARED:
            return summarize.mindist_paa_block(paa_q, syms, bits, self.seg_lengths)
        return summarize.mindist_dtw_block(env_intervals, syms, bits, self.seg_lengths)

    def audit(self) -> None:
        """Verify partition, mask-prefix and capacity invariants; raises on failure."""
        seen = np.zeros(self.count, dtype=bool)
        for node in self._walk():
            if node.kind != LEAF:
                continue
            if len(node.ids) > self.cfg.leaf_capacity and not node.overflow:
                raise AssertionError("leaf over capacity without overflow flag")
            for sid in node.ids:
                if seen[sid]:
                    raise AssertionError(f"series {sid} in more than one leaf")
                seen[sid] = True
                word = self.words[sid]
                shift = self.cfg.max_bits - node.bits
                if np.any((word >> shift) != node.syms):
                    raise AssertionError(f"series {sid} violates its leaf mask")
        if not np.all(seen):
            missing = int(np.where(~seen)[0][0])
            raise AssertionError(f"series {missing} missing from every leaf")


def build_index(handle: DatasetHandle, cfg: IndexConfig) -> Index:
    """Bulk-build an index over every series of the dataset."""
    cfg.validate()
    if cfg.normalize != handle.normalized:
        raise ParameterError(
            "index normalize flag must match the dataset handle "
            f"(cfg.normalize={cfg.normalize}, handle.normalized={handle.normalized})"
        )
    if cfg.segments > handle.dim:
        raise ParameterError(
            f"segments ({cfg.segments}) cannot exceed series length ({handle.dim})"
        )
    idx = Index(cfg, handle.dim, handle.count)
    for start, block in handle.iter_blocks():
        idx.words[start : start + block.shape[0]] = summarize.words_block(
            block, cfg.segments, cfg.max_bits
        )
    for sid in range(handle.count):
        idx._insert(sid)
    idx._seal()
    if handle.path is not None:
        idx.raw_path = handle.path
        idx.raw_crc = _file_crc32(handle.path)
    return idx


# -- persistence -------------------------------------------------------


def _file_crc32(path, chunk_bytes: int = 1 << 20) -> int:
    crc = 0
    with open(path, "rb") as fh:
        while True:
            chunk = fh.read(chunk_bytes)
            if not chunk:
                break
            crc = zlib.crc32(chunk, crc)
    return crc


def _write_node(out: io.BytesIO, node: IndexNode, w: int) -> None:
    out.write(struct.pack("<B", node.kind))
    out.write(node.syms.astype("<u1").tobytes())
    out.write(node.bits.astype("<u1").tobytes())
    if node.kind == INNER:
        out.write(struct.pack("<B", node.split_seg))
        _write_node(out, node.children[0], w)
        _write_node(out, node.children[1], w)
    else:
        ids = np.asarray(node.ids, dtype="<u8")
        out.write(struct.pack("<IB", ids.size, 1 if node.overflow else 0))
        out.write(ids.tobytes())


def serialize(index: Index) -> bytes:
    """Persist to the versioned little-endian binary layout (see README)."""
    cfg = index.cfg
    raw_path = (index.raw_path or "").encode("utf-8")
    header = struct.pack(
        "<IQIIIBBBB",
        index.dim,
        index.count,
        cfg.segments,
        cfg.max_bits,
        cfg.leaf_capacity,
        _STORAGE_CODES[cfg.storage_mode],
        1 if cfg.normalize else 0,
        _DISTANCE_CODES[cfg.distance],
        0,
    )
    header += struct.pack("<H", len(raw_path)) + raw_path
    header += struct.pack("<I", index.raw_crc)
    out = io.BytesIO()
    out.write(_MAGIC)
    out.write(struct.pack("<I", _VERSION))
    out.write(struct.pack("<I", zlib.crc32(header)))
    out.write(header)
    out.write(struct.pack("<I", len(index.root)))
    for key in sorted(index.root):
        out.write(struct.pack("<Q", key))
        _write_node(out, index.root[key], cfg.segments)
    # entry words are stored once as the flat word matrix
    out.write(index.words.astype("<u1").tobytes())
    return out.getvalue()


class _Reader:
    def __init__(self, blob: bytes):
        self.blob = blob
        self.pos = 0

    def take(self, n: int) -> bytes:
        if self.pos + n > len(self.blob):
            raise TruncatedIndexError(
                f"index stream ended at byte {len(self.blob)}, "
                f"needed {self.pos + n}"
            )
        chunk = self.blob[self.pos : self.pos + n]
        self.pos += n
        return chunk

    def unpack(self, fmt: str):
        return struct.unpack(fmt, self.take(struct.calcsize(fmt)))


def _read_node(rd: _Reader, w: int) -> IndexNode:
    (kind,) = rd.unpack("<B")
    syms = np.frombuffer(rd.take(w), dtype="<u1").copy()
    bits = np.frombuffer(rd.take(w), dtype="<u1").copy()
    node = IndexNode(syms, bits)
    if kind == INNER:
        node.kind = INNER
        node.ids = None
        (node.split_seg,) = rd.unpack("<B")
        node.children = [_read_node(rd, w), _read_node(rd, w)]
    elif kind == LEAF:
        count, overflow = rd.unpack("<IB")
        node.overflow = bool(overflow)
        node.ids = list(np.frombuffer(rd.take(8 * count), dtype="<u8").astype(np.int64))
    else:
        raise VersionMismatchError(f"unknown node kind {kind}")
    return node


def deserialize(blob: bytes, handle: DatasetHandle) -> Index:
    """Rebuild an index from bytes; validates header and raw-data checksum."""
    rd = _Reader(blob)
    if rd.take(len(_MAGIC)) != _MAGIC:
        raise VersionMismatchError("bad magic: not a serieskit index stream")
    (version,) = rd.unpack("<I")
    if version != _VERSION:
        raise VersionMismatchError(f"unsupported index version {version}")
    (header_crc,) = rd.unpack("<I")
    header_start = rd.pos
    dim, count, segments, max_bits, leaf_capacity, storage, normalize, dist, _pad = rd.unpack(
        "<IQIIIBBBB"
    )
    (path_len,) = rd.unpack("<H")
    raw_path = rd.take(path_len).decode("utf-8")
    (raw_crc,) = rd.unpack("<I")
    if zlib.crc32(blob[header_start : rd.pos]) != header_crc:
        raise ChecksumMismatchError("index header checksum mismatch")

    storage_mode = {v: k for k, v in _STORAGE_CODES.items()}[storage]
    dist_kind = {v: k for k, v in _DISTANCE_CODES.items()}[dist]
    cfg = IndexConfig(
        segments=segments,
        max_bits=max_bits,
        leaf_capacity=leaf_capacity,
        storage_mode=storage_mode,
        normalize=bool(normalize),
        distance=dist_kind,
    )
    if handle.dim != dim or handle.count != count:
        raise ParameterError(
            f"dataset shape ({handle.count}, {handle.dim}) does not match "
            f"index header ({count}, {dim})"
        )
    idx = Index(cfg, dim, count)
    idx.raw_path = raw_path or None
    idx.raw_crc = raw_crc
    (n_branches,) = rd.unpack("<I")
    for _ in range(n_branches):
        (key,) = rd.unpack("<Q")
        idx.root[key] = _read_node(rd, segments)
    idx.words = (
        np.frombuffer(rd.take(count * segments), dtype="<u1")
        .reshape(count, segments)
        .copy()
    )
    idx._seal()
    if idx.raw_path:
        verify_raw_data(idx)
    return idx


def verify_raw_data(index: Index) -> None:
    """Check the referenced raw file is present and unmodified."""
    if not index.raw_path:
        return
    if not os.path.exists(index.raw_path):
        raise IntegrityError(f"raw data file missing: {index.raw_path}")
    crc = _file_crc32(index.raw_path)
    if crc != index.raw_crc:
        raise IntegrityError(
            f"raw data checksum mismatch for {index.raw_path}: "
            f"expected {index.raw_crc:#010x}, got {crc:#010x}"
        )
