"""Versioned binary persistence for built oracles.

Layout of an oracle file:

    magic ``FDSO`` (4 bytes) | format version (u32 LE) | header length
    (u64 LE) | canonical JSON header | raw array section | sha256 digest
    (32 bytes) of everything before it.

The header is JSON with sorted keys and no whitespace, so identical
oracles produce identical bytes.  It holds every scalar field plus one
descriptor (dtype, shape) per stored array; the array section contains
the arrays' little-endian bytes in descriptor order.  Derived state is
not stored: the CSR adjacency, canonical path keys, the all-pairs
table, and the lazy tree caches are rebuilt on load from the persisted
graph, so a loaded oracle answers exactly like the one that was saved.
Audit-only instrumentation (full edge sets on instrumented forest
builds) is not persisted.
"""

from __future__ import annotations

import hashlib
import json
import math
from pathlib import Path

import numpy as np

from .dso import (
    DSO,
    BallIndex,
    DenseMarker,
    DsoParams,
    SparseRecord,
    _enumerate_leaves,
)
from .forest import ForestParams, SamplingForest, SamplingNode, SamplingTree
from .fttree import PivotSets
from .graphs import Graph, apsp
from .tz import LevelHierarchy, TZOracle

MAGIC = b"FDSO"
FORMAT_VERSION = 1
_DIGEST_BYTES = 32


class OracleFormatError(ValueError):
    """The file is not a readable oracle archive of this version."""


# ---------------------------------------------------------------------------
# array store


class _ArrayStore:
    """Collects arrays in call order; the header records dtype and shape."""

    def __init__(self):
        self.specs: list[dict] = []
        self.blobs: list[np.ndarray] = []

    def put(self, arr: np.ndarray, dtype: str) -> int:
        a = np.ascontiguousarray(np.asarray(arr), dtype=np.dtype(dtype))
        self.specs.append({"dtype": dtype, "shape": list(a.shape)})
        self.blobs.append(a)
        return len(self.specs) - 1


class _ArrayLoad:
    """Resolves header descriptors against the raw array section."""

    def __init__(self, data: bytes, specs: list[dict], start: int, end: int):
        self._arrays: list[np.ndarray] = []
        pos = start
        for spec in specs:
            try:
                dt = np.dtype(spec["dtype"])
                shape = [int(x) for x in spec["shape"]]
            except (TypeError, KeyError) as exc:
                raise OracleFormatError("malformed array descriptor") from exc
            if any(x < 0 for x in shape):
                raise OracleFormatError("malformed array descriptor")
            count = math.prod(shape)
            nbytes = count * dt.itemsize
            if pos + nbytes > end:
                raise OracleFormatError("array section truncated")
            a = np.frombuffer(data, dt, count, pos).reshape(shape).copy()
            self._arrays.append(a)
            pos += nbytes
        if pos != end:
            raise OracleFormatError("trailing bytes in array section")

    def get(self, idx: int) -> np.ndarray:
        return self._arrays[idx]


# ---------------------------------------------------------------------------
# per-structure packing

# Ball records pack into one CSR over (leaf, vertex) slots in row-major
# order: a sparse record contributes its whole pivot tuple, a dense one
# a single value holding the marker pivot (possibly -1), and the kind
# byte disambiguates the two on the way back.


def _pack_balls(store: _ArrayStore, balls: BallIndex) -> dict:
    kinds: list[int] = []
    offsets: list[int] = [0]
    values: list[int] = []
    for row in balls.records:
        for rec in row:
            if rec.dense:
                kinds.append(1)
                values.append(int(rec.pivot))
            else:
                kinds.append(0)
                values.extend(int(b) for b in rec.pivots)
            offsets.append(len(values))
    return {
        "lam": int(balls.lam),
        "cap": int(balls.cap),
        "rows": len(balls.records),
        "kinds": store.put(np.asarray(kinds, np.uint8), "<u1"),
        "offsets": store.put(np.asarray(offsets, np.int64), "<i8"),
        "values": store.put(np.asarray(values, np.int32), "<i4"),
    }


def _unpack_balls(ar: _ArrayLoad, spec: dict, n: int) -> BallIndex:
    kinds = ar.get(spec["kinds"])
    offsets = ar.get(spec["offsets"])
    values = ar.get(spec["values"])
    rows = int(spec["rows"])
    if kinds.shape[0] != rows * n or offsets.shape[0] != rows * n + 1:
        raise OracleFormatError("ball index shape mismatch")
    records: list[list[SparseRecord | DenseMarker]] = []
    slot = 0
    for _ in range(rows):
        row: list[SparseRecord | DenseMarker] = []
        for _ in range(n):
            lo, hi = int(offsets[slot]), int(offsets[slot + 1])
            if kinds[slot]:
                if hi - lo != 1:
                    raise OracleFormatError("dense ball record malformed")
                row.append(DenseMarker(pivot=int(values[lo])))
            else:
                row.append(SparseRecord(
                    pivots=tuple(int(x) for x in values[lo:hi])))
            slot += 1
        records.append(row)
    return BallIndex(lam=int(spec["lam"]), cap=int(spec["cap"]),
                     records=records)


def _pack_tree(store: _ArrayStore, tree: SamplingTree) -> dict:
    nodes: list[dict] = []

    def visit(node: SamplingNode, parent_pos: int) -> None:
        pos = len(nodes)
        entry: dict = {
            "p": parent_pos,
            "e": store.put(node.edges, "<i4"),
            "s": (None if node.sampled is None
                  else store.put(node.sampled, "<i4")),
            "o": None,
        }
        if node.oracle is not None:
            o = node.oracle
            entry["o"] = {
                "ptab": store.put(o.ptab, "<i4"),
                "pdist": store.put(o.pdist, "<i8"),
                "boff": store.put(o.boff, "<i8"),
                "bxs": store.put(o.bxs, "<i4"),
                "bds": store.put(o.bds, "<i8"),
            }
        nodes.append(entry)
        for child in node.children:
            visit(child, pos)

    visit(tree.root, -1)
    return {"index": int(tree.index), "nodes": nodes}


def _unpack_tree(ar: _ArrayLoad, spec: dict, k: int, n: int) -> SamplingTree:
    nodes: list[SamplingNode] = []
    for entry in spec["nodes"]:
        p = int(entry["p"])
        parent = nodes[p] if p >= 0 else None
        node = SamplingNode(
            depth=0 if parent is None else parent.depth + 1,
            edges=ar.get(entry["e"]),
            sampled=None if entry["s"] is None else ar.get(entry["s"]),
            parent=parent)
        if entry["o"] is not None:
            o = entry["o"]
            node.oracle = TZOracle(k=k, n=n,
                                   ptab=ar.get(o["ptab"]),
                                   pdist=ar.get(o["pdist"]),
                                   boff=ar.get(o["boff"]),
                                   bxs=ar.get(o["bxs"]),
                                   bds=ar.get(o["bds"]))
        if parent is not None:
            parent.children.append(node)
        nodes.append(node)
    if not nodes:
        raise OracleFormatError("empty tree record")
    return SamplingTree(index=int(spec["index"]), root=nodes[0])


# ---------------------------------------------------------------------------
# public API


def save_oracle(dso: DSO, path: str | Path) -> str:
    """Write the oracle to path; returns the file's sha256 hex digest.

    Identical oracles (same graph, parameters, and build seed) produce
    byte-identical files: the header is canonical JSON and the arrays
    follow in a deterministic walk order.
    """
    store = _ArrayStore()
    g = dso.g
    fp = dso.forest.params
    meta = {
        "kind": "oracle",
        "seed": int(dso.seed),
        "short_circuit": bool(dso.short_circuit),
        "params": {
            "n": dso.params.n, "f": dso.params.f,
            "alpha": dso.params.alpha, "eps": dso.params.eps,
            "spread": dso.params.spread, "L": dso.params.L,
            "lam": dso.params.lam, "gran_slack": dso.params.gran_slack,
            "k": dso.params.k,
        },
        "graph": {
            "n": int(g.n),
            "eu": store.put(g.eu, "<i4"),
            "ev": store.put(g.ev, "<i4"),
            "wt": store.put(g.wt, "<i8"),
        },
        "hier": {
            "k": int(dso.forest.hier.k),
            "n": int(dso.forest.hier.n),
            "level": store.put(dso.forest.hier.level, "<i1"),
            "seed": dso.forest.hier.seed,
        },
        "forest": {
            "params": {
                "n": fp.n, "L": fp.L, "f": fp.f, "k": fp.k, "C": fp.C,
                "h": fp.h, "K": fp.K, "p": fp.p, "I": fp.I,
                "J": list(fp.J),
            },
            "seed": int(dso.forest.seed),
            "stats": dso.forest.build_stats,
            "trees": [_pack_tree(store, t) for t in dso.forest.trees],
        },
        "pivots": {
            "hit": store.put(dso.pivots.hit_mask, "<u1"),
            "ball": store.put(dso.pivots.ball_mask, "<u1"),
            "hit_prob": float(dso.pivots.hit_prob),
            "ball_prob": float(dso.pivots.ball_prob),
            "seed": int(dso.pivots.seed),
        },
        "balls": _pack_balls(store, dso.balls),
    }
    header = json.dumps({"format": FORMAT_VERSION, "meta": meta,
                         "arrays": store.specs},
                        sort_keys=True, separators=(",", ":")).encode()
    digest = hashlib.sha256()
    with open(path, "wb") as fh:
        for chunk in (MAGIC, FORMAT_VERSION.to_bytes(4, "little"),
                      len(header).to_bytes(8, "little"), header):
            digest.update(chunk)
            fh.write(chunk)
        for blob in store.blobs:
            raw = blob.tobytes()
            digest.update(raw)
            fh.write(raw)
        fh.write(digest.digest())
    return digest.hexdigest()


def _checked_parts(data: bytes) -> tuple[dict, int]:
    """Validate framing and checksum; returns (header dict, array start)."""
    floor = len(MAGIC) + 4 + 8 + _DIGEST_BYTES
    if len(data) < floor:
        raise OracleFormatError("file too short to be an oracle archive")
    if data[:4] != MAGIC:
        raise OracleFormatError("bad magic; not an oracle archive")
    version = int.from_bytes(data[4:8], "little")
    if version != FORMAT_VERSION:
        raise OracleFormatError(
            f"format version {version} not supported (expected "
            f"{FORMAT_VERSION})")
    hlen = int.from_bytes(data[8:16], "little")
    body_end = len(data) - _DIGEST_BYTES
    if 16 + hlen > body_end:
        raise OracleFormatError("header length exceeds file size")
    if hashlib.sha256(data[:body_end]).digest() != data[body_end:]:
        raise OracleFormatError("checksum mismatch; file is corrupt")
    try:
        header = json.loads(data[16:16 + hlen])
    except ValueError as exc:
        raise OracleFormatError("header is not valid JSON") from exc
    if not isinstance(header, dict) or header.get("format") != FORMAT_VERSION:
        raise OracleFormatError("header missing format marker")
    return header, 16 + hlen


def read_header(path: str | Path) -> dict:
    """Checksum-verify the file and return its header plus the digest."""
    data = Path(path).read_bytes()
    header, _ = _checked_parts(data)
    header["checksum"] = hashlib.sha256(
        data[:len(data) - _DIGEST_BYTES]).hexdigest()
    return header


def load_oracle(path: str | Path) -> DSO:
    """Rebuild a queryable oracle from a file written by save_oracle.

    The all-pairs table and tree caches are recomputed, so answers match
    the saved oracle exactly; only build-time instrumentation is gone.
    """
    data = Path(path).read_bytes()
    header, start = _checked_parts(data)
    try:
        meta = header["meta"]
        ar = _ArrayLoad(data, header["arrays"], start,
                        len(data) - _DIGEST_BYTES)
        gm = meta["graph"]
        eu, ev = ar.get(gm["eu"]), ar.get(gm["ev"])
        g = Graph.from_edges(int(gm["n"]),
                             list(zip(eu.tolist(), ev.tolist())),
                             weights=ar.get(gm["wt"]))
        params = DsoParams(**meta["params"])
        hm = meta["hier"]
        hier = LevelHierarchy(k=int(hm["k"]), n=int(hm["n"]),
                              level=ar.get(hm["level"]), seed=hm["seed"])
        fm = meta["forest"]
        fpd = dict(fm["params"])
        fpd["J"] = tuple(int(x) for x in fpd["J"])
        forest = SamplingForest(
            params=ForestParams(**fpd), hier=hier,
            trees=[_unpack_tree(ar, t, hier.k, g.n) for t in fm["trees"]],
            seed=int(fm["seed"]), build_stats=dict(fm["stats"]))
        pm = meta["pivots"]
        pivots = PivotSets(hit_mask=ar.get(pm["hit"]),
                           ball_mask=ar.get(pm["ball"]),
                           hit_prob=float(pm["hit_prob"]),
                           ball_prob=float(pm["ball_prob"]),
                           seed=int(pm["seed"]))
        balls = _unpack_balls(ar, meta["balls"], g.n)
        seed = int(meta["seed"])
        short_circuit = bool(meta["short_circuit"])
    except (KeyError, IndexError, TypeError) as exc:
        raise OracleFormatError("header is structurally invalid") from exc
    return DSO(g, params, seed, forest, pivots, balls, apsp(g),
               _enumerate_leaves(forest), short_circuit=short_circuit)
