"""Shortest decomposable paths and expaths over layered search graphs.

A path is decomposable at budget b when it has the shape sp (edge? sp)
repeated up to b times: at most b+1 canonical shortest paths of the host
graph interleaved with at most b single edges, all surviving the banned
edge set.  An expath is a sequence
of 2c+1 such blocks whose lengths obey caps that grow then shrink as
powers of two (c is the log of the largest possible distance); with
granularity the expath may also carry a short prefix and suffix walk.

The search runs a modified Dijkstra over layered copies of the graph:
advancing a layer starts a new block piece (optionally through a single
connecting edge), while staying inside a layer is allowed only when the
piece remains the canonical shortest path of the intact graph, checked
exactly with the two-lane edge key sums.  Expaths add one phase per block
that also caps the block weight.  Everything here is exact integer
arithmetic; no randomness.
"""

from __future__ import annotations

import heapq
import math
from dataclasses import dataclass

import numpy as np

from . import _kernels as _k
from .graphs import INF, INF32, APSPTable, FailureSet, Graph, sig_add

# Route layered runs through the compiled kernel by default; the pure
# Python twin stays as the cross-checked reference and can be forced
# per call with fast=False.
DEFAULT_FAST = True


def _as_mask(g: Graph, banned) -> np.ndarray:
    if banned is None:
        return g.no_mask()
    if isinstance(banned, FailureSet):
        return banned.mask(g)
    arr = np.asarray(banned, np.uint8)
    if arr.shape != (g.m,):
        raise ValueError("banned mask must have one entry per edge")
    return arr


@dataclass(frozen=True)
class DecompParams:
    """Block budget and block-length caps for expaths on one host graph."""

    ell: int
    cap_exp: int  # distances never exceed 2**cap_exp

    @property
    def block_count(self) -> int:
        return 2 * self.cap_exp + 1

    def delta(self, j: int) -> int:
        return min(1 << j, 1 << (2 * self.cap_exp - j))

    @staticmethod
    def for_graph(g: Graph, ell: int) -> "DecompParams":
        if ell < 1:
            raise ValueError("block budget ell must be positive")
        bound = max(2, g.n * g.max_weight)
        return DecompParams(ell=ell, cap_exp=math.ceil(math.log2(bound)))


@dataclass(frozen=True)
class Block:
    """One expath block: canonical-shortest-path and single-edge pieces.

    Pieces are ("sp", x, y) for the canonical x-y path of the intact graph
    or ("edge", u, v) for one surviving edge, chained end to end.
    """

    pieces: tuple[tuple, ...]
    weight: int


@dataclass(frozen=True)
class ExpathStructure:
    source: int
    target: int
    prefix: tuple[int, ...]      # vertex walk, at most lam edges
    blocks: tuple[Block, ...]
    suffix: tuple[int, ...]      # vertex walk, at most lam edges
    total: int

    def expand(self, apsp_t: APSPTable) -> list[int]:
        """Full vertex walk realized by the structure."""
        walk = list(self.prefix)
        for block in self.blocks:
            for piece in block.pieces:
                if piece[0] == "sp":
                    walk.extend(apsp_t.path(piece[1], piece[2])[1:])
                else:
                    walk.append(piece[2])
        walk.extend(self.suffix[1:])
        return walk


def _empty_structure(s: int, t: int) -> ExpathStructure:
    return ExpathStructure(source=s, target=t, prefix=(), blocks=(),
                           suffix=(), total=INF)


# ---------------------------------------------------------------------------
# layered modified Dijkstra
# ---------------------------------------------------------------------------

_FROM_SOURCE = 0
_SAME_VERTEX = 1
_CROSS_EDGE = 2
_WITHIN_LAYER = 3


class _LayerRun:
    """State arrays of one layered search; states are layer * n + vertex."""

    __slots__ = ("layers", "n", "dist", "relhi", "rello", "entry",
                 "entry_dist", "block_start_dist", "parent", "pkind", "peid")

    def __init__(self, layers: int, n: int):
        size = layers * n
        self.layers = layers
        self.n = n
        self.dist = np.full(size, INF, np.int64)
        self.relhi = np.zeros(size, np.int64)
        self.rello = np.zeros(size, np.int64)
        self.entry = np.full(size, -1, np.int32)
        self.entry_dist = np.zeros(size, np.int64)
        self.block_start_dist = np.zeros(size, np.int64)
        self.parent = np.full(size, -1, np.int64)
        self.pkind = np.full(size, _FROM_SOURCE, np.int8)
        self.peid = np.full(size, -1, np.int32)

    def layer_dist(self, j: int) -> np.ndarray:
        return self.dist[j * self.n:(j + 1) * self.n]


def _run_layered(g: Graph, apsp_t: APSPTable, amask: np.ndarray,
                 layers: int, seeds, cap: int | None) -> _LayerRun:
    """Search layered copies of G - amask from virtual-source seeds.

    seeds yields (vertex, start_distance) pairs entering layer 0.  When
    cap is not None the total weight accumulated since the seed (the block
    length) may never exceed it.  Within a layer every extension must keep
    the piece equal to the canonical shortest path of the intact graph
    from its layer-entry vertex, enforced on both weight and key lanes.
    """
    n = g.n
    run = _LayerRun(layers, n)
    dist = run.dist
    popped = np.zeros(layers * n, dtype=bool)
    heap: list[tuple[int, int]] = []
    for v, d0 in seeds:
        if d0 >= INF:
            continue
        sid = v  # layer 0
        if d0 < dist[sid]:
            dist[sid] = d0
            run.entry[sid] = v
            run.entry_dist[sid] = d0
            run.block_start_dist[sid] = d0
            heapq.heappush(heap, (int(d0), sid))
    indptr, nbrs, eidxs, wts = g.indptr, g.nbr, g.eidx, g.wt
    khi, klo = g.key_hi, g.key_lo
    adist, ahi, alo = apsp_t.dist, apsp_t.sig_hi, apsp_t.sig_lo
    while heap:
        d, sid = heapq.heappop(heap)
        if d != dist[sid]:
            continue
        if popped[sid]:
            continue
        popped[sid] = True
        j, u = divmod(sid, n)
        bstart = int(run.block_start_dist[sid])
        if cap is not None and d - bstart > cap:
            continue
        if j + 1 < layers:
            # start a new piece on the same vertex in the next layer
            nid = sid + n
            fresher = (d == dist[nid] and not popped[nid]
                       and bstart >= run.block_start_dist[nid]
                       and (run.entry[nid] != u
                            or bstart > run.block_start_dist[nid]))
            if d < dist[nid] or fresher:
                dist[nid] = d
                run.relhi[nid] = 0
                run.rello[nid] = 0
                run.entry[nid] = u
                run.entry_dist[nid] = d
                run.block_start_dist[nid] = bstart
                run.parent[nid] = sid
                run.pkind[nid] = _SAME_VERTEX
                run.peid[nid] = -1
                heapq.heappush(heap, (d, nid))
        x = int(run.entry[sid])
        xdist = int(run.entry_dist[sid])
        rhi = int(run.relhi[sid])
        rlo = int(run.rello[sid])
        for it in range(int(indptr[u]), int(indptr[u + 1])):
            e = int(eidxs[it])
            if amask[e]:
                continue
            v = int(nbrs[it])
            w = int(wts[e])
            nd = d + w
            if cap is not None and nd - bstart > cap:
                continue
            if j + 1 < layers:
                # cross into the next layer through this single edge
                nid = (j + 1) * n + v
                fresher = (nd == dist[nid] and not popped[nid]
                           and bstart >= run.block_start_dist[nid]
                           and (run.entry[nid] != v
                                or bstart > run.block_start_dist[nid]))
                if nd < dist[nid] or fresher:
                    dist[nid] = nd
                    run.relhi[nid] = 0
                    run.rello[nid] = 0
                    run.entry[nid] = v
                    run.entry_dist[nid] = nd
                    run.block_start_dist[nid] = bstart
                    run.parent[nid] = sid
                    run.pkind[nid] = _CROSS_EDGE
                    run.peid[nid] = e
                    heapq.heappush(heap, (nd, nid))
            # stay within the layer: the piece must stay canonical in G
            nid = j * n + v
            if nd < dist[nid]:
                if nd - xdist != int(adist[x, v]):
                    continue
                nhi, nlo = sig_add(rhi, rlo, int(khi[e]), int(klo[e]))
                if nhi != int(ahi[x, v]) or nlo != int(alo[x, v]):
                    continue
                dist[nid] = nd
                run.relhi[nid] = nhi
                run.rello[nid] = nlo
                run.entry[nid] = x
                run.entry_dist[nid] = xdist
                run.block_start_dist[nid] = bstart
                run.parent[nid] = sid
                run.pkind[nid] = _WITHIN_LAYER
                run.peid[nid] = e
                heapq.heappush(heap, (nd, nid))
    return run


def _dense_seeds(n: int, seeds) -> np.ndarray:
    seed_d = np.full(n, INF, np.int64)
    for v, d in seeds:
        if d < seed_d[v]:
            seed_d[v] = d
    return seed_d


def _wrap_run(layers: int, n: int, arrays) -> _LayerRun:
    run = _LayerRun.__new__(_LayerRun)
    run.layers = layers
    run.n = n
    (run.dist, run.relhi, run.rello, run.entry, run.entry_dist,
     run.block_start_dist, run.parent, run.pkind, run.peid) = arrays
    return run


def _run_layered_fast(g: Graph, apsp_t: APSPTable, amask: np.ndarray,
                      layers: int, seeds, cap: int | None) -> _LayerRun:
    """Compiled twin of :func:`_run_layered`; same arrays, same answers."""
    out = _k.expath_layered(g.n, g.indptr, g.nbr, g.eidx, g.wt,
                            g.key_hi, g.key_lo, amask,
                            apsp_t.dist, apsp_t.sig_hi, apsp_t.sig_lo,
                            layers, _dense_seeds(g.n, seeds),
                            -1 if cap is None else int(cap))
    return _wrap_run(layers, g.n, out)


def _layered(g: Graph, apsp_t: APSPTable, amask: np.ndarray, layers: int,
             seeds, cap: int | None, fast: bool | None) -> _LayerRun:
    use = DEFAULT_FAST if fast is None else fast
    if use:
        return _run_layered_fast(g, apsp_t, amask, layers, seeds, cap)
    return _run_layered(g, apsp_t, amask, layers, seeds, cap)


def decomposable_sssp(g: Graph, apsp_t: APSPTable, banned, s: int,
                      ell: int, fast: bool | None = None) -> np.ndarray:
    """Weights of the best decomposable paths from s at piece budget ell.

    Entry v holds the minimum weight over paths of the shape sp (edge? sp)
    repeated up to ell times, where every sp piece is a canonical shortest
    path of G (possibly trivial), every piece avoids the banned set, and
    at most ell single edges interleave the sps.  INF if none exists.
    """
    if ell < 0:
        raise ValueError("ell must be non-negative")
    amask = _as_mask(g, banned)
    run = _layered(g, apsp_t, amask, ell + 1, [(s, 0)], None, fast)
    return run.layer_dist(ell).copy()


def _block_from_run(run: _LayerRun, g: Graph, end_sid: int):
    """Decode the block walked into end_sid; returns (pieces, seed_vertex)."""
    n = run.n
    steps = []
    sid = end_sid
    while True:
        kind = int(run.pkind[sid])
        if kind == _FROM_SOURCE:
            break
        steps.append((kind, int(run.peid[sid]), sid))
        sid = int(run.parent[sid])
    seed_vertex = sid % n
    steps.reverse()
    pieces: list[tuple] = []
    run_start = seed_vertex
    cur = seed_vertex
    for kind, eid, sid in steps:
        v = sid % n
        if kind == _WITHIN_LAYER:
            cur = v
            continue
        if run_start != cur:
            pieces.append(("sp", run_start, cur))
        if kind == _CROSS_EDGE:
            pieces.append(("edge", cur, v))
        run_start = v
        cur = v
    if run_start != cur:
        pieces.append(("sp", run_start, cur))
    return pieces, seed_vertex


class _HopPaths:
    """Minimum-weight paths with a bounded edge count, with reconstruction."""

    def __init__(self, g: Graph, src: int, hops: int, amask: np.ndarray):
        self.src = src
        n = g.n
        dist = np.full(n, INF, np.int64)
        dist[src] = 0
        rounds: list[np.ndarray] = [dist.copy()]
        parents: list[np.ndarray] = []
        for _ in range(hops):
            prev = rounds[-1]
            cur = prev.copy()
            par = np.full(n, -1, np.int32)
            for u in range(n):
                du = int(prev[u])
                if du >= INF:
                    continue
                for it in range(int(g.indptr[u]), int(g.indptr[u + 1])):
                    e = int(g.eidx[it])
                    if amask[e]:
                        continue
                    v = int(g.nbr[it])
                    nd = du + int(g.wt[e])
                    if nd < cur[v]:
                        cur[v] = nd
                        par[v] = u
            rounds.append(cur)
            parents.append(par)
        self.rounds = rounds
        self.parents = parents
        self.dist = rounds[-1]

    def path(self, v: int) -> list[int]:
        """Vertex walk src..v with at most len(parents) edges."""
        r = len(self.rounds) - 1
        out = [v]
        while r > 0:
            if self.rounds[r - 1][v] == self.rounds[r][v]:
                r -= 1
                continue
            v = int(self.parents[r - 1][v])
            out.append(v)
            r -= 1
        out.reverse()
        return out


def shortest_expath(g: Graph, apsp_t: APSPTable, banned, s: int, t: int,
                    ell: int, lam: int = 0,
                    fast: bool | None = None) -> tuple[int, ExpathStructure]:
    """Shortest expath from s to t in the surviving graph, with structure.

    Runs one capped layered search per block, feeding each block's arrival
    distances to the next as virtual-source weights.  With lam > 0 the
    first block is seeded by lam-hop-bounded distances from s and the
    answer closes with lam-hop-bounded distances to t.
    """
    if lam < 0:
        raise ValueError("granularity must be non-negative")
    params = DecompParams.for_graph(g, ell)
    if s == t:
        return 0, ExpathStructure(source=s, target=t, prefix=(s,),
                                  blocks=(), suffix=(t,), total=0)
    amask = _as_mask(g, banned)
    layers = ell + 1
    pre: _HopPaths | None = None
    if lam > 0:
        pre = _HopPaths(g, s, lam, amask)
        seed_d = pre.dist
    else:
        seed_d = np.full(g.n, INF, np.int64)
        seed_d[s] = 0
    use_fast = DEFAULT_FAST if fast is None else fast
    if use_fast:
        caps = np.fromiter(
            (params.delta(i) for i in range(params.block_count)),
            np.int64, params.block_count)
        out = _k.expath_blocks(g.n, g.indptr, g.nbr, g.eidx, g.wt,
                               g.key_hi, g.key_lo, amask,
                               apsp_t.dist, apsp_t.sig_hi, apsp_t.sig_lo,
                               layers, seed_d, caps)
        runs = [_wrap_run(layers, g.n, tuple(a[b] for a in out))
                for b in range(params.block_count)]
    else:
        seeds = [(v, int(seed_d[v])) for v in range(g.n) if seed_d[v] < INF]
        runs = []
        for i in range(params.block_count):
            run = _run_layered(g, apsp_t, amask, layers, seeds,
                               params.delta(i))
            runs.append(run)
            arrived = run.layer_dist(layers - 1)
            seeds = [(v, int(arrived[v])) for v in range(g.n)
                     if arrived[v] < INF]
    final = runs[-1].layer_dist(layers - 1)
    if lam > 0:
        suf = _HopPaths(g, t, lam, amask)
        best, end_v = INF, -1
        for v in range(g.n):
            if final[v] >= INF or suf.dist[v] >= INF:
                continue
            cand = int(final[v]) + int(suf.dist[v])
            if cand < best:
                best, end_v = cand, v
        if end_v < 0:
            return INF, _empty_structure(s, t)
        suffix = tuple(reversed(suf.path(end_v)))
    else:
        if final[t] >= INF:
            return INF, _empty_structure(s, t)
        best, end_v = int(final[t]), t
        suffix = (t,)
    blocks: list[Block] = []
    cur = end_v
    for i in range(params.block_count - 1, -1, -1):
        run = runs[i]
        end_sid = (layers - 1) * g.n + cur
        pieces, seed_vertex = _block_from_run(run, g, end_sid)
        weight = int(run.dist[end_sid]) - int(run.block_start_dist[end_sid])
        blocks.append(Block(pieces=tuple(pieces), weight=weight))
        cur = seed_vertex
    blocks.reverse()
    prefix = tuple(pre.path(cur)) if pre is not None else (s,)
    structure = ExpathStructure(source=s, target=t, prefix=prefix,
                                blocks=tuple(blocks), suffix=suffix,
                                total=best)
    return best, structure


def _walk_ok(g: Graph, amask: np.ndarray, walk: tuple[int, ...],
             max_edges: int) -> tuple[bool, int]:
    """Validate a vertex walk against the mask; returns (ok, weight)."""
    if len(walk) - 1 > max_edges:
        return False, 0
    total = 0
    for a, b in zip(walk, walk[1:]):
        e = g.eid_between(a, b)
        if e is None or amask[e]:
            return False, 0
        total += int(g.wt[e])
    return True, total


def verify_expath(g: Graph, apsp_t: APSPTable, banned,
                  structure: ExpathStructure, ell: int, lam: int) -> bool:
    """Certificate check: does the structure satisfy every invariant?"""
    amask = _as_mask(g, banned)
    if structure.total >= INF:
        return False
    if structure.source == structure.target and structure.total == 0 \
            and not structure.blocks:
        return True
    params = DecompParams.for_graph(g, ell)
    if len(structure.blocks) != params.block_count:
        return False
    if not structure.prefix or not structure.suffix:
        return False
    if structure.prefix[0] != structure.source:
        return False
    if structure.suffix[-1] != structure.target:
        return False
    ok, total = _walk_ok(g, amask, structure.prefix, lam)
    if not ok:
        return False
    cur = structure.prefix[-1]
    for j, block in enumerate(structure.blocks):
        # pieces must embed, in order, into the slot template
        # sp_0 edge_1 sp_1 ... edge_ell sp_ell (slots may stay empty)
        slot = -1
        weight = 0
        for piece in block.pieces:
            kind, a, b = piece
            if a != cur:
                return False
            if kind == "sp":
                slot = slot + 1 if (slot + 1) % 2 == 0 else slot + 2
                canon = apsp_t.path(a, b)
                if canon is None or len(canon) < 2:
                    return False
                for pa, pb in zip(canon, canon[1:]):
                    e = g.eid_between(pa, pb)
                    if e is None or amask[e]:
                        return False
                weight += apsp_t.d(a, b)
            elif kind == "edge":
                slot = slot + 1 if (slot + 1) % 2 == 1 else slot + 2
                e = g.eid_between(a, b)
                if e is None or amask[e]:
                    return False
                weight += int(g.wt[e])
            else:
                return False
            if slot > 2 * ell:
                return False
            cur = b
        if weight != block.weight or weight > params.delta(j):
            return False
        total += weight
    if cur != structure.suffix[0]:
        return False
    ok, wsuf = _walk_ok(g, amask, structure.suffix, lam)
    if not ok:
        return False
    total += wsuf
    return total == structure.total
