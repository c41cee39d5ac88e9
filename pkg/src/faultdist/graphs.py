"""Graph representation, canonical shortest paths, APSP, LCA trees.

The canonical path between two vertices is the shortest path minimizing an
exact 102-bit additive edge-key sum (see _kernels).  The keys are derived
from a hard-coded seed and the edge ids, so canonical paths are a property
of the loaded graph alone: they do not change with the user seed, adjacency
order, or which subgraph mask a search runs under (as long as the path
survives).  Uniqueness, symmetry, and the subpath property all follow from
exact comparison of key sums.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import _kernels as _k
from .seeding import stream

INF = int(_k.INF)
INF32 = 1 << 30

# Canonical keys are not user-seeded on purpose; one fixed constant makes
# the canonical path system reproducible across processes and platforms.
_CANON_KEY_SEED = 0x6C1A_55F0_9B3D_2E84


class GraphFormatError(ValueError):
    pass


def _build_csr(n: int, eu: np.ndarray, ev: np.ndarray,
               perm: np.ndarray | None = None):
    m = eu.shape[0]
    heads = np.concatenate([eu, ev]).astype(np.int64)
    tails = np.concatenate([ev, eu]).astype(np.int32)
    eids = np.concatenate([np.arange(m), np.arange(m)]).astype(np.int32)
    if perm is not None:
        heads, tails, eids = heads[perm], tails[perm], eids[perm]
    order = np.argsort(heads, kind="stable")
    heads, tails, eids = heads[order], tails[order], eids[order]
    indptr = np.zeros(n + 1, np.int64)
    np.add.at(indptr, heads + 1, 1)
    np.cumsum(indptr, out=indptr)
    return indptr, tails, eids


@dataclass(frozen=True)
class Graph:
    """Undirected graph with dense edge ids and canonical tie-break keys."""

    n: int
    eu: np.ndarray          # int32[m], endpoint with smaller id
    ev: np.ndarray          # int32[m]
    wt: np.ndarray          # int64[m], all ones for unweighted graphs
    indptr: np.ndarray      # int64[n+1]
    nbr: np.ndarray         # int32[2m]
    eidx: np.ndarray        # int32[2m], edge id per half-edge
    key_hi: np.ndarray      # int64[m]
    key_lo: np.ndarray      # int64[m]
    _pair_to_eid: dict = field(repr=False, compare=False, default_factory=dict)

    @property
    def m(self) -> int:
        return self.eu.shape[0]

    @property
    def max_weight(self) -> int:
        return int(self.wt.max()) if self.m else 1

    @staticmethod
    def from_edges(n: int, edges, weights=None, adjacency_seed=None) -> "Graph":
        """Build a graph from (u, v) pairs; ids follow list order.

        adjacency_seed only permutes the CSR half-edge layout (used by
        determinism tests); it has no influence on edge ids or keys.
        """
        m = len(edges)
        eu = np.empty(m, np.int32)
        ev = np.empty(m, np.int32)
        seen: dict = {}
        for i, (u, v) in enumerate(edges):
            u = int(u)
            v = int(v)
            if u == v:
                raise GraphFormatError(f"self-loop at vertex {u}")
            if not (0 <= u < n and 0 <= v < n):
                raise GraphFormatError(f"vertex out of range in edge {(u, v)}")
            a, b = (u, v) if u < v else (v, u)
            if (a, b) in seen:
                raise GraphFormatError(f"duplicate edge {(a, b)}")
            seen[(a, b)] = i
            eu[i] = a
            ev[i] = b
        if weights is None:
            wt = np.ones(m, np.int64)
        else:
            wt = np.asarray(weights, np.int64)
            if wt.shape != (m,) or (m and wt.min() < 1):
                raise GraphFormatError("weights must be positive, one per edge")
        if m and n * int(wt.max()) >= INF32:
            raise GraphFormatError("n * max_weight too large for distance type")
        perm = None
        if adjacency_seed is not None:
            perm = stream(adjacency_seed, "adjacency-shuffle").permutation(2 * m)
        indptr, nbr, eidx = _build_csr(n, eu, ev, perm)
        rng = stream(_CANON_KEY_SEED, "canonical-edge-keys")
        keys = rng.integers(0, 1 << 51, size=(2, m), dtype=np.int64)
        return Graph(n=n, eu=eu, ev=ev, wt=wt, indptr=indptr, nbr=nbr,
                     eidx=eidx, key_hi=keys[0].copy(), key_lo=keys[1].copy(),
                     _pair_to_eid=seen)

    def eid_between(self, u: int, v: int) -> int | None:
        a, b = (u, v) if u < v else (v, u)
        return self._pair_to_eid.get((a, b))

    def endpoints(self, e: int) -> tuple[int, int]:
        return int(self.eu[e]), int(self.ev[e])

    def no_mask(self) -> np.ndarray:
        return np.zeros(self.m, np.uint8)

    def degree(self, v: int) -> int:
        return int(self.indptr[v + 1] - self.indptr[v])


def load_dimacs(text: str) -> Graph:
    """Parse a DIMACS .gr document (undirected; reverse arcs deduplicated)."""
    n = None
    edges: list[tuple[int, int]] = []
    weights: list[int] = []
    seen: dict[tuple[int, int], tuple[int, int]] = {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.strip()
        if not line or line.startswith("c"):
            continue
        parts = line.split()
        if parts[0] == "p":
            if len(parts) != 4 or parts[1] != "sp":
                raise GraphFormatError(f"line {lineno}: malformed problem line")
            n = int(parts[2])
            continue
        if parts[0] == "a":
            if n is None:
                raise GraphFormatError(f"line {lineno}: arc before problem line")
            if len(parts) != 4:
                raise GraphFormatError(f"line {lineno}: malformed arc line")
            try:
                u, v, w = int(parts[1]), int(parts[2]), int(parts[3])
            except ValueError as exc:
                raise GraphFormatError(f"line {lineno}: {exc}") from None
            if not (1 <= u <= n and 1 <= v <= n):
                raise GraphFormatError(f"line {lineno}: vertex id out of range")
            if u == v:
                raise GraphFormatError(f"line {lineno}: self-loop at {u}")
            if w < 1:
                raise GraphFormatError(f"line {lineno}: nonpositive weight")
            a, b = (u - 1, v - 1) if u < v else (v - 1, u - 1)
            if (a, b) in seen:
                w0, dir0 = seen[(a, b)]
                if w0 == w and dir0 != (u < v):
                    continue  # the reverse arc of a known edge
                raise GraphFormatError(f"line {lineno}: duplicate edge {u} {v}")
            seen[(a, b)] = (w, u < v)
            edges.append((a, b))
            weights.append(w)
            continue
        raise GraphFormatError(f"line {lineno}: unknown record {parts[0]!r}")
    if n is None:
        raise GraphFormatError("missing problem line")
    return Graph.from_edges(n, edges, weights)


def dump_dimacs(g: Graph) -> str:
    lines = [f"p sp {g.n} {g.m}"]
    for e in range(g.m):
        lines.append(f"a {int(g.eu[e]) + 1} {int(g.ev[e]) + 1} {int(g.wt[e])}")
    return "\n".join(lines) + "\n"


@dataclass(frozen=True)
class FailureSet:
    """A set of failed edge ids, at most f of them at query time."""

    eids: tuple[int, ...]

    @staticmethod
    def of(eids) -> "FailureSet":
        out = tuple(sorted(set(int(e) for e in eids)))
        return FailureSet(out)

    def mask(self, g: Graph) -> np.ndarray:
        mask = g.no_mask()
        for e in self.eids:
            if not (0 <= e < g.m):
                raise ValueError(f"edge id {e} not in graph")
            mask[e] = 1
        return mask

    def vertices(self, g: Graph) -> list[int]:
        vs: set[int] = set()
        for e in self.eids:
            vs.add(int(g.eu[e]))
            vs.add(int(g.ev[e]))
        return sorted(vs)

    def __len__(self) -> int:
        return len(self.eids)


EMPTY_FAILURE = FailureSet(())


@dataclass
class SSSPResult:
    source: int
    dist: np.ndarray     # int64[n]
    pred: np.ndarray     # int32[n]
    prede: np.ndarray    # int32[n]
    sig_hi: np.ndarray
    sig_lo: np.ndarray

    def path_to(self, t: int) -> list[int] | None:
        if self.dist[t] >= INF:
            return None
        out = [t]
        while out[-1] != self.source:
            out.append(int(self.pred[out[-1]]))
        out.reverse()
        return out


def canonical_sssp(g: Graph, src: int, banned: np.ndarray | None = None) -> SSSPResult:
    if banned is None:
        banned = g.no_mask()
    dist = np.empty(g.n, np.int64)
    phi = np.empty(g.n, np.int64)
    plo = np.empty(g.n, np.int64)
    pred = np.empty(g.n, np.int32)
    prede = np.empty(g.n, np.int32)
    _k.dijkstra_canonical(g.n, g.indptr, g.nbr, g.eidx, g.wt, g.key_hi,
                          g.key_lo, banned, src, dist, phi, plo, pred, prede)
    return SSSPResult(src, dist, pred, prede, phi, plo)


def canonical_dijkstra(g: Graph, source: int,
                       masked: FailureSet | np.ndarray | None = None,
                       hop_cap: int | None = None):
    """(dist, parent) from source; with hop_cap, parent is None.

    `masked` accepts either a FailureSet or a raw uint8 edge mask.
    """
    banned = masked.mask(g) if isinstance(masked, FailureSet) else masked
    if banned is None:
        banned = g.no_mask()
    if hop_cap is not None:
        dist = _k.hop_bounded_sssp(g.n, g.indptr, g.nbr, g.eidx, g.wt,
                                   banned, source, hop_cap)
        return dist, None
    res = canonical_sssp(g, source, banned)
    return res.dist, res.pred


def hop_bounded_dist(g: Graph, src: int, hops: int,
                     banned: np.ndarray | None = None) -> np.ndarray:
    if banned is None:
        banned = g.no_mask()
    return _k.hop_bounded_sssp(g.n, g.indptr, g.nbr, g.eidx, g.wt, banned,
                               src, hops)


_LANE_MASK = (1 << _k.LANE_BITS) - 1


def sig_add(hi1: int, lo1: int, hi2: int, lo2: int) -> tuple[int, int]:
    lo = lo1 + lo2
    return hi1 + hi2 + (lo >> _k.LANE_BITS), lo & _LANE_MASK


@dataclass
class APSPTable:
    """All-pairs canonical distances, predecessors, and exact key sums."""

    dist: np.ndarray    # int32[n,n], INF32 when unreachable
    pred: np.ndarray    # int32[n,n]; pred[s,v] precedes v on the s->v path
    sig_hi: np.ndarray  # int64[n,n]
    sig_lo: np.ndarray

    def d(self, u: int, v: int) -> int:
        x = int(self.dist[u, v])
        return INF if x >= INF32 else x

    def on_canonical(self, s: int, v: int, t: int) -> bool:
        """Exact test: does v lie on the canonical s-t path?"""
        dsv, dvt, dst = self.dist[s, v], self.dist[v, t], self.dist[s, t]
        if dst >= INF32 or dsv >= INF32 or dvt >= INF32:
            return False
        if int(dsv) + int(dvt) != int(dst):
            return False
        hi, lo = sig_add(int(self.sig_hi[s, v]), int(self.sig_lo[s, v]),
                         int(self.sig_hi[v, t]), int(self.sig_lo[v, t]))
        return hi == int(self.sig_hi[s, t]) and lo == int(self.sig_lo[s, t])

    def edge_on_canonical(self, g: Graph, s: int, t: int, e: int) -> bool:
        a, b = g.endpoints(e)
        if self.pred[s, b] == a and self.on_canonical(s, b, t) and \
                self.dist[s, b] <= self.dist[s, t]:
            return True
        if self.pred[s, a] == b and self.on_canonical(s, a, t) and \
                self.dist[s, a] <= self.dist[s, t]:
            return True
        return False

    def path(self, s: int, t: int) -> list[int] | None:
        if self.dist[s, t] >= INF32:
            return None
        out = [t]
        while out[-1] != s:
            out.append(int(self.pred[s, out[-1]]))
        out.reverse()
        return out


def apsp(g: Graph, banned: np.ndarray | None = None) -> APSPTable:
    if banned is None:
        banned = g.no_mask()
    n = g.n
    dist = np.empty((n, n), np.int32)
    pred = np.empty((n, n), np.int32)
    shi = np.empty((n, n), np.int64)
    slo = np.empty((n, n), np.int64)
    _k.apsp_fill(n, g.indptr, g.nbr, g.eidx, g.wt, g.key_hi, g.key_lo,
                 banned, dist, pred, shi, slo)
    return APSPTable(dist, pred, shi, slo)


class SPTreeWithLCA:
    """Canonical shortest-path tree with O(1) LCA after O(n log n) build."""

    __slots__ = ("root", "parent", "parent_edge", "depth", "in_tree",
                 "_first", "_euler_v", "_table", "_logs")

    def __init__(self, g: Graph, root: int, banned: np.ndarray | None = None):
        res = canonical_sssp(g, root, banned)
        n = g.n
        self.root = root
        self.parent = res.pred
        self.parent_edge = res.prede
        self.in_tree = res.dist < INF
        order = np.argsort(res.dist, kind="stable")  # parents before children
        depth = np.full(n, -1, np.int64)
        depth[root] = 0
        children: list[list[int]] = [[] for _ in range(n)]
        for v in order:
            v = int(v)
            if not self.in_tree[v] or v == root:
                continue
            p = int(self.parent[v])
            depth[v] = depth[p] + 1
            children[p].append(v)
        self.depth = depth
        # Euler tour
        euler_v = []
        first = np.full(n, -1, np.int64)
        stack = [(root, 0)]
        while stack:
            v, ci = stack.pop()
            if ci == 0 and first[v] < 0:
                first[v] = len(euler_v)
            euler_v.append(v)
            if ci < len(children[v]):
                stack.append((v, ci + 1))
                stack.append((children[v][ci], 0))
        self._euler_v = np.asarray(euler_v, np.int64)
        self._first = first
        edepth = depth[self._euler_v]
        sz = len(euler_v)
        logs = np.zeros(sz + 1, np.int64)
        for i in range(2, sz + 1):
            logs[i] = logs[i // 2] + 1
        self._logs = logs
        levels = int(logs[sz]) + 1 if sz else 1
        table = np.empty((levels, sz), np.int64)
        table[0] = np.arange(sz)
        for lev in range(1, levels):
            span = 1 << lev
            half = span >> 1
            width = sz - span + 1
            if width <= 0:
                table[lev, :] = table[lev - 1, :]
                continue
            left = table[lev - 1, :width]
            right = table[lev - 1, half:half + width]
            pick = edepth[left] <= edepth[right]
            table[lev, :width] = np.where(pick, left, right)
            table[lev, width:] = table[lev - 1, width:]
        self._table = table

    def lca(self, u: int, v: int) -> int:
        if not (self.in_tree[u] and self.in_tree[v]):
            return -1
        a, b = int(self._first[u]), int(self._first[v])
        if a > b:
            a, b = b, a
        lev = int(self._logs[b - a + 1])
        i1 = int(self._table[lev, a])
        i2 = int(self._table[lev, b - (1 << lev) + 1])
        v1, v2 = int(self._euler_v[i1]), int(self._euler_v[i2])
        return v1 if self.depth[v1] <= self.depth[v2] else v2

    def is_ancestor(self, a: int, v: int) -> bool:
        return self.lca(a, v) == a

    def edge_on_root_concat(self, v: int, w: int, a: int, b: int) -> bool:
        """Is edge {a, b} on the concatenation P(v, root) o P(root, w)?"""
        child = -1
        if self.in_tree[a] and self.in_tree[b]:
            if self.parent[b] == a:
                child = b
            elif self.parent[a] == b:
                child = a
        if child < 0:
            return False  # not a tree edge, so on neither canonical leg
        return self.is_ancestor(child, v) or self.is_ancestor(child, w)

    def edge_on_path(self, g: Graph, v: int, w: int, e: int) -> bool:
        a, b = g.endpoints(e)
        return self.edge_on_root_concat(v, w, a, b)
