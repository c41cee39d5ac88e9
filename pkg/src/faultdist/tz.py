"""Level hierarchy, per-subgraph distance oracle, and compatible spanner.

One hierarchy of vertex levels is sampled once and shared by every oracle
built afterwards, so oracles over different subgraphs of the same host are
comparable: if a subgraph preserves the witness path of a larger one, it
returns the same estimate (the inheritance property, tested in
tests/test_tz.py).

The oracle answers in O(k) from pivot tables and merged bunch maps.  The
spanner collects the edges of every canonical shortest path from a vertex
to its bunch members and pivots, giving stretch 2k-1 for all pairs.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import _kernels as _k
from .graphs import INF, Graph, canonical_sssp
from .seeding import stream


@dataclass(frozen=True)
class LevelHierarchy:
    """Nested vertex sets X_0 = V down to X_{k-1}; X_k is empty.

    level[v] = largest i with v in X_i.
    """

    k: int
    n: int
    level: np.ndarray
    seed: int | None = None

    def members(self, i: int) -> np.ndarray:
        return np.flatnonzero(self.level >= i).astype(np.int32)

    def size(self, i: int) -> int:
        return int((self.level >= i).sum())


def sample_hierarchy(n: int, k: int, seed: int | None = None) -> LevelHierarchy:
    if k < 1:
        raise ValueError("k must be at least 1")
    level = np.zeros(n, np.int8)
    if n > 0 and k > 1:
        prob = float(n) ** (-1.0 / k)
        rng = stream(seed if seed is not None else 0, "level-hierarchy")
        current = np.arange(n)
        for i in range(1, k):
            current = current[rng.random(len(current)) < prob]
            level[current] = i
    return LevelHierarchy(k=k, n=n, level=level, seed=seed)


class DisconnectedError(ValueError):
    pass


@dataclass
class TZOracle:
    """Distance oracle for one subgraph under a shared hierarchy.

    ptab/pdist hold p_i(v) and d(v, p_i(v)) flattened as [i * n + v].
    Bunches of all levels are merged per vertex, deduplicated, and stored
    as sorted (vertex, distance) runs indexed by boff.
    """

    k: int
    n: int
    ptab: np.ndarray    # int32[k*n], -1 when X_i unreachable from v
    pdist: np.ndarray   # int64[k*n]
    boff: np.ndarray    # int64[n+1]
    bxs: np.ndarray     # int32[entries], sorted within each vertex run
    bds: np.ndarray     # int64[entries]
    banned: np.ndarray | None = field(default=None, repr=False)

    @property
    def entry_count(self) -> int:
        return int(self.bxs.shape[0])

    def pivot(self, i: int, v: int) -> int:
        return int(self.ptab[i * self.n + v])

    def pivot_dist(self, i: int, v: int) -> int:
        p = self.ptab[i * self.n + v]
        return INF if p < 0 else int(self.pdist[i * self.n + v])

    def bunch(self, v: int) -> dict[int, int]:
        lo, hi = int(self.boff[v]), int(self.boff[v + 1])
        return {int(self.bxs[j]): int(self.bds[j]) for j in range(lo, hi)}

    def bunch_dist(self, v: int, x: int) -> int:
        return int(_k._bunch_lookup(self.boff, self.bxs, self.bds, v, x))

    def query_modified(self, s: int, t: int) -> int:
        return int(_k.tz_query_modified(self.k, self.n, self.ptab, self.pdist,
                                        self.boff, self.bxs, self.bds, s, t))

    def query_original(self, s: int, t: int) -> int:
        return int(_k.tz_query_original(self.k, self.n, self.ptab, self.pdist,
                                        self.boff, self.bxs, self.bds, s, t))

    def query_modified_bulk(self, ss, ts) -> np.ndarray:
        ss = np.asarray(ss, np.int64)
        ts = np.asarray(ts, np.int64)
        out = np.empty(len(ss), np.int64)
        _k.tz_query_modified_bulk(self.k, self.n, self.ptab, self.pdist,
                                  self.boff, self.bxs, self.bds, ss, ts, out)
        return out

    def _argmin_witness(self, s: int, t: int):
        best = INF
        pick = None
        for i in range(self.k):
            for a, b in ((s, t), (t, s)):
                w = int(self.ptab[i * self.n + a])
                if w < 0:
                    continue
                dw = self.bunch_dist(b, w)
                if dw >= INF:
                    continue
                est = int(self.pdist[i * self.n + a]) + dw
                if est < best:
                    best = est
                    pick = (w, a, b)
        return best, pick

    def witness(self, g: Graph, s: int, t: int) -> tuple[int, list[int]]:
        """Interconnect vertex and the realized s-t path of the estimate."""
        est, pick = self._argmin_witness(s, t)
        if pick is None:
            raise DisconnectedError(f"no finite estimate for pair ({s}, {t})")
        w, a, b = pick
        res = canonical_sssp(g, w, self.banned)
        leg_a = res.path_to(a)
        leg_b = res.path_to(b)
        if leg_a is None or leg_b is None:
            raise DisconnectedError("stored estimate not realizable on host")
        path = list(reversed(leg_a)) + leg_b[1:]
        if a != s:
            path.reverse()
        weight = 0
        for x, y in zip(path, path[1:]):
            weight += int(g.wt[g.eid_between(x, y)])
        if weight != est:
            raise AssertionError("witness path weight drifted from estimate")
        return w, path


def _merge_bunches(n, bv, bx, bd):
    order = np.lexsort((bx, bv))
    bv, bx, bd = bv[order], bx[order], bd[order]
    if len(bv) > 1:
        keep = np.ones(len(bv), bool)
        keep[1:] = (bv[1:] != bv[:-1]) | (bx[1:] != bx[:-1])
        bv, bx, bd = bv[keep], bx[keep], bd[keep]
    boff = np.zeros(n + 1, np.int64)
    np.add.at(boff, bv + 1, 1)
    np.cumsum(boff, out=boff)
    return boff, np.ascontiguousarray(bx), np.ascontiguousarray(bd)


def build_oracle_and_spanner(g: Graph, hier: LevelHierarchy,
                             banned: np.ndarray | None = None,
                             keep_mask: bool = True) -> tuple[TZOracle, np.ndarray]:
    """Build the oracle and the spanner edge-id set for one subgraph."""
    if hier.n != g.n:
        raise ValueError("hierarchy built for a different vertex universe")
    if banned is None:
        banned = g.no_mask()
    spmask = np.zeros(g.m, np.uint8)
    ptab, pdist, bv, bx, bd = _k.tz_build(
        g.n, g.indptr, g.nbr, g.eidx, g.wt, g.key_hi, g.key_lo,
        banned, hier.level, hier.k, np.uint8(1), spmask)
    boff, bxs, bds = _merge_bunches(g.n, bv, bx, bd)
    oracle = TZOracle(k=hier.k, n=g.n, ptab=ptab, pdist=pdist, boff=boff,
                      bxs=bxs, bds=bds,
                      banned=banned.copy() if keep_mask else None)
    return oracle, np.flatnonzero(spmask).astype(np.int32)


def spanner_mask_into(g: Graph, hier: LevelHierarchy, banned: np.ndarray,
                      out_mask: np.ndarray) -> None:
    """OR the spanner edges of the subgraph G - banned into out_mask.

    Fast path for the sampling forest, which unions many spanners per node
    and discards the bunches.
    """
    _k.tz_build(g.n, g.indptr, g.nbr, g.eidx, g.wt, g.key_hi, g.key_lo,
                banned, hier.level, hier.k, np.uint8(0), out_mask)
