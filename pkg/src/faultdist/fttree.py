"""Fault-tolerant trees: one small search structure per vertex pair.

The root of a tree stores a shortest expath between the pair in the intact
graph.  The stored path is cut into segments at netpoints (vertices marked
at exponentially growing distances from both ends), and each child of a
node re-solves the pair with one whole segment removed, down to depth f.
Only the path skeleton survives preprocessing: a node keeps its parts
(maximal stretches of the walk that stay inside one canonical piece and
cross no netpoint) together with a few integers per part, never the edge
sets it was built under.

A query walks down from the root.  At each inner node every part is
certified against the failed edges: single-edge parts by edge identity,
long canonical parts by two ancestor tests on a pivot's shortest-path
tree, and short canonical parts through an injected short-range oracle.
If all parts pass, three times the stored length is a valid answer.
Otherwise the query descends into the child that drops the segment of the
first failed part.  A leaf at depth f returns its stored length as is,
since by then every failed edge has been excluded from the rebuild.

Children are materialized lazily and memoized per tree, keyed by the
root-to-node sequence of segment choices, so repeated queries share work.
"""

from __future__ import annotations

import math
from bisect import bisect_right
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Callable

import numpy as np

from .expath import ExpathStructure, shortest_expath
from .graphs import INF, APSPTable, FailureSet, Graph, SPTreeWithLCA
from .seeding import stream

__all__ = [
    "CheckResult",
    "FTNode",
    "FTTree",
    "Netpoints",
    "Part",
    "PivotSets",
    "PivotTreeCache",
    "build_ft_tree",
    "compute_netpoints",
    "expath_engine",
    "ft_query",
    "node_check",
    "sample_pivots",
]


# ---------------------------------------------------------------------------
# pivot sampling
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class PivotSets:
    """Vertex samples shared by all fault-tolerant trees over one graph.

    Part-hitting pivots puncture, with high probability, every stored
    part that is longer than the hop cap, which lets node checks replace
    a scan of the part by two ancestor tests on the pivot's tree.  Ball
    pivots are the coarse endpoints: with positive granularity, queries
    snap their endpoints to nearby ball pivots and reuse that pair's
    tree, so trees are only ever built for ball-pivot pairs.
    """

    hit_mask: np.ndarray   # uint8[n], part-hitting sample
    ball_mask: np.ndarray  # uint8[n], coarse-endpoint sample
    hit_prob: float
    ball_prob: float
    seed: int

    @property
    def hit_ids(self) -> np.ndarray:
        return np.flatnonzero(self.hit_mask)

    @property
    def ball_ids(self) -> np.ndarray:
        return np.flatnonzero(self.ball_mask)

    def counts(self) -> tuple[int, int]:
        return int(self.hit_mask.sum()), int(self.ball_mask.sum())


def sample_pivots(g: Graph, f: int, cap: int, lam: int,
                  c_ball: float, c_hit: float, seed: int) -> PivotSets:
    """Draw both pivot samples for trees with hop cap ``cap``.

    Every vertex joins the part-hitting sample independently with
    probability min(1, c_hit * f * log2(n) / s), where the hitting scale
    s is the granularity when positive and the hop cap otherwise.  Ball
    pivots only exist with positive granularity and are kept with
    probability min(1, c_ball * f * log2(n) / (lam * cap**(f-1))).
    """
    if f < 0:
        raise ValueError("failure budget must be non-negative")
    if cap < 1:
        raise ValueError("hop cap must be positive")
    if lam < 0:
        raise ValueError("granularity must be non-negative")
    n = g.n
    width = max(1.0, f) * math.log2(max(2, n))
    hit_scale = lam if lam > 0 else cap
    hit_prob = min(1.0, c_hit * width / hit_scale)
    rng_hit = stream(seed, "ft-pivots", "hit")
    hit_mask = (rng_hit.random(n) < hit_prob).astype(np.uint8)
    if lam > 0:
        ball_prob = min(1.0, c_ball * width / (lam * cap ** (f - 1)))
        rng_ball = stream(seed, "ft-pivots", "ball")
        ball_mask = (rng_ball.random(n) < ball_prob).astype(np.uint8)
    else:
        ball_prob = 0.0
        ball_mask = np.zeros(n, np.uint8)
    return PivotSets(hit_mask=hit_mask, ball_mask=ball_mask,
                     hit_prob=hit_prob, ball_prob=ball_prob, seed=seed)


class PivotTreeCache:
    """Canonical shortest-path trees with LCA, one per pivot, built lazily.

    One cache is shared across every fault-tolerant tree over the same
    graph, so a pivot's tree is paid for once no matter how many stored
    parts it certifies.
    """

    def __init__(self, g: Graph):
        self._g = g
        self._trees: dict[int, SPTreeWithLCA] = {}

    def tree(self, pivot: int) -> SPTreeWithLCA:
        t = self._trees.get(pivot)
        if t is None:
            t = SPTreeWithLCA(self._g, pivot)
            self._trees[pivot] = t
        return t

    def __len__(self) -> int:
        return len(self._trees)


def _edge_on_pivot_path(spt: SPTreeWithLCA, x: int, y: int, v: int) -> bool:
    """Does tree edge {x, y} lie on the canonical path from v to the root?

    The path from v to the root climbs parent links, so a tree edge is on
    it exactly when its lower endpoint is an ancestor of v (or v itself).
    """
    if not spt.in_tree[v]:
        return False
    if int(spt.parent[x]) == y:
        return spt.is_ancestor(x, v)
    if int(spt.parent[y]) == x:
        return spt.is_ancestor(y, v)
    return False


# ---------------------------------------------------------------------------
# netpoints
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class Netpoints:
    """Sorted walk positions where the stored path is cut into segments."""

    positions: tuple[int, ...]
    lam: int

    @property
    def segment_count(self) -> int:
        return max(0, len(self.positions) - 1)


def _prefix_weights(g: Graph, walk: list[int]) -> list[int]:
    pw = [0]
    for a, b in zip(walk, walk[1:]):
        e = g.eid_between(a, b)
        if e is None:
            raise ValueError(f"walk step {a}-{b} is not an edge")
        pw.append(pw[-1] + int(g.wt[e]))
    return pw


def compute_netpoints(g: Graph, walk: list[int], eps, lam: int) -> Netpoints:
    """Mark netpoints on a vertex walk.

    Both endpoints are always netpoints.  With zero granularity a pair of
    consecutive positions is marked whenever a power of (1 + eps/36)
    separates their distances from an endpoint, scanning from both ends.
    With positive granularity the first and last lam positions are marked
    wholesale, the power scans anchor at positions lam and q-1-lam, and a
    walk of total length at most 2*lam marks every position.  Thresholds
    are compared exactly with rational arithmetic.
    """
    if lam < 0:
        raise ValueError("granularity must be non-negative")
    q = len(walk)
    if q == 0:
        raise ValueError("empty walk")
    if q == 1:
        return Netpoints(positions=(0,), lam=lam)
    pw = _prefix_weights(g, walk)
    total = pw[-1]
    if lam > 0 and total <= 2 * lam:
        return Netpoints(positions=tuple(range(q)), lam=lam)
    eps_f = eps if isinstance(eps, Fraction) else Fraction(str(eps))
    base = 1 + eps_f / 36
    marks: set[int] = set()
    left = min(lam, q - 1)
    right = max(0, q - 1 - lam)
    marks.update(range(0, left + 1))
    marks.update(range(right, q))
    # Power scan away from the left anchor.
    tau = Fraction(1)
    for j in range(left, right):
        near = pw[j] - pw[left]
        far = pw[j + 1] - pw[left]
        while tau <= near:
            tau *= base
        if tau <= far:
            marks.add(j)
            marks.add(j + 1)
    # Power scan away from the right anchor.
    tau = Fraction(1)
    for j in range(right, left, -1):
        near = pw[right] - pw[j]
        far = pw[right] - pw[j - 1]
        while tau <= near:
            tau *= base
        if tau <= far:
            marks.add(j - 1)
            marks.add(j)
    return Netpoints(positions=tuple(sorted(marks)), lam=lam)


# ---------------------------------------------------------------------------
# parts and nodes
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class Part:
    """Maximal stretch of the stored walk inside one piece and one segment.

    Kind "sp" parts are subpaths of a canonical shortest path, so their
    weight equals the intact distance between their endpoints and they
    can be re-derived from the pair (v, w) alone.  Kind "edge" parts are
    interleaving single edges, kind "walk" parts are single edges of the
    granularity prefix or suffix; both are certified by edge identity.
    """

    v: int
    w: int
    kind: str            # "sp", "edge", or "walk"
    seg: int             # enclosing segment index
    n_edges: int
    weight: int          # length along the stored walk
    base_dist: int       # intact distance between v and w
    long: bool           # more edges than the hop cap
    pivot: int | None    # part-hitting pivot on the part, when long
    v_on_net: bool
    w_on_net: bool


@dataclass(frozen=True)
class FTNode:
    """One tree node: the surviving expath's skeleton, nothing else.

    The edge sets a node was built under are recomputed from parent
    segments on demand and never stored.
    """

    depth: int
    total: int
    parts: tuple[Part, ...]
    seg_count: int
    netpoint_count: int
    missing_pivots: int

    @property
    def has_path(self) -> bool:
        return self.total < INF

    def space_words(self) -> int:
        """Integer fields this node retains (per-part fields included)."""
        return 4 + 10 * len(self.parts)


@dataclass(frozen=True)
class CheckResult:
    ok: bool
    bound: int                 # three times the stored length when ok
    failed_seg: int | None     # segment of the first uncertified part
    conservative: bool         # failure forced by a missing pivot


@dataclass
class FTTree:
    """Lazy fault-tolerant tree for one vertex pair.

    Nodes are memoized by their root-to-node tuple of segment choices;
    the node for a given key is a deterministic function of the pair and
    that key, so lazy and eager construction agree.
    """

    g: Graph
    apsp_t: APSPTable
    u: int
    v: int
    f: int
    ell: int
    eps: Fraction
    lam: int
    cap: int
    engine: Callable[[np.ndarray, int, int], tuple[int, ExpathStructure]]
    pivots: PivotSets
    lca: PivotTreeCache
    base_banned: np.ndarray | None = None
    _nodes: dict[tuple[int, ...], FTNode] = field(default_factory=dict)
    stats: dict[str, int] = field(default_factory=lambda: {
        "nodes_built": 0,
        "expath_calls": 0,
        "segment_violations": 0,
        "missing_pivot_parts": 0,
    })

    @property
    def root(self) -> FTNode:
        return self._nodes[()]

    def _base_mask(self) -> np.ndarray:
        if self.base_banned is None:
            return self.g.no_mask()
        return self.base_banned.copy()

    def segment_eids(self, node: FTNode, seg: int) -> list[int]:
        """Edge ids of one segment, re-derived from the node's parts."""
        if not 0 <= seg < node.seg_count:
            raise IndexError(f"segment {seg} out of range")
        out: list[int] = []
        for part in node.parts:
            if part.seg != seg:
                continue
            if part.kind == "sp" and part.n_edges > 1:
                path = self.apsp_t.path(part.v, part.w)
                for a, b in zip(path, path[1:]):
                    out.append(int(self.g.eid_between(a, b)))
            else:
                out.append(int(self.g.eid_between(part.v, part.w)))
        return out

    def materialize(self, key: tuple[int, ...], banned: np.ndarray) -> FTNode:
        """Node for ``key``, building it under ``banned`` on a miss.

        The caller must pass exactly the union of the base mask and the
        segments named by ``key``; ``node`` below reconstructs that union
        when only the key is at hand.
        """
        node = self._nodes.get(key)
        if node is None:
            node = _build_node(self, len(key), banned)
            self._nodes[key] = node
            self.stats["nodes_built"] += 1
        return node

    def node(self, key: tuple[int, ...] = ()) -> FTNode:
        """Node for a root-to-node sequence of segment choices."""
        key = tuple(int(s) for s in key)
        hit = self._nodes.get(key)
        if hit is not None:
            return hit
        banned = self._base_mask()
        cur = self.materialize((), banned)
        walked: tuple[int, ...] = ()
        for seg in key:
            for e in self.segment_eids(cur, seg):
                banned[e] = 1
            walked += (seg,)
            cur = self.materialize(walked, banned)
        return cur

    def built_nodes(self) -> int:
        return len(self._nodes)

    def space_words(self) -> int:
        return sum(nd.space_words() for nd in self._nodes.values())


def _tagged_walk(g: Graph, apsp_t: APSPTable,
                 structure: ExpathStructure) -> tuple[list[int], list[str], list[int]]:
    """Expand a structure to its walk, labeling every edge with a piece id."""
    walk = list(structure.prefix) if structure.prefix else [structure.source]
    kinds: list[str] = []
    piece: list[int] = []
    uid = 0
    for _ in range(len(walk) - 1):
        kinds.append("walk")
        piece.append(uid)
        uid += 1
    for block in structure.blocks:
        for pc in block.pieces:
            if pc[0] == "sp":
                sp = apsp_t.path(pc[1], pc[2])
                for x in sp[1:]:
                    walk.append(x)
                    kinds.append("sp")
                    piece.append(uid)
                uid += 1
            else:
                walk.append(pc[2])
                kinds.append("edge")
                piece.append(uid)
                uid += 1
    if structure.suffix:
        for x in structure.suffix[1:]:
            walk.append(x)
            kinds.append("walk")
            piece.append(uid)
            uid += 1
    return walk, kinds, piece


def _build_node(tree: FTTree, depth: int, banned: np.ndarray) -> FTNode:
    total, structure = tree.engine(banned, tree.u, tree.v)
    tree.stats["expath_calls"] += 1
    if total >= INF:
        return FTNode(depth=depth, total=INF, parts=(), seg_count=0,
                      netpoint_count=0, missing_pivots=0)
    walk, kinds, piece = _tagged_walk(tree.g, tree.apsp_t, structure)
    pw = _prefix_weights(tree.g, walk)
    assert pw[-1] == total, "stored walk disagrees with engine length"
    nps = compute_netpoints(tree.g, walk, tree.eps, tree.lam)
    positions = list(nps.positions)
    posset = set(positions)

    # Every multi-edge segment must stay short relative to its distance
    # from both path ends, with a granularity correction when lam > 0;
    # violations are counted, not raised, and audited by the test suite.
    eps36 = tree.eps / 36
    for si in range(len(positions) - 1):
        a, b = positions[si], positions[si + 1]
        if b - a < 2:
            continue
        head = min(pw[a], pw[-1] - pw[b]) - tree.lam
        if Fraction(pw[b] - pw[a]) > eps36 * head:
            tree.stats["segment_violations"] += 1

    parts: list[Part] = []
    missing = 0
    q = len(walk)
    start = 0
    for k in range(q - 1):
        if k + 1 <= q - 2 and piece[k + 1] == piece[k] and (k + 1) not in posset:
            continue
        pstart, pend = start, k + 1
        start = k + 1
        v, w = walk[pstart], walk[pend]
        kind = kinds[pstart]
        n_edges = pend - pstart
        weight = pw[pend] - pw[pstart]
        base = tree.apsp_t.d(v, w)
        if kind == "sp":
            assert weight == base, "canonical part out of sync with distances"
        long = n_edges > tree.cap
        pivot: int | None = None
        if long:
            for t in range(pstart, pend + 1):
                if tree.pivots.hit_mask[walk[t]]:
                    pivot = int(walk[t])
                    break
            if pivot is None:
                missing += 1
        seg = bisect_right(positions, pstart) - 1
        assert pend <= positions[seg + 1], "part crosses a netpoint"
        parts.append(Part(v=int(v), w=int(w), kind=kind, seg=seg,
                          n_edges=n_edges, weight=int(weight),
                          base_dist=int(base), long=long, pivot=pivot,
                          v_on_net=pstart in posset, w_on_net=pend in posset))
    tree.stats["missing_pivot_parts"] += missing
    return FTNode(depth=depth, total=int(total), parts=tuple(parts),
                  seg_count=nps.segment_count, netpoint_count=len(positions),
                  missing_pivots=missing)


# ---------------------------------------------------------------------------
# construction and queries
# ---------------------------------------------------------------------------


def expath_engine(g: Graph, apsp_t: APSPTable, ell: int,
                  lam: int) -> Callable[[np.ndarray, int, int],
                                        tuple[int, ExpathStructure]]:
    """Engine callable for build_ft_tree, one pair solve per invocation."""
    def run(banned: np.ndarray, s: int, t: int) -> tuple[int, ExpathStructure]:
        return shortest_expath(g, apsp_t, banned, s, t, ell, lam)
    return run


def build_ft_tree(g: Graph, apsp_t: APSPTable, endpoints: tuple[int, int],
                  f: int, eps, lam: int,
                  engine: Callable[[np.ndarray, int, int],
                                   tuple[int, ExpathStructure]],
                  pivots: PivotSets, cap: int, *, ell: int | None = None,
                  lca: PivotTreeCache | None = None,
                  base_banned: np.ndarray | None = None) -> FTTree:
    """Build the tree for one pair, materializing only the root.

    The expath budget defaults to 2f+1 so that a query's up-to-f segment
    removals always leave the remaining failures coverable.  Pass a
    shared PivotTreeCache when building many trees over one graph.
    """
    u, v = int(endpoints[0]), int(endpoints[1])
    if not (0 <= u < g.n and 0 <= v < g.n):
        raise ValueError("endpoints out of range")
    if f < 0:
        raise ValueError("failure budget must be non-negative")
    if cap < 1:
        raise ValueError("hop cap must be positive")
    if lam < 0:
        raise ValueError("granularity must be non-negative")
    eps_f = eps if isinstance(eps, Fraction) else Fraction(str(eps))
    if ell is None:
        ell = 2 * f + 1
    tree = FTTree(g=g, apsp_t=apsp_t, u=u, v=v, f=f, ell=ell, eps=eps_f,
                  lam=lam, cap=cap, engine=engine, pivots=pivots,
                  lca=lca if lca is not None else PivotTreeCache(g),
                  base_banned=None if base_banned is None
                  else np.asarray(base_banned, np.uint8).copy())
    tree.materialize((), tree._base_mask())
    return tree


def node_check(tree: FTTree, node: FTNode, fails: FailureSet,
               short_dso: Callable[[int, int, FailureSet], int]) -> CheckResult:
    """Certify every part of the stored path against the failed edges.

    Single-edge non-canonical parts are compared against the failure set
    directly.  Long canonical parts route both halves around their pivot
    and test, per failed edge, whether it hangs on the pivot tree's path
    from either part endpoint; a long part without a pivot cannot be
    certified and is conservatively declared failed (counted upstream).
    Short canonical parts ask the injected short-range oracle and fail on
    any estimate above three times their intact length.  The factor 3 is
    that oracle's stretch at contraction order 2; the two are coupled.

    The first failed part in walk order names the failed segment.
    """
    g = tree.g
    fset = frozenset(fails.eids)
    for part in node.parts:
        bad = False
        conservative = False
        if part.kind != "sp":
            bad = int(g.eid_between(part.v, part.w)) in fset
        elif part.long:
            if part.pivot is None:
                bad = True
                conservative = True
            else:
                spt = tree.lca.tree(part.pivot)
                for e in fails.eids:
                    x, y = g.endpoints(e)
                    if _edge_on_pivot_path(spt, x, y, part.v) or \
                            _edge_on_pivot_path(spt, x, y, part.w):
                        bad = True
                        break
        else:
            if short_dso(part.v, part.w, fails) > 3 * part.base_dist:
                bad = True
        if bad:
            return CheckResult(ok=False, bound=-1, failed_seg=part.seg,
                               conservative=conservative)
    return CheckResult(ok=True, bound=3 * node.total, failed_seg=None,
                       conservative=False)


def ft_query(tree: FTTree, fails: FailureSet,
             short_dso: Callable[[int, int, FailureSet], int],
             stats: dict | None = None) -> int:
    """Filtered distance estimate for the tree's pair under ``fails``.

    Visits at most f+1 nodes.  An inner node whose parts all pass returns
    three times its stored length; a depth-f node returns its stored
    length as is; a node without a surviving path reports unreachable.
    When ``stats`` is given it receives the visit count, the descent key,
    and whether a missing pivot forced any descent.  A forced descent bans
    edges no failed part was proven to contain, so answers flagged this
    way carry no guarantee in either direction and callers must exclude
    them from stretch accounting.
    """
    banned = tree._base_mask()
    key: tuple[int, ...] = ()
    visited = 0
    conservative = False
    while True:
        node = tree.materialize(key, banned)
        visited += 1
        if not node.has_path:
            result = INF
            break
        if node.depth >= tree.f:
            result = node.total
            break
        res = node_check(tree, node, fails, short_dso)
        conservative = conservative or res.conservative
        if res.ok:
            result = res.bound
            break
        for e in tree.segment_eids(node, res.failed_seg):
            banned[e] = 1
        key += (res.failed_seg,)
    if stats is not None:
        stats["visited"] = visited
        stats["sampling_fail"] = conservative
        stats["node_path"] = key
    return result
