"""Distance oracle answering s-t queries under a batch of edge failures.

The oracle glues four preprocessing products together.  A covering forest
of sampled subgraphs serves hop-bounded estimates that survive any small
failure set.  Two pivot samples mark vertices that long stored paths and
populous balls are likely to contain.  A ball index classifies, for every
forest leaf and vertex, the close neighborhood as sparse (its hit pivots
are listed outright) or dense (a single ball pivot stands in for it).
Fault-tolerant trees, built lazily per vertex pair, answer filtered
long-range estimates.

A query stitches these into a small complete graph on the two query
vertices and the failure endpoints, weights every pair by the cheapest
applicable estimate, and runs Dijkstra over it.  Answers never undercut
the true replacement distance; with the sampling constants at their
defaults they stay within a 3 + eps factor with high probability over
the preprocessing coins.
"""

from __future__ import annotations

import heapq
import math
from dataclasses import dataclass, field

import numpy as np

from .forest import (MemoryBudgetError, SamplingForest, SamplingNode,
                     build_forest, derive_params)
from .fttree import (FTTree, PivotSets, PivotTreeCache, build_ft_tree,
                     expath_engine, ft_query, sample_pivots)
from .graphs import INF, APSPTable, FailureSet, Graph, apsp
from .seeding import stream
from .tz import sample_hierarchy

__all__ = [
    "DsoParams", "derive_dso_params", "SparseRecord", "DenseMarker",
    "classify_ball", "BallIndex", "QueryReport", "DSO", "preprocess",
]


# ---------------------------------------------------------------------------
# parameters
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class DsoParams:
    """Derived knobs of one oracle build.

    ``L`` is the hop cutoff of the short-range machinery, ``lam`` the
    ball radius and path-end granularity, ``gran_slack`` the additive
    slack 8*lam/L that granularity may cost a stored estimate, and ``k``
    the contraction order of the leaf oracles (their stretch is 2k-1).
    """

    n: int
    f: int
    alpha: float
    eps: float
    spread: float          # 3 - eps, the stretch headroom being spent
    L: int
    lam: int
    gran_slack: float
    k: int = 2

    def ell(self) -> int:
        """Alternation budget of stored paths, one per possible failure."""
        return 2 * self.f + 1

    def cap(self) -> int:
        """Ball truncation threshold L**f."""
        return self.L ** self.f


def derive_dso_params(n: int, f: int, alpha: float, eps: float, *,
                      L_override: int | None = None,
                      lam_override: int | None = None) -> DsoParams:
    """Resolve the oracle parameters for an n-vertex build.

    The fault budget must be at least two; single-failure oracles are a
    different, simpler construction and are rejected here.  alpha trades
    space for query time inside (0, 1/2), eps trades stretch for space
    inside (0, 3).  The hop cutoff grows as n**(alpha/(f+1)) and the
    granularity as eps * (3-eps)/96 of it, clamped into [1, L]; at desk
    scale the clamp almost always engages at 1.

    Overrides exist for experiments.  lam_override = 0 degenerates the
    oracle: no ball pivots are drawn, every ball is classified at radius
    zero, and dense-side routing never triggers.  Soundness is unaffected
    because every branch stays a minimum over sound estimates, but the
    high-probability stretch coverage then leans on the sparse branch
    alone.
    """
    if n < 1:
        raise ValueError("graph must have at least one vertex")
    if f < 2:
        raise ValueError("fault budget must be at least two")
    if not 0.0 < alpha < 0.5:
        raise ValueError("alpha must lie strictly between 0 and 1/2")
    if not 0.0 < eps < 3.0:
        raise ValueError("eps must lie strictly between 0 and 3")
    if L_override is None:
        L = max(2, math.ceil(n ** (alpha / (f + 1))))
    else:
        L = int(L_override)
        if L < 2:
            raise ValueError("hop cutoff override must be at least 2")
    spread = 3.0 - eps
    if lam_override is None:
        lam = min(L, max(1, math.ceil((spread / 96.0) * eps * L)))
    else:
        lam = int(lam_override)
        if not 0 <= lam <= L:
            raise ValueError("granularity override must lie in [0, L]")
    return DsoParams(n=n, f=f, alpha=alpha, eps=eps, spread=spread,
                     L=L, lam=lam, gran_slack=8.0 * lam / L)


# ---------------------------------------------------------------------------
# ball classification
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class SparseRecord:
    """Complete list of hit pivots inside a small ball, sorted by id."""

    pivots: tuple[int, ...]

    @property
    def dense(self) -> bool:
        return False

    def words(self) -> int:
        return 2 + len(self.pivots)


@dataclass(frozen=True)
class DenseMarker:
    """Stand-in for a ball too populous to store.

    ``pivot`` is the nearest sampled ball pivot found among the first
    vertices the truncated scan settled, or -1 when the sample missed
    them all; that miss is the recorded sampling failure the query layer
    must surface.
    """

    pivot: int

    @property
    def dense(self) -> bool:
        return True

    def words(self) -> int:
        return 3


def classify_ball(g: Graph, x: int, lam: int, cap: int,
                  hit_mask: np.ndarray, ball_mask: np.ndarray,
                  banned: np.ndarray | None = None
                  ) -> SparseRecord | DenseMarker:
    """Classify the radius-lam ball around x, truncated at cap vertices.

    Dijkstra from x over the unbanned edges settles vertices in
    (distance, id) order and never looks past distance lam.  If the scan
    exhausts the ball within cap vertices the ball is sparse and the hit
    pivots among its members are returned in full.  Settling a cap+1st
    member proves the ball dense; the scan stops right there and the
    marker keeps the first ball pivot it settled, if any.
    """
    if cap < 1:
        raise ValueError("truncation cap must be positive")
    if lam < 0:
        raise ValueError("ball radius must be non-negative")
    indptr, nbrs, eidxs, wts = g.indptr, g.nbr, g.eidx, g.wt
    dist: dict[int, int] = {x: 0}
    done: set[int] = set()
    members: list[int] = []
    heap: list[tuple[int, int]] = [(0, x)]
    while heap:
        d, u = heapq.heappop(heap)
        if u in done:
            continue
        if d > lam:
            break
        done.add(u)
        members.append(u)
        if len(members) > cap:
            break
        for it in range(int(indptr[u]), int(indptr[u + 1])):
            e = int(eidxs[it])
            if banned is not None and banned[e]:
                continue
            v = int(nbrs[it])
            if v in done:
                continue
            nd = d + int(wts[e])
            if nd > lam:
                continue
            old = dist.get(v)
            if old is None or nd < old:
                dist[v] = nd
                heapq.heappush(heap, (nd, v))
    if len(members) <= cap:
        pivots = tuple(sorted(v for v in members if hit_mask[v]))
        return SparseRecord(pivots=pivots)
    for v in members:
        if ball_mask[v]:
            return DenseMarker(pivot=v)
    return DenseMarker(pivot=-1)


@dataclass
class BallIndex:
    """Per-leaf, per-vertex ball classifications of one oracle build."""

    lam: int
    cap: int
    records: list[list[SparseRecord | DenseMarker]]

    def record(self, leaf: int, x: int) -> SparseRecord | DenseMarker:
        return self.records[leaf][x]

    def words(self) -> int:
        return sum(r.words() for row in self.records for r in row)

    def counts(self) -> dict[str, int]:
        sparse = dense = missing = 0
        for row in self.records:
            for r in row:
                if r.dense:
                    dense += 1
                    if r.pivot < 0:
                        missing += 1
                else:
                    sparse += 1
        return {"sparse": sparse, "dense": dense, "missing_pivot": missing}


def _build_ball_index(g: Graph, forest: SamplingForest,
                      leaves: list[SamplingNode], lam: int, cap: int,
                      pivots: PivotSets) -> BallIndex:
    records: list[list[SparseRecord | DenseMarker]] = []
    for leaf in leaves:
        banned = forest.leaf_graph_banned(g, leaf)
        row = [classify_ball(g, x, lam, cap, pivots.hit_mask,
                             pivots.ball_mask, banned)
               for x in range(g.n)]
        records.append(row)
    return BallIndex(lam=lam, cap=cap, records=records)


# ---------------------------------------------------------------------------
# the oracle
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class QueryReport:
    """One answered query with its auxiliary graph laid open.

    ``weights`` maps normalized vertex pairs of the auxiliary graph to
    their edge weights, ``cases`` to the branch that produced each
    weight, and ``st_case`` repeats the branch of the (s, t) pair
    itself.  ``flags`` lists sampling-failure events hit while answering;
    a flagged answer is still sound but its stretch carries no
    guarantee.
    """

    s: int
    t: int
    fails: FailureSet
    answer: int
    vertices: tuple[int, ...]
    weights: dict[tuple[int, int], int]
    cases: dict[tuple[int, int], str]
    st_case: str
    flags: tuple[str, ...]


class _QueryState:
    """Per-failure-set scratch shared by all pair evaluations."""

    __slots__ = ("fails", "surviving", "dhat_memo", "flags")

    def __init__(self, fails: FailureSet, surviving):
        self.fails = fails
        self.surviving = surviving  # list of (leaf_index, leaf_node)
        self.dhat_memo: dict[tuple[int, int], int] = {}
        self.flags: list[str] = []


class DSO:
    """Queryable oracle; use :func:`preprocess` to construct one."""

    def __init__(self, g: Graph, params: DsoParams, seed: int,
                 forest: SamplingForest, pivots: PivotSets,
                 balls: BallIndex, apsp_t: APSPTable,
                 leaves: list[SamplingNode], *, short_circuit: bool = True):
        self.g = g
        self.params = params
        self.seed = seed
        self.forest = forest
        self.pivots = pivots
        self.balls = balls
        self.apsp_t = apsp_t
        self._leaves = leaves
        self._leaf_pos = {id(leaf): i for i, leaf in enumerate(leaves)}
        self._lca = PivotTreeCache(g)
        ell = params.ell()
        self._engine_plain = expath_engine(g, apsp_t, ell, 0)
        self._engine_grainy = (expath_engine(g, apsp_t, ell, params.lam)
                               if params.lam > 0 else None)
        self._trees_plain: dict[tuple[int, int], FTTree] = {}
        self._trees_grainy: dict[tuple[int, int], FTTree] = {}
        # The short-circuit hands a pair straight to the hop-bounded
        # estimate when that estimate is at most 3L.  Either the true
        # replacement distance is below L, in which case the shortest
        # path has fewer than L edges (unit weights) and the estimate is
        # a 3-approximation of it outright, or it is at least L and the
        # estimate is at most 3L <= 3 times the distance.  Both branches
        # keep the stretch bound, so skipping the tree machinery on such
        # pairs is free.  Weighted hosts void the first branch, hence
        # the unit-weight gate.
        self._unit = bool(np.all(g.wt == 1))
        self.short_circuit = short_circuit and self._unit
        self.stats: dict[str, int] = {
            "queries": 0, "pair_evals": 0,
            "case_trivial": 0, "case_short": 0, "case_pivot": 0,
            "case_sparse": 0, "case_dense": 0, "case_uncovered": 0,
            "short_wins": 0, "tree_wins": 0,
            "ft_conservative": 0, "dense_pivot_missing": 0,
        }

    # -- plumbing -----------------------------------------------------

    def _state(self, fails: FailureSet) -> _QueryState:
        return _QueryState(fails, self.forest.surviving_leaves(fails))

    def _short_estimate(self, state: _QueryState, u: int, v: int) -> int:
        """Hop-bounded failure-surviving estimate, memoized per query."""
        if u == v:
            return 0
        key = (u, v) if u < v else (v, u)
        got = state.dhat_memo.get(key)
        if got is None:
            got = INF
            for _, leaf in state.surviving:
                est = leaf.oracle.query_modified(u, v)
                if est < got:
                    got = est
            state.dhat_memo[key] = got
        return got

    def _tree_estimate(self, state: _QueryState, a: int, b: int,
                       grainy: bool) -> int:
        """Filtered tree estimate for one pair, trees built on demand."""
        if a == b:
            return 0
        key = (a, b) if a < b else (b, a)
        trees = self._trees_grainy if grainy else self._trees_plain
        tree = trees.get(key)
        if tree is None:
            lam = self.params.lam if grainy else 0
            engine = self._engine_grainy if grainy else self._engine_plain
            tree = build_ft_tree(self.g, self.apsp_t, key, self.params.f,
                                 self.params.eps, lam, engine, self.pivots,
                                 self.params.L, ell=self.params.ell(),
                                 lca=self._lca)
            trees[key] = tree
        st: dict = {}
        val = ft_query(tree, state.fails,
                       lambda x, y, fs: self._short_estimate(state, x, y),
                       st)
        if st.get("sampling_fail"):
            state.flags.append(f"ft-conservative:{key[0]}-{key[1]}")
            self.stats["ft_conservative"] += 1
        return int(val)

    def _ball_record(self, state: _QueryState, leaf: SamplingNode,
                     x: int) -> SparseRecord | DenseMarker:
        return self.balls.record(self._leaf_pos[id(leaf)], x)

    # -- pair weights -------------------------------------------------

    def _pair_weight(self, state: _QueryState, u: int, v: int
                     ) -> tuple[int, str]:
        """Auxiliary-graph weight of {u, v} and the branch that set it."""
        self.stats["pair_evals"] += 1
        if u == v:
            self.stats["case_trivial"] += 1
            return 0, "trivial"
        short = self._short_estimate(state, u, v)
        if self.short_circuit and short <= 3 * self.params.L:
            self.stats["case_short"] += 1
            return short, "short"
        hit = self.pivots.hit_mask
        if hit[u] or hit[v]:
            far = self._tree_estimate(state, u, v, grainy=False)
            case = "pivot"
            self.stats["case_pivot"] += 1
        elif not state.surviving:
            far = INF
            case = "uncovered"
            self.stats["case_uncovered"] += 1
            state.flags.append(f"uncovered:{u}-{v}")
        else:
            dense_u = all(self._ball_record(state, leaf, u).dense
                          for _, leaf in state.surviving)
            dense_v = all(self._ball_record(state, leaf, v).dense
                          for _, leaf in state.surviving)
            if dense_u and dense_v:
                far = self._dense_weight(state, u, v)
                case = "dense"
                self.stats["case_dense"] += 1
            else:
                x, y = (u, v) if not dense_u else (v, u)
                far = self._sparse_weight(state, x, y)
                case = "sparse"
                self.stats["case_sparse"] += 1
        weight = min(short, far)
        if short <= far:
            self.stats["short_wins"] += 1
        else:
            self.stats["tree_wins"] += 1
        return weight, case

    def _sparse_weight(self, state: _QueryState, x: int, y: int) -> int:
        """Route x through a hit pivot of one of its sparse ball records.

        Minimizes short(x, b) + tree(b, y) over the union, across
        surviving leaves whose ball around x is sparse, of the recorded
        hit pivots b.  Empty records leave the branch unreachable, which
        the overall minimum absorbs.
        """
        cands: set[int] = set()
        for _, leaf in state.surviving:
            rec = self._ball_record(state, leaf, x)
            if not rec.dense:
                cands.update(rec.pivots)
        best = INF
        for b in sorted(cands):
            head = self._short_estimate(state, x, b)
            if head >= best or head >= INF:
                continue
            tail = self._tree_estimate(state, b, y, grainy=False)
            if head + tail < best:
                best = head + tail
        return best

    def _dense_weight(self, state: _QueryState, u: int, v: int) -> int:
        """Bridge two dense balls through their recorded ball pivots.

        Both endpoints only reach their markers, so the tree estimate
        between the two pivots is padded by one ball radius per side.
        The first surviving leaf holding a valid marker supplies each
        pivot; with every surviving record dense and lam > 0 this fails
        only when the ball-pivot sample missed a dense ball, which is
        flagged as a sampling failure.
        """
        if self.params.lam == 0:
            state.flags.append(f"dense-disabled:{u}-{v}")
            return INF
        bu = bv = -1
        for _, leaf in state.surviving:
            rec = self._ball_record(state, leaf, u)
            if rec.pivot >= 0:
                bu = rec.pivot
                break
        for _, leaf in state.surviving:
            rec = self._ball_record(state, leaf, v)
            if rec.pivot >= 0:
                bv = rec.pivot
                break
        if bu < 0 or bv < 0:
            side = u if bu < 0 else v
            state.flags.append(f"dense-pivot-missing:{side}")
            self.stats["dense_pivot_missing"] += 1
            return INF
        bridge = self._tree_estimate(state, bu, bv, grainy=True)
        if bridge >= INF:
            return INF
        return bridge + 2 * self.params.lam

    # -- public api ---------------------------------------------------

    def edge_weight(self, u: int, v: int, fails) -> int:
        """Auxiliary-graph weight of one pair under a failure set."""
        fails = fails if isinstance(fails, FailureSet) else FailureSet.of(fails)
        self._check_query(u, v, fails)
        state = self._state(fails)
        weight, _ = self._pair_weight(state, u, v)
        return weight

    def query(self, s: int, t: int, fails) -> int:
        """Replacement-distance estimate for (s, t) under the failures."""
        return self.query_report(s, t, fails).answer

    def query_report(self, s: int, t: int, fails) -> QueryReport:
        """Full answer: auxiliary graph, per-pair branches, and flags."""
        fails = fails if isinstance(fails, FailureSet) else FailureSet.of(fails)
        self._check_query(s, t, fails)
        self.stats["queries"] += 1
        if s == t:
            return QueryReport(s=s, t=t, fails=fails, answer=0,
                               vertices=(s,), weights={}, cases={},
                               st_case="trivial", flags=())
        state = self._state(fails)
        verts = [s, t]
        for x in fails.vertices(self.g):
            if x != s and x != t:
                verts.append(x)
        weights: dict[tuple[int, int], int] = {}
        cases: dict[tuple[int, int], str] = {}
        for i, u in enumerate(verts):
            for v in verts[i + 1:]:
                w, case = self._pair_weight(state, u, v)
                key = (u, v) if u < v else (v, u)
                weights[key] = w
                cases[key] = case
        answer = _aux_dijkstra(verts, weights, s, t)
        st_key = (s, t) if s < t else (t, s)
        return QueryReport(s=s, t=t, fails=fails, answer=answer,
                           vertices=tuple(verts), weights=weights,
                           cases=cases, st_case=cases[st_key],
                           flags=tuple(state.flags))

    def _check_query(self, s: int, t: int, fails: FailureSet) -> None:
        n = self.g.n
        if not (0 <= s < n and 0 <= t < n):
            raise ValueError("query vertex out of range")
        if len(fails) > self.params.f:
            raise ValueError(
                f"at most f={self.params.f} failures supported per query")
        for e in fails.eids:
            if not 0 <= e < self.g.m:
                raise ValueError(f"edge id {e} not in graph")

    # -- accounting ---------------------------------------------------

    def trees_built(self) -> dict[str, int]:
        return {"plain": len(self._trees_plain),
                "grainy": len(self._trees_grainy)}

    def engine_calls(self) -> int:
        its = list(self._trees_plain.values())
        its += list(self._trees_grainy.values())
        return sum(t.stats["expath_calls"] for t in its)

    def space_words(self) -> dict:
        """Measured machine words, itemized.

        ``oracle_words`` counts the persistent query-serving structure:
        forest, ball index, pivot masks, materialized tree nodes, and
        the pivot certification trees.  The all-pairs table is listed
        separately: it is preprocessing scratch that the lazy tree
        factory keeps alive, and a deployment that materializes its
        trees up front would drop it.
        """
        fw = self.forest.space_words()
        tree_words = sum(t.space_words() for t in self._trees_plain.values())
        tree_words += sum(t.space_words() for t in self._trees_grainy.values())
        spt_words = sum(_np_attr_words(t) for t in self._lca._trees.values())
        pivot_words = _np_words(self.pivots.hit_mask, self.pivots.ball_mask)
        ball_words = self.balls.words()
        oracle = (fw["total_words"] + ball_words + pivot_words
                  + tree_words + spt_words)
        apsp_words = _np_words(self.apsp_t.dist, self.apsp_t.pred,
                               self.apsp_t.sig_hi, self.apsp_t.sig_lo)
        return {
            "forest_words": fw["total_words"],
            "ball_words": ball_words,
            "pivot_words": pivot_words,
            "tree_words": tree_words,
            "pivot_spt_words": spt_words,
            "oracle_words": oracle,
            "apsp_scratch_words": apsp_words,
            "grand_total_words": oracle + apsp_words,
        }


def _np_words(*arrays: np.ndarray) -> int:
    return sum((a.nbytes + 7) // 8 for a in arrays if a is not None)


def _np_attr_words(obj) -> int:
    slots = getattr(type(obj), "__slots__", None)
    names = slots if slots is not None else vars(obj).keys()
    total = 0
    for name in names:
        val = getattr(obj, name, None)
        if isinstance(val, np.ndarray):
            total += _np_words(val)
    return total


def _aux_dijkstra(verts: list[int], weights: dict[tuple[int, int], int],
                  s: int, t: int) -> int:
    """Shortest s-t distance in the small complete auxiliary graph."""
    pos = {v: i for i, v in enumerate(verts)}
    q = len(verts)
    dist = [INF] * q
    dist[pos[s]] = 0
    heap = [(0, pos[s])]
    done = [False] * q
    while heap:
        d, i = heapq.heappop(heap)
        if done[i]:
            continue
        done[i] = True
        if i == pos[t]:
            return d
        u = verts[i]
        for j in range(q):
            if done[j]:
                continue
            v = verts[j]
            key = (u, v) if u < v else (v, u)
            w = weights.get(key, INF)
            if w >= INF:
                continue
            nd = d + w
            if nd < dist[j]:
                dist[j] = nd
                heapq.heappush(heap, (nd, j))
    return INF


# ---------------------------------------------------------------------------
# preprocessing
# ---------------------------------------------------------------------------

def _enumerate_leaves(forest: SamplingForest) -> list[SamplingNode]:
    """All leaf nodes in deterministic tree-then-child order."""
    leaves: list[SamplingNode] = []

    def walk(node: SamplingNode) -> None:
        if node.is_leaf:
            leaves.append(node)
        for child in node.children:
            walk(child)

    for tree in forest.trees:
        walk(tree.root)
    return leaves


def preprocess(g: Graph, f: int, alpha: float, eps: float, seed: int = 0, *,
               budget_words: int = 1_500_000_000,
               L_override: int | None = None,
               lam_override: int | None = None,
               c_forest: float = 1.0, c_hit: float = 1.0,
               c_ball: float = 1.0, short_circuit: bool = True) -> DSO:
    """Build the oracle for up to f simultaneous edge failures.

    All randomness descends from ``seed`` through labeled subseeds, so
    equal (graph, parameters, seed) rebuild an identical oracle.  The
    word budget guards the covering forest, much the largest product;
    exceeding it raises :class:`MemoryBudgetError` before heavy work
    starts.  The three constants scale the forest, ball-pivot, and
    hit-pivot sampling rates.
    """
    params = derive_dso_params(g.n, f, alpha, eps, L_override=L_override,
                               lam_override=lam_override)
    sub = stream(seed, "dso", "subseeds")
    hier_seed, forest_seed, pivot_seed = (
        int(x) for x in sub.integers(0, 1 << 62, 3))
    hier = sample_hierarchy(g.n, params.k, hier_seed)
    fparams = derive_params(g.n, params.L, f, params.k, c_forest)
    forest = build_forest(g, fparams, hier, forest_seed,
                          budget_words=budget_words)
    pivots = sample_pivots(g, f, params.L, params.lam, c_ball, c_hit,
                           pivot_seed)
    leaves = _enumerate_leaves(forest)
    ball_budget = len(leaves) * g.n * (params.cap() + 2)
    if ball_budget > budget_words:
        raise MemoryBudgetError(
            f"projected {ball_budget:.3g} ball-index words exceed budget "
            f"{budget_words:.3g}; lower C or the sensitivity")
    balls = _build_ball_index(g, forest, leaves, params.lam, params.cap(),
                              pivots)
    apsp_t = apsp(g)
    return DSO(g, params, seed, forest, pivots, balls, apsp_t, leaves,
               short_circuit=short_circuit)
