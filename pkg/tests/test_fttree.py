"""Fault-tolerant trees: netpoints, parts, certificates, and query walks."""

from __future__ import annotations

from fractions import Fraction

import numpy as np
import pytest

from faultdist import FailureSet, Graph, INF, apsp, canonical_sssp
from faultdist.fttree import (
    PivotTreeCache,
    build_ft_tree,
    compute_netpoints,
    expath_engine,
    ft_query,
    node_check,
    sample_pivots,
)
from faultdist.reference import (
    brute_faraway_decomposable,
    exact_replacement,
)
from faultdist.seeding import stream


def chain(k: int) -> Graph:
    return Graph.from_edges(k + 1, [(i, i + 1) for i in range(k)])


def gnp(n: int, p: float, seed: int) -> Graph:
    rng = stream(seed, "gnp")
    edges = [(u, v) for u in range(n) for v in range(u + 1, n)
             if rng.random() < p]
    return Graph.from_edges(n, edges)


def connected_gnp(n: int, p: float, seed: int) -> Graph:
    for probe in range(100):
        g = gnp(n, p, seed * 1000 + probe)
        if g.m and canonical_sssp(g, 0).dist.max() < INF:
            return g
    raise AssertionError("no connected sample found")


def all_hit_pivots(g: Graph, f: int, cap: int, lam: int, seed: int = 3):
    """Part-hitting probability clamped to one, so pivots never go missing."""
    return sample_pivots(g, f=f, cap=cap, lam=lam, c_ball=1.0, c_hit=1e9,
                         seed=seed)


def exact_short_dso(g: Graph):
    def query(v: int, w: int, fails: FailureSet) -> int:
        return exact_replacement(g, v, w, fails)
    return query


def literal_netpoints(g: Graph, walk: list[int], eps, lam: int) -> tuple[int, ...]:
    """Verbatim reading of the netpoint rule, one fresh power loop per pair."""
    q = len(walk)
    if q == 1:
        return (0,)
    pw = [0]
    for a, b in zip(walk, walk[1:]):
        pw.append(pw[-1] + int(g.wt[g.eid_between(a, b)]))
    if lam > 0 and pw[-1] <= 2 * lam:
        return tuple(range(q))
    base = 1 + Fraction(str(eps)) / 36
    left = min(lam, q - 1)
    right = max(0, q - 1 - lam)
    pts = set(range(left + 1)) | set(range(right, q))
    for j in range(left, right):
        w0, w1 = pw[j] - pw[left], pw[j + 1] - pw[left]
        tau = Fraction(1)
        while tau <= w0:
            tau *= base
        if tau <= w1:
            pts.update((j, j + 1))
    for j in range(right, left, -1):
        w0, w1 = pw[right] - pw[j], pw[right] - pw[j - 1]
        tau = Fraction(1)
        while tau <= w0:
            tau *= base
        if tau <= w1:
            pts.update((j - 1, j))
    return tuple(sorted(pts))


# ---------------------------------------------------------------------------
# pivot sampling
# ---------------------------------------------------------------------------


def test_pivot_probabilities_and_determinism():
    # [TRIVIAL] direct echo of the sampling rates, plus reproducibility.
    g = chain(63)  # n = 64, log2 = 6
    piv = sample_pivots(g, f=2, cap=4, lam=0, c_ball=1.0, c_hit=0.25, seed=11)
    assert piv.hit_prob == pytest.approx(0.25 * 2 * 6 / 4)
    assert piv.ball_prob == 0.0 and piv.counts()[1] == 0
    again = sample_pivots(g, f=2, cap=4, lam=0, c_ball=1.0, c_hit=0.25, seed=11)
    assert np.array_equal(piv.hit_mask, again.hit_mask)

    grainy = sample_pivots(g, f=2, cap=4, lam=2, c_ball=0.5, c_hit=0.1, seed=11)
    assert grainy.ball_prob == pytest.approx(0.5 * 2 * 6 / (2 * 4))
    assert grainy.hit_prob == pytest.approx(0.1 * 2 * 6 / 2)
    clamped = sample_pivots(g, f=2, cap=4, lam=0, c_ball=1.0, c_hit=1e9, seed=5)
    assert clamped.hit_prob == 1.0
    assert clamped.counts()[0] == g.n


# ---------------------------------------------------------------------------
# netpoints
# ---------------------------------------------------------------------------


def test_netpoints_trivial_walks():
    # [TRIVIAL] endpoints are always netpoints; short grainy walks mark all.
    g = chain(6)
    assert compute_netpoints(g, [3], eps=0.9, lam=0).positions == (0,)
    assert compute_netpoints(g, [2, 3], eps=0.9, lam=0).positions == (0, 1)
    walk = list(range(6))  # five edges, total 5 <= 2 * 3
    assert compute_netpoints(g, walk, eps=0.9, lam=3).positions == tuple(range(6))


def test_netpoints_long_chain_frozen():
    # [DERIVED] unweighted 200-edge walk, eps 3.6 so the growth base is
    # exactly 11/10; frozen from an exact rational scan of the rule.
    g = chain(200)
    pts = set(compute_netpoints(g, list(range(201)), eps=3.6, lam=0).positions)
    assert len(pts) == 130
    assert all(i in pts for i in range(27))
    for gap in (27, 32, 33, 36, 39, 40):
        assert gap not in pts
    for kept in (28, 29, 30, 31, 34, 35, 37, 38):
        assert kept in pts
    # the rule scans from both ends, so the marking is mirror symmetric
    assert all((200 - i in pts) == (i in pts) for i in range(201))


def test_netpoints_grainy_chain_wholesale_ends():
    # [DERIVED] positive granularity marks the first and last lam positions
    # outright and anchors the power scans just inside them.
    g = chain(40)
    pts = compute_netpoints(g, list(range(41)), eps=3.6, lam=3).positions
    assert set(range(4)) <= set(pts) and {37, 38, 39, 40} <= set(pts)
    assert pts == literal_netpoints(g, list(range(41)), 3.6, 3)


def test_netpoints_match_literal_scan_on_weighted_walks():
    # [DERIVED] production scan (single advancing power pointer) against a
    # verbatim per-pair reading of the rule, over random weighted chains.
    for seed in range(8):
        rng = stream(seed, "netpoint-walks")
        k = int(rng.integers(2, 50))
        weights = [int(x) for x in rng.integers(1, 5, size=k)]
        g = Graph.from_edges(k + 1, [(i, i + 1) for i in range(k)], weights)
        walk = list(range(k + 1))
        for lam in (0, 2):
            for eps in (0.9, 3.6):
                got = compute_netpoints(g, walk, eps, lam).positions
                assert got == literal_netpoints(g, walk, eps, lam)


# ---------------------------------------------------------------------------
# construction invariants
# ---------------------------------------------------------------------------


def test_root_parts_partition_the_stored_walk():
    for seed in range(5):
        g = connected_gnp(12, 0.3, seed)
        t = apsp(g)
        piv = all_hit_pivots(g, f=2, cap=2, lam=0)
        eng = expath_engine(g, t, ell=5, lam=0)
        tree = build_ft_tree(g, t, (0, g.n - 1), f=2, eps=0.9, lam=0,
                             engine=eng, pivots=piv, cap=2)
        root = tree.root
        assert root.has_path
        parts = root.parts
        assert sum(p.weight for p in parts) == root.total
        assert parts[0].v == 0 and parts[-1].w == g.n - 1
        assert parts[0].v_on_net and parts[-1].w_on_net
        for a, b in zip(parts, parts[1:]):
            assert a.w == b.v
            assert a.seg <= b.seg
        for p in parts:
            if p.kind == "sp":
                assert p.weight == p.base_dist
            else:
                assert p.n_edges == 1
        # the per-segment edge lists recover the walk's edges exactly
        eids = []
        for s in range(root.seg_count):
            eids.extend(tree.segment_eids(root, s))
        _, structure = eng(g.no_mask(), 0, g.n - 1)
        walk = structure.expand(t)
        want = sorted(int(g.eid_between(a, b)) for a, b in zip(walk, walk[1:]))
        assert sorted(eids) == want
        assert tree.stats["segment_violations"] == 0


def test_zero_budget_tree_is_a_single_root():
    # [TRIVIAL] with no failures to support, the root is already a leaf.
    g = chain(4)
    t = apsp(g)
    piv = all_hit_pivots(g, f=0, cap=1, lam=0)
    tree = build_ft_tree(g, t, (0, 4), f=0, eps=0.9, lam=0,
                         engine=expath_engine(g, t, ell=1, lam=0),
                         pivots=piv, cap=1)
    assert tree.root.depth == 0 and tree.built_nodes() == 1
    st = {}
    got = ft_query(tree, FailureSet.of([0]), exact_short_dso(g), st)
    assert got == tree.root.total == 4
    assert st["visited"] == 1 and tree.built_nodes() == 1


def test_bridge_failure_reaches_an_empty_leaf():
    # [TRIVIAL] cutting a chain leaves the child pairless, so the query
    # reports unreachable, matching the exact replacement distance.
    g = chain(2)
    t = apsp(g)
    piv = all_hit_pivots(g, f=1, cap=1, lam=0)
    tree = build_ft_tree(g, t, (0, 2), f=1, eps=0.9, lam=0,
                         engine=expath_engine(g, t, ell=3, lam=0),
                         pivots=piv, cap=1)
    F = FailureSet.of([g.eid_between(0, 1)])
    st = {}
    assert ft_query(tree, F, exact_short_dso(g), st) == INF
    assert exact_replacement(g, 0, 2, F) == INF
    assert st["visited"] <= 2 and not st["sampling_fail"]


# ---------------------------------------------------------------------------
# certificates on long parts
# ---------------------------------------------------------------------------


def pendant_chain():
    """A 60-edge chain with one pendant vertex hanging off the middle."""
    edges = [(i, i + 1) for i in range(60)] + [(30, 61)]
    return Graph.from_edges(62, edges)


def build_pendant_tree(c_hit: float):
    g = pendant_chain()
    t = apsp(g)
    piv = sample_pivots(g, f=1, cap=1, lam=0, c_ball=1.0, c_hit=c_hit, seed=3)
    tree = build_ft_tree(g, t, (0, 60), f=1, eps=3.6, lam=0,
                         engine=expath_engine(g, t, ell=3, lam=0),
                         pivots=piv, cap=1)
    return g, t, tree


def test_long_parts_certified_through_pivot_tree():
    # [DERIVED] with eps 3.6 the 60-edge chain keeps every position up to 26
    # from either end but skips 27 and 33, leaving exactly two two-edge
    # segments (26..28 and 32..34); at hop cap 1 those are the long parts.
    g, t, tree = build_pendant_tree(c_hit=1e9)
    root = tree.root
    assert root.total == 60
    pts = set(compute_netpoints(g, list(range(61)), eps=3.6, lam=0).positions)
    assert set(range(61)) - pts == {27, 33}
    long_parts = [p for p in root.parts if p.long]
    assert [(p.v, p.w) for p in long_parts] == [(26, 28), (32, 34)]
    assert all(p.pivot is not None for p in long_parts)
    assert tree.stats["missing_pivot_parts"] == 0

    sd = exact_short_dso(g)
    seg_of = {(p.v, p.w): p.seg for p in root.parts}
    # an edge inside a long part is caught by the ancestor tests
    for inner in ((26, 27), (27, 28)):
        res = node_check(tree, root, FailureSet.of([g.eid_between(*inner)]), sd)
        assert not res.ok and res.failed_seg == seg_of[(26, 28)]
        assert not res.conservative
    # with hits in both long parts, the first in walk order names the segment
    both = FailureSet.of([g.eid_between(27, 28), g.eid_between(32, 33)])
    res = node_check(tree, root, both, sd)
    assert not res.ok and res.failed_seg == seg_of[(26, 28)]
    # the pendant edge hangs on the pivot tree but off the stored path
    res = node_check(tree, root, FailureSet.of([g.eid_between(30, 61)]), sd)
    assert res.ok and res.bound == 3 * 60

    # end to end: a failure inside a long part cuts the chain entirely
    F = FailureSet.of([g.eid_between(26, 27)])
    st = {}
    assert ft_query(tree, F, sd, st) == INF == exact_replacement(g, 0, 60, F)
    assert st["visited"] == 2 and not st["sampling_fail"]
    # and an off-path failure certifies the tripled stored length at the root
    st = {}
    assert ft_query(tree, FailureSet.of([g.eid_between(30, 61)]), sd, st) == 180
    assert st["visited"] == 1


def test_missing_pivot_fails_conservatively():
    # With no part-hitting pivots at all, a long part cannot be certified:
    # the check must fail it (never trust an uncheckable part), the query
    # descends on an intact segment, and the answer is flagged so callers
    # can exclude it from all guarantee accounting.  Here the failing edge
    # lies off every 0-60 path, so the flagged answer happens to stay
    # sound; in general a forced descent voids both bounds.
    g, t, tree = build_pendant_tree(c_hit=0.0)
    root = tree.root
    long_parts = [p for p in root.parts if p.long]
    assert long_parts and all(p.pivot is None for p in long_parts)
    assert tree.stats["missing_pivot_parts"] == len(long_parts)

    sd = exact_short_dso(g)
    off_path = FailureSet.of([g.eid_between(30, 61)])
    res = node_check(tree, root, off_path, sd)
    assert not res.ok and res.conservative
    assert res.failed_seg == long_parts[0].seg
    st = {}
    got = ft_query(tree, off_path, sd, st)
    assert st["sampling_fail"]
    assert got == INF  # the forced descent cuts the only chain
    assert got >= exact_replacement(g, 0, 60, off_path)


# ---------------------------------------------------------------------------
# query sandwich on small graphs
# ---------------------------------------------------------------------------


def test_query_sandwich_against_reference():
    # [DERIVED] with exact part checks the walk down the tree returns a
    # value between the true replacement distance and three times the
    # shortest far-away decomposable length, whenever the latter is finite.
    f, eps, ell = 2, 0.9, 5
    checked = 0
    for seed in range(3):
        g = connected_gnp(8, 0.3, seed)
        t = apsp(g)
        piv = all_hit_pivots(g, f=f, cap=2, lam=0)
        eng = expath_engine(g, t, ell=ell, lam=0)
        sd = exact_short_dso(g)
        lca = PivotTreeCache(g)
        rng = stream(seed, "ft-sandwich")
        pairs = [(0, g.n - 1), (1, g.n - 2), (0, g.n // 2), (2, g.n - 1)]
        for u, v in pairs:
            if u == v:
                continue
            tree = build_ft_tree(g, t, (u, v), f=f, eps=eps, lam=0,
                                 engine=eng, pivots=piv, cap=2, lca=lca)
            fsets = [FailureSet.of([])]
            fsets += [FailureSet.of(rng.integers(0, g.m, size=k))
                      for k in (1, 1, 2, 2)]
            for F in fsets:
                st = {}
                got = ft_query(tree, F, sd, st)
                assert st["visited"] <= f + 1
                assert not st["sampling_fail"]
                exact = exact_replacement(g, u, v, F)
                assert exact <= got
                far = brute_faraway_decomposable(g, t, u, v, F, ell, eps)
                if far < INF:
                    assert got <= 3 * far
                checked += 1
            assert tree.stats["segment_violations"] == 0
            assert tree.stats["missing_pivot_parts"] == 0
    assert checked >= 50


def test_repeat_queries_reuse_memoized_nodes():
    g = connected_gnp(10, 0.35, 4)
    t = apsp(g)
    piv = all_hit_pivots(g, f=2, cap=2, lam=0)
    tree = build_ft_tree(g, t, (0, g.n - 1), f=2, eps=0.9, lam=0,
                         engine=expath_engine(g, t, ell=5, lam=0),
                         pivots=piv, cap=2)
    sd = exact_short_dso(g)
    F = FailureSet.of([0, g.m - 1])
    st = {}
    first = ft_query(tree, F, sd, st)
    calls = tree.stats["expath_calls"]
    again = ft_query(tree, F, sd)
    assert first == again and tree.stats["expath_calls"] == calls
    # the node accessor resolves the same memoized objects the query used
    assert tree.node(st["node_path"]) is tree._nodes[st["node_path"]]
    with pytest.raises(IndexError):
        tree.node((99,))


def test_rebuilt_tree_answers_identically():
    g = connected_gnp(9, 0.35, 8)
    t = apsp(g)
    sd = exact_short_dso(g)
    rng = stream(8, "ft-determinism")
    fsets = [FailureSet.of(rng.integers(0, g.m, size=2)) for _ in range(6)]

    def fresh():
        piv = all_hit_pivots(g, f=2, cap=2, lam=0)
        return build_ft_tree(g, t, (0, g.n - 1), f=2, eps=0.9, lam=0,
                             engine=expath_engine(g, t, ell=5, lam=0),
                             pivots=piv, cap=2)

    one, two = fresh(), fresh()
    for F in fsets:
        s1, s2 = {}, {}
        assert ft_query(one, F, sd, s1) == ft_query(two, F, sd, s2)
        assert s1["node_path"] == s2["node_path"]
    assert one.space_words() == two.space_words() > 0


# ---------------------------------------------------------------------------
# granularity
# ---------------------------------------------------------------------------


def test_grainy_tree_prefix_parts_are_single_edges():
    # With positive granularity the first and last lam positions are all
    # netpoints, so prefix and suffix walk edges always land in their own
    # single-edge parts, checked by identity.  With no failures every part
    # passes and the root certifies exactly three times its stored length.
    lam = 2
    for seed in range(3):
        g = connected_gnp(10, 0.35, seed + 20)
        t = apsp(g)
        piv = all_hit_pivots(g, f=2, cap=2, lam=lam)
        eng = expath_engine(g, t, ell=5, lam=lam)
        tree = build_ft_tree(g, t, (0, g.n - 1), f=2, eps=0.9, lam=lam,
                             engine=eng, pivots=piv, cap=2)
        root = tree.root
        for p in root.parts:
            if p.kind == "walk":
                assert p.n_edges == 1 and p.v_on_net and p.w_on_net
        sd = exact_short_dso(g)
        got = ft_query(tree, FailureSet.of([]), sd)
        assert got == 3 * root.total
        assert root.total <= t.d(0, g.n - 1)
        # failures keep the answer sound even in grainy trees
        rng = stream(seed, "grainy-ft")
        for _ in range(4):
            F = FailureSet.of(rng.integers(0, g.m, size=2))
            st = {}
            got = ft_query(tree, F, sd, st)
            assert got >= exact_replacement(g, 0, g.n - 1, F)
            assert st["visited"] <= 3
        assert tree.stats["segment_violations"] == 0
