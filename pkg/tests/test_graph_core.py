"""Graph core: CSR, canonical shortest paths, APSP, LCA trees, DIMACS io."""

from __future__ import annotations

import numpy as np
import networkx as nx
import pytest
from hypothesis import given, settings, strategies as st

import faultdist as fd
from faultdist.seeding import stream


def random_graph(seed: int, n_lo: int = 6, n_hi: int = 50,
                 weighted: bool = False) -> fd.Graph:
    rng = stream(seed, "test-graph")
    n = int(rng.integers(n_lo, n_hi + 1))
    p = float(rng.uniform(0.05, 0.3))
    edges = [(u, v) for u in range(n) for v in range(u + 1, n)
             if rng.random() < p]
    if not edges:
        edges = [(0, 1)]
    weights = rng.integers(1, 9, size=len(edges)) if weighted else None
    return fd.Graph.from_edges(n, edges, weights)


def to_networkx(g: fd.Graph) -> nx.Graph:
    h = nx.Graph()
    h.add_nodes_from(range(g.n))
    for e in range(g.m):
        h.add_edge(int(g.eu[e]), int(g.ev[e]), weight=int(g.wt[e]))
    return h


def test_sssp_matches_networkx():
    for seed in range(12):
        g = random_graph(seed, weighted=(seed % 2 == 0))
        h = to_networkx(g)
        src = seed % g.n
        res = fd.canonical_sssp(g, src)
        lengths = nx.single_source_dijkstra_path_length(h, src)
        for v in range(g.n):
            want = lengths.get(v, fd.INF)
            assert res.dist[v] == want


def test_sssp_under_mask_matches_networkx():
    for seed in range(8):
        g = random_graph(seed + 100)
        rng = stream(seed, "mask")
        kill = rng.choice(g.m, size=min(3, g.m), replace=False)
        f = fd.FailureSet.of(kill)
        h = to_networkx(g)
        for e in f.eids:
            h.remove_edge(int(g.eu[e]), int(g.ev[e]))
        src = seed % g.n
        dist, _ = fd.canonical_dijkstra(g, src, masked=f)
        lengths = nx.single_source_dijkstra_path_length(h, src)
        for v in range(g.n):
            assert dist[v] == lengths.get(v, fd.INF)


def test_canonical_path_is_valid_and_symmetric():
    for seed in range(8):
        g = random_graph(seed + 200)
        t = fd.apsp(g)
        rng = stream(seed, "pairs")
        for _ in range(40):
            s, u = int(rng.integers(g.n)), int(rng.integers(g.n))
            pth = t.path(s, u)
            if pth is None:
                assert t.d(u, s) == fd.INF
                continue
            # consecutive vertices joined by real edges, length adds up
            total = 0
            for a, b in zip(pth, pth[1:]):
                e = g.eid_between(a, b)
                assert e is not None
                total += int(g.wt[e])
            assert total == t.d(s, u) == t.d(u, s)
            back = t.path(u, s)
            assert back == list(reversed(pth))


def test_canonical_subpath_property():
    # every prefix of a canonical path is the canonical path to its endpoint
    for seed in range(8):
        g = random_graph(seed + 300)
        t = fd.apsp(g)
        rng = stream(seed, "subpath")
        for _ in range(30):
            s, u = int(rng.integers(g.n)), int(rng.integers(g.n))
            pth = t.path(s, u)
            if pth is None or len(pth) < 3:
                continue
            for i in range(1, len(pth)):
                assert t.path(s, pth[i]) == pth[: i + 1]
                assert t.on_canonical(s, pth[i], u)
            # vertices off the path fail the exact membership test
            on = set(pth)
            for v in range(g.n):
                if v not in on:
                    assert not t.on_canonical(s, v, u)


def test_canonical_choice_survives_masking():
    # if the canonical path avoids the failures and the distance is
    # unchanged, the masked search must return the same path
    for seed in range(8):
        g = random_graph(seed + 400)
        t = fd.apsp(g)
        rng = stream(seed, "inherit")
        for _ in range(40):
            s, u = int(rng.integers(g.n)), int(rng.integers(g.n))
            pth = t.path(s, u)
            if pth is None:
                continue
            used = {g.eid_between(a, b) for a, b in zip(pth, pth[1:])}
            free = [e for e in range(g.m) if e not in used]
            if not free:
                continue
            kill = rng.choice(len(free), size=min(2, len(free)), replace=False)
            f = fd.FailureSet.of([free[i] for i in kill])
            res = fd.canonical_sssp(g, s, f.mask(g))
            if res.dist[u] == t.d(s, u):
                assert res.path_to(u) == pth


def test_adjacency_order_does_not_change_canonical_paths():
    for seed in range(6):
        g = random_graph(seed + 500)
        edges = [(int(g.eu[e]), int(g.ev[e])) for e in range(g.m)]
        g2 = fd.Graph.from_edges(g.n, edges, adjacency_seed=seed)
        assert not np.array_equal(g.nbr, g2.nbr) or g.m <= 1
        for src in range(0, g.n, 3):
            r1 = fd.canonical_sssp(g, src)
            r2 = fd.canonical_sssp(g2, src)
            assert np.array_equal(r1.dist, r2.dist)
            assert np.array_equal(r1.pred, r2.pred)
            assert np.array_equal(r1.prede, r2.prede)


def test_hop_bounded_examples_and_monotonicity():
    # 5-cycle: within one hop of 0 only 1 and 4 are reachable
    g = fd.Graph.from_edges(5, [(0, 1), (1, 2), (2, 3), (3, 4), (4, 0)])
    d1 = fd.hop_bounded_dist(g, 0, 1)
    assert d1.tolist() == [0, 1, fd.INF, fd.INF, 1]
    d2 = fd.hop_bounded_dist(g, 0, 2)
    assert d2.tolist() == [0, 1, 2, 2, 1]
    for seed in range(6):
        gg = random_graph(seed + 600, weighted=True)
        full = fd.canonical_sssp(gg, 0).dist
        prev = fd.hop_bounded_dist(gg, 0, 0)
        assert prev[0] == 0 and (prev[1:] >= fd.INF).all()
        for h in range(1, gg.n + 1):
            cur = fd.hop_bounded_dist(gg, 0, h)
            assert (cur <= prev).all()
            assert (cur >= full).all()
            prev = cur
        assert np.array_equal(prev, full)


def test_hop_bounded_prefers_short_heavy_over_long_light():
    # one hop: direct weight-5 edge; two hops: 1+1 path
    g = fd.Graph.from_edges(3, [(0, 2), (0, 1), (1, 2)], weights=[5, 1, 1])
    assert fd.hop_bounded_dist(g, 0, 1)[2] == 5
    assert fd.hop_bounded_dist(g, 0, 2)[2] == 2


def test_apsp_agrees_with_sssp():
    for seed in range(6):
        g = random_graph(seed + 700, weighted=True)
        t = fd.apsp(g)
        for src in range(0, g.n, 4):
            res = fd.canonical_sssp(g, src)
            got = np.where(t.dist[src] >= fd.INF32, fd.INF,
                           t.dist[src].astype(np.int64))
            assert np.array_equal(got, res.dist)
            for v in range(g.n):
                if res.dist[v] < fd.INF and v != src:
                    assert t.pred[src, v] == res.pred[v]


def test_lca_matches_naive_walk():
    for seed in range(6):
        g = random_graph(seed + 800)
        tree = fd.SPTreeWithLCA(g, 0)
        parent = tree.parent

        def naive(u, v):
            if not (tree.in_tree[u] and tree.in_tree[v]):
                return -1
            au = set()
            x = u
            while True:
                au.add(x)
                if x == 0:
                    break
                x = int(parent[x])
            x = v
            while x not in au:
                x = int(parent[x])
            return x

        rng = stream(seed, "lca")
        for _ in range(150):
            u, v = int(rng.integers(g.n)), int(rng.integers(g.n))
            assert tree.lca(u, v) == naive(u, v)


def test_edge_on_root_concat_matches_reconstruction():
    for seed in range(6):
        g = random_graph(seed + 900)
        t = fd.apsp(g)
        root = seed % g.n
        tree = fd.SPTreeWithLCA(g, root, None)
        rng = stream(seed, "concat")
        for _ in range(60):
            v, w = int(rng.integers(g.n)), int(rng.integers(g.n))
            pv, pw = t.path(v, root), t.path(root, w)
            if pv is None or pw is None:
                continue
            walk = pv + pw[1:]
            on_walk = {frozenset(p) for p in zip(walk, walk[1:])}
            for e in range(g.m):
                a, b = g.endpoints(e)
                want = frozenset((a, b)) in on_walk
                assert tree.edge_on_path(g, v, w, e) == want


def test_sptree_respects_mask():
    g = fd.Graph.from_edges(4, [(0, 1), (1, 2), (2, 3), (3, 0)])
    f = fd.FailureSet.of([g.eid_between(3, 0)])
    tree = fd.SPTreeWithLCA(g, 0, f.mask(g))
    assert tree.depth[3] == 3
    assert tree.parent[3] == 2


def test_failure_set_basics():
    g = fd.Graph.from_edges(3, [(0, 1), (1, 2)])
    f = fd.FailureSet.of([1, 1, 0])
    assert f.eids == (0, 1) and len(f) == 2
    assert f.vertices(g) == [0, 1, 2]
    assert f.mask(g).tolist() == [1, 1]
    with pytest.raises(ValueError):
        fd.FailureSet.of([5]).mask(g)
    assert len(fd.EMPTY_FAILURE) == 0


def test_from_edges_rejects_bad_input():
    with pytest.raises(fd.GraphFormatError, match="self-loop"):
        fd.Graph.from_edges(3, [(1, 1)])
    with pytest.raises(fd.GraphFormatError, match="duplicate"):
        fd.Graph.from_edges(3, [(0, 1), (1, 0)])
    with pytest.raises(fd.GraphFormatError, match="out of range"):
        fd.Graph.from_edges(3, [(0, 3)])
    with pytest.raises(fd.GraphFormatError, match="positive"):
        fd.Graph.from_edges(3, [(0, 1)], weights=[0])


def test_dimacs_round_trip():
    for seed in range(6):
        g = random_graph(seed + 1000, weighted=True)
        g2 = fd.load_dimacs(fd.dump_dimacs(g))
        assert g2.n == g.n and g2.m == g.m
        assert np.array_equal(g2.eu, g.eu)
        assert np.array_equal(g2.ev, g.ev)
        assert np.array_equal(g2.wt, g.wt)
        assert np.array_equal(g2.key_hi, g.key_hi)


def test_dimacs_reverse_arcs_are_one_edge():
    text = "c both arc directions present\np sp 3 2\na 1 2 4\na 2 1 4\na 2 3 1\n"
    g = fd.load_dimacs(text)
    assert g.m == 2
    assert g.wt.tolist() == [4, 1]


@pytest.mark.parametrize("text,msg", [
    ("a 1 2 1\n", "line 1: arc before problem line"),
    ("p sp x 1\n", "invalid literal"),
    ("p tw 3 1\n", "line 1: malformed problem line"),
    ("p sp 3 1\na 1 1 1\n", "line 2: self-loop"),
    ("p sp 3 2\na 1 2 1\na 1 2 1\n", "line 3: duplicate edge"),
    ("p sp 3 2\na 1 2 1\na 2 1 9\n", "line 3: duplicate edge"),
    ("p sp 3 1\na 1 4 1\n", "line 2: vertex id out of range"),
    ("p sp 3 1\na 1 2 0\n", "line 2: nonpositive weight"),
    ("p sp 3 1\nq 1 2\n", "line 2: unknown record"),
    ("c empty\n", "missing problem line"),
])
def test_dimacs_errors(text, msg):
    with pytest.raises((fd.GraphFormatError, ValueError), match=msg):
        fd.load_dimacs(text)


@given(st.integers(0, 10_000))
@settings(max_examples=25, deadline=None)
def test_round_trip_property(seed):
    g = random_graph(seed, n_lo=4, n_hi=20, weighted=True)
    g2 = fd.load_dimacs(fd.dump_dimacs(g))
    assert np.array_equal(g2.eu, g.eu) and np.array_equal(g2.wt, g.wt)


@given(st.integers(0, 10_000), st.integers(0, 6))
@settings(max_examples=25, deadline=None)
def test_hop_cap_never_beats_full_search(seed, hops):
    g = random_graph(seed, n_lo=4, n_hi=18)
    full = fd.canonical_sssp(g, 0).dist
    capped = fd.hop_bounded_dist(g, 0, hops)
    assert (capped >= full).all()
