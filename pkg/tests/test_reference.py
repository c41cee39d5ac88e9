"""Ground-truth oracles: exact values derived by hand on tiny graphs."""

from __future__ import annotations

from fractions import Fraction

import pytest

from faultdist import EMPTY_FAILURE, FailureSet, Graph, INF, apsp
from faultdist.reference import (
    InstanceTooLarge,
    brute_faraway_decomposable,
    exact_replacement,
    exact_short,
    is_decomposable,
    path_weight,
    trapezoid,
)
from faultdist.seeding import stream


def cycle(n: int) -> Graph:
    return Graph.from_edges(n, [(i, (i + 1) % n) for i in range(n)])


def chain(n: int) -> Graph:
    return Graph.from_edges(n, [(i, i + 1) for i in range(n - 1)])


def gnp(n: int, p: float, seed: int) -> Graph:
    rng = stream(seed, "gnp")
    edges = [(u, v) for u in range(n) for v in range(u + 1, n)
             if rng.random() < p]
    return Graph.from_edges(n, edges)


# [DERIVED] on the 6-cycle, losing edge (1,2) reroutes 0..2 the long way:
# 0-5-4-3-2 has weight 4 versus 2 before the failure.
def test_cycle_edge_removal_flips_distance():
    g = cycle(6)
    e12 = g.eid_between(1, 2)
    assert exact_replacement(g, 0, 2, EMPTY_FAILURE) == 2
    assert exact_replacement(g, 0, 2, FailureSet.of([e12])) == 4


# [TRIVIAL] removing a bridge disconnects the chain.
def test_bridge_removal_disconnects():
    g = chain(3)
    e01 = g.eid_between(0, 1)
    assert exact_replacement(g, 0, 2, FailureSet.of([e01])) == INF


def test_hop_bound_large_enough_equals_exact():
    g = gnp(25, 0.15, seed=2)
    rng = stream(4, "draws")
    for _ in range(20):
        F = FailureSet.of(rng.choice(g.m, size=2, replace=False))
        s, t = rng.integers(g.n, size=2)
        assert exact_short(g, int(s), int(t), F, g.n - 1) == \
            exact_replacement(g, int(s), int(t), F)


# [TRIVIAL] one hop cannot join non-adjacent vertices.
def test_hop_bound_one_requires_adjacency():
    g = chain(3)
    assert exact_short(g, 0, 2, EMPTY_FAILURE, 1) == INF
    assert exact_short(g, 0, 1, EMPTY_FAILURE, 1) == 1


def test_hop_bound_never_below_exact():
    g = gnp(25, 0.15, seed=3)
    rng = stream(5, "draws")
    for _ in range(30):
        F = FailureSet.of(rng.choice(g.m, size=2, replace=False))
        s, t = (int(x) for x in rng.integers(g.n, size=2))
        for L in (1, 2, 4):
            assert exact_short(g, s, t, F, L) >= exact_replacement(g, s, t, F)


def test_path_weight_counts_repeated_traversals():
    g = chain(3)
    assert path_weight(g, [0, 1, 0, 1, 2]) == 4
    with pytest.raises(ValueError):
        path_weight(g, [0, 2])


class TestDecomposable:
    # [DERIVED] on the 6-cycle: [0,1,2,3] realizes d(0,3)=3, one block;
    # [0,1,2,3,4] weighs 4 > d(0,4)=2 but splits as [0..3]+[3,4].
    def test_cycle_examples(self):
        g = cycle(6)
        t = apsp(g)
        assert is_decomposable(t, g, [0, 1, 2, 3], ell=0)
        assert not is_decomposable(t, g, [0, 1, 2, 3, 4], ell=0)
        assert is_decomposable(t, g, [0, 1, 2, 3, 4], ell=1)

    def test_single_vertex_and_edge(self):
        g = chain(3)
        t = apsp(g)
        assert is_decomposable(t, g, [1], ell=0)
        assert is_decomposable(t, g, [0, 1], ell=0)

    def test_walk_with_backtrack(self):
        g = chain(3)
        t = apsp(g)
        # [0,1,0,1,2]: every split point sits at weight-0 distance pairs
        # except the real blocks; 4 > d(0,2)=2 so never one block.
        assert not is_decomposable(t, g, [0, 1, 0, 1, 2], ell=0)
        assert is_decomposable(t, g, [0, 1, 0, 1, 2], ell=3)


class TestTrapezoid:
    def graph_with_pendant(self) -> Graph:
        # chain 0-1-2-3-4 plus vertex 5 hanging off 2
        return Graph.from_edges(6, [(0, 1), (1, 2), (2, 3), (3, 4), (2, 5)])

    # [DERIVED] path [0..4], y=2 sits at weight 2 from both ends, so the
    # pendant (distance 1) enters exactly when (eps/9)*2 >= 1, i.e. eps
    # >= 9/2.  Interior path vertices always belong (distance 0).
    def test_membership_threshold_exact(self):
        g = self.graph_with_pendant()
        path = [0, 1, 2, 3, 4]
        tight = trapezoid(g, EMPTY_FAILURE, path, Fraction(9, 2))
        assert tight.members == frozenset({1, 2, 3, 5})
        below = trapezoid(g, EMPTY_FAILURE, path, Fraction(4))
        assert below.members == frozenset({1, 2, 3})

    # [TRIVIAL] with no failures every existing path is far away.
    def test_empty_failure_always_far(self):
        g = self.graph_with_pendant()
        assert trapezoid(g, EMPTY_FAILURE, [0, 1, 2, 3, 4], 1.0).far_away

    def test_failed_edge_on_path_is_not_far(self):
        g = self.graph_with_pendant()
        F = FailureSet.of([g.eid_between(1, 2)])
        assert not trapezoid(g, F, [0, 1, 2, 3, 4], 1.0).far_away

    # [DERIVED] failing the pendant edge (2,5) puts vertex 2, an interior
    # path vertex and hence a member, into V(F).
    def test_failure_endpoint_inside_trapezoid(self):
        g = self.graph_with_pendant()
        F = FailureSet.of([g.eid_between(2, 5)])
        assert not trapezoid(g, F, [0, 1, 2, 3, 4], 1.0).far_away

    # [DERIVED] hang the pendant off the endpoint 4 instead: endpoints are
    # never members, vertex 5 is isolated in G-F, so the path is far away.
    def test_failure_touching_only_endpoint_is_far(self):
        g = Graph.from_edges(6, [(0, 1), (1, 2), (2, 3), (3, 4), (4, 5)])
        F = FailureSet.of([g.eid_between(4, 5)])
        tr = trapezoid(g, F, [0, 1, 2, 3, 4], 1.0)
        assert tr.members == frozenset({1, 2, 3})
        assert tr.far_away


class TestBruteForce:
    # [DERIVED] C6 minus (1,2): the lone surviving 0-2 path [0,5,4,3,2]
    # needs two shortest-path blocks of the intact cycle.
    def test_cycle_detour_needs_two_blocks(self):
        g = cycle(6)
        t = apsp(g)
        F = FailureSet.of([g.eid_between(1, 2)])
        assert brute_faraway_decomposable(g, t, 0, 2, F, ell=1, eps=1) == 4
        assert brute_faraway_decomposable(g, t, 0, 2, F, ell=0, eps=1) == INF

    # [TRIVIAL] without failures the shortest path itself qualifies.
    def test_no_failure_equals_exact(self):
        g = gnp(9, 0.4, seed=6)
        t = apsp(g)
        for s in range(g.n):
            for u in range(s + 1, g.n):
                want = exact_replacement(g, s, u, EMPTY_FAILURE)
                got = brute_faraway_decomposable(g, t, s, u, EMPTY_FAILURE,
                                                 ell=0, eps=1)
                assert got == want

    def test_identical_endpoints(self):
        g = cycle(6)
        t = apsp(g)
        assert brute_faraway_decomposable(g, t, 3, 3, EMPTY_FAILURE,
                                          ell=0, eps=1) == 0

    def test_budget_guard_fires(self):
        g = Graph.from_edges(7, [(u, v) for u in range(7)
                                 for v in range(u + 1, 7)])
        t = apsp(g)
        with pytest.raises(InstanceTooLarge):
            brute_faraway_decomposable(g, t, 0, 6, EMPTY_FAILURE,
                                       ell=3, eps=1, budget=50)
