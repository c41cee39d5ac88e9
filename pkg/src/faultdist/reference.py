"""Ground-truth oracles for tests: exact, hop-bounded, and brute-force.

Everything here is a pure function evaluated directly from definitions,
kept deliberately independent of the production data structures so the two
can disagree loudly in tests.  The brute-force searches carry explicit node
budgets and raise instead of silently truncating.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction

import numpy as np

from .graphs import INF, INF32, APSPTable, FailureSet, Graph, canonical_sssp
from .graphs import hop_bounded_dist


class InstanceTooLarge(RuntimeError):
    """A brute-force oracle exceeded its node budget."""


def exact_replacement(g: Graph, s: int, t: int, F: FailureSet) -> int:
    """d_{G-F}(s, t) by a masked Dijkstra."""
    return int(canonical_sssp(g, s, F.mask(g)).dist[t])


def exact_short(g: Graph, s: int, t: int, F: FailureSet, L: int) -> int:
    """Minimum weight over s-t paths of at most L edges in G-F."""
    return int(hop_bounded_dist(g, s, L, F.mask(g))[t])


def path_weight(g: Graph, path: list[int]) -> int:
    total = 0
    for a, b in zip(path, path[1:]):
        e = g.eid_between(a, b)
        if e is None:
            raise ValueError(f"no edge between {a} and {b}")
        total += int(g.wt[e])
    return total


def is_decomposable(apsp_t: APSPTable, g: Graph, path: list[int],
                    ell: int) -> bool:
    """Is the path a concatenation of <= ell+1 shortest paths of the host?

    A block realizes a host shortest path exactly when its weight equals
    the host distance between its endpoints; subpaths of shortest paths
    are shortest, so a quadratic DP over split points is exact.
    """
    q = len(path)
    if q == 1:
        return True
    wt_prefix = [0] * q
    for i in range(1, q):
        e = g.eid_between(path[i - 1], path[i])
        wt_prefix[i] = wt_prefix[i - 1] + int(g.wt[e])
    best = [q + 1] * q  # fewest blocks covering path[0..i]
    best[0] = 0
    for j in range(1, q):
        for i in range(j):
            if best[i] >= q + 1:
                continue
            seg = wt_prefix[j] - wt_prefix[i]
            if seg == apsp_t.d(path[i], path[j]):
                best[j] = min(best[j], best[i] + 1)
    return best[q - 1] <= ell + 1


@dataclass(frozen=True)
class Trapezoid:
    members: frozenset[int]
    far_away: bool


def trapezoid(g: Graph, F: FailureSet, path: list[int],
              eps: Fraction | float) -> Trapezoid:
    """tr^{eps/9}_{G-F}(path) and whether the path is far away from F.

    A vertex z (not an endpoint) belongs to the trapezoid when some y on
    the path has d_{G-F}(y, z) <= (eps/9) * min(w(path[u..y]), w(path[y..v])).
    Far away means the path survives in G-F and the trapezoid avoids V(F).
    """
    eps = Fraction(eps).limit_denominator(10**9) if not isinstance(eps, Fraction) else eps
    ratio = eps / 9
    mask = F.mask(g)
    u, v = path[0], path[-1]
    exists = True
    for a, b in zip(path, path[1:]):
        e = g.eid_between(a, b)
        if e is None or mask[e]:
            exists = False
            break
    pos = [0] * len(path)
    for i in range(1, len(path)):
        e = g.eid_between(path[i - 1], path[i])
        w = int(g.wt[e]) if e is not None else 0
        pos[i] = pos[i - 1] + w
    total = pos[-1]
    members: set[int] = set()
    for i, y in enumerate(path):
        bound = ratio * min(pos[i], total - pos[i])
        dy = canonical_sssp(g, y, mask).dist
        for z in range(g.n):
            if z == u or z == v:
                continue
            if dy[z] < INF and dy[z] <= bound:
                members.add(z)
    far = exists and not (members & set(F.vertices(g)))
    return Trapezoid(frozenset(members), far)


def _simple_paths(g: Graph, s: int, t: int, mask: np.ndarray,
                  budget: int, max_len: int | None = None):
    """Yield all simple s-t paths in G - mask, DFS with a node budget."""
    expansions = 0
    on_path = np.zeros(g.n, bool)
    path = [s]
    on_path[s] = True

    def rec():
        nonlocal expansions
        v = path[-1]
        if v == t:
            yield list(path)
            return
        if max_len is not None and len(path) > max_len:
            return
        for j in range(int(g.indptr[v]), int(g.indptr[v + 1])):
            e = int(g.eidx[j])
            if mask[e]:
                continue
            w = int(g.nbr[j])
            if on_path[w]:
                continue
            expansions += 1
            if expansions > budget:
                raise InstanceTooLarge(
                    f"path enumeration exceeded {budget} expansions")
            path.append(w)
            on_path[w] = True
            yield from rec()
            path.pop()
            on_path[w] = False

    yield from rec()


def brute_faraway_decomposable(g: Graph, apsp_t: APSPTable, u: int, v: int,
                               F: FailureSet, ell: int,
                               eps: Fraction | float,
                               budget: int = 2_000_000) -> int:
    """Minimum length over ell-decomposable far-away u-v paths in G-F.

    Exhaustive over simple paths; meant for tiny instances only.
    """
    if u == v:
        return 0
    mask = F.mask(g)
    best = INF
    for path in _simple_paths(g, u, v, mask, budget):
        w = path_weight(g, path)
        if w >= best:
            continue
        if not is_decomposable(apsp_t, g, path, ell):
            continue
        if not trapezoid(g, F, path, eps).far_away:
            continue
        best = w
    return best


def is_alternation_decomposable(apsp_t: APSPTable, g: Graph,
                                path: list[int], ell: int) -> bool:
    """Does the path match sp (edge? sp)^ell with canonical sp pieces?

    Inductive form used by the layered engine: an ell-piece path is an
    (ell-1)-piece path, then optionally one single edge, then one canonical
    shortest path of G (either part may be trivial).  Note this is stricter
    than counting pieces: two shortest paths followed by an edge needs
    three sp slots even though only two sps appear.
    """
    q = len(path)
    if q == 1:
        return True

    def sp_closure(front: set[int]) -> set[int]:
        out = set(front)
        for i in front:
            for j in range(i + 1, q):
                if apsp_t.path(path[i], path[j]) == path[i:j + 1]:
                    out.add(j)
                else:
                    break
        return out

    reach = sp_closure({0})
    for _ in range(ell):
        if q - 1 in reach:
            return True
        stepped = set(reach)
        for i in reach:
            if i + 1 < q and g.eid_between(path[i], path[i + 1]) is not None:
                stepped.add(i + 1)
        reach = sp_closure(stepped)
    return q - 1 in reach


def _cap_exponent(g: Graph) -> int:
    return math.ceil(math.log2(max(2, g.n * g.max_weight)))


def has_expath_certificate(g: Graph, apsp_t: APSPTable, path: list[int],
                           ell: int, lam: int) -> bool:
    """Can the path be cut into prefix, capped blocks, and suffix?

    Prefix and suffix carry at most lam edges each; the middle splits into
    exactly 2c+1 alternation-decomposable blocks, the j-th of weight at most
    min(2^j, 2^(2c-j)).
    """
    q = len(path)
    if q == 1:
        return True
    c = _cap_exponent(g)
    nblocks = 2 * c + 1
    wpre = [0] * q
    for i in range(1, q):
        e = g.eid_between(path[i - 1], path[i])
        wpre[i] = wpre[i - 1] + int(g.wt[e])

    def block_ok(i: int, j: int, cap: int) -> bool:
        if wpre[j] - wpre[i] > cap:
            return False
        return is_alternation_decomposable(apsp_t, g, path[i:j + 1], ell)

    positions = set(range(min(lam, q - 1) + 1))
    for b in range(nblocks):
        cap = min(1 << b, 1 << (2 * c - b))
        nxt = set()
        for i in positions:
            for j in range(i, q):
                if j > i and not block_ok(i, j, cap):
                    continue
                nxt.add(j)
        positions = nxt
    return any(q - 1 - i <= lam for i in positions)


def brute_decomposable_dist(g: Graph, apsp_t: APSPTable, s: int, t: int,
                            A: FailureSet, ell: int,
                            budget: int = 2_000_000) -> int:
    """Minimum weight over alternation-decomposable simple s-t paths in G-A."""
    if s == t:
        return 0
    mask = A.mask(g)
    best = INF
    for path in _simple_paths(g, s, t, mask, budget):
        w = path_weight(g, path)
        if w >= best:
            continue
        if is_alternation_decomposable(apsp_t, g, path, ell):
            best = w
    return best


def brute_shortest_expath(g: Graph, apsp_t: APSPTable, s: int, t: int,
                          A: FailureSet, ell: int, lam: int,
                          budget: int = 2_000_000) -> int:
    """Minimum weight over simple s-t paths admitting an expath cut."""
    if s == t:
        return 0
    mask = A.mask(g)
    best = INF
    for path in _simple_paths(g, s, t, mask, budget):
        w = path_weight(g, path)
        if w >= best:
            continue
        if has_expath_certificate(g, apsp_t, path, ell, lam):
            best = w
    return best


def audit_well_behaved(forest, g: Graph, F: FailureSet,
                       witness_eids: set[int]) -> dict:
    """Empirical check of the three per-node properties on a built forest.

    witness_eids is the edge set of the fixed approximate shortest path
    P_{s,t,G-F}.  Returns per-depth counts of nodes satisfying property
    (1) (failures of the parent graph all sampled into A_x), property (2)
    (few witness edges in A_x), property (3) (witness contained in S_x),
    plus the fraction of trees whose root is well-behaved.
    """
    feids = set(F.eids)
    stats = {
        "trees": len(forest.trees),
        "depths": forest.params.h,
        "per_depth": [dict(nodes=0, p1=0, p2=0, p3=0, well_behaved=0)
                      for _ in range(forest.params.h + 1)],
    }
    K_pow = lambda r: forest.params.K ** ((forest.params.h - r) / forest.params.f)
    for tree in forest.trees:
        for node in tree.all_nodes():
            r = node.depth
            row = stats["per_depth"][r]
            row["nodes"] += 1
            if node.parent is None:
                p1 = True
                p2 = True
            else:
                parent_edges = node.parent.edge_set
                p1 = (feids & parent_edges) <= node.sampled_set
                p2 = len(witness_eids & node.ax_full) < K_pow(r)
            p3 = witness_eids <= node.edge_set
            row["p1"] += p1
            row["p2"] += p2
            row["p3"] += p3
            row["well_behaved"] += (p1 and p2 and p3)
    root_row = stats["per_depth"][0]
    stats["root_wb_fraction"] = (root_row["well_behaved"] / root_row["nodes"]
                                 if root_row["nodes"] else 0.0)
    return stats
