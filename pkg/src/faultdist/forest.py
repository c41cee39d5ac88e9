"""Randomized tree-sampling forest: the short-path fault-tolerant oracle.

I trees of height h are built once.  Every node x carries a random edge
subset A_x (nested along each root-to-leaf path) and a subgraph S_x that
unions spanners of the parent graph minus per-round subsamples of A_x.
Leaves hold distance oracles for their surviving subgraph.  A query walks
each tree downward through children whose A_x swallows all failures seen
in the current subgraph, and takes the minimum over the reached leaves.

Soundness needs only the last descent step: the leaf oracle's host is its
parent graph minus A_leaf, which excludes every failure the parent graph
contains, so leaf answers never underestimate replacement distances.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from . import _kernels as _k
from .graphs import INF, FailureSet, Graph
from .seeding import stream
from .tz import LevelHierarchy, TZOracle, _merge_bunches


class MemoryBudgetError(RuntimeError):
    """Projected forest storage exceeds the configured budget."""


@dataclass(frozen=True)
class ForestParams:
    n: int
    L: int
    f: int
    k: int
    C: float
    h: int
    K: int
    p: float
    I: int
    J: tuple[int, ...]  # J[r] rounds for a node at depth r

    @property
    def leaves_per_tree(self) -> int:
        return self.K ** self.h


def derive_params(n: int, L: int, f: int, k: int, C: float) -> ForestParams:
    if L < 2:
        raise ValueError("hop cutoff L must be at least 2")
    if f < 1 or k < 1:
        raise ValueError("f and k must be positive")
    if C <= 0:
        raise ValueError("C must be positive")
    h = max(1, round(math.sqrt(f * math.log(L))))
    K = math.ceil(((2 * k - 1) * L) ** (f / h))
    p = K ** (-1.0 / f)
    I = max(1, math.ceil(C * 11 ** h * math.log(max(n, 2))))
    J = tuple(4 * K ** (h - r) for r in range(h)) + (1,)
    return ForestParams(n=n, L=L, f=f, k=k, C=C, h=h, K=K, p=p, I=I, J=J)


@dataclass
class SamplingNode:
    depth: int
    edges: np.ndarray            # sorted int32 eids of E(S_x); empty at leaves
    sampled: np.ndarray | None   # sorted int32 eids of A_x inter E(S_parent)
    children: list["SamplingNode"] = field(default_factory=list)
    oracle: TZOracle | None = None
    parent: "SamplingNode | None" = field(default=None, repr=False)
    # audit-only fields, populated by instrumented builds
    ax_full: set | None = None
    edge_set_full: set | None = None

    @property
    def is_leaf(self) -> bool:
        return self.oracle is not None

    @property
    def edge_set(self) -> set:
        if self.edge_set_full is None:
            raise RuntimeError("edge sets kept only on instrumented builds")
        return self.edge_set_full

    @property
    def sampled_set(self) -> set:
        return set() if self.sampled is None else set(self.sampled.tolist())

    def contains_edge(self, e: int) -> bool:
        j = int(np.searchsorted(self.edges, e))
        return j < len(self.edges) and int(self.edges[j]) == e

    def sampled_contains(self, e: int) -> bool:
        j = int(np.searchsorted(self.sampled, e))
        return j < len(self.sampled) and int(self.sampled[j]) == e


@dataclass
class SamplingTree:
    index: int
    root: SamplingNode

    def all_nodes(self):
        stack = [self.root]
        while stack:
            node = stack.pop()
            yield node
            stack.extend(node.children)

    def descend(self, feids: tuple[int, ...]) -> SamplingNode | None:
        """Alg. 3 inner walk: first child absorbing all visible failures."""
        y = self.root
        while y.children:
            present = [e for e in feids if y.contains_edge(e)]
            for x in y.children:
                if all(x.sampled_contains(e) for e in present):
                    y = x
                    break
            else:
                return None
        return y


@dataclass
class SamplingForest:
    params: ForestParams
    hier: LevelHierarchy
    trees: list[SamplingTree]
    seed: int
    build_stats: dict

    def query_short(self, s: int, t: int, F: FailureSet) -> int:
        if len(F) > self.params.f:
            raise ValueError(f"at most f={self.params.f} failures supported")
        best = INF
        for tree in self.trees:
            leaf = tree.descend(F.eids)
            if leaf is None:
                continue
            est = leaf.oracle.query_modified(s, t)
            if est < best:
                best = est
        return best

    def surviving_leaves(self, F: FailureSet) -> list[tuple[int, SamplingNode]]:
        out = []
        for tree in self.trees:
            leaf = tree.descend(F.eids)
            if leaf is not None:
                out.append((tree.index, leaf))
        return out

    def leaf_graph_banned(self, g: Graph, leaf: SamplingNode) -> np.ndarray:
        """uint8 mask banning everything outside the leaf's host subgraph.

        The host is the parent graph minus A_leaf, reconstructed from the
        stored dictionaries.
        """
        banned = np.ones(g.m, np.uint8)
        banned[leaf.parent.edges] = 0
        banned[leaf.sampled] = 1
        return banned

    def space_words(self) -> dict:
        dict_words = bunch_words = table_words = 0
        for tree in self.trees:
            for node in tree.all_nodes():
                dict_words += len(node.edges)
                if node.sampled is not None:
                    dict_words += len(node.sampled)
                if node.oracle is not None:
                    o = node.oracle
                    bunch_words += 2 * o.entry_count
                    table_words += o.ptab.size + o.pdist.size + o.boff.size
        total = dict_words + bunch_words + table_words
        par = self.params
        bound = (par.I * par.h * par.K ** (par.h + 1)
                 * par.n ** (1 + 1 / par.k))
        return {
            "dict_words": dict_words,
            "bunch_words": bunch_words,
            "table_words": table_words,
            "total_words": total,
            "paper_bound": bound,
            "measured_c": total / bound if bound else float("inf"),
        }


def build_forest(g: Graph, params: ForestParams, hier: LevelHierarchy,
                 seed: int, instrument: bool = False,
                 budget_words: int = 1_500_000_000) -> SamplingForest:
    if hier.n != g.n or hier.k != params.k:
        raise ValueError("hierarchy does not match forest parameters")
    est_leaf_words = 2 * params.k * (g.n + g.n ** (1 + 1 / params.k))
    projected = params.I * (params.K ** params.h) * est_leaf_words
    if projected > budget_words:
        raise MemoryBudgetError(
            f"projected {projected:.3g} words exceeds budget "
            f"{budget_words:.3g}; lower C, L, or the sensitivity")
    scratch = np.empty(g.m, np.uint8)
    stats = {"spanner_rounds": 0, "leaf_oracles": 0, "stored_words": 0}

    def build_node(tree_idx: int, path: tuple[int, ...],
                   parent_banned: np.ndarray, parent_edges_bool,
                   parent_node: SamplingNode | None,
                   parent_ax_ids: np.ndarray) -> SamplingNode:
        depth = len(path)
        label = "/".join(map(str, path)) if path else "root"
        rng = stream(seed, "forest-node", tree_idx, label)
        # first draw: this node's A_x, nested inside the parent's
        if parent_node is None:
            ax_ids = parent_ax_ids
        else:
            ax_ids = parent_ax_ids[rng.random(len(parent_ax_ids)) < params.p]
        node = SamplingNode(depth=depth, edges=np.empty(0, np.int32),
                            sampled=None, parent=parent_node)
        if depth == params.h:
            banned = parent_banned.copy()
            banned[ax_ids] = 1
            spmask = np.zeros(g.m, np.uint8)
            ptab, pdist, bv, bx, bd = _k.tz_build(
                g.n, g.indptr, g.nbr, g.eidx, g.wt, g.key_hi, g.key_lo,
                banned, hier.level, hier.k, np.uint8(1), spmask)
            boff, bxs, bds = _merge_bunches(g.n, bv, bx, bd)
            node.oracle = TZOracle(k=hier.k, n=g.n, ptab=ptab, pdist=pdist,
                                   boff=boff, bxs=bxs, bds=bds, banned=None)
            stats["spanner_rounds"] += 1
            stats["leaf_oracles"] += 1
            stats["stored_words"] += (2 * node.oracle.entry_count
                                      + ptab.size + pdist.size + boff.size)
            if instrument:
                node.edge_set_full = set(np.flatnonzero(spmask).tolist())
        else:
            prob = params.p ** (params.h - depth)
            sx = np.zeros(g.m, np.uint8)
            for _ in range(params.J[depth]):
                np.copyto(scratch, parent_banned)
                if prob >= 1.0:
                    scratch[ax_ids] = 1
                elif len(ax_ids):
                    scratch[ax_ids[rng.random(len(ax_ids)) < prob]] = 1
                _k.tz_build(g.n, g.indptr, g.nbr, g.eidx, g.wt, g.key_hi,
                            g.key_lo, scratch, hier.level, hier.k,
                            np.uint8(0), sx)
            stats["spanner_rounds"] += params.J[depth]
            node.edges = np.flatnonzero(sx).astype(np.int32)
            stats["stored_words"] += len(node.edges)
            if instrument:
                node.edge_set_full = set(node.edges.tolist())
        if parent_node is not None:
            keep = parent_edges_bool[ax_ids]
            node.sampled = np.ascontiguousarray(ax_ids[keep], np.int32)
            stats["stored_words"] += len(node.sampled)
        if instrument:
            node.ax_full = set(ax_ids.tolist())
        if stats["stored_words"] > budget_words:
            raise MemoryBudgetError(
                f"stored words passed {budget_words} during build")
        if depth < params.h:
            my_banned = np.ones(g.m, np.uint8)
            my_banned[node.edges] = 0
            my_bool = np.zeros(g.m, bool)
            my_bool[node.edges] = True
            for c in range(params.K):
                child = build_node(tree_idx, path + (c,), my_banned, my_bool,
                                   node, ax_ids)
                node.children.append(child)
        return node

    trees = []
    all_edges = np.arange(g.m, dtype=np.int64)
    for i in range(params.I):
        root = build_node(i, (), g.no_mask(), np.ones(g.m, bool), None,
                          all_edges)
        trees.append(SamplingTree(index=i, root=root))
    return SamplingForest(params=params, hier=hier, trees=trees, seed=seed,
                          build_stats=stats)
