"""Numba kernels for the shortest-path machinery.

Every kernel works on one shared representation: the CSR arrays of the full
host graph plus a uint8 mask of banned edge ids.  Subgraphs are always
expressed as masks, so vertex ids and edge ids never get re-indexed and
structures built on different subgraphs stay directly comparable.

Canonical unique shortest paths are realized by exact additive perturbation:
each edge id carries a fixed pseudorandom 102-bit key stored in two 51-bit
integer lanes.  Path keys are summed lane-wise with carry normalization and
compared exactly, so the "canonical" path between two vertices is the
shortest path with the lexicographically smallest (hi, lo) key sum.  The
order is symmetric and has full optimal substructure, which the rest of the
library depends on.
"""

from __future__ import annotations

import numpy as np
from numba import njit

INF = np.int64(1) << np.int64(60)
LANE_BITS = 51
LANE_MASK = np.int64((1 << LANE_BITS) - 1)

# ---------------------------------------------------------------------------
# lazy binary heap over (dist, hi, lo, payload) tuples in parallel arrays
# ---------------------------------------------------------------------------


@njit(cache=True, inline="always")
def _key_lt(d1, h1, l1, d2, h2, l2):
    if d1 != d2:
        return d1 < d2
    if h1 != h2:
        return h1 < h2
    return l1 < l2


@njit(cache=True)
def _heap_push(hd, hh, hl, hv, size, d, h, l, v):
    i = size
    hd[i] = d
    hh[i] = h
    hl[i] = l
    hv[i] = v
    while i > 0:
        par = (i - 1) >> 1
        if _key_lt(hd[i], hh[i], hl[i], hd[par], hh[par], hl[par]):
            hd[i], hd[par] = hd[par], hd[i]
            hh[i], hh[par] = hh[par], hh[i]
            hl[i], hl[par] = hl[par], hl[i]
            hv[i], hv[par] = hv[par], hv[i]
            i = par
        else:
            break
    return size + 1


@njit(cache=True)
def _heap_pop(hd, hh, hl, hv, size):
    d = hd[0]
    h = hh[0]
    l = hl[0]
    v = hv[0]
    size -= 1
    if size > 0:
        hd[0] = hd[size]
        hh[0] = hh[size]
        hl[0] = hl[size]
        hv[0] = hv[size]
        i = 0
        while True:
            lc = 2 * i + 1
            if lc >= size:
                break
            rc = lc + 1
            small = lc
            if rc < size and _key_lt(hd[rc], hh[rc], hl[rc], hd[lc], hh[lc], hl[lc]):
                small = rc
            if _key_lt(hd[small], hh[small], hl[small], hd[i], hh[i], hl[i]):
                hd[i], hd[small] = hd[small], hd[i]
                hh[i], hh[small] = hh[small], hh[i]
                hl[i], hl[small] = hl[small], hl[i]
                hv[i], hv[small] = hv[small], hv[i]
                i = small
            else:
                break
    return d, h, l, v, size


# ---------------------------------------------------------------------------
# single-source canonical Dijkstra
# ---------------------------------------------------------------------------


@njit(cache=True)
def dijkstra_canonical(n, indptr, nbr, eidx, wt, khi, klo, banned, src,
                       dist, phi, plo, pred, prede):
    """Fill dist/phi/plo (int64[n]) and pred/prede (int32[n]) from src.

    dist[v] is d(src, v) in the masked graph; (phi, plo) is the canonical
    key sum of the unique canonical path; pred/prede give the predecessor
    vertex and edge id on that path (-1 at src and unreached vertices).
    """
    for v in range(n):
        dist[v] = INF
        phi[v] = 0
        plo[v] = 0
        pred[v] = -1
        prede[v] = -1
    cap = indptr[n] + 8
    hd = np.empty(cap, np.int64)
    hh = np.empty(cap, np.int64)
    hl = np.empty(cap, np.int64)
    hv = np.empty(cap, np.int64)
    done = np.zeros(n, np.uint8)
    dist[src] = 0
    size = _heap_push(hd, hh, hl, hv, 0, 0, 0, 0, src)
    while size > 0:
        d, h, l, u, size = _heap_pop(hd, hh, hl, hv, size)
        u = np.int64(u)
        if done[u]:
            continue
        if d != dist[u] or h != phi[u] or l != plo[u]:
            continue
        done[u] = 1
        for j in range(indptr[u], indptr[u + 1]):
            e = eidx[j]
            if banned[e]:
                continue
            v = nbr[j]
            if done[v]:
                continue
            nd = d + wt[e]
            nl = l + klo[e]
            nh = h + khi[e] + (nl >> LANE_BITS)
            nl = nl & LANE_MASK
            if _key_lt(nd, nh, nl, dist[v], phi[v], plo[v]):
                dist[v] = nd
                phi[v] = nh
                plo[v] = nl
                pred[v] = u
                prede[v] = e
                size = _heap_push(hd, hh, hl, hv, size, nd, nh, nl, v)


@njit(cache=True)
def apsp_fill(n, indptr, nbr, eidx, wt, khi, klo, banned,
              dist2, pred2, shi2, slo2):
    """Run canonical Dijkstra from every source into the four matrices.

    dist2 is int32 with INF entries clamped to INF32; the sigma matrices
    keep the full int64 lanes so exact on-path tests stay available.
    """
    dist = np.empty(n, np.int64)
    phi = np.empty(n, np.int64)
    plo = np.empty(n, np.int64)
    pred = np.empty(n, np.int32)
    prede = np.empty(n, np.int32)
    for s in range(n):
        dijkstra_canonical(n, indptr, nbr, eidx, wt, khi, klo, banned, s,
                           dist, phi, plo, pred, prede)
        for v in range(n):
            d = dist[v]
            dist2[s, v] = np.int32(d) if d < INF else np.int32(1 << 30)
            pred2[s, v] = pred[v]
            shi2[s, v] = phi[v]
            slo2[s, v] = plo[v]


# ---------------------------------------------------------------------------
# multi-source floods
# ---------------------------------------------------------------------------


@njit(cache=True)
def multisource_dist(n, indptr, nbr, eidx, wt, banned, is_src, out_dist):
    """out_dist[v] = plain distance from v to the source set (INF if none)."""
    cap = indptr[n] + n + 8
    hd = np.empty(cap, np.int64)
    hh = np.empty(cap, np.int64)
    hl = np.empty(cap, np.int64)
    hv = np.empty(cap, np.int64)
    done = np.zeros(n, np.uint8)
    size = 0
    for v in range(n):
        if is_src[v]:
            out_dist[v] = 0
            size = _heap_push(hd, hh, hl, hv, size, 0, 0, 0, v)
        else:
            out_dist[v] = INF
    while size > 0:
        d, h, l, u, size = _heap_pop(hd, hh, hl, hv, size)
        u = np.int64(u)
        if done[u] or d != out_dist[u]:
            continue
        done[u] = 1
        for j in range(indptr[u], indptr[u + 1]):
            e = eidx[j]
            if banned[e]:
                continue
            v = nbr[j]
            nd = d + wt[e]
            if nd < out_dist[v]:
                out_dist[v] = nd
                size = _heap_push(hd, hh, hl, hv, size, nd, 0, 0, v)


@njit(cache=True)
def multisource_nearest(n, indptr, nbr, eidx, wt, banned, is_src,
                        out_dist, out_src):
    """Nearest source per vertex with ties broken toward the smaller id.

    Relaxation keys are (distance, source id), so out_src[v] is the
    smallest-labelled source among those at minimum distance.
    """
    cap = indptr[n] + n + 8
    hd = np.empty(cap, np.int64)
    hh = np.empty(cap, np.int64)
    hl = np.empty(cap, np.int64)
    hv = np.empty(cap, np.int64)
    done = np.zeros(n, np.uint8)
    size = 0
    for v in range(n):
        if is_src[v]:
            out_dist[v] = 0
            out_src[v] = v
            size = _heap_push(hd, hh, hl, hv, size, 0, v, 0, v)
        else:
            out_dist[v] = INF
            out_src[v] = -1
    while size > 0:
        d, h, l, u, size = _heap_pop(hd, hh, hl, hv, size)
        u = np.int64(u)
        if done[u] or d != out_dist[u] or h != out_src[u]:
            continue
        done[u] = 1
        for j in range(indptr[u], indptr[u + 1]):
            e = eidx[j]
            if banned[e]:
                continue
            v = nbr[j]
            if done[v]:
                continue
            nd = d + wt[e]
            if nd < out_dist[v] or (nd == out_dist[v] and h < out_src[v]):
                out_dist[v] = nd
                out_src[v] = np.int32(h)
                size = _heap_push(hd, hh, hl, hv, size, nd, h, 0, v)


# ---------------------------------------------------------------------------
# truncated search for ball classification
# ---------------------------------------------------------------------------


@njit(cache=True)
def dijkstra_ball(n, indptr, nbr, eidx, wt, banned, src, radius, cap):
    """Settle vertices within `radius` of src, at most `cap` of them.

    Returns (verts, dists, dense) where dense=1 means more than `cap`
    vertices lie within the radius (the returned lists then hold the first
    `cap` of them in (distance, id) order).
    """
    hd = np.empty(indptr[n] + 8, np.int64)
    hh = np.empty(indptr[n] + 8, np.int64)
    hl = np.empty(indptr[n] + 8, np.int64)
    hv = np.empty(indptr[n] + 8, np.int64)
    dist = np.full(n, INF, np.int64)
    done = np.zeros(n, np.uint8)
    out_v = np.empty(cap, np.int32)
    out_d = np.empty(cap, np.int64)
    count = 0
    dense = np.uint8(0)
    dist[src] = 0
    size = _heap_push(hd, hh, hl, hv, 0, 0, src, 0, src)
    while size > 0:
        d, h, l, u, size = _heap_pop(hd, hh, hl, hv, size)
        u = np.int64(u)
        if done[u] or d != dist[u]:
            continue
        if d > radius:
            break
        if count == cap:
            dense = np.uint8(1)
            break
        done[u] = 1
        out_v[count] = u
        out_d[count] = d
        count += 1
        for j in range(indptr[u], indptr[u + 1]):
            e = eidx[j]
            if banned[e]:
                continue
            v = nbr[j]
            if done[v]:
                continue
            nd = d + wt[e]
            if nd <= radius and nd < dist[v]:
                dist[v] = nd
                size = _heap_push(hd, hh, hl, hv, size, nd, v, 0, v)
    return out_v[:count].copy(), out_d[:count].copy(), dense


# ---------------------------------------------------------------------------
# hop-bounded single-source distances (Bellman-Ford rounds)
# ---------------------------------------------------------------------------


@njit(cache=True)
def hop_bounded_sssp(n, indptr, nbr, eidx, wt, banned, src, hops):
    """dist[v] = minimum weight over paths with at most `hops` edges."""
    dist = np.full(n, INF, np.int64)
    dist[src] = 0
    if hops <= 0:
        return dist
    prev = dist.copy()
    for _ in range(hops):
        changed = False
        for u in range(n):
            du = prev[u]
            if du >= INF:
                continue
            for j in range(indptr[u], indptr[u + 1]):
                e = eidx[j]
                if banned[e]:
                    continue
                v = nbr[j]
                nd = du + wt[e]
                if nd < dist[v]:
                    dist[v] = nd
                    changed = True
        if not changed:
            break
        prev[:] = dist
    return dist


# ---------------------------------------------------------------------------
# Thorup-Zwick construction on a masked subgraph
# ---------------------------------------------------------------------------


@njit(cache=True)
def _mark_pred_path(v, x, fpred, fprede, spanner_mask):
    cur = v
    while cur != x:
        e = fprede[cur]
        if e < 0:
            break
        spanner_mask[e] = 1
        cur = fpred[cur]


@njit(cache=True)
def tz_build(n, indptr, nbr, eidx, wt, khi, klo, banned, lvl, k,
             want_bunches, spanner_mask):
    """Build the level hierarchy's oracle data on one masked subgraph.

    lvl[v] is the largest i with v in X_i (levels are nested, so membership
    in X_i is lvl[v] >= i).  Spanner edges are OR-ed into spanner_mask, so a
    caller computing a union over many rounds passes the same mask each time.

    Returns (ptab, pdistt, bv, bx, bd):
      ptab[i*n + v]   = p_i(v) (-1 when X_i is unreachable from v)
      pdistt[i*n + v] = d(v, p_i(v))
      bv/bx/bd        = flattened bunch entries (member v, vertex x, dist),
                        one per (v, x, level) strict membership plus the
                        p_i(v) completions; empty when want_bunches is false.
    """
    ptab = np.full(k * n, -1, np.int32)
    pdistt = np.full(k * n, INF, np.int64)

    bcap = 16 + 8 * n
    bv = np.empty(bcap, np.int32)
    bx = np.empty(bcap, np.int32)
    bd = np.empty(bcap, np.int64)
    bn = 0

    dnext = np.empty(n, np.int64)
    pi_d = np.empty(n, np.int64)
    pi_s = np.empty(n, np.int32)
    is_src = np.zeros(n, np.uint8)

    # scratch for bounded cluster searches, reset via stamps
    cdist = np.empty(n, np.int64)
    cphi = np.empty(n, np.int64)
    cplo = np.empty(n, np.int64)
    stamp = np.zeros(n, np.int64)
    version = np.int64(0)
    hcap = indptr[n] + n + 8
    hd = np.empty(hcap, np.int64)
    hh = np.empty(hcap, np.int64)
    hl = np.empty(hcap, np.int64)
    hv = np.empty(hcap, np.int64)

    # scratch for occasional full searches (p_i path completion)
    fdist = np.empty(n, np.int64)
    fphi = np.empty(n, np.int64)
    fplo = np.empty(n, np.int64)
    fpred = np.empty(n, np.int32)
    fprede = np.empty(n, np.int32)

    for i in range(k):
        # distance to X_{i+1} (empty at the top level)
        if i + 1 <= k - 1:
            for v in range(n):
                is_src[v] = 1 if lvl[v] >= i + 1 else 0
            multisource_dist(n, indptr, nbr, eidx, wt, banned, is_src, dnext)
        else:
            for v in range(n):
                dnext[v] = INF

        # p_i assignment
        if i == 0:
            for v in range(n):
                pi_d[v] = 0
                pi_s[v] = v
        else:
            for v in range(n):
                is_src[v] = 1 if lvl[v] >= i else 0
            multisource_nearest(n, indptr, nbr, eidx, wt, banned, is_src,
                                pi_d, pi_s)
        for v in range(n):
            ptab[i * n + v] = pi_s[v]
            pdistt[i * n + v] = pi_d[v]

        # clusters: bounded canonical search from every x in X_i.
        # Membership is strict (distance below dnext), and every canonical
        # path from x to a member stays inside the cluster, so marking the
        # relaxation-tree edges stores exactly the canonical paths.
        for x in range(n):
            if lvl[x] < i:
                continue
            if dnext[x] <= 0:
                continue  # x itself is in X_{i+1}; its cluster is empty
            version += 1
            stamp[x] = version
            cdist[x] = 0
            cphi[x] = 0
            cplo[x] = 0
            size = _heap_push(hd, hh, hl, hv, 0, 0, 0, 0, x)
            # pred arrays reuse the full-search scratch; entries are only
            # read for vertices stamped in this round, so no clearing needed
            cpred = fpred
            cprede = fprede
            cpred[x] = -1
            cprede[x] = -1
            while size > 0:
                d, h, l, u, size = _heap_pop(hd, hh, hl, hv, size)
                u = np.int64(u)
                if stamp[u] != version:
                    continue
                if d != cdist[u] or h != cphi[u] or l != cplo[u]:
                    continue
                if cdist[u] < 0:
                    continue  # already settled (negative marker)
                # settle u
                if cprede[u] >= 0:
                    spanner_mask[cprede[u]] = 1
                if want_bunches:
                    if bn == bcap:
                        bcap *= 2
                        nbv = np.empty(bcap, np.int32)
                        nbx = np.empty(bcap, np.int32)
                        nbd = np.empty(bcap, np.int64)
                        nbv[:bn] = bv[:bn]
                        nbx[:bn] = bx[:bn]
                        nbd[:bn] = bd[:bn]
                        bv = nbv
                        bx = nbx
                        bd = nbd
                    bv[bn] = u
                    bx[bn] = x
                    bd[bn] = d
                    bn += 1
                for j in range(indptr[u], indptr[u + 1]):
                    e = eidx[j]
                    if banned[e]:
                        continue
                    v = nbr[j]
                    nd = d + wt[e]
                    if nd >= dnext[v]:
                        continue  # strict cluster bound
                    nl = l + klo[e]
                    nh = h + khi[e] + (nl >> LANE_BITS)
                    nl = nl & LANE_MASK
                    if stamp[v] != version:
                        stamp[v] = version
                        cdist[v] = INF
                        cphi[v] = 0
                        cplo[v] = 0
                    elif cdist[v] < 0:
                        continue
                    if _key_lt(nd, nh, nl, cdist[v], cphi[v], cplo[v]):
                        cdist[v] = nd
                        cphi[v] = nh
                        cplo[v] = nl
                        cpred[v] = u
                        cprede[v] = e
                        size = _heap_push(hd, hh, hl, hv, size, nd, nh, nl, v)
                cdist[u] = -1 - cdist[u]  # settled marker, still recoverable

        # p_i completions: vertices whose nearest level-i vertex is exactly
        # as far as X_{i+1}, so the pair is not a strict cluster member.
        # The canonical path to p_i(v) still belongs in the spanner.
        for v in range(n):
            x = pi_s[v]
            if x < 0:
                continue
            if pi_d[v] < dnext[v]:
                continue  # strict member, already recorded
            if want_bunches:
                if bn == bcap:
                    bcap *= 2
                    nbv = np.empty(bcap, np.int32)
                    nbx = np.empty(bcap, np.int32)
                    nbd = np.empty(bcap, np.int64)
                    nbv[:bn] = bv[:bn]
                    nbx[:bn] = bx[:bn]
                    nbd[:bn] = bd[:bn]
                    bv = nbv
                    bx = nbx
                    bd = nbd
                bv[bn] = v
                bx[bn] = x
                bd[bn] = pi_d[v]
                bn += 1
        # group path-marking runs by the source x to share one search
        needed = np.zeros(n, np.uint8)
        any_needed = False
        for v in range(n):
            x = pi_s[v]
            if x >= 0 and v != x and pi_d[v] >= dnext[v]:
                needed[x] = 1
                any_needed = True
        if any_needed:
            for x in range(n):
                if not needed[x]:
                    continue
                dijkstra_canonical(n, indptr, nbr, eidx, wt, khi, klo,
                                   banned, x, fdist, fphi, fplo,
                                   fpred, fprede)
                for v in range(n):
                    if pi_s[v] == x and v != x and pi_d[v] >= dnext[v]:
                        _mark_pred_path(v, x, fpred, fprede, spanner_mask)

    return ptab, pdistt, bv[:bn].copy(), bx[:bn].copy(), bd[:bn].copy()


# ---------------------------------------------------------------------------
# oracle queries over the packed bunch tables
# ---------------------------------------------------------------------------


@njit(cache=True, inline="always")
def _bunch_lookup(boff, bxs, bds, v, x):
    lo = boff[v]
    hi = boff[v + 1]
    while lo < hi:
        mid = (lo + hi) >> 1
        if bxs[mid] < x:
            lo = mid + 1
        else:
            hi = mid
    if lo < boff[v + 1] and bxs[lo] == x:
        return bds[lo]
    return INF


@njit(cache=True)
def tz_query_modified(k, n, ptab, pdistt, boff, bxs, bds, s, t):
    """Modified two-sided query: min over levels and both orientations."""
    best = INF
    for i in range(k):
        u = ptab[i * n + s]
        if u >= 0:
            du = _bunch_lookup(boff, bxs, bds, t, u)
            if du < INF:
                cand = pdistt[i * n + s] + du
                if cand < best:
                    best = cand
        u = ptab[i * n + t]
        if u >= 0:
            du = _bunch_lookup(boff, bxs, bds, s, u)
            if du < INF:
                cand = pdistt[i * n + t] + du
                if cand < best:
                    best = cand
    return best


@njit(cache=True)
def tz_query_original(k, n, ptab, pdistt, boff, bxs, bds, s, t):
    """The textbook one-sided walk (kept for comparison tests)."""
    w = s
    i = 0
    a = s
    b = t
    while True:
        dw = _bunch_lookup(boff, bxs, bds, b, w)
        if dw < INF:
            return pdistt[i * n + a] + dw
        i += 1
        if i >= k:
            return INF
        a, b = b, a
        w = ptab[i * n + a]
        if w < 0:
            return INF


@njit(cache=True)
def tz_query_modified_bulk(k, n, ptab, pdistt, boff, bxs, bds, ss, tt, out):
    for q in range(ss.shape[0]):
        out[q] = tz_query_modified(k, n, ptab, pdistt, boff, bxs, bds,
                                   ss[q], tt[q])


@njit(cache=True)
def tz_query_original_bulk(k, n, ptab, pdistt, boff, bxs, bds, ss, tt, out):
    for q in range(ss.shape[0]):
        out[q] = tz_query_original(k, n, ptab, pdistt, boff, bxs, bds,
                                   ss[q], tt[q])


# ---------------------------------------------------------------------------
# layered expath search
# ---------------------------------------------------------------------------
#
# Compiled twin of the pure-Python layered run in expath.py.  The two are
# kept behaviorally identical, heap tie-breaks included, and the test
# suite compares their full state arrays; change them together.

L_FROM_SOURCE = 0
L_SAME_VERTEX = 1
L_CROSS_EDGE = 2
L_WITHIN_LAYER = 3


@njit(cache=True)
def _lh_push(hd, hv, hn, d, v):
    if hn >= hd.shape[0]:
        nhd = np.empty(hd.shape[0] * 2, np.int64)
        nhv = np.empty(hv.shape[0] * 2, np.int64)
        nhd[:hn] = hd[:hn]
        nhv[:hn] = hv[:hn]
        hd, hv = nhd, nhv
    i = hn
    hd[i] = d
    hv[i] = v
    while i > 0:
        par = (i - 1) >> 1
        if hd[i] < hd[par] or (hd[i] == hd[par] and hv[i] < hv[par]):
            hd[i], hd[par] = hd[par], hd[i]
            hv[i], hv[par] = hv[par], hv[i]
            i = par
        else:
            break
    return hd, hv, hn + 1


@njit(cache=True)
def _lh_pop(hd, hv, hn):
    d = hd[0]
    v = hv[0]
    hn -= 1
    if hn > 0:
        hd[0] = hd[hn]
        hv[0] = hv[hn]
        i = 0
        while True:
            lc = 2 * i + 1
            if lc >= hn:
                break
            rc = lc + 1
            small = lc
            if rc < hn and (hd[rc] < hd[lc]
                            or (hd[rc] == hd[lc] and hv[rc] < hv[lc])):
                small = rc
            if (hd[small] < hd[i]
                    or (hd[small] == hd[i] and hv[small] < hv[i])):
                hd[i], hd[small] = hd[small], hd[i]
                hv[i], hv[small] = hv[small], hv[i]
                i = small
            else:
                break
    return d, v, hn


@njit(cache=True)
def _layered_into(n, indptr, nbr, eidx, wt, khi, klo, amask,
                  adist, ahi, alo, layers, seed_d, cap,
                  dist, relhi, rello, entry, entry_dist, bstart,
                  parent, pkind, peid, popped, hd, hv):
    """Fill one layered run's state arrays; returns the grown heap."""
    hn = 0
    for v in range(n):
        d0 = seed_d[v]
        if d0 >= INF:
            continue
        if d0 < dist[v]:
            dist[v] = d0
            entry[v] = v
            entry_dist[v] = d0
            bstart[v] = d0
            hd, hv, hn = _lh_push(hd, hv, hn, d0, v)
    while hn > 0:
        d, sid, hn = _lh_pop(hd, hv, hn)
        if d != dist[sid]:
            continue
        if popped[sid]:
            continue
        popped[sid] = 1
        j = sid // n
        u = sid - j * n
        bs = bstart[sid]
        if cap >= 0 and d - bs > cap:
            continue
        if j + 1 < layers:
            nid = sid + n
            fresher = (d == dist[nid] and popped[nid] == 0
                       and bs >= bstart[nid]
                       and (entry[nid] != u or bs > bstart[nid]))
            if d < dist[nid] or fresher:
                dist[nid] = d
                relhi[nid] = 0
                rello[nid] = 0
                entry[nid] = u
                entry_dist[nid] = d
                bstart[nid] = bs
                parent[nid] = sid
                pkind[nid] = L_SAME_VERTEX
                peid[nid] = -1
                hd, hv, hn = _lh_push(hd, hv, hn, d, nid)
        x = entry[sid]
        xdist = entry_dist[sid]
        rhi = relhi[sid]
        rlo = rello[sid]
        for it in range(indptr[u], indptr[u + 1]):
            e = eidx[it]
            if amask[e]:
                continue
            v = nbr[it]
            w = wt[e]
            nd = d + w
            if cap >= 0 and nd - bs > cap:
                continue
            if j + 1 < layers:
                nid = (j + 1) * n + v
                fresher = (nd == dist[nid] and popped[nid] == 0
                           and bs >= bstart[nid]
                           and (entry[nid] != v or bs > bstart[nid]))
                if nd < dist[nid] or fresher:
                    dist[nid] = nd
                    relhi[nid] = 0
                    rello[nid] = 0
                    entry[nid] = v
                    entry_dist[nid] = nd
                    bstart[nid] = bs
                    parent[nid] = sid
                    pkind[nid] = L_CROSS_EDGE
                    peid[nid] = e
                    hd, hv, hn = _lh_push(hd, hv, hn, nd, nid)
            nid = j * n + v
            if nd < dist[nid]:
                if nd - xdist != adist[x, v]:
                    continue
                nlo = rlo + klo[e]
                nhi = rhi + khi[e] + (nlo >> LANE_BITS)
                nlo = nlo & LANE_MASK
                if nhi != ahi[x, v] or nlo != alo[x, v]:
                    continue
                dist[nid] = nd
                relhi[nid] = nhi
                rello[nid] = nlo
                entry[nid] = x
                entry_dist[nid] = xdist
                bstart[nid] = bs
                parent[nid] = sid
                pkind[nid] = L_WITHIN_LAYER
                peid[nid] = e
                hd, hv, hn = _lh_push(hd, hv, hn, nd, nid)
    return hd, hv


@njit(cache=True)
def expath_layered(n, indptr, nbr, eidx, wt, khi, klo, amask,
                   adist, ahi, alo, layers, seed_d, cap):
    """One layered search from dense per-vertex seed distances."""
    size = layers * n
    dist = np.full(size, INF, np.int64)
    relhi = np.zeros(size, np.int64)
    rello = np.zeros(size, np.int64)
    entry = np.full(size, -1, np.int32)
    entry_dist = np.zeros(size, np.int64)
    bstart = np.zeros(size, np.int64)
    parent = np.full(size, -1, np.int64)
    pkind = np.zeros(size, np.int8)
    peid = np.full(size, -1, np.int32)
    popped = np.zeros(size, np.uint8)
    hd = np.empty(4 * size + 64, np.int64)
    hv = np.empty(4 * size + 64, np.int64)
    _layered_into(n, indptr, nbr, eidx, wt, khi, klo, amask,
                  adist, ahi, alo, layers, seed_d, cap,
                  dist, relhi, rello, entry, entry_dist, bstart,
                  parent, pkind, peid, popped, hd, hv)
    return (dist, relhi, rello, entry, entry_dist, bstart, parent,
            pkind, peid)


@njit(cache=True)
def expath_blocks(n, indptr, nbr, eidx, wt, khi, klo, amask,
                  adist, ahi, alo, layers, seed0, caps):
    """All block phases of one expath search in a single call.

    Row b of every output holds the state of the layered run for block
    b; each run is seeded by the previous run's arrival distances at
    its deepest layer.
    """
    nb = caps.shape[0]
    size = layers * n
    dist = np.full((nb, size), INF, np.int64)
    relhi = np.zeros((nb, size), np.int64)
    rello = np.zeros((nb, size), np.int64)
    entry = np.full((nb, size), -1, np.int32)
    entry_dist = np.zeros((nb, size), np.int64)
    bstart = np.zeros((nb, size), np.int64)
    parent = np.full((nb, size), -1, np.int64)
    pkind = np.zeros((nb, size), np.int8)
    peid = np.full((nb, size), -1, np.int32)
    popped = np.zeros(size, np.uint8)
    hd = np.empty(4 * size + 64, np.int64)
    hv = np.empty(4 * size + 64, np.int64)
    seed = seed0
    for b in range(nb):
        if b > 0:
            popped[:] = 0
        hd, hv = _layered_into(n, indptr, nbr, eidx, wt, khi, klo, amask,
                               adist, ahi, alo, layers, seed, caps[b],
                               dist[b], relhi[b], rello[b], entry[b],
                               entry_dist[b], bstart[b], parent[b],
                               pkind[b], peid[b], popped, hd, hv)
        seed = dist[b, (layers - 1) * n:]
    return (dist, relhi, rello, entry, entry_dist, bstart, parent,
            pkind, peid)
