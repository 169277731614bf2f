"""Compiled graph kernels.

Every kernel takes the graph in CSR form (``indptr``, ``indices``,
``weights``) and vertex subsets as boolean masks. Distances outside the
subset, or unreachable, are ``inf``.
"""

import heapq

import numpy as np
from numba import njit

INF = np.inf


@njit(cache=True)
def dijkstra_masked(indptr, indices, weights, mask, sources):
    n = mask.shape[0]
    dist = np.full(n, INF)
    done = np.zeros(n, dtype=np.bool_)
    heap = [(0.0, np.int64(0))]
    heap.pop()
    for s in sources:
        if mask[s] and dist[s] > 0.0:
            dist[s] = 0.0
            heap.append((0.0, np.int64(s)))
    heapq.heapify(heap)
    while len(heap) > 0:
        d, v = heapq.heappop(heap)
        if done[v]:
            continue
        done[v] = True
        for e in range(indptr[v], indptr[v + 1]):
            u = indices[e]
            if not mask[u] or done[u]:
                continue
            nd = d + weights[e]
            if nd < dist[u]:
                dist[u] = nd
                heapq.heappush(heap, (nd, np.int64(u)))
    return dist


@njit(cache=True)
def is_connected_mask(indptr, indices, mask):
    n = mask.shape[0]
    start = -1
    total = 0
    for v in range(n):
        if mask[v]:
            total += 1
            if start < 0:
                start = v
    if total == 0:
        return False
    seen = np.zeros(n, dtype=np.bool_)
    stack = np.empty(total, dtype=np.int64)
    stack[0] = start
    top = 1
    seen[start] = True
    count = 1
    while top > 0:
        top -= 1
        v = stack[top]
        for e in range(indptr[v], indptr[v + 1]):
            u = indices[e]
            if mask[u] and not seen[u]:
                seen[u] = True
                stack[top] = u
                top += 1
                count += 1
    return count == total


@njit(cache=True)
def _heap_push(hd, hv, size, d, v):
    i = size
    hd[i] = d
    hv[i] = v
    while i > 0:
        parent = (i - 1) >> 1
        if hd[parent] < hd[i] or (hd[parent] == hd[i] and hv[parent] <= hv[i]):
            break
        hd[i], hd[parent] = hd[parent], hd[i]
        hv[i], hv[parent] = hv[parent], hv[i]
        i = parent
    return size + 1


@njit(cache=True)
def _heap_pop(hd, hv, size):
    d = hd[0]
    v = hv[0]
    size -= 1
    hd[0] = hd[size]
    hv[0] = hv[size]
    i = 0
    while True:
        left = 2 * i + 1
        if left >= size:
            break
        c = left
        right = left + 1
        if right < size and (hd[right] < hd[left] or
                             (hd[right] == hd[left] and hv[right] < hv[left])):
            c = right
        if hd[i] < hd[c] or (hd[i] == hd[c] and hv[i] <= hv[c]):
            break
        hd[i], hd[c] = hd[c], hd[i]
        hv[i], hv[c] = hv[c], hv[i]
        i = c
    return d, v, size


@njit(cache=True)
def _grow(indptr, indices, weights, base_mask, blocked, threshold, speed, k,
          dist, settled, accepted, hd, hv, touched):
    """Workspace version of the additive-subset growth.

    ``dist``/``settled``/``accepted`` must be clean (inf/False/False) on
    entry; the vertices written are listed in ``touched[:count]`` so the
    caller can reset them cheaply. Returns ``count``.
    """
    count = 0
    dist[k] = 0.0
    touched[count] = k
    count += 1
    size = _heap_push(hd, hv, 0, 0.0, k)
    while size > 0:
        d, v, size = _heap_pop(hd, hv, size)
        if settled[v]:
            continue
        settled[v] = True
        if not base_mask[v]:
            if blocked[v] or not (d / speed < threshold[v]):
                dist[v] = INF
                continue
        accepted[v] = True
        for e in range(indptr[v], indptr[v + 1]):
            u = indices[e]
            if settled[u]:
                continue
            nd = d + weights[e]
            if nd < dist[u]:
                if dist[u] == INF:
                    touched[count] = u
                    count += 1
                dist[u] = nd
                size = _heap_push(hd, hv, size, nd, u)
    return count


@njit(cache=True)
def additive_subset_kernel(indptr, indices, weights, base_mask, blocked,
                           threshold, speed, k):
    """Best-first growth of the additive subset from candidate generator k.

    A vertex of ``base_mask`` is always admitted. Any other vertex h is
    admitted when it is not ``blocked`` and ``d / speed < threshold[h]``,
    where d is its distance from k through already admitted vertices.
    Vertices are finalized in distance order, so a rejected vertex can
    never become admissible later.
    """
    n = base_mask.shape[0]
    dist = np.full(n, INF)
    settled = np.zeros(n, dtype=np.bool_)
    accepted = np.zeros(n, dtype=np.bool_)
    cap = indices.shape[0] + n + 1
    hd = np.empty(cap)
    hv = np.empty(cap, dtype=np.int64)
    touched = np.empty(n, dtype=np.int64)
    _grow(indptr, indices, weights, base_mask, blocked, threshold, speed, k,
          dist, settled, accepted, hd, hv, touched)
    for v in range(n):
        if not accepted[v]:
            dist[v] = INF
    return accepted, dist


@njit(cache=True)
def cost_sum(phi, cost):
    """Sum of phi[k] * cost[k] in ascending vertex order.

    Zero-mass vertices contribute nothing even at infinite cost.
    """
    total = 0.0
    for k in range(phi.shape[0]):
        if phi[k] > 0.0:
            total += phi[k] * cost[k]
    return total


@njit(cache=True)
def best_candidate(indptr, indices, weights, base_mask, blocked, others_cost,
                   speed, phi, baseline, dmat):
    """Scan candidate generators of the identifier set in ascending order.

    Keeps a candidate only when its total cost is strictly below the best
    so far (starting from ``baseline``). When ``dmat`` holds full-graph
    distances, a candidate whose cost cannot beat the incumbent even with
    those (shorter or equal) distances is skipped without growing it; pass
    a 0x0 array to scan every candidate. Returns the winning generator (-1
    when the baseline survives), its region mask and its cost.
    """
    n = base_mask.shape[0]
    best_k = -1
    best_h = baseline
    best_mask = base_mask.copy()
    dist = np.full(n, INF)
    settled = np.zeros(n, dtype=np.bool_)
    accepted = np.zeros(n, dtype=np.bool_)
    cap = indices.shape[0] + n + 1
    hd = np.empty(cap)
    hv = np.empty(cap, dtype=np.int64)
    touched = np.empty(n, dtype=np.int64)
    for k in range(n):
        if not base_mask[k]:
            continue
        if dmat.shape[0] > 0:
            lb = 0.0
            for v in range(n):
                if phi[v] > 0.0:
                    c = dmat[k, v] / speed
                    if others_cost[v] < c:
                        c = others_cost[v]
                    lb += phi[v] * c
            # relative slack absorbs summation-order rounding
            if lb - 1e-9 * max(1.0, abs(lb)) >= best_h:
                continue
        count = _grow(indptr, indices, weights, base_mask, blocked, others_cost, speed, k,
                      dist, settled, accepted, hd, hv, touched)
        h = 0.0
        for v in range(n):
            if phi[v] > 0.0:
                c = others_cost[v]
                if accepted[v]:
                    own = dist[v] / speed
                    if own < c:
                        c = own
                h += phi[v] * c
        if h < best_h:
            best_h = h
            best_k = k
            best_mask = accepted.copy()
        for j in range(count):
            v = touched[j]
            dist[v] = INF
            settled[v] = False
            accepted[v] = False
    return best_k, best_mask, best_h
