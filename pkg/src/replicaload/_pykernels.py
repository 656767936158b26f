"""Pure-Python implementations of the hot kernels.

These mirror ``_kernels.pyx`` step for step (same graph layout, same edge
order, same random-draw consumption) so either backend gives the same answers.
"""

from __future__ import annotations

from collections import deque

import numpy as np

REL_TOL = 1e-9
ABS_TOL = 1e-12
MAX_SUBSET_OBJECTS = 22


def tolerance(total: float) -> float:
    return REL_TOL * total + ABS_TOL


class _FlowNet:
    """Dinic max-flow on the source -> objects -> nodes -> sink network."""

    def __init__(self, n_nodes, indptr, indices):
        k = len(indptr) - 1
        self.k = k
        self.n = n_nodes
        self.V = k + n_nodes + 2
        self.src = 0
        self.sink = k + n_nodes + 1
        to = []
        adj = [[] for _ in range(self.V)]

        def add(u, v):
            adj[u].append(len(to))
            to.append(v)
            adj[v].append(len(to))
            to.append(u)

        for i in range(k):
            add(0, 1 + i)
        for i in range(k):
            for p in range(indptr[i], indptr[i + 1]):
                add(1 + i, 1 + k + int(indices[p]))
        for j in range(n_nodes):
            add(1 + k + j, self.sink)
        self.to = to
        self.adj = adj
        self.n_edges = len(to)
        self.first_choice_edge = 2 * k
        self.first_sink_edge = 2 * k + 2 * int(indptr[k])

    def set_caps(self, rho, m, big):
        k = self.k
        cap = [0.0] * self.n_edges
        for i in range(k):
            cap[2 * i] = float(rho[i])
        for e in range(self.first_choice_edge, self.first_sink_edge, 2):
            cap[e] = big
        for e in range(self.first_sink_edge, self.n_edges, 2):
            cap[e] = m
        self.cap = cap
        self.orig = cap[:]

    def _bfs(self, eps):
        level = [-1] * self.V
        level[self.src] = 0
        q = deque([self.src])
        to, cap, adj = self.to, self.cap, self.adj
        while q:
            u = q.popleft()
            for e in adj[u]:
                v = to[e]
                if cap[e] > eps and level[v] < 0:
                    level[v] = level[u] + 1
                    q.append(v)
        return level

    def _dfs(self, u, pushed, level, it, eps):
        if u == self.sink:
            return pushed
        to, cap, adj = self.to, self.cap, self.adj
        edges = adj[u]
        while it[u] < len(edges):
            e = edges[it[u]]
            v = to[e]
            if cap[e] > eps and level[v] == level[u] + 1:
                got = self._dfs(v, min(pushed, cap[e]), level, it, eps)
                if got > 0.0:
                    cap[e] -= got
                    cap[e ^ 1] += got
                    return got
            it[u] += 1
        return 0.0

    def run(self, eps, big):
        flow = 0.0
        while True:
            level = self._bfs(eps)
            if level[self.sink] < 0:
                return flow, level
            it = [0] * self.V
            while True:
                got = self._dfs(self.src, big, level, it, eps)
                if got <= 0.0:
                    break
                flow += got


def _quick_verdict(n_nodes, indptr, indices, rho, m, total, tol):
    """1 feasible, 0 infeasible, -1 undecided."""
    if total <= tol:
        return 1
    if total > m * n_nodes + tol:
        return 0
    k = len(indptr) - 1
    load = [0.0] * n_nodes
    for i in range(k):
        deg = indptr[i + 1] - indptr[i]
        r = rho[i]
        if r > m * deg + tol:
            return 0
        if r > 0.0:
            share = r / deg
            for p in range(indptr[i], indptr[i + 1]):
                load[indices[p]] += share
    if max(load) <= m:
        return 1
    return -1


def max_flow(n_nodes, indptr, indices, rho, m):
    """Return (flow value, per-choice flows, source-side object mask)."""
    indptr = [int(x) for x in indptr]
    indices = [int(x) for x in indices]
    rho = [float(x) for x in rho]
    total = sum(rho)
    big = total + m * n_nodes + 1.0
    eps = 1e-15 * max(1.0, total)
    net = _FlowNet(n_nodes, indptr, indices)
    net.set_caps(rho, m, big)
    flow, level = net.run(eps, big)
    nnz = indptr[-1]
    edge_flow = np.empty(nnz)
    for p in range(nnz):
        e = net.first_choice_edge + 2 * p
        edge_flow[p] = net.orig[e] - net.cap[e]
    reach = np.array([level[1 + i] >= 0 for i in range(net.k)], dtype=bool)
    return flow, edge_flow, reach


def feasible_batch(n_nodes, indptr, indices, rho_mat, m):
    indptr = [int(x) for x in indptr]
    indices = [int(x) for x in indices]
    net = _FlowNet(n_nodes, indptr, indices)
    out = np.zeros(len(rho_mat), dtype=np.uint8)
    for row, rho in enumerate(rho_mat):
        rho = [float(x) for x in rho]
        total = sum(rho)
        tol = tolerance(total)
        quick = _quick_verdict(n_nodes, indptr, indices, rho, m, total, tol)
        if quick >= 0:
            out[row] = quick
            continue
        big = total + m * n_nodes + 1.0
        net.set_caps(rho, m, big)
        flow, _ = net.run(1e-15 * max(1.0, total), big)
        out[row] = flow >= total - tol
    return out


def feasible_batch_regular(n_nodes, choices, rho_mat, m):
    """Like ``feasible_batch`` but with one ``(k, d)`` allocation per row."""
    out = np.zeros(len(rho_mat), dtype=np.uint8)
    for row in range(len(rho_mat)):
        ch = np.asarray(choices[row])
        k, d = ch.shape
        indptr = np.arange(0, k * d + 1, d)
        out[row] = feasible_batch(n_nodes, indptr, ch.ravel(), rho_mat[row : row + 1], m)[0]
    return out


def first_violating_subset(n_nodes, indptr, indices, rho, m):
    """Smallest bitmask I with sum(rho_I) > m * span(I) + tol, or -1."""
    k = len(indptr) - 1
    if k > MAX_SUBSET_OBJECTS:
        raise ValueError("too many objects for subset enumeration")
    rho = np.asarray(rho, dtype=float)
    tol = tolerance(float(rho.sum()))
    size = 1 << k
    sums = np.zeros(size)
    if n_nodes <= 64:
        unions = np.zeros(size, dtype=np.uint64)
        for i in range(k):
            bits = 0
            for p in range(indptr[i], indptr[i + 1]):
                bits |= 1 << int(indices[p])
            lo, hi = 1 << i, 1 << (i + 1)
            sums[lo:hi] = sums[:lo] + rho[i]
            unions[lo:hi] = unions[:lo] | np.uint64(bits)
        spans = np.bitwise_count(unions).astype(float)
    else:
        unions = [0] * size
        for i in range(k):
            bits = 0
            for p in range(indptr[i], indptr[i + 1]):
                bits |= 1 << int(indices[p])
            lo = 1 << i
            sums[lo : 2 * lo] = sums[:lo] + rho[i]
            for mask in range(lo):
                unions[lo + mask] = unions[mask] | bits
        spans = np.array([u.bit_count() for u in unions], dtype=float)
    bad = np.flatnonzero(sums - m * spans > tol)
    return int(bad[0]) if bad.size else -1


def approx_block(n, d, queue_init, draws, max_pops):
    """Randomized approximate block construction.

    Returns ``(contents, used)`` with ``contents`` an ``(n, d)`` array of the
    objects on each node, or ``(None, used)`` when ``draws`` ran out (or the
    pop budget was hit, signalled by ``used == -1``).
    """
    if not 1 <= d <= n:
        raise ValueError("need 1 <= d <= n")
    draws = np.asarray(draws, dtype=float)
    if draws.size and (draws.min() < 0.0 or draws.max() >= 1.0):
        raise ValueError("draws must lie in [0, 1)")
    queue_init = np.asarray(queue_init, dtype=np.int64)
    if queue_init.size and (queue_init.min() < 0 or queue_init.max() >= n):
        raise ValueError("queue entries must be object ids in [0, n)")
    contents = [[] for _ in range(n)]
    member = [set() for _ in range(n)]
    queue = deque(int(x) for x in queue_init)
    used = 0
    n_draws = len(draws)
    pops = 0
    while queue:
        pops += 1
        if pops > max_pops:
            return None, -1
        obj = queue.popleft()
        if used >= n_draws:
            return None, used
        start = int(draws[used] * n)
        used += 1
        placed = -1
        for j in range(start, n):
            if obj not in member[j] and len(contents[j]) < d:
                placed = j
                break
        if placed < 0:
            for j in range(n):
                if obj not in member[j]:
                    placed = j
                    break
            if len(contents[placed]) >= d:
                if used >= n_draws:
                    return None, used
                slot = int(draws[used] * len(contents[placed]))
                used += 1
                victim = contents[placed][slot]
                contents[placed][slot] = contents[placed][-1]
                contents[placed].pop()
                member[placed].discard(victim)
                queue.append(victim)
        contents[placed].append(obj)
        member[placed].add(obj)
    return np.array(contents, dtype=np.int64).reshape(n, d), used
