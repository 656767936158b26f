# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled hot kernels: max-flow feasibility, subset enumeration and the
randomized approximate block construction.

Semantics match ``_pykernels`` exactly; see that module for the reference.
"""

import numpy as np
cimport numpy as cnp
from libc.stdlib cimport malloc, free
from libc.stdint cimport uint64_t, int64_t

cnp.import_array()

cdef double REL_TOL = 1e-9
cdef double ABS_TOL = 1e-12


cdef extern from *:
    int __builtin_popcountll(unsigned long long) nogil


cdef inline bint _holds(int64_t[:, ::1] contents, int64_t[::1] fill, int j, int64_t obj) nogil:
    cdef int s
    for s in range(fill[j]):
        if contents[j, s] == obj:
            return True
    return False


cdef struct Net:
    int k
    int n
    int V
    int sink
    int n_edges
    int first_choice_edge
    int first_sink_edge
    int *to
    int *adj_ptr
    int *adj
    double *cap
    double *orig
    int *level
    int *it
    int *queue


cdef int net_init(Net *g, int n_nodes, const int64_t[:] indptr, const int64_t[:] indices) except -1:
    cdef int k = indptr.shape[0] - 1
    cdef int nnz = <int>indptr[k]
    cdef int i, p, j, e, u
    g.k = k
    g.n = n_nodes
    g.V = k + n_nodes + 2
    g.sink = k + n_nodes + 1
    g.n_edges = 2 * (k + nnz + n_nodes)
    g.first_choice_edge = 2 * k
    g.first_sink_edge = 2 * k + 2 * nnz
    g.to = <int *>malloc(g.n_edges * sizeof(int))
    g.adj = <int *>malloc(g.n_edges * sizeof(int))
    g.adj_ptr = <int *>malloc((g.V + 1) * sizeof(int))
    g.cap = <double *>malloc(g.n_edges * sizeof(double))
    g.orig = <double *>malloc(g.n_edges * sizeof(double))
    g.level = <int *>malloc(g.V * sizeof(int))
    g.it = <int *>malloc(g.V * sizeof(int))
    g.queue = <int *>malloc(g.V * sizeof(int))
    if (g.to == NULL or g.adj == NULL or g.adj_ptr == NULL or g.cap == NULL
            or g.orig == NULL or g.level == NULL or g.it == NULL or g.queue == NULL):
        net_free(g)
        raise MemoryError()
    e = 0
    for i in range(k):
        g.to[e] = 1 + i
        g.to[e + 1] = 0
        e += 2
    for i in range(k):
        for p in range(<int>indptr[i], <int>indptr[i + 1]):
            g.to[e] = 1 + k + <int>indices[p]
            g.to[e + 1] = 1 + i
            e += 2
    for j in range(n_nodes):
        g.to[e] = g.sink
        g.to[e + 1] = 1 + k + j
        e += 2
    # adjacency in edge-id order, keyed by tail vertex (tail of e is to[e ^ 1])
    for u in range(g.V + 1):
        g.adj_ptr[u] = 0
    for e in range(g.n_edges):
        g.adj_ptr[g.to[e ^ 1] + 1] += 1
    for u in range(g.V):
        g.adj_ptr[u + 1] += g.adj_ptr[u]
    for u in range(g.V):
        g.it[u] = g.adj_ptr[u]
    for e in range(g.n_edges):
        u = g.to[e ^ 1]
        g.adj[g.it[u]] = e
        g.it[u] += 1
    return 0


cdef void net_free(Net *g):
    free(g.to)
    free(g.adj)
    free(g.adj_ptr)
    free(g.cap)
    free(g.orig)
    free(g.level)
    free(g.it)
    free(g.queue)


cdef void net_caps(Net *g, const double *rho, double m, double big) nogil:
    cdef int i, e
    for i in range(g.k):
        g.cap[2 * i] = rho[i]
        g.cap[2 * i + 1] = 0.0
    e = g.first_choice_edge
    while e < g.first_sink_edge:
        g.cap[e] = big
        g.cap[e + 1] = 0.0
        e += 2
    e = g.first_sink_edge
    while e < g.n_edges:
        g.cap[e] = m
        g.cap[e + 1] = 0.0
        e += 2
    for e in range(g.n_edges):
        g.orig[e] = g.cap[e]


cdef bint net_bfs(Net *g, double eps) nogil:
    cdef int head = 0, tail = 0, u, v, a, e
    for u in range(g.V):
        g.level[u] = -1
    g.level[0] = 0
    g.queue[tail] = 0
    tail += 1
    while head < tail:
        u = g.queue[head]
        head += 1
        for a in range(g.adj_ptr[u], g.adj_ptr[u + 1]):
            e = g.adj[a]
            v = g.to[e]
            if g.cap[e] > eps and g.level[v] < 0:
                g.level[v] = g.level[u] + 1
                g.queue[tail] = v
                tail += 1
    return g.level[g.sink] >= 0


cdef double net_dfs(Net *g, int u, double pushed, double eps) nogil:
    cdef int e, v
    cdef double got, c
    if u == g.sink:
        return pushed
    while g.it[u] < g.adj_ptr[u + 1]:
        e = g.adj[g.it[u]]
        v = g.to[e]
        if g.cap[e] > eps and g.level[v] == g.level[u] + 1:
            c = g.cap[e]
            got = net_dfs(g, v, pushed if pushed < c else c, eps)
            if got > 0.0:
                g.cap[e] -= got
                g.cap[e ^ 1] += got
                return got
        g.it[u] += 1
    return 0.0


cdef double net_run(Net *g, double eps, double big) nogil:
    cdef double flow = 0.0, got
    cdef int u
    while net_bfs(g, eps):
        for u in range(g.V):
            g.it[u] = g.adj_ptr[u]
        while True:
            got = net_dfs(g, 0, big, eps)
            if got <= 0.0:
                break
            flow += got
    return flow


cdef int quick_verdict(int n_nodes, const int64_t[:] indptr, const int64_t[:] indices,
                       const double *rho, double m, double total, double tol,
                       double *load) nogil:
    cdef int k = indptr.shape[0] - 1
    cdef int i, p, j, deg
    cdef double r, share, mx
    if total <= tol:
        return 1
    if total > m * n_nodes + tol:
        return 0
    for j in range(n_nodes):
        load[j] = 0.0
    for i in range(k):
        deg = <int>(indptr[i + 1] - indptr[i])
        r = rho[i]
        if r > m * deg + tol:
            return 0
        if r > 0.0:
            share = r / deg
            for p in range(<int>indptr[i], <int>indptr[i + 1]):
                load[indices[p]] += share
    mx = load[0]
    for j in range(1, n_nodes):
        if load[j] > mx:
            mx = load[j]
    if mx <= m:
        return 1
    return -1


cdef double row_total(const double *rho, int k) nogil:
    cdef double s = 0.0
    cdef int i
    for i in range(k):
        s += rho[i]
    return s


def max_flow(int n_nodes, indptr, indices, rho, double m):
    """Return (flow value, per-choice flows, source-side object mask)."""
    cdef const int64_t[:] ip = np.ascontiguousarray(indptr, dtype=np.int64)
    cdef const int64_t[:] ix = np.ascontiguousarray(indices, dtype=np.int64)
    cdef cnp.ndarray[cnp.float64_t, ndim=1] r = np.ascontiguousarray(rho, dtype=np.float64)
    cdef Net g
    cdef int k = ip.shape[0] - 1
    cdef int nnz = <int>ip[k]
    cdef int p, e
    cdef double total = row_total(&r[0], k) if k > 0 else 0.0
    cdef double big = total + m * n_nodes + 1.0
    cdef double eps = 1e-15 * (total if total > 1.0 else 1.0)
    cdef double flow
    net_init(&g, n_nodes, ip, ix)
    try:
        net_caps(&g, &r[0], m, big)
        flow = net_run(&g, eps, big)
        edge_flow = np.empty(nnz)
        for p in range(nnz):
            e = g.first_choice_edge + 2 * p
            edge_flow[p] = g.orig[e] - g.cap[e]
        reach = np.zeros(k, dtype=bool)
        for p in range(k):
            reach[p] = g.level[1 + p] >= 0
    finally:
        net_free(&g)
    return flow, edge_flow, reach


def feasible_batch(int n_nodes, indptr, indices, rho_mat, double m):
    cdef const int64_t[:] ip = np.ascontiguousarray(indptr, dtype=np.int64)
    cdef const int64_t[:] ix = np.ascontiguousarray(indices, dtype=np.int64)
    cdef cnp.ndarray[cnp.float64_t, ndim=2] R = np.ascontiguousarray(rho_mat, dtype=np.float64)
    cdef int rows = R.shape[0]
    cdef int k = ip.shape[0] - 1
    cdef cnp.ndarray[cnp.uint8_t, ndim=1] out = np.zeros(rows, dtype=np.uint8)
    cdef Net g
    cdef int row, quick
    cdef double total, tol, big, flow
    cdef double *load
    cdef const double *rho
    if rows == 0:
        return out
    load = <double *>malloc((n_nodes + 1) * sizeof(double))
    if load == NULL:
        raise MemoryError()
    net_init(&g, n_nodes, ip, ix)
    try:
        for row in range(rows):
            rho = &R[row, 0]
            total = row_total(rho, k)
            tol = REL_TOL * total + ABS_TOL
            quick = quick_verdict(n_nodes, ip, ix, rho, m, total, tol, load)
            if quick >= 0:
                out[row] = quick
                continue
            big = total + m * n_nodes + 1.0
            net_caps(&g, rho, m, big)
            flow = net_run(&g, 1e-15 * (total if total > 1.0 else 1.0), big)
            out[row] = flow >= total - tol
    finally:
        net_free(&g)
        free(load)
    return out


def feasible_batch_regular(int n_nodes, choices, rho_mat, double m):
    """Like ``feasible_batch`` but with one ``(k, d)`` allocation per row."""
    cdef cnp.ndarray[cnp.int64_t, ndim=3] C = np.ascontiguousarray(choices, dtype=np.int64)
    cdef cnp.ndarray[cnp.float64_t, ndim=2] R = np.ascontiguousarray(rho_mat, dtype=np.float64)
    cdef int rows = R.shape[0]
    cdef int k = C.shape[1], d = C.shape[2]
    cdef cnp.ndarray[cnp.uint8_t, ndim=1] out = np.zeros(rows, dtype=np.uint8)
    cdef const int64_t[:] ip = np.arange(0, k * d + 1, d, dtype=np.int64)
    cdef const int64_t[:] ix
    cdef Net g
    cdef int row, quick
    cdef double total, tol, big, flow
    cdef double *load
    cdef const double *rho
    load = <double *>malloc((n_nodes + 1) * sizeof(double))
    if load == NULL:
        raise MemoryError()
    try:
        for row in range(rows):
            ix = C[row].reshape(-1)
            rho = &R[row, 0]
            total = row_total(rho, k)
            tol = REL_TOL * total + ABS_TOL
            quick = quick_verdict(n_nodes, ip, ix, rho, m, total, tol, load)
            if quick >= 0:
                out[row] = quick
                continue
            big = total + m * n_nodes + 1.0
            net_init(&g, n_nodes, ip, ix)
            try:
                net_caps(&g, rho, m, big)
                flow = net_run(&g, 1e-15 * (total if total > 1.0 else 1.0), big)
            finally:
                net_free(&g)
            out[row] = flow >= total - tol
    finally:
        free(load)
    return out


def first_violating_subset(int n_nodes, indptr, indices, rho, double m):
    """Smallest bitmask I with sum(rho_I) > m * span(I) + tol, or -1."""
    cdef const int64_t[:] ip = np.ascontiguousarray(indptr, dtype=np.int64)
    cdef const int64_t[:] ix = np.ascontiguousarray(indices, dtype=np.int64)
    cdef cnp.ndarray[cnp.float64_t, ndim=1] r = np.ascontiguousarray(rho, dtype=np.float64)
    cdef int k = ip.shape[0] - 1
    cdef int i, p
    cdef int64_t lo, mask, size
    cdef uint64_t bits
    cdef double tol, total = 0.0
    cdef double *sums
    cdef uint64_t *unions
    cdef int64_t found = -1
    if k > 22:
        raise ValueError("too many objects for subset enumeration")
    if n_nodes > 64:
        from . import _pykernels
        return _pykernels.first_violating_subset(n_nodes, indptr, indices, rho, m)
    for i in range(k):
        total += r[i]
    tol = REL_TOL * total + ABS_TOL
    size = (<int64_t>1) << k
    sums = <double *>malloc(size * sizeof(double))
    unions = <uint64_t *>malloc(size * sizeof(uint64_t))
    if sums == NULL or unions == NULL:
        free(sums)
        free(unions)
        raise MemoryError()
    with nogil:
        sums[0] = 0.0
        unions[0] = 0
        for i in range(k):
            bits = 0
            for p in range(<int>ip[i], <int>ip[i + 1]):
                bits |= (<uint64_t>1) << ix[p]
            lo = (<int64_t>1) << i
            for mask in range(lo):
                sums[lo + mask] = sums[mask] + r[i]
                unions[lo + mask] = unions[mask] | bits
        for mask in range(size):
            if sums[mask] - m * <double>__builtin_popcountll(unions[mask]) > tol:
                found = mask
                break
    free(sums)
    free(unions)
    return found



def approx_block(int n, int d, queue_init, draws, int64_t max_pops):
    """Randomized approximate block construction; see ``_pykernels.approx_block``."""
    cdef cnp.ndarray[cnp.float64_t, ndim=1] dr = np.ascontiguousarray(draws, dtype=np.float64)
    cdef cnp.ndarray[cnp.int64_t, ndim=1] q0 = np.ascontiguousarray(queue_init, dtype=np.int64)
    cdef int total = q0.shape[0]
    cdef int cap = total + 1
    cdef int64_t n_draws = dr.shape[0]
    cdef int64_t used = 0, pops = 0
    out = np.zeros((n, d), dtype=np.int64)
    cdef int64_t[:, ::1] contents = out
    cdef int64_t[::1] fill = np.zeros(n, dtype=np.int64)
    cdef int64_t *queue = <int64_t *>malloc(cap * sizeof(int64_t))
    cdef int head = 0, tail = 0, count = 0
    cdef int64_t obj, victim
    cdef int j, start, placed, slot, t
    cdef bint status_ok = True
    cdef bint exhausted = False
    if not 1 <= d <= n:
        free(queue)
        raise ValueError("need 1 <= d <= n")
    if n_draws and (np.min(dr) < 0.0 or np.max(dr) >= 1.0):
        free(queue)
        raise ValueError("draws must lie in [0, 1)")
    if total and (np.min(q0) < 0 or np.max(q0) >= n):
        free(queue)
        raise ValueError("queue entries must be object ids in [0, n)")
    if queue == NULL:
        raise MemoryError()
    for t in range(total):
        queue[tail] = q0[t]
        tail = (tail + 1) % cap
        count += 1
    try:
        while count > 0:
            pops += 1
            if pops > max_pops:
                status_ok = False
                break
            obj = queue[head]
            head = (head + 1) % cap
            count -= 1
            if used >= n_draws:
                exhausted = True
                break
            start = <int>(dr[used] * n)
            used += 1
            placed = -1
            for j in range(start, n):
                if fill[j] < d and not _holds(contents, fill, j, obj):
                    placed = j
                    break
            if placed < 0:
                for j in range(n):
                    if not _holds(contents, fill, j, obj):
                        placed = j
                        break
                if fill[placed] >= d:
                    if used >= n_draws:
                        exhausted = True
                        break
                    slot = <int>(dr[used] * fill[placed])
                    used += 1
                    victim = contents[placed, slot]
                    contents[placed, slot] = contents[placed, fill[placed] - 1]
                    fill[placed] -= 1
                    queue[tail] = victim
                    tail = (tail + 1) % cap
                    count += 1
            contents[placed, fill[placed]] = obj
            fill[placed] += 1
    finally:
        free(queue)
    if not status_ok:
        return None, -1
    if exhausted:
        return None, used
    return out, used
