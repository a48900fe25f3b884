# cython: boundscheck=False, wraparound=False, cdivision=True, language_level=3
"""Compiled static-evaluation and longest-path kernels.

Mirrors ``_pykernels.py`` operation for operation.
"""

from libc.math cimport INFINITY
from libc.stdlib cimport malloc, free

cdef enum:
    END = 0
    PREEMPT = 1
    XFER = 2
    ARRIVE = 3
    DISPATCH = 4


cdef struct Ev:
    double t
    int kind
    int key


cdef inline bint ev_lt(Ev a, Ev b) nogil:
    if a.t != b.t:
        return a.t < b.t
    if a.kind != b.kind:
        return a.kind < b.kind
    return a.key < b.key


cdef inline void heap_push(Ev* h, int* size, double t, int kind, int key) nogil:
    cdef int i = size[0]
    cdef int parent
    cdef Ev e
    e.t = t
    e.kind = kind
    e.key = key
    size[0] += 1
    while i > 0:
        parent = (i - 1) >> 1
        if ev_lt(e, h[parent]):
            h[i] = h[parent]
            i = parent
        else:
            break
    h[i] = e


cdef inline Ev heap_pop(Ev* h, int* size) nogil:
    cdef Ev top = h[0]
    cdef Ev last
    cdef int n, i, c
    size[0] -= 1
    n = size[0]
    if n > 0:
        last = h[n]
        i = 0
        while True:
            c = 2 * i + 1
            if c >= n:
                break
            if c + 1 < n and ev_lt(h[c + 1], h[c]):
                c += 1
            if ev_lt(h[c], last):
                h[i] = h[c]
                i = c
            else:
                break
        h[i] = last
    return top


def evaluate_placements(const int[::1] edge_src, const int[::1] edge_dst,
                        const int[::1] out_ptr, const int[::1] out_edges,
                        const int[::1] indeg, const double[:, ::1] dur,
                        const double[:, ::1] task_cost, const int[::1] offer_site,
                        const double[::1] offer_avail, const double[::1] offer_power,
                        const double[::1] offer_idle, const double[:, :, ::1] xt,
                        const double[:, :, ::1] xc, const signed char[:, ::1] link_used,
                        const double[::1] weights, const int[:, ::1] placements,
                        double[::1] makespan, double[::1] cost, double[::1] energy,
                        double[::1] objective):
    cdef int n = indeg.shape[0]
    cdef int n_offers = offer_site.shape[0]
    cdef int n_sites = link_used.shape[0]
    cdef int m = edge_src.shape[0]
    cdef int cap = 4 * n + 3 * m + 8
    cdef double wt = weights[0], wc = weights[1], we = weights[2]
    cdef Ev* heap = <Ev*> malloc(cap * sizeof(Ev))
    cdef int* busy = <int*> malloc(n_offers * sizeof(int))
    cdef double* busy_sum = <double*> malloc(n_offers * sizeof(double))
    cdef double* first = <double*> malloc(n_offers * sizeof(double))
    cdef double* last = <double*> malloc(n_offers * sizeof(double))
    cdef double* link_free = <double*> malloc(n_sites * n_sites * sizeof(double))
    cdef int* pending = <int*> malloc(n * sizeof(int))
    cdef int* queued = <int*> malloc(n * sizeof(int))
    cdef double* ready = <double*> malloc(n * sizeof(double))
    cdef int size, p, i, o, k, s, d, c, best, kind, key, li
    cdef double t, dt, st, arr, en, du, total_cost, mk, total_energy, idle
    cdef Ev ev
    if (heap == NULL or busy == NULL or busy_sum == NULL or first == NULL or last == NULL
            or link_free == NULL or pending == NULL or queued == NULL or ready == NULL):
        free(heap); free(busy); free(busy_sum); free(first); free(last)
        free(link_free); free(pending); free(queued); free(ready)
        raise MemoryError()
    try:
        with nogil:
            for p in range(placements.shape[0]):
                for o in range(n_offers):
                    busy[o] = 0
                    busy_sum[o] = 0.0
                    first[o] = INFINITY
                    last[o] = -INFINITY
                for li in range(n_sites * n_sites):
                    link_free[li] = 0.0
                size = 0
                total_cost = 0.0
                mk = 0.0
                for i in range(n):
                    pending[i] = indeg[i]
                    queued[i] = 0
                    ready[i] = 0.0
                for i in range(n):
                    if pending[i] == 0:
                        queued[i] = 1
                        heap_push(heap, &size, 0.0, DISPATCH, placements[p, i])
                while size > 0:
                    ev = heap_pop(heap, &size)
                    t = ev.t
                    kind = ev.kind
                    key = ev.key
                    if kind == END:
                        o = placements[p, key]
                        busy[o] = 0
                        if t > mk:
                            mk = t
                        heap_push(heap, &size, t, DISPATCH, o)
                        for k in range(out_ptr[key], out_ptr[key + 1]):
                            heap_push(heap, &size, t, XFER, out_edges[k])
                    elif kind == XFER:
                        s = offer_site[placements[p, edge_src[key]]]
                        d = offer_site[placements[p, edge_dst[key]]]
                        dt = xt[key, s, d]
                        total_cost += xc[key, s, d]
                        if link_used[s, d]:
                            li = s * n_sites + d
                            st = t if t > link_free[li] else link_free[li]
                            arr = st + dt
                            link_free[li] = arr
                        else:
                            arr = t + dt
                        heap_push(heap, &size, arr, ARRIVE, key)
                    elif kind == ARRIVE:
                        c = edge_dst[key]
                        pending[c] -= 1
                        if pending[c] == 0:
                            queued[c] = 1
                            ready[c] = t
                            heap_push(heap, &size, t, DISPATCH, placements[p, c])
                    else:
                        o = key
                        if busy[o]:
                            continue
                        best = -1
                        for i in range(n):
                            if queued[i] and placements[p, i] == o and (best < 0 or ready[i] < ready[best]):
                                best = i
                        if best < 0:
                            continue
                        queued[best] = 0
                        busy[o] = 1
                        st = t if t > offer_avail[o] else offer_avail[o]
                        du = dur[best, o]
                        en = st + du
                        busy_sum[o] += du
                        if st < first[o]:
                            first[o] = st
                        if en > last[o]:
                            last[o] = en
                        total_cost += task_cost[best, o]
                        heap_push(heap, &size, en, END, best)
                total_energy = 0.0
                for o in range(n_offers):
                    if first[o] <= last[o]:
                        idle = last[o] - first[o] - busy_sum[o]
                        if idle < 0.0:
                            idle = 0.0
                        total_energy += offer_power[o] * busy_sum[o] + offer_idle[o] * idle
                makespan[p] = mk
                cost[p] = total_cost
                energy[p] = total_energy
                objective[p] = wt * mk + wc * total_cost + we * total_energy
    finally:
        free(heap); free(busy); free(busy_sum); free(first); free(last)
        free(link_free); free(pending); free(queued); free(ready)


def longest_path(const long[::1] order, const long[::1] ptr, const long[::1] succ,
                 const double[::1] weight):
    cdef Py_ssize_t n = order.shape[0]
    cdef Py_ssize_t j, k, u, v
    cdef double best = 0.0, du, cand
    cdef double[::1] dist
    import numpy as np
    dist = np.zeros(n, dtype=np.float64)
    with nogil:
        for j in range(n):
            u = order[j]
            du = dist[u]
            if du > best:
                best = du
            for k in range(ptr[u], ptr[u + 1]):
                v = succ[k]
                cand = du + weight[k]
                if cand > dist[v]:
                    dist[v] = cand
                    if cand > best:
                        best = cand
    return best
