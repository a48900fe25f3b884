"""Pure-Python versions of the compiled kernels in ``_kernels.pyx``.

Both modules implement the same arithmetic in the same order, so results
agree bit for bit. See :mod:`contflow.kernels` for the array layout.
"""

import heapq
import math

END, PREEMPT, XFER, ARRIVE, DISPATCH = 0, 1, 2, 3, 4


def evaluate_placements(edge_src, edge_dst, out_ptr, out_edges, indeg, dur, task_cost,
                        offer_site, offer_avail, offer_power, offer_idle,
                        xt, xc, link_used, weights, placements, makespan, cost, energy,
                        objective):
    n = len(indeg)
    n_offers = len(offer_site)
    n_sites = link_used.shape[0]
    wt, wc, we = float(weights[0]), float(weights[1]), float(weights[2])
    edge_src = edge_src.tolist()
    edge_dst = edge_dst.tolist()
    out_ptr = out_ptr.tolist()
    out_edges = out_edges.tolist()
    indeg = indeg.tolist()
    dur = dur.tolist()
    task_cost = task_cost.tolist()
    offer_site = offer_site.tolist()
    offer_avail = offer_avail.tolist()
    offer_power = offer_power.tolist()
    offer_idle = offer_idle.tolist()
    xt = xt.tolist()
    xc = xc.tolist()
    link_used = link_used.tolist()

    for p in range(placements.shape[0]):
        pl = placements[p].tolist()
        busy = [False] * n_offers
        busy_sum = [0.0] * n_offers
        first = [math.inf] * n_offers
        last = [-math.inf] * n_offers
        link_free = [0.0] * (n_sites * n_sites)
        pending = list(indeg)
        queued = [False] * n
        ready = [0.0] * n
        heap = []
        total_cost = 0.0
        mk = 0.0
        for i in range(n):
            if pending[i] == 0:
                queued[i] = True
                heapq.heappush(heap, (0.0, DISPATCH, pl[i]))
        while heap:
            t, kind, key = heapq.heappop(heap)
            if kind == END:
                o = pl[key]
                busy[o] = False
                if t > mk:
                    mk = t
                heapq.heappush(heap, (t, DISPATCH, o))
                for k in range(out_ptr[key], out_ptr[key + 1]):
                    heapq.heappush(heap, (t, XFER, out_edges[k]))
            elif kind == XFER:
                s = offer_site[pl[edge_src[key]]]
                d = offer_site[pl[edge_dst[key]]]
                dt = xt[key][s][d]
                total_cost += xc[key][s][d]
                if link_used[s][d]:
                    li = s * n_sites + d
                    st = t if t > link_free[li] else link_free[li]
                    arr = st + dt
                    link_free[li] = arr
                else:
                    arr = t + dt
                heapq.heappush(heap, (arr, ARRIVE, key))
            elif kind == ARRIVE:
                c = edge_dst[key]
                pending[c] -= 1
                if pending[c] == 0:
                    queued[c] = True
                    ready[c] = t
                    heapq.heappush(heap, (t, DISPATCH, pl[c]))
            else:
                o = key
                if busy[o]:
                    continue
                best = -1
                for i in range(n):
                    if queued[i] and pl[i] == o and (best < 0 or ready[i] < ready[best]):
                        best = i
                if best < 0:
                    continue
                queued[best] = False
                busy[o] = True
                st = t if t > offer_avail[o] else offer_avail[o]
                d = dur[best][o]
                en = st + d
                busy_sum[o] += d
                if st < first[o]:
                    first[o] = st
                if en > last[o]:
                    last[o] = en
                total_cost += task_cost[best][o]
                heapq.heappush(heap, (en, END, best))
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


def longest_path(order, ptr, succ, weight):
    """Longest weighted path in a DAG given a topological ``order`` and CSR successors."""
    n = len(order)
    dist = [0.0] * n
    ptr = ptr.tolist()
    succ = succ.tolist()
    weight = weight.tolist()
    best = 0.0
    for u in order.tolist():
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
