# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled throughput kernels.

Twin of ``_kernels_py``: same contracts, same exact integer arithmetic,
bit-identical results.  See that module for the full documentation of each
primitive.  All internal arithmetic fits in signed 64-bit integers as long
as callers respect the envelope enforced by ``_dispatch.select_kernels``
(instruction count, uop count and latencies are bounded there); the
pure-Python twin has no such limits.
"""

from libc.stdlib cimport free, malloc
from libc.string cimport memset

cdef extern from *:
    int __builtin_popcountll(unsigned long long) nogil

IMPLEMENTATION = "compiled"


cdef long long _gcd(long long a, long long b) noexcept:
    while b:
        a, b = b, a % b
    return a if a >= 0 else -a


cdef void* _xmalloc(size_t nbytes) except NULL:
    cdef void* p = malloc(nbytes if nbytes > 0 else 1)
    if p == NULL:
        raise MemoryError()
    return p


def port_bound(masks, int n_ports):
    """Exact min-max fractional port load as reduced (num, den)."""
    cdef int n_distinct = 0
    cdef long long best_num = 0, best_den = 1
    cdef long long covered, size, g
    cdef int subset, j, full
    counts = {}
    for m in masks:
        counts[m] = counts.get(m, 0) + 1
    distinct = sorted(counts.items())
    n_distinct = len(distinct)
    cdef long long* dmask = <long long*>_xmalloc(n_distinct * sizeof(long long))
    cdef long long* dcount = <long long*>_xmalloc(n_distinct * sizeof(long long))
    try:
        for j in range(n_distinct):
            dmask[j] = distinct[j][0]
            dcount[j] = distinct[j][1]
        full = (1 << n_ports) - 1
        for subset in range(1, full + 1):
            size = <long long>__builtin_popcountll(<unsigned long long>subset)
            covered = 0
            for j in range(n_distinct):
                if dmask[j] & ~(<long long>subset) == 0:
                    covered += dcount[j]
            if covered * best_den > best_num * size:
                g = _gcd(covered, size)
                best_num = covered // g
                best_den = size // g
        return int(best_num), int(best_den)
    finally:
        free(dmask)
        free(dcount)


def critical_path(int n_instr, latency, prod_flat, prod_off):
    """Longest def->use latency chain through the block, no wraparound."""
    cdef long long* lat = <long long*>_xmalloc(n_instr * sizeof(long long))
    cdef long long* fin = <long long*>_xmalloc(n_instr * sizeof(long long))
    cdef int n_flat = len(prod_flat)
    cdef int* pf = <int*>_xmalloc(n_flat * sizeof(int))
    cdef int* po = <int*>_xmalloc((n_instr + 1) * sizeof(int))
    cdef long long best = 0, ready, f
    cdef int i, k
    try:
        for i in range(n_instr):
            lat[i] = latency[i]
        for i in range(n_flat):
            pf[i] = prod_flat[i]
        for i in range(n_instr + 1):
            po[i] = prod_off[i]
        for i in range(n_instr):
            ready = 0
            for k in range(po[i], po[i + 1]):
                f = fin[pf[k]]
                if f > ready:
                    ready = f
            fin[i] = ready + lat[i]
            if fin[i] > best:
                best = fin[i]
        return int(best)
    finally:
        free(lat)
        free(fin)
        free(pf)
        free(po)


def recurrence_bound(int n_instr, edge_src, edge_dst, edge_weight, edge_cross):
    """Slowest dependence recurrence as reduced (num, den) cycles/iteration."""
    cdef int m = len(edge_src)
    if m == 0:
        return 0, 1
    cdef long long best_num = 0, best_den = 1
    cdef long long scale = n_instr + 1
    cdef long long max_rw, cap, nd, w_sum, x_sum, g
    cdef int e, v, u, start, updated, rnd, hit_cap
    cdef int* src = <int*>_xmalloc(m * sizeof(int))
    cdef int* dst = <int*>_xmalloc(m * sizeof(int))
    cdef long long* w = <long long*>_xmalloc(m * sizeof(long long))
    cdef long long* x = <long long*>_xmalloc(m * sizeof(long long))
    cdef long long* reduced = <long long*>_xmalloc(m * sizeof(long long))
    cdef long long* dist = <long long*>_xmalloc(n_instr * sizeof(long long))
    cdef int* pred_edge = <int*>_xmalloc(n_instr * sizeof(int))
    cdef char* seen = <char*>_xmalloc(n_instr * sizeof(char))
    try:
        for e in range(m):
            src[e] = edge_src[e]
            dst[e] = edge_dst[e]
            w[e] = edge_weight[e]
            x[e] = edge_cross[e]
        while True:
            for e in range(m):
                reduced[e] = (w[e] * best_den - best_num * x[e]) * scale - 1
            max_rw = reduced[0]
            for e in range(1, m):
                if reduced[e] > max_rw:
                    max_rw = reduced[e]
            if max_rw <= 0:
                return int(best_num), int(best_den)
            cap = n_instr * max_rw + 1
            for v in range(n_instr):
                dist[v] = 0
                pred_edge[v] = -1
            start = -1
            updated = -1
            hit_cap = 0
            for rnd in range(n_instr + 1):
                updated = -1
                for e in range(m):
                    nd = dist[src[e]] + reduced[e]
                    if nd > dist[dst[e]]:
                        dist[dst[e]] = nd
                        pred_edge[dst[e]] = e
                        updated = dst[e]
                        if nd > cap:
                            start = updated
                            hit_cap = 1
                            break
                if hit_cap or updated == -1:
                    break
            if start < 0:
                if updated == -1:
                    return int(best_num), int(best_den)
                start = updated
            memset(seen, 0, n_instr)
            v = start
            while not seen[v]:
                seen[v] = 1
                v = src[pred_edge[v]]
            w_sum = 0
            x_sum = 0
            u = v
            while True:
                e = pred_edge[u]
                w_sum += w[e]
                x_sum += x[e]
                u = src[e]
                if u == v:
                    break
            g = _gcd(w_sum, x_sum)
            best_num = w_sum // g
            best_den = x_sum // g
    finally:
        free(src)
        free(dst)
        free(w)
        free(x)
        free(reduced)
        free(dist)
        free(pred_edge)
        free(seen)


def schedule_cycles(int width, uop_mask, uop_instr, latency, prod_flat, prod_off):
    """Greedy strict in-order issue schedule; returns last issue cycle + 1."""
    cdef int n_uops = len(uop_mask)
    cdef int n_instr = len(latency)
    if n_uops == 0:
        return 0
    cdef long long* mask = <long long*>_xmalloc(n_uops * sizeof(long long))
    cdef int* instr = <int*>_xmalloc(n_uops * sizeof(int))
    cdef long long* lat = <long long*>_xmalloc(n_instr * sizeof(long long))
    cdef long long* fin = <long long*>_xmalloc(n_instr * sizeof(long long))
    cdef int n_flat = len(prod_flat)
    cdef int* pf = <int*>_xmalloc(n_flat * sizeof(int))
    cdef int* po = <int*>_xmalloc((n_instr + 1) * sizeof(int))
    cdef long long cycle = 0, earliest, f, used_mask = 0, freebits, last_issue = 0
    cdef int width_used = 0
    cdef int u, i, k
    try:
        for u in range(n_uops):
            mask[u] = uop_mask[u]
            instr[u] = uop_instr[u]
        for i in range(n_instr):
            lat[i] = latency[i]
            fin[i] = 0
        for i in range(n_flat):
            pf[i] = prod_flat[i]
        for i in range(n_instr + 1):
            po[i] = prod_off[i]
        for u in range(n_uops):
            i = instr[u]
            earliest = cycle
            if u == 0 or instr[u - 1] != i:
                for k in range(po[i], po[i + 1]):
                    f = fin[pf[k]]
                    if f > earliest:
                        earliest = f
            if earliest > cycle:
                cycle = earliest
                used_mask = 0
                width_used = 0
            while True:
                freebits = mask[u] & ~used_mask
                if width_used < width and freebits != 0:
                    used_mask |= freebits & (-freebits)
                    width_used += 1
                    break
                cycle += 1
                used_mask = 0
                width_used = 0
            last_issue = cycle
            if u == n_uops - 1 or instr[u + 1] != i:
                fin[i] = cycle + lat[i]
        return int(last_issue + 1)
    finally:
        free(mask)
        free(instr)
        free(lat)
        free(fin)
        free(pf)
        free(po)
