"""Pure-Python throughput kernels.

Reference implementation of the four numeric primitives behind block
throughput analysis.  A compiled Cython twin (``_kernels.pyx``) implements
the same contracts with the same exact integer arithmetic; results must be
bit-identical, which the test suite asserts.  All rationals cross the
boundary as reduced ``(numerator, denominator)`` integer pairs so neither
implementation ever touches floating point.

Conventions shared by both implementations:

* Ports are bit positions; a uop's admissible ports form a non-zero mask.
* Dependence graphs are instruction-level; every edge carries the producer
  latency as weight and a 0/1 flag marking whether it wraps around the
  iteration boundary.
* ``schedule_cycles`` models greedy strict in-order issue: at most
  ``width`` uops per cycle, one uop per port per cycle, lowest-index free
  admissible port wins, and the first uop of an instruction waits until
  every producer's result is ready (producer issue of its last uop plus
  latency).
"""

from __future__ import annotations

from math import gcd

IMPLEMENTATION = "python"


def port_bound(masks: list[int], n_ports: int) -> tuple[int, int]:
    """Exact min-max fractional port load, as a reduced (num, den) pair.

    Over all non-empty port subsets S, takes the maximum of
    (number of uops whose admissible mask fits inside S) / |S|.  By LP
    duality this equals the optimum of the fractional assignment problem:
    no distribution of uops over admissible ports can make every port's
    load smaller.  Returns (0, 1) when there are no uops.
    """
    counts: dict[int, int] = {}
    for m in masks:
        counts[m] = counts.get(m, 0) + 1
    distinct = sorted(counts.items())
    best_num, best_den = 0, 1
    for subset in range(1, 1 << n_ports):
        size = subset.bit_count()
        covered = 0
        for mask, count in distinct:
            if mask & ~subset == 0:
                covered += count
        if covered * best_den > best_num * size:
            g = gcd(covered, size)
            best_num, best_den = covered // g, size // g
    return best_num, best_den


def critical_path(
    n_instr: int,
    latency: list[int],
    prod_flat: list[int],
    prod_off: list[int],
) -> int:
    """Longest def->use latency chain through the block, no wraparound.

    ``finish(i) = latency(i) + max(finish(p) for producers p of i, default 0)``;
    returns the maximum finish time.  Producers are given in CSR form
    (``prod_flat[prod_off[i]:prod_off[i+1]]``) and always precede ``i``.
    """
    finish = [0] * n_instr
    best = 0
    for i in range(n_instr):
        ready = 0
        for k in range(prod_off[i], prod_off[i + 1]):
            f = finish[prod_flat[k]]
            if f > ready:
                ready = f
        finish[i] = ready + latency[i]
        if finish[i] > best:
            best = finish[i]
    return best


def recurrence_bound(
    n_instr: int,
    edge_src: list[int],
    edge_dst: list[int],
    edge_weight: list[int],
    edge_cross: list[int],
) -> tuple[int, int]:
    """Slowest dependence recurrence, as reduced (num, den) cycles/iteration.

    Over all cycles in the dependence graph, the maximum of
    (total producer latency) / (number of iteration-boundary crossings).
    Intra-iteration edges (cross=0) point strictly forward, so every cycle
    crosses the boundary at least once; a cycle crossing once is exactly a
    loop-carried def->use latency chain.  Returns (0, 1) for an acyclic
    graph.

    Exact algorithm (iterated cycle improvement): given the best ratio
    found so far, look for a cycle with a strictly larger ratio via
    Bellman-Ford longest-path on integer reduced weights
    ``(w*den - num*x) * (n+1) - 1``.  The -1 term makes ratio-equal cycles
    strictly negative while keeping strictly-better cycles positive (a
    simple cycle has at most n edges), so any positive cycle found in the
    predecessor graph strictly improves the ratio and the iteration
    terminates at the exact maximum.
    """
    m = len(edge_src)
    if m == 0:
        return 0, 1
    best_num, best_den = 0, 1
    scale = n_instr + 1
    while True:
        reduced = [
            (edge_weight[e] * best_den - best_num * edge_cross[e]) * scale - 1
            for e in range(m)
        ]
        max_rw = max(reduced)
        if max_rw <= 0:
            return best_num, best_den
        cap = n_instr * max_rw + 1
        dist = [0] * n_instr
        pred_edge = [-1] * n_instr
        start = -1
        for _round in range(n_instr + 1):
            updated = -1
            for e in range(m):
                nd = dist[edge_src[e]] + reduced[e]
                if nd > dist[edge_dst[e]]:
                    dist[edge_dst[e]] = nd
                    pred_edge[edge_dst[e]] = e
                    updated = edge_dst[e]
                    if nd > cap:
                        start = updated
                        break
            if start >= 0 or updated == -1:
                break
        if start < 0:
            if updated == -1:
                return best_num, best_den
            start = updated
        # Walk predecessors until a node repeats; that node closes a cycle
        # whose reduced weight is positive, i.e. whose ratio beats the best.
        seen = [False] * n_instr
        v = start
        while not seen[v]:
            seen[v] = True
            v = edge_src[pred_edge[v]]
        w_sum = 0
        x_sum = 0
        u = v
        while True:
            e = pred_edge[u]
            w_sum += edge_weight[e]
            x_sum += edge_cross[e]
            u = edge_src[e]
            if u == v:
                break
        g = gcd(w_sum, x_sum)
        best_num, best_den = w_sum // g, x_sum // g


def schedule_cycles(
    width: int,
    uop_mask: list[int],
    uop_instr: list[int],
    latency: list[int],
    prod_flat: list[int],
    prod_off: list[int],
) -> int:
    """Greedy strict in-order issue schedule; returns last issue cycle + 1.

    This is the single-shot cost of a block from an empty pipeline measured
    at issue: trailing latency of the final instructions is not charged,
    which is what lets a successor block's cost be measured as the schedule
    growth when it is appended to its predecessor.
    """
    n_uops = len(uop_mask)
    n_instr = len(latency)
    finish = [0] * n_instr
    cycle = 0
    used_mask = 0
    width_used = 0
    last_issue = 0
    for u in range(n_uops):
        i = uop_instr[u]
        earliest = cycle
        if u == 0 or uop_instr[u - 1] != i:
            for k in range(prod_off[i], prod_off[i + 1]):
                f = finish[prod_flat[k]]
                if f > earliest:
                    earliest = f
        if earliest > cycle:
            cycle = earliest
            used_mask = 0
            width_used = 0
        while True:
            free = uop_mask[u] & ~used_mask
            if width_used < width and free:
                used_mask |= free & -free
                width_used += 1
                break
            cycle += 1
            used_mask = 0
            width_used = 0
        last_issue = cycle
        if u == n_uops - 1 or uop_instr[u + 1] != i:
            finish[i] = cycle + latency[i]
    return last_issue + 1 if n_uops else 0
