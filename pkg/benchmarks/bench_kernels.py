#!/usr/bin/env python3
"""Benchmark the compiled analysis kernels against the pure-Python twins.

Both implementations share one contract (see locus/throughput/_kernels_py.py
for the reference semantics), so the harness times the same seeded synthetic
workloads through each and reports median wall-clock per call plus the
speedup ratio.  Results are also cross-checked for exact equality, making
this double as a coarse parity smoke test.

Usage:
    python3 benchmarks/bench_kernels.py [--blocks N] [--size N]
                                        [--repeats N] [--seed N]
"""

from __future__ import annotations

import argparse
import random
import statistics
import sys
from time import perf_counter

from locus.throughput import _kernels_py

try:
    from locus.throughput import _kernels as _compiled
except ImportError:  # pragma: no cover - source-only installs
    _compiled = None

N_PORTS = 8


def synthesize_block(rng: random.Random, n_instr: int) -> dict:
    """Seeded random inputs shaped like one prepared basic block."""
    latency = [rng.randint(0, 24) for _ in range(n_instr)]

    # CSR producer lists: each instruction consumes up to two earlier results.
    prod_flat: list[int] = []
    prod_off = [0]
    for i in range(n_instr):
        for _ in range(rng.randint(0, min(2, i))):
            prod_flat.append(rng.randrange(i))
        prod_off.append(len(prod_flat))

    # One or two uops per instruction, each with a nonempty port mask.
    uop_mask: list[int] = []
    uop_instr: list[int] = []
    for i in range(n_instr):
        for _ in range(rng.randint(1, 2)):
            uop_mask.append(rng.randint(1, (1 << N_PORTS) - 1))
            uop_instr.append(i)

    # Loop-carried dependence edges; cross=1 edges close the cycles.
    n_edges = rng.randint(0, 2 * n_instr)
    edge_src = [rng.randrange(n_instr) for _ in range(n_edges)]
    edge_dst = [rng.randrange(n_instr) for _ in range(n_edges)]
    edge_weight = [rng.randint(0, 24) for _ in range(n_edges)]
    edge_cross = []
    for k in range(n_edges):
        if edge_src[k] < edge_dst[k] and rng.random() < 0.5:
            edge_cross.append(0)  # forward intra-iteration edge
        else:
            edge_cross.append(1)
    return {
        "latency": latency,
        "prod_flat": prod_flat,
        "prod_off": prod_off,
        "uop_mask": uop_mask,
        "uop_instr": uop_instr,
        "edge_src": edge_src,
        "edge_dst": edge_dst,
        "edge_weight": edge_weight,
        "edge_cross": edge_cross,
    }


def kernel_calls(blocks: list[dict]):
    """(name, callable(impl) -> result list) for each kernel under test."""

    def run_port_bound(impl):
        return [impl.port_bound(b["uop_mask"], N_PORTS) for b in blocks]

    def run_critical_path(impl):
        return [
            impl.critical_path(
                len(b["latency"]), b["latency"], b["prod_flat"], b["prod_off"]
            )
            for b in blocks
        ]

    def run_recurrence(impl):
        return [
            impl.recurrence_bound(
                len(b["latency"]),
                b["edge_src"],
                b["edge_dst"],
                b["edge_weight"],
                b["edge_cross"],
            )
            for b in blocks
        ]

    def run_schedule(impl):
        return [
            impl.schedule_cycles(
                4,
                b["uop_mask"],
                b["uop_instr"],
                b["latency"],
                b["prod_flat"],
                b["prod_off"],
            )
            for b in blocks
        ]

    return [
        ("port_bound", run_port_bound),
        ("critical_path", run_critical_path),
        ("recurrence_bound", run_recurrence),
        ("schedule_cycles", run_schedule),
    ]


def time_call(fn, impl, repeats: int) -> tuple[float, object]:
    samples = []
    result = None
    for _ in range(repeats):
        begin = perf_counter()
        result = fn(impl)
        samples.append(perf_counter() - begin)
    return statistics.median(samples), result


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--blocks", type=int, default=40,
                        help="number of synthetic blocks (default: 40)")
    parser.add_argument("--size", type=int, default=256,
                        help="instructions per block (default: 256)")
    parser.add_argument("--repeats", type=int, default=5,
                        help="timing repetitions, median reported (default: 5)")
    parser.add_argument("--seed", type=int, default=0,
                        help="RNG seed (default: 0)")
    args = parser.parse_args(argv)

    rng = random.Random(args.seed)
    blocks = [synthesize_block(rng, args.size) for _ in range(args.blocks)]

    print(f"{args.blocks} blocks x {args.size} instructions, "
          f"median of {args.repeats} runs, seed {args.seed}")
    if _compiled is None:
        print("compiled kernels unavailable; timing the pure-Python twin only")
    header = f"{'kernel':<18}{'python':>12}{'compiled':>12}{'speedup':>10}"
    print(header)
    print("-" * len(header))

    for name, fn in kernel_calls(blocks):
        python_s, python_result = time_call(fn, _kernels_py, args.repeats)
        if _compiled is None:
            print(f"{name:<18}{python_s * 1e3:>10.2f}ms{'-':>12}{'-':>10}")
            continue
        compiled_s, compiled_result = time_call(fn, _compiled, args.repeats)
        if python_result != compiled_result:
            print(f"{name:<18}RESULT MISMATCH between implementations",
                  file=sys.stderr)
            return 1
        ratio = python_s / compiled_s if compiled_s > 0 else float("inf")
        print(f"{name:<18}{python_s * 1e3:>10.2f}ms"
              f"{compiled_s * 1e3:>10.2f}ms{ratio:>9.1f}x")
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
