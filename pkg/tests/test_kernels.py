"""Compiled and pure-Python kernels must agree bit-for-bit.

Property-based parity tests drive both implementations with the same
randomized inputs; any divergence (value or type) is a bug in one of them.
The dispatch envelope that routes oversized blocks to the unbounded-integer
Python twin is checked as well.
"""

from __future__ import annotations

import random
import subprocess
import sys

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from locus.throughput import _dispatch, _kernels_py

compiled = pytest.importorskip(
    "locus.throughput._kernels", reason="compiled kernels not built"
)


# ---------------------------------------------------------------------------
# Input strategies
# ---------------------------------------------------------------------------


@st.composite
def port_bound_inputs(draw):
    n_ports = draw(st.integers(1, 6))
    masks = draw(st.lists(st.integers(1, (1 << n_ports) - 1), max_size=40))
    return masks, n_ports


@st.composite
def dependence_dag(draw, max_instr=24, max_latency=60):
    """(n, latencies, prod_flat, prod_off): producers strictly precede users."""
    n = draw(st.integers(0, max_instr))
    latencies = draw(st.lists(st.integers(0, max_latency), min_size=n, max_size=n))
    prod_flat: list[int] = []
    prod_off = [0]
    for i in range(n):
        producers = draw(
            st.lists(st.integers(0, i - 1), unique=True, max_size=min(i, 4))
            if i
            else st.just([])
        )
        prod_flat.extend(sorted(producers))
        prod_off.append(len(prod_flat))
    return n, latencies, prod_flat, prod_off


@st.composite
def recurrence_graph(draw, max_nodes=7, max_edges=12, max_weight=40):
    """Multigraph whose zero-crossing edges all point strictly forward."""
    n = draw(st.integers(1, max_nodes))
    m = draw(st.integers(0, max_edges))
    src, dst, weight, cross = [], [], [], []
    for _ in range(m):
        w = draw(st.integers(0, max_weight))
        if n > 1 and draw(st.booleans()):
            a = draw(st.integers(0, n - 2))
            b = draw(st.integers(a + 1, n - 1))
            src.append(a), dst.append(b), weight.append(w), cross.append(0)
        else:
            src.append(draw(st.integers(0, n - 1)))
            dst.append(draw(st.integers(0, n - 1)))
            weight.append(w)
            cross.append(1)
    return n, src, dst, weight, cross


@st.composite
def schedule_inputs(draw, max_instr=16):
    width = draw(st.integers(1, 6))
    n_ports = draw(st.integers(1, 6))
    n = draw(st.integers(0, max_instr))
    latencies = draw(st.lists(st.integers(0, 30), min_size=n, max_size=n))
    uop_mask, uop_instr = [], []
    for i in range(n):
        for _ in range(draw(st.integers(1, 3))):
            uop_mask.append(draw(st.integers(1, (1 << n_ports) - 1)))
            uop_instr.append(i)
    prod_flat: list[int] = []
    prod_off = [0]
    for i in range(n):
        producers = draw(
            st.lists(st.integers(0, i - 1), unique=True, max_size=min(i, 3))
            if i
            else st.just([])
        )
        prod_flat.extend(sorted(producers))
        prod_off.append(len(prod_flat))
    return width, uop_mask, uop_instr, latencies, prod_flat, prod_off


# ---------------------------------------------------------------------------
# Parity properties
# ---------------------------------------------------------------------------


@settings(max_examples=300, deadline=None)
@given(port_bound_inputs())
def test_port_bound_parity(inputs):
    masks, n_ports = inputs
    a = _kernels_py.port_bound(masks, n_ports)
    b = compiled.port_bound(masks, n_ports)
    assert a == b
    assert tuple(map(type, b)) == (int, int)


@settings(max_examples=300, deadline=None)
@given(dependence_dag())
def test_critical_path_parity(inputs):
    n, latencies, prod_flat, prod_off = inputs
    a = _kernels_py.critical_path(n, latencies, prod_flat, prod_off)
    b = compiled.critical_path(n, latencies, prod_flat, prod_off)
    assert a == b
    assert type(b) is int


@settings(max_examples=300, deadline=None)
@given(recurrence_graph())
def test_recurrence_bound_parity(inputs):
    n, src, dst, weight, cross = inputs
    a = _kernels_py.recurrence_bound(n, src, dst, weight, cross)
    b = compiled.recurrence_bound(n, src, dst, weight, cross)
    assert a == b


@settings(max_examples=300, deadline=None)
@given(schedule_inputs())
def test_schedule_cycles_parity(inputs):
    a = _kernels_py.schedule_cycles(*inputs)
    b = compiled.schedule_cycles(*inputs)
    assert a == b


def test_parity_near_the_envelope_limits():
    # Large-but-legal inputs: weights close to the 2^20-1 latency ceiling and
    # block sizes in the hundreds stay exact in 64-bit arithmetic.
    rng = random.Random(321)
    top = _dispatch.MAX_COMPILED_LATENCY
    n = 400
    latencies = [rng.randint(0, top) for _ in range(n)]
    prod_flat, prod_off = [], [0]
    for i in range(n):
        prods = sorted(rng.sample(range(i), k=min(i, rng.randint(0, 3))))
        prod_flat.extend(prods)
        prod_off.append(len(prod_flat))
    assert _kernels_py.critical_path(n, latencies, prod_flat, prod_off) == (
        compiled.critical_path(n, latencies, prod_flat, prod_off)
    )

    src, dst, weight, cross = [], [], [], []
    for _ in range(800):
        if rng.random() < 0.5:
            a = rng.randrange(n - 1)
            b = rng.randrange(a + 1, n)
            src.append(a), dst.append(b), weight.append(rng.randint(0, top)), cross.append(0)
        else:
            src.append(rng.randrange(n))
            dst.append(rng.randrange(n))
            weight.append(rng.randint(0, top))
            cross.append(1)
    assert _kernels_py.recurrence_bound(n, src, dst, weight, cross) == (
        compiled.recurrence_bound(n, src, dst, weight, cross)
    )

    masks = [rng.randint(1, 255) for _ in range(5000)]
    assert _kernels_py.port_bound(masks, 8) == compiled.port_bound(masks, 8)


# ---------------------------------------------------------------------------
# Dispatch envelope
# ---------------------------------------------------------------------------


def test_small_blocks_use_the_compiled_kernels():
    assert _dispatch.KERNEL_IMPLEMENTATION == "compiled"
    assert _dispatch.select_kernels(4, 8, 32) is compiled


def test_oversized_blocks_fall_back_to_python():
    limit_n = _dispatch.MAX_COMPILED_INSTRUCTIONS
    limit_uops = _dispatch.MAX_COMPILED_UOPS
    limit_lat = _dispatch.MAX_COMPILED_LATENCY
    assert _dispatch.select_kernels(limit_n, 8, 32) is compiled
    assert _dispatch.select_kernels(limit_n + 1, 8, 32) is _kernels_py
    assert _dispatch.select_kernels(4, limit_uops + 1, 32) is _kernels_py
    assert _dispatch.select_kernels(4, 8, limit_lat + 1) is _kernels_py


def test_huge_block_analysis_end_to_end():
    # Past the instruction envelope the analysis silently switches twins and
    # still produces the exact answer.
    from fractions import Fraction

    from locus.throughput.analyzer import AnalysisMode, analyze_block

    from conftest import block, model, spec

    n = _dispatch.MAX_COMPILED_INSTRUCTIONS + 1
    m = model(4, ("P0", "P1"), {"NOP": spec(1, 0, {"P0", "P1"})})
    result = analyze_block(block(0, *["NOP"] * n), m, AnalysisMode.LOOP)
    assert result.cpiter == Fraction(n, 2)


def test_environment_variable_forces_python_twin():
    code = (
        "from locus.throughput._dispatch import KERNEL_IMPLEMENTATION;"
        "print(KERNEL_IMPLEMENTATION)"
    )
    forced = subprocess.run(
        [sys.executable, "-c", code],
        capture_output=True,
        text=True,
        env={"PATH": "/usr/bin:/bin", "LOCUS_PURE_PYTHON": "1"},
        check=True,
    )
    assert forced.stdout.strip() == "python"
    normal = subprocess.run(
        [sys.executable, "-c", code],
        capture_output=True,
        text=True,
        env={"PATH": "/usr/bin:/bin"},
        check=True,
    )
    assert normal.stdout.strip() == "compiled"
