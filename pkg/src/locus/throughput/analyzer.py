"""Per-block throughput analysis.

``analyze_block`` estimates steady-state cycles per iteration of one basic
block as the maximum of three exact lower bounds:

* dispatch width: total uops / dispatch_width,
* port pressure: the min-max fractional assignment optimum over execution
  ports (subset enumeration, see the kernel docstring),
* dependencies: in Loop mode the slowest cross-iteration register
  recurrence; in Single mode the intra-block critical-path latency.

Only register def->use dependencies count.  Memory traffic is deliberately
ignored: the whole point of the estimate is the cycle cost when every
access hits the nearest cache.  Condition codes travel through a single
``flags`` pseudo-register, written by instructions whose spec says
``writes_flags`` and read by naming ``flags`` as an operand.

``analyze_pair`` prices a non-looping block in context: the cost of a
callee that runs once after its caller is the growth of the caller's
in-order issue schedule when the callee is appended, never negative.  This
keeps a short block that pipelines completely behind its predecessor from
being billed a full standalone traversal.
"""

from __future__ import annotations

from collections import Counter
from dataclasses import dataclass
from enum import Enum
from fractions import Fraction
from typing import Mapping, Sequence

from locus.profile import BasicBlock, Instruction
from locus.throughput._dispatch import select_kernels
from locus.throughput.model import InstrSpec, MachineModel

FLAGS_REGISTER = "flags"


class AnalysisMode(Enum):
    """Loop: block repeats back-to-back.  Single: one pass, empty pipeline."""

    LOOP = "loop"
    SINGLE = "single"


class Bottleneck(Enum):
    DISPATCH_WIDTH = "dispatch_width"
    PORT_PRESSURE = "port_pressure"
    DEPENDENCY_CHAIN = "dependency_chain"


@dataclass(frozen=True)
class BlockThroughput:
    """Result of analyzing one block.

    ``cpiter`` is exact; ``cycles_total`` (Single mode only) is the greedy
    in-order issue schedule length used for pair costing.  ``bottleneck``
    names the binding bound, with ties resolved in the order dependency
    chain, port pressure, dispatch width; when port pressure binds,
    ``bottleneck_port`` is the most loaded port (first in declaration order
    on ties).  ``per_port_pressure`` is an optimal fractional distribution
    of the block's uops, so its maximum equals the port-pressure bound.
    """

    block_id: int | None
    mode: AnalysisMode
    cpiter: Fraction
    bottleneck: Bottleneck
    bottleneck_port: str | None
    per_port_pressure: Mapping[str, Fraction]
    cycles_total: int | None
    width_bound: Fraction
    port_bound: Fraction
    dependency_bound: Fraction
    unknown_mnemonics: tuple[str, ...]


@dataclass(frozen=True)
class _Prepared:
    """Kernel-ready arrays for one instruction sequence."""

    latencies: list[int]
    uop_masks: list[int]
    uop_instr: list[int]
    prod_flat: list[int]
    prod_off: list[int]
    loop_src: list[int]
    loop_dst: list[int]
    loop_weight: list[int]
    loop_cross: list[int]
    unknown: tuple[str, ...]
    max_latency: int


def _instructions_of(block: BasicBlock | Sequence[Instruction]) -> tuple[Instruction, ...]:
    if isinstance(block, BasicBlock):
        return block.instructions
    return tuple(block)


def _prepare(instructions: Sequence[Instruction], model: MachineModel) -> _Prepared:
    port_idx = model.port_index()
    specs: list[InstrSpec] = []
    unknown: set[str] = set()
    for ins in instructions:
        spec, known = model.lookup(ins.mnemonic)
        if not known:
            unknown.add(ins.mnemonic)
        specs.append(spec)
    latencies = [s.latency for s in specs]
    uop_masks: list[int] = []
    uop_instr: list[int] = []
    for i, spec in enumerate(specs):
        for choices in spec.port_choices:
            mask = 0
            for p in choices:
                mask |= 1 << port_idx[p]
            uop_masks.append(mask)
            uop_instr.append(i)

    writes: list[frozenset[str]] = []
    for ins, spec in zip(instructions, specs):
        writes.append(ins.writes | {FLAGS_REGISTER} if spec.writes_flags else ins.writes)

    # Register def->use edges.  A read binds to the most recent earlier def
    # (intra edge); with no earlier def it binds to the block's final def of
    # that register, wrapping the iteration boundary (cross edge, Loop only).
    last_def: dict[str, int] = {}
    intra: list[set[int]] = [set() for _ in instructions]
    upward: list[list[str]] = [[] for _ in instructions]
    for i, ins in enumerate(instructions):
        for reg in ins.reads:
            if reg in last_def:
                intra[i].add(last_def[reg])
            else:
                upward[i].append(reg)
        for reg in writes[i]:
            last_def[reg] = i
    final_def = last_def

    prod_flat: list[int] = []
    prod_off: list[int] = [0]
    loop_edges: set[tuple[int, int, int]] = set()
    for i in range(len(instructions)):
        for p in sorted(intra[i]):
            prod_flat.append(p)
            loop_edges.add((p, i, 0))
        prod_off.append(len(prod_flat))
        for reg in upward[i]:
            d = final_def.get(reg)
            if d is not None:
                loop_edges.add((d, i, 1))
    loop_src: list[int] = []
    loop_dst: list[int] = []
    loop_weight: list[int] = []
    loop_cross: list[int] = []
    for src, dst, cross in sorted(loop_edges):
        loop_src.append(src)
        loop_dst.append(dst)
        loop_weight.append(latencies[src])
        loop_cross.append(cross)

    return _Prepared(
        latencies=latencies,
        uop_masks=uop_masks,
        uop_instr=uop_instr,
        prod_flat=prod_flat,
        prod_off=prod_off,
        loop_src=loop_src,
        loop_dst=loop_dst,
        loop_weight=loop_weight,
        loop_cross=loop_cross,
        unknown=tuple(sorted(unknown)),
        max_latency=max(latencies, default=0),
    )


def _port_pressure(
    uop_masks: Sequence[int], ports: tuple[str, ...], bound: Fraction
) -> dict[str, Fraction]:
    """Distribute uops over admissible ports, max load exactly ``bound``.

    Exact max-flow (Edmonds-Karp on Fractions) on the grouped bipartite
    graph: source -> mask-group (capacity group size) -> admissible ports
    -> sink (capacity ``bound``).  The port-pressure bound is the LP
    optimum, so the flow saturates all uops and at least one port carries
    exactly ``bound``.
    """
    n_ports = len(ports)
    groups = sorted(Counter(uop_masks).items())
    total = sum(c for _, c in groups)
    if total == 0:
        return {p: Fraction(0) for p in ports}
    n_groups = len(groups)
    source = 0
    sink = 1 + n_groups + n_ports
    capacity: dict[tuple[int, int], Fraction] = {}
    adjacency: dict[int, list[int]] = {u: [] for u in range(sink + 1)}

    def add_edge(u: int, v: int, cap: Fraction) -> None:
        if (u, v) not in capacity:
            adjacency[u].append(v)
            adjacency[v].append(u)
            capacity[(u, v)] = Fraction(0)
            capacity[(v, u)] = Fraction(0)
        capacity[(u, v)] += cap

    for gi, (mask, count) in enumerate(groups):
        add_edge(source, 1 + gi, Fraction(count))
        for pi in range(n_ports):
            if mask >> pi & 1:
                add_edge(1 + gi, 1 + n_groups + pi, Fraction(total))
    for pi in range(n_ports):
        add_edge(1 + n_groups + pi, sink, bound)

    flowed = Fraction(0)
    while True:
        parent: dict[int, int] = {source: source}
        queue = [source]
        while queue and sink not in parent:
            u = queue.pop(0)
            for v in adjacency[u]:
                if v not in parent and capacity[(u, v)] > 0:
                    parent[v] = u
                    queue.append(v)
        if sink not in parent:
            break
        bottleneck = None
        v = sink
        while v != source:
            u = parent[v]
            c = capacity[(u, v)]
            bottleneck = c if bottleneck is None or c < bottleneck else bottleneck
            v = u
        v = sink
        while v != source:
            u = parent[v]
            capacity[(u, v)] -= bottleneck
            capacity[(v, u)] += bottleneck
            v = u
        flowed += bottleneck
    assert flowed == total, "port pressure flow failed to place every uop"
    return {
        ports[pi]: bound - capacity[(1 + n_groups + pi, sink)] for pi in range(n_ports)
    }


def _pick_bottleneck(
    cpiter: Fraction,
    width_bound: Fraction,
    port_bound: Fraction,
    dependency_bound: Fraction,
    pressure: Mapping[str, Fraction],
    ports: tuple[str, ...],
) -> tuple[Bottleneck, str | None]:
    if cpiter == dependency_bound and dependency_bound > 0:
        return Bottleneck.DEPENDENCY_CHAIN, None
    if cpiter == port_bound:
        worst = max(pressure.values())
        for p in ports:
            if pressure[p] == worst:
                return Bottleneck.PORT_PRESSURE, p
    return Bottleneck.DISPATCH_WIDTH, None


def analyze_block(
    block: BasicBlock | Sequence[Instruction],
    model: MachineModel,
    mode: AnalysisMode,
) -> BlockThroughput:
    """Estimate cycles per iteration for one block under the given model."""
    instructions = _instructions_of(block)
    if not instructions:
        raise ValueError("cannot analyze an empty instruction sequence")
    prep = _prepare(instructions, model)
    kern = select_kernels(len(instructions), len(prep.uop_masks), prep.max_latency)
    width_bound = Fraction(len(prep.uop_masks), model.dispatch_width)
    port_bound = Fraction(*kern.port_bound(prep.uop_masks, len(model.ports)))
    cycles_total: int | None = None
    if mode is AnalysisMode.LOOP:
        dependency_bound = Fraction(
            *kern.recurrence_bound(
                len(instructions), prep.loop_src, prep.loop_dst,
                prep.loop_weight, prep.loop_cross,
            )
        )
    else:
        dependency_bound = Fraction(
            kern.critical_path(len(instructions), prep.latencies, prep.prod_flat, prep.prod_off)
        )
        cycles_total = kern.schedule_cycles(
            model.dispatch_width, prep.uop_masks, prep.uop_instr,
            prep.latencies, prep.prod_flat, prep.prod_off,
        )
    cpiter = max(width_bound, port_bound, dependency_bound)
    pressure = _port_pressure(prep.uop_masks, model.ports, port_bound)
    bottleneck, bottleneck_port = _pick_bottleneck(
        cpiter, width_bound, port_bound, dependency_bound, pressure, model.ports
    )
    return BlockThroughput(
        block_id=block.id if isinstance(block, BasicBlock) else None,
        mode=mode,
        cpiter=cpiter,
        bottleneck=bottleneck,
        bottleneck_port=bottleneck_port,
        per_port_pressure=pressure,
        cycles_total=cycles_total,
        width_bound=width_bound,
        port_bound=port_bound,
        dependency_bound=dependency_bound,
        unknown_mnemonics=prep.unknown,
    )


def analyze_pair(
    caller: BasicBlock | Sequence[Instruction],
    callee: BasicBlock | Sequence[Instruction],
    model: MachineModel,
) -> Fraction:
    """Cycle cost of running the callee once, straight after the caller.

    The caller's in-order issue schedule is extended with the callee's
    instructions; the cost is the growth in schedule length, floored at
    zero.  Cross-block register dependencies stall the callee exactly as
    they would in a merged trace, while independent callee uops hide behind
    the caller's tail.
    """
    caller_instructions = _instructions_of(caller)
    callee_instructions = _instructions_of(callee)
    if not caller_instructions or not callee_instructions:
        raise ValueError("cannot analyze an empty instruction sequence")
    combined = caller_instructions + callee_instructions

    def _cycles(instructions: tuple[Instruction, ...]) -> int:
        prep = _prepare(instructions, model)
        kern = select_kernels(len(instructions), len(prep.uop_masks), prep.max_latency)
        return kern.schedule_cycles(
            model.dispatch_width, prep.uop_masks, prep.uop_instr,
            prep.latencies, prep.prod_flat, prep.prod_off,
        )

    cost = _cycles(combined) - _cycles(caller_instructions)
    return Fraction(max(0, cost))
