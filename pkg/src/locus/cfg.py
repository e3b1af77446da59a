"""Validation and exact aggregation of weighted control-flow graphs.

The total cycle count of a thread is the sum over edges of
``cpiter * calls``.  Counts are huge integers and cpiter values are
rationals, so the sum is computed exactly: per-denominator integer
accumulation, combined into one :class:`fractions.Fraction` at the end.
``replay_estimate`` walks a raw trace step by step instead; on matching
inputs the two must agree exactly, which the test suite exploits as an
oracle.
"""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction
from typing import Mapping, Sequence

from locus.profile import ThreadCfg


class MissingCpiterError(Exception):
    """A trace step needs a cpiter value the map does not provide."""

    def __init__(self, src: int, dst: int):
        self.src = src
        self.dst = dst
        super().__init__(f"no cpiter for transition ({src} -> {dst})")


@dataclass(frozen=True)
class Violation:
    """Base class for structural problems found by validate_cfg."""

    def describe(self) -> str:
        raise NotImplementedError


@dataclass(frozen=True)
class DanglingEdge(Violation):
    src: int
    dst: int

    def describe(self) -> str:
        return f"edge ({self.src} -> {self.dst}) references a missing block"


@dataclass(frozen=True)
class MissingSourceOrSink(Violation):
    detail: str

    def describe(self) -> str:
        return self.detail


@dataclass(frozen=True)
class FlowViolation(Violation):
    block: int
    in_sum: int
    out_sum: int

    def describe(self) -> str:
        return (
            f"block {self.block} breaks flow conservation "
            f"(in={self.in_sum}, out={self.out_sum})"
        )


@dataclass(frozen=True)
class BadEdgeValue(Violation):
    src: int
    dst: int
    reason: str

    def describe(self) -> str:
        return f"edge ({self.src} -> {self.dst}): {self.reason}"


@dataclass(frozen=True)
class WeightedCfgSummary:
    """Exact weighted cycle total for one thread CFG.

    ``unannotated_edges`` counts edges that were taken (calls > 0) but carry
    no cpiter annotation; they contribute zero cycles to the total, so a
    non-zero count means the total is a lower bound on what the annotated
    graph would give.
    """

    thread_id: int
    total_cycles: Fraction
    edge_count: int
    annotated_edge_count: int
    unannotated_edges: int


def validate_cfg(cfg: ThreadCfg) -> list[Violation]:
    """Check structural invariants; returns violations as data, raises nothing.

    Invariants checked:

    * every edge endpoint references an existing block,
    * source and sink blocks exist,
    * flow conservation: for every block except source/sink the incoming
      call total equals the outgoing call total; the source emits one extra
      traversal (out - in = 1) and the sink absorbs one (in - out = 1).
      A self-loop counts on both sides.  When source == sink the two
      offsets cancel and the node must balance exactly.
    """
    violations: list[Violation] = []
    blocks = cfg.blocks
    if cfg.source not in blocks:
        violations.append(MissingSourceOrSink(f"source block {cfg.source} does not exist"))
    if cfg.sink not in blocks:
        violations.append(MissingSourceOrSink(f"sink block {cfg.sink} does not exist"))
    in_sum: dict[int, int] = {b: 0 for b in blocks}
    out_sum: dict[int, int] = {b: 0 for b in blocks}
    dangling: set[tuple[int, int]] = set()
    for e in cfg.edges:
        if e.src not in blocks or e.dst not in blocks:
            if (e.src, e.dst) not in dangling:
                dangling.add((e.src, e.dst))
                violations.append(DanglingEdge(e.src, e.dst))
            continue
        if e.calls < 0:
            violations.append(BadEdgeValue(e.src, e.dst, "negative calls"))
            continue
        if e.cpiter is not None and e.cpiter < 0:
            violations.append(BadEdgeValue(e.src, e.dst, "negative cpiter"))
        out_sum[e.src] += e.calls
        in_sum[e.dst] += e.calls
    if not dangling:
        for b in sorted(blocks):
            expected = (1 if b == cfg.source else 0) - (1 if b == cfg.sink else 0)
            if out_sum[b] - in_sum[b] != expected:
                violations.append(FlowViolation(b, in_sum[b], out_sum[b]))
    return violations


def sum_weighted_cycles(cfg: ThreadCfg) -> WeightedCfgSummary:
    """Exact sum over edges of cpiter * calls.

    Edges with calls == 0 never contribute and are not counted as
    unannotated even when they lack a cpiter value.
    """
    per_denominator: dict[int, int] = {}
    annotated = 0
    unannotated = 0
    for e in cfg.edges:
        if e.cpiter is not None:
            annotated += 1
            if e.calls:
                c = e.cpiter
                per_denominator[c.denominator] = (
                    per_denominator.get(c.denominator, 0) + c.numerator * e.calls
                )
        elif e.calls:
            unannotated += 1
    total = Fraction(0)
    for den, num in sorted(per_denominator.items()):
        total += Fraction(num, den)
    return WeightedCfgSummary(
        thread_id=cfg.thread_id,
        total_cycles=total,
        edge_count=len(cfg.edges),
        annotated_edge_count=annotated,
        unannotated_edges=unannotated,
    )


def replay_estimate(
    trace: Sequence[int],
    cpiter: Mapping[tuple[int, int], Fraction],
) -> Fraction:
    """Walk a raw trace, charging cpiter for every transition taken.

    Deliberately naive - one lookup and one exact addition per step - so it
    can serve as an independent oracle for the aggregated sum: for any
    trace, ``replay_estimate(trace, m)`` equals ``sum_weighted_cycles`` over
    ``edges_from_trace(trace)`` annotated from the same map.
    """
    total = Fraction(0)
    for src, dst in zip(trace, trace[1:]):
        try:
            step = cpiter[(src, dst)]
        except KeyError:
            raise MissingCpiterError(src, dst) from None
        total += step
    return total
