"""Workload profiles: weighted control-flow graphs per rank and thread.

A profile records, for one workload run, a control-flow graph per (rank,
thread): basic blocks of machine instructions, plus directed edges weighted
by how often each block-to-block transition was taken.  Edges optionally
carry a cycles-per-iteration annotation filled in later by throughput
analysis.  Transition counts come from instrumented executions and can be
very large, so they are kept as arbitrary-precision integers; all rational
quantities are :class:`fractions.Fraction` so aggregation stays exact.

File format (JSON)::

    {
      "workload": "name",
      "frequency_hz": 2.2e9,
      "measured_runtime_s": 12.5,          # optional, may be null
      "ranks": {
        "<rank>": {
          "<thread>": {
            "source": 0,
            "sink": 2,
            "blocks": { "<id>": {"addr": "0x400000", "asm": ["ADD r1, r1, r2"]} },
            "edges":  [ {"src": 0, "dst": 1, "calls": 42, "cpiter": 1.5} ]
          }
        }
      }
    }

Unknown keys are rejected unless parsing leniently.  ``calls`` must be an
exact integer; ``addr`` is a hex string or null; ``cpiter`` is a number or
null.

Operand grammar
---------------
Instructions are written destination-first, comma-separated
(``ADD r1, r1, r2`` meaning ``r1 = r1 + r2``).  Register names are
recognized by lookup in a configurable table (case-insensitive); anything
else (immediates, labels, size keywords) is ignored.  The first operand is
the destination and is recorded as written, the remaining operands as read,
with one exception: a first operand that is a memory expression (contains
``[`` or ``(``) only *reads* its address registers.  Register aliasing is
not resolved; names match the table literally.  ``flags`` is an ordinary
table entry so condition-consuming instructions can name it as an operand.
"""

from __future__ import annotations

import json
import re
from collections import Counter
from dataclasses import dataclass, replace
from fractions import Fraction
from pathlib import Path
from typing import Iterable, Mapping, Sequence


def _registers(*names: str) -> frozenset[str]:
    return frozenset(n.lower() for n in names)


#: Shipped register-name table: generic rN names as used in profile listings,
#: x86-64 general-purpose and SIMD names, AArch64 names, and the FLAGS
#: pseudo-register.
DEFAULT_REGISTERS: frozenset[str] = _registers(
    *(f"r{i}" for i in range(32)),
    "rax", "rbx", "rcx", "rdx", "rsi", "rdi", "rbp", "rsp",
    "eax", "ebx", "ecx", "edx", "esi", "edi", "ebp", "esp",
    *(f"xmm{i}" for i in range(16)),
    *(f"ymm{i}" for i in range(16)),
    *(f"zmm{i}" for i in range(32)),
    *(f"x{i}" for i in range(31)),
    *(f"w{i}" for i in range(31)),
    *(f"v{i}" for i in range(32)),
    "sp", "lr", "flags",
)

_TOKEN = re.compile(r"[A-Za-z_][A-Za-z0-9_]*")


class ProfileError(Exception):
    """Base class for everything parse_profile can raise."""


class ProfileSyntaxError(ProfileError):
    """Malformed file: bad JSON, wrong types, unknown or missing keys.

    ``line`` is the 1-based line number when the underlying JSON decoder
    provides one, otherwise None and ``location`` describes the offending
    path inside the document.
    """

    def __init__(self, reason: str, line: int | None = None, location: str | None = None):
        self.reason = reason
        self.line = line
        self.location = location
        where = f"line {line}" if line is not None else (location or "document")
        super().__init__(f"{where}: {reason}")


class DanglingEdgeError(ProfileError):
    def __init__(self, src: int, dst: int):
        self.src = src
        self.dst = dst
        super().__init__(f"edge ({src} -> {dst}) references a block that does not exist")


class FlowViolationError(ProfileError):
    def __init__(self, block: int, in_sum: int, out_sum: int):
        self.block = block
        self.in_sum = in_sum
        self.out_sum = out_sum
        super().__init__(
            f"block {block} violates flow conservation (in={in_sum}, out={out_sum})"
        )


class MissingSourceOrSinkError(ProfileError):
    pass


class EmptyTraceError(ProfileError):
    pass


@dataclass(frozen=True)
class Instruction:
    """One machine instruction with its derived register def/use sets."""

    mnemonic: str
    operands: tuple[str, ...]
    raw_text: str
    writes: frozenset[str]
    reads: frozenset[str]

    def __post_init__(self) -> None:
        if not self.mnemonic or any(c.isspace() for c in self.mnemonic):
            raise ValueError(f"bad mnemonic {self.mnemonic!r}")
        if self.mnemonic != self.mnemonic.upper():
            raise ValueError("mnemonic must be uppercase")

    @classmethod
    def parse(cls, line: str, registers: frozenset[str] = DEFAULT_REGISTERS) -> "Instruction":
        """Parse one assembly line using the operand grammar."""
        text = line.strip()
        if not text:
            raise ValueError("empty instruction text")
        parts = text.split(None, 1)
        mnemonic = parts[0].upper()
        operands: tuple[str, ...] = ()
        if len(parts) > 1 and parts[1].strip():
            operands = tuple(op.strip() for op in parts[1].split(","))
        writes: set[str] = set()
        reads: set[str] = set()
        for idx, op in enumerate(operands):
            regs = [t for t in (tok.lower() for tok in _TOKEN.findall(op)) if t in registers]
            if idx == 0 and "[" not in op and "(" not in op:
                if regs:
                    writes.add(regs[0])
                    reads.update(regs[1:])
            else:
                reads.update(regs)
        return cls(mnemonic, operands, line, frozenset(writes), frozenset(reads))


@dataclass(frozen=True)
class BasicBlock:
    """A straight-line sequence of at least one instruction."""

    id: int
    instructions: tuple[Instruction, ...]
    start_address: int | None = None

    def __post_init__(self) -> None:
        if self.id < 0:
            raise ValueError("block id must be non-negative")
        if not self.instructions:
            raise ValueError(f"block {self.id} has no instructions")


@dataclass(frozen=True)
class CfgEdge:
    """A directed transition between blocks, weighted by how often it ran.

    ``cpiter`` is the estimated cycles spent per traversal of this edge
    (i.e. per execution of the destination block in this context); None
    until throughput analysis fills it in.
    """

    src: int
    dst: int
    calls: int
    cpiter: Fraction | None = None

    def __post_init__(self) -> None:
        if not isinstance(self.calls, int) or isinstance(self.calls, bool):
            raise ValueError("edge calls must be an integer")
        if self.calls < 0:
            raise ValueError("edge calls must be non-negative")
        if self.cpiter is not None and self.cpiter < 0:
            raise ValueError("edge cpiter must be non-negative")


@dataclass(frozen=True)
class ThreadCfg:
    """The control-flow graph observed on one thread."""

    thread_id: int
    blocks: Mapping[int, BasicBlock]
    edges: tuple[CfgEdge, ...]
    source: int
    sink: int


@dataclass(frozen=True)
class WorkloadProfile:
    """A full profile: one ThreadCfg per (rank, thread)."""

    workload_name: str
    frequency_hz: Fraction
    ranks: Mapping[int, Mapping[int, ThreadCfg]]
    measured_runtime_s: Fraction | None = None

    def __post_init__(self) -> None:
        if self.frequency_hz <= 0:
            raise ValueError("frequency_hz must be positive")
        if not self.ranks or any(not threads for threads in self.ranks.values()):
            raise ValueError("profile needs at least one rank with at least one thread")


# ---------------------------------------------------------------------------
# Trace conversion


def edges_from_trace(trace: Sequence[int]) -> list[CfgEdge]:
    """Collapse an executed block-id sequence into counted edges.

    Adjacent pairs are tallied: ``[A, B, B, B, C]`` becomes
    ``{(A,B): 1, (B,B): 2, (B,C): 1}``.  The result always satisfies flow
    conservation with source ``trace[0]`` and sink ``trace[-1]``.
    """
    if len(trace) == 0:
        raise EmptyTraceError("cannot build a CFG from an empty trace")
    counts: Counter[tuple[int, int]] = Counter(zip(trace, trace[1:]))
    return [CfgEdge(src, dst, calls) for (src, dst), calls in sorted(counts.items())]


_NOP_BLOCK_ASM = ("NOP",)


def thread_cfg_from_trace(
    trace: Sequence[int],
    blocks: Mapping[int, BasicBlock] | None = None,
    thread_id: int = 0,
    registers: frozenset[str] = DEFAULT_REGISTERS,
) -> ThreadCfg:
    """Build a ThreadCfg from a trace; absent blocks default to a single NOP."""
    edges = edges_from_trace(trace)
    seen = set(trace)
    built: dict[int, BasicBlock] = dict(blocks) if blocks else {}
    for block_id in sorted(seen):
        if block_id not in built:
            built[block_id] = BasicBlock(
                block_id, tuple(Instruction.parse(a, registers) for a in _NOP_BLOCK_ASM)
            )
    return ThreadCfg(thread_id, built, tuple(edges), source=trace[0], sink=trace[-1])


# ---------------------------------------------------------------------------
# JSON parsing


def _to_fraction(value: object, location: str) -> Fraction:
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise ProfileSyntaxError("expected a number", location=location)
    if isinstance(value, int):
        return Fraction(value)
    # Go through the shortest-repr decimal form so that human-written values
    # like 0.1 become 1/10 rather than the underlying binary float.
    return Fraction(repr(value))


def _to_int(value: object, location: str) -> int:
    if isinstance(value, bool) or not isinstance(value, int):
        raise ProfileSyntaxError("expected an exact integer", location=location)
    return value


def _check_keys(obj: Mapping, allowed: Iterable[str], required: Iterable[str],
                location: str, lenient: bool) -> None:
    if not isinstance(obj, dict):
        raise ProfileSyntaxError("expected an object", location=location)
    allowed_set = set(allowed)
    for key in obj:
        if key not in allowed_set and not lenient:
            raise ProfileSyntaxError(f"unknown key {key!r}", location=location)
    for key in required:
        if key not in obj:
            raise ProfileSyntaxError(f"missing required key {key!r}", location=location)


def _parse_block(block_id: int, obj: object, location: str, lenient: bool,
                 registers: frozenset[str]) -> BasicBlock:
    _check_keys(obj, ("addr", "asm"), ("asm",), location, lenient)
    addr_raw = obj.get("addr")
    addr: int | None = None
    if addr_raw is not None:
        if isinstance(addr_raw, str):
            try:
                addr = int(addr_raw, 16)
            except ValueError:
                raise ProfileSyntaxError(f"bad address {addr_raw!r}", location=location) from None
        elif lenient and isinstance(addr_raw, int) and not isinstance(addr_raw, bool):
            addr = addr_raw
        else:
            raise ProfileSyntaxError("addr must be a hex string or null", location=location)
    asm = obj["asm"]
    if not isinstance(asm, list) or not asm or not all(isinstance(a, str) for a in asm):
        raise ProfileSyntaxError("asm must be a non-empty list of strings", location=location)
    try:
        instructions = tuple(Instruction.parse(line, registers) for line in asm)
    except ValueError as exc:
        raise ProfileSyntaxError(str(exc), location=location) from None
    try:
        return BasicBlock(block_id, instructions, addr)
    except ValueError as exc:
        raise ProfileSyntaxError(str(exc), location=location) from None


def _parse_thread(thread_id: int, obj: object, location: str, lenient: bool,
                  registers: frozenset[str]) -> ThreadCfg:
    _check_keys(obj, ("source", "sink", "blocks", "edges"),
                ("source", "sink", "blocks", "edges"), location, lenient)
    blocks: dict[int, BasicBlock] = {}
    if not isinstance(obj["blocks"], dict) or not obj["blocks"]:
        raise ProfileSyntaxError("blocks must be a non-empty object",
                                 location=f"{location}.blocks")
    for key, bobj in obj["blocks"].items():
        bloc = f"{location}.blocks[{key}]"
        try:
            block_id = int(key)
        except ValueError:
            raise ProfileSyntaxError(f"bad block id {key!r}", location=bloc) from None
        if block_id < 0:
            raise ProfileSyntaxError("block id must be non-negative", location=bloc)
        blocks[block_id] = _parse_block(block_id, bobj, bloc, lenient, registers)
    edges: list[CfgEdge] = []
    if not isinstance(obj["edges"], list):
        raise ProfileSyntaxError("edges must be a list", location=f"{location}.edges")
    for i, eobj in enumerate(obj["edges"]):
        eloc = f"{location}.edges[{i}]"
        _check_keys(eobj, ("src", "dst", "calls", "cpiter"), ("src", "dst", "calls"),
                    eloc, lenient)
        cpiter = None
        if eobj.get("cpiter") is not None:
            cpiter = _to_fraction(eobj["cpiter"], f"{eloc}.cpiter")
            if cpiter < 0:
                raise ProfileSyntaxError("cpiter must be non-negative", location=eloc)
        calls = _to_int(eobj["calls"], f"{eloc}.calls")
        if calls < 0:
            raise ProfileSyntaxError("calls must be non-negative", location=eloc)
        edges.append(CfgEdge(_to_int(eobj["src"], eloc), _to_int(eobj["dst"], eloc),
                             calls, cpiter))
    source = _to_int(obj["source"], f"{location}.source")
    sink = _to_int(obj["sink"], f"{location}.sink")
    return ThreadCfg(thread_id, blocks, tuple(edges), source, sink)


def profile_from_dict(
    data: object,
    *,
    lenient: bool = False,
    validate: bool = True,
    registers: frozenset[str] = DEFAULT_REGISTERS,
) -> WorkloadProfile:
    """Build a WorkloadProfile from decoded JSON, optionally validating CFGs.

    With ``validate`` (the default) the first structural violation found is
    raised: DanglingEdgeError, MissingSourceOrSinkError or
    FlowViolationError.  Pass ``validate=False`` to obtain the profile
    regardless and inspect violations with :func:`locus.cfg.validate_cfg`.
    """
    _check_keys(data, ("workload", "frequency_hz", "measured_runtime_s", "ranks"),
                ("workload", "frequency_hz", "ranks"), "top level", lenient)
    if not isinstance(data["workload"], str) or not data["workload"]:
        raise ProfileSyntaxError("workload must be a non-empty string", location="top level")
    frequency = _to_fraction(data["frequency_hz"], "frequency_hz")
    if frequency <= 0:
        raise ProfileSyntaxError("frequency_hz must be positive", location="frequency_hz")
    measured = None
    if data.get("measured_runtime_s") is not None:
        measured = _to_fraction(data["measured_runtime_s"], "measured_runtime_s")
        if measured <= 0:
            raise ProfileSyntaxError("measured_runtime_s must be positive",
                                     location="measured_runtime_s")
    if not isinstance(data["ranks"], dict) or not data["ranks"]:
        raise ProfileSyntaxError("ranks must be a non-empty object", location="ranks")
    ranks: dict[int, dict[int, ThreadCfg]] = {}
    for rank_key, threads_obj in data["ranks"].items():
        rloc = f"ranks[{rank_key}]"
        try:
            rank_id = int(rank_key)
        except ValueError:
            raise ProfileSyntaxError(f"bad rank id {rank_key!r}", location=rloc) from None
        if not isinstance(threads_obj, dict) or not threads_obj:
            raise ProfileSyntaxError("rank must be a non-empty object of threads", location=rloc)
        threads: dict[int, ThreadCfg] = {}
        for thread_key, tobj in threads_obj.items():
            tloc = f"{rloc}[{thread_key}]"
            try:
                thread_id = int(thread_key)
            except ValueError:
                raise ProfileSyntaxError(f"bad thread id {thread_key!r}", location=tloc) from None
            threads[thread_id] = _parse_thread(thread_id, tobj, tloc, lenient, registers)
        ranks[rank_id] = threads
    profile = WorkloadProfile(data["workload"], frequency, ranks, measured)
    if validate:
        _raise_first_violation(profile)
    return profile


def _raise_first_violation(profile: WorkloadProfile) -> None:
    from locus.cfg import DanglingEdge, FlowViolation, MissingSourceOrSink, validate_cfg

    for threads in profile.ranks.values():
        for cfg in threads.values():
            for v in validate_cfg(cfg):
                if isinstance(v, DanglingEdge):
                    raise DanglingEdgeError(v.src, v.dst)
                if isinstance(v, MissingSourceOrSink):
                    raise MissingSourceOrSinkError(v.detail)
                if isinstance(v, FlowViolation):
                    raise FlowViolationError(v.block, v.in_sum, v.out_sum)
                raise ProfileError(str(v))


def parse_profile(
    path: str | Path,
    *,
    lenient: bool = False,
    validate: bool = True,
    registers: frozenset[str] = DEFAULT_REGISTERS,
) -> WorkloadProfile:
    """Parse a profile JSON file.  See :func:`profile_from_dict`."""
    try:
        with open(path, "r", encoding="utf-8") as fh:
            data = json.load(fh)
    except json.JSONDecodeError as exc:
        raise ProfileSyntaxError(exc.msg, line=exc.lineno) from None
    return profile_from_dict(data, lenient=lenient, validate=validate, registers=registers)


# ---------------------------------------------------------------------------
# Serialization


def _number(value: Fraction) -> int | float:
    return int(value) if value.denominator == 1 else float(value)


def serialize_profile(profile: WorkloadProfile) -> dict:
    """Convert a profile back to its JSON-ready dict form.

    Rational values whose denominator is not a power of two are rounded to
    the nearest double; everything else round-trips exactly.
    """
    ranks: dict[str, dict] = {}
    for rank_id in sorted(profile.ranks):
        threads: dict[str, dict] = {}
        for thread_id in sorted(profile.ranks[rank_id]):
            cfg = profile.ranks[rank_id][thread_id]
            blocks = {}
            for block_id in sorted(cfg.blocks):
                block = cfg.blocks[block_id]
                blocks[str(block_id)] = {
                    "addr": None if block.start_address is None else hex(block.start_address),
                    "asm": [i.raw_text for i in block.instructions],
                }
            edges = [
                {
                    "src": e.src,
                    "dst": e.dst,
                    "calls": e.calls,
                    "cpiter": None if e.cpiter is None else _number(e.cpiter),
                }
                for e in cfg.edges
            ]
            threads[str(thread_id)] = {
                "source": cfg.source,
                "sink": cfg.sink,
                "blocks": blocks,
                "edges": edges,
            }
        ranks[str(rank_id)] = threads
    return {
        "workload": profile.workload_name,
        "frequency_hz": _number(profile.frequency_hz),
        "measured_runtime_s": None
        if profile.measured_runtime_s is None
        else _number(profile.measured_runtime_s),
        "ranks": ranks,
    }


def save_profile(profile: WorkloadProfile, path: str | Path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(serialize_profile(profile), fh, indent=2, sort_keys=True)
        fh.write("\n")


def with_annotations(
    profile: WorkloadProfile,
    cpiter: Mapping[tuple[int, int, int, int], Fraction],
) -> WorkloadProfile:
    """Return a copy of the profile with edge cpiter values filled in.

    ``cpiter`` maps (rank, thread, src, dst) to the new value; edges not in
    the map keep their existing annotation.  Profiles are immutable, so this
    is the only way annotations enter a profile after parsing.
    """
    ranks: dict[int, dict[int, ThreadCfg]] = {}
    for rank_id, threads in profile.ranks.items():
        new_threads: dict[int, ThreadCfg] = {}
        for thread_id, cfg in threads.items():
            edges = tuple(
                replace(e, cpiter=cpiter.get((rank_id, thread_id, e.src, e.dst), e.cpiter))
                for e in cfg.edges
            )
            new_threads[thread_id] = replace(cfg, edges=edges)
        ranks[rank_id] = new_threads
    return replace(profile, ranks=ranks)
