"""Throughput estimation backends and median aggregation.

A backend produces cycles-per-iteration estimates for basic blocks.  The
built-in analyzer is always available as the pseudo-backend ``builtin``;
external machine-code analyzer tools are described by
:class:`BackendSpec` entries (command template plus output dialect) and
run as subprocesses.  Per block, every registered backend contributes one
estimate; disagreements are settled by taking the exact median, and an
even number of estimates averages the middle two.  A failing backend
(missing executable, timeout, unparseable output) degrades the estimate
gracefully: it is recorded and the median is taken over the survivors.

Output dialects understood by the adapter:

* ``summary``    - lines ``Iterations: <int>`` and ``Total Cycles: <int>``;
  cpiter = cycles / iterations.
* ``throughput`` - a line ``Block RThroughput: <float>`` giving cpiter
  directly.
* ``timeline``   - per-instruction retirement lines ``[<index>] retired:
  <cycle>``.  This is the dialect that supports non-looping pair costing
  in a single run: cost = retire(last of caller+callee) - retire(last of
  caller within the combined run).

Blocks are handed to external tools in a generic one-instruction-per-line,
destination-first dialect; anything tool-specific belongs in the command
template (wrapper scripts are fine).
"""

from __future__ import annotations

import math
import os
import re
import shlex
import shutil
import subprocess
import tempfile
import threading
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from fractions import Fraction
from pathlib import Path
from typing import Callable, Mapping, Sequence

import json

from locus.profile import BasicBlock, Instruction, WorkloadProfile, with_annotations
from locus.throughput.analyzer import AnalysisMode, analyze_block, analyze_pair
from locus.throughput.model import MachineModel

BUILTIN_BACKEND_NAME = "builtin"
DEFAULT_ITERATIONS = 100
DEFAULT_TIMEOUT_S = 30.0

PARSER_DIALECTS = ("summary", "throughput", "timeline")


class BackendError(Exception):
    """Base for backend execution problems."""


class BackendMissingError(BackendError):
    pass


class BackendTimeoutError(BackendError):
    pass


class ParseFailureError(BackendError):
    pass


class EmptyInputError(ValueError):
    pass


@dataclass(frozen=True)
class BackendSpec:
    """Description of one external analyzer tool.

    ``invocation_template`` must contain ``{asmfile}`` and may contain
    ``{iterations}``.
    """

    name: str
    invocation_template: str
    parser: str
    timeout_s: float = DEFAULT_TIMEOUT_S

    def __post_init__(self) -> None:
        if not self.name:
            raise ValueError("backend needs a name")
        if self.name == BUILTIN_BACKEND_NAME:
            raise ValueError(f"backend name {BUILTIN_BACKEND_NAME!r} is reserved")
        if "{asmfile}" not in self.invocation_template:
            raise ValueError("invocation_template must contain {asmfile}")
        if self.parser not in PARSER_DIALECTS:
            raise ValueError(f"parser must be one of {PARSER_DIALECTS}")
        if not (self.timeout_s > 0 and math.isfinite(self.timeout_s)):
            raise ValueError("timeout_s must be positive and finite")


@dataclass(frozen=True)
class Failure:
    """Recorded backend failure; estimates continue without this backend."""

    kind: str  # "missing" | "timeout" | "parse"
    reason: str


@dataclass(frozen=True)
class ThroughputEstimate:
    """Aggregated estimate for one analysis request.

    ``per_backend`` maps backend name to a Fraction or a Failure;
    ``median_cpiter`` is the exact median over the successes and
    ``backends_used`` counts them (always >= 1, otherwise no estimate
    exists at all).
    """

    block_id: int
    caller_id: int | None
    mode: str  # "loop" | "pair"
    per_backend: Mapping[str, Fraction | Failure]
    median_cpiter: Fraction
    backends_used: int


def median_aggregate(values: Sequence[Fraction | int]) -> Fraction:
    """Exact median; an even count averages the two middle values."""
    if not values:
        raise EmptyInputError("median of an empty list")
    ordered = sorted(Fraction(v) for v in values)
    mid, odd = divmod(len(ordered), 2)
    if odd:
        return ordered[mid]
    return (ordered[mid - 1] + ordered[mid]) / 2


# ---------------------------------------------------------------------------
# Assembly emission and output parsing


def emit_asm(instructions: Sequence[Instruction]) -> str:
    """Render instructions in the generic dialect fed to external tools."""
    lines = []
    for ins in instructions:
        lines.append(ins.mnemonic + (" " + ", ".join(ins.operands) if ins.operands else ""))
    return "\n".join(lines) + "\n"


_SUMMARY_ITERATIONS = re.compile(r"^\s*Iterations:\s*(\d+)\s*$", re.MULTILINE)
_SUMMARY_CYCLES = re.compile(r"^\s*Total Cycles:\s*(\d+)\s*$", re.MULTILINE)
_RTHROUGHPUT = re.compile(r"^\s*Block RThroughput:\s*([0-9.eE+-]+)\s*$", re.MULTILINE)
_TIMELINE = re.compile(r"^\s*\[(\d+)\]\s+retired:\s*(\d+)\s*$", re.MULTILINE)


def _excerpt(text: str, limit: int = 200) -> str:
    text = text.strip()
    return text[:limit] + ("..." if len(text) > limit else "")


def parse_summary(output: str) -> tuple[int, int]:
    """Extract (iterations, total_cycles) from summary-dialect output."""
    iterations = _SUMMARY_ITERATIONS.search(output)
    cycles = _SUMMARY_CYCLES.search(output)
    if not iterations or not cycles:
        raise ParseFailureError(f"no summary lines found in: {_excerpt(output)}")
    it = int(iterations.group(1))
    if it < 1:
        raise ParseFailureError("summary reports zero iterations")
    return it, int(cycles.group(1))


def parse_throughput(output: str) -> Fraction:
    m = _RTHROUGHPUT.search(output)
    if not m:
        raise ParseFailureError(f"no 'Block RThroughput:' line in: {_excerpt(output)}")
    try:
        value = Fraction(m.group(1))
    except (ValueError, ZeroDivisionError):
        raise ParseFailureError(f"bad throughput value {m.group(1)!r}") from None
    if value < 0:
        raise ParseFailureError("negative throughput")
    return value


def parse_timeline(output: str) -> list[int]:
    """Retirement cycle per instruction index, in index order."""
    entries = {int(i): int(c) for i, c in _TIMELINE.findall(output)}
    if not entries:
        raise ParseFailureError(f"no timeline lines in: {_excerpt(output)}")
    if sorted(entries) != list(range(len(entries))):
        raise ParseFailureError("timeline indices are not contiguous from 0")
    return [entries[i] for i in range(len(entries))]


# ---------------------------------------------------------------------------
# External tool execution


def _run_tool(spec: BackendSpec, asm: str, iterations: int,
              keep_artifacts: bool = False) -> str:
    workdir = tempfile.mkdtemp(prefix="locus-")
    asmfile = Path(workdir) / f"{spec.name}.s"
    try:
        asmfile.write_text(asm, encoding="utf-8")
        command = spec.invocation_template.format(asmfile=asmfile, iterations=iterations)
        argv = shlex.split(command)
        if not argv:
            raise BackendMissingError(f"{spec.name}: empty command")
        if shutil.which(argv[0]) is None and not os.path.exists(argv[0]):
            raise BackendMissingError(f"{spec.name}: executable {argv[0]!r} not found")
        try:
            proc = subprocess.run(
                argv,
                capture_output=True,
                text=True,
                timeout=spec.timeout_s,
            )
        except subprocess.TimeoutExpired:
            raise BackendTimeoutError(
                f"{spec.name}: timed out after {spec.timeout_s}s"
            ) from None
        except FileNotFoundError:
            raise BackendMissingError(f"{spec.name}: executable {argv[0]!r} not found") from None
        if proc.returncode != 0:
            raise ParseFailureError(
                f"{spec.name}: exit {proc.returncode}: {_excerpt(proc.stderr or proc.stdout)}"
            )
        return proc.stdout
    finally:
        if not keep_artifacts:
            shutil.rmtree(workdir, ignore_errors=True)


def run_backend(
    spec: BackendSpec,
    block: BasicBlock | Sequence[Instruction],
    mode: AnalysisMode,
    iterations: int = DEFAULT_ITERATIONS,
    keep_artifacts: bool = False,
) -> Fraction:
    """Loop- or single-mode cpiter for one block from one external tool.

    Raises BackendMissingError, BackendTimeoutError or ParseFailureError;
    callers that want graceful degradation catch BackendError.
    """
    instructions = block.instructions if isinstance(block, BasicBlock) else tuple(block)
    if not instructions:
        raise ValueError("cannot analyze an empty instruction sequence")
    if mode is AnalysisMode.SINGLE:
        iterations = 1
    output = _run_tool(spec, emit_asm(instructions), iterations, keep_artifacts)
    if spec.parser == "summary":
        it, cycles = parse_summary(output)
        return Fraction(cycles, it)
    if spec.parser == "throughput":
        return parse_throughput(output)
    retirements = parse_timeline(output)
    if len(retirements) % len(instructions) != 0:
        raise ParseFailureError(
            f"{spec.name}: timeline covers {len(retirements)} instructions, "
            f"not a multiple of the block's {len(instructions)}"
        )
    observed_iterations = len(retirements) // len(instructions)
    return Fraction(retirements[-1], observed_iterations)


def run_backend_pair(
    spec: BackendSpec,
    caller: BasicBlock | Sequence[Instruction],
    callee: BasicBlock | Sequence[Instruction],
    keep_artifacts: bool = False,
) -> Fraction:
    """Non-looping pair cost from one external tool, floored at zero.

    Timeline-dialect tools do it in one run on caller+callee by retirement
    subtraction; other dialects fall back to two single-iteration runs and
    subtract total cycles.
    """
    caller_instructions = caller.instructions if isinstance(caller, BasicBlock) else tuple(caller)
    callee_instructions = callee.instructions if isinstance(callee, BasicBlock) else tuple(callee)
    if not caller_instructions or not callee_instructions:
        raise ValueError("cannot analyze an empty instruction sequence")
    combined = tuple(caller_instructions) + tuple(callee_instructions)
    if spec.parser == "timeline":
        retirements = parse_timeline(_run_tool(spec, emit_asm(combined), 1, keep_artifacts))
        if len(retirements) != len(combined):
            raise ParseFailureError(
                f"{spec.name}: timeline covers {len(retirements)} instructions, "
                f"expected {len(combined)}"
            )
        cost = retirements[-1] - retirements[len(caller_instructions) - 1]
        return Fraction(max(0, cost))
    if spec.parser == "summary":
        it_a, cycles_a = parse_summary(_run_tool(spec, emit_asm(caller_instructions), 1,
                                                 keep_artifacts))
        it_b, cycles_b = parse_summary(_run_tool(spec, emit_asm(combined), 1, keep_artifacts))
        cost = Fraction(cycles_b, it_b) - Fraction(cycles_a, it_a)
    else:
        alone = parse_throughput(_run_tool(spec, emit_asm(caller_instructions), 1,
                                           keep_artifacts))
        both = parse_throughput(_run_tool(spec, emit_asm(combined), 1, keep_artifacts))
        cost = both - alone
    return max(Fraction(0), cost)


def load_backend_specs(path: str | Path) -> list[BackendSpec]:
    """Read backend definitions from a JSON file.

    Format: a list of objects with keys ``name``, ``command``, ``parser``
    and optional ``timeout_s``.
    """
    with open(path, "r", encoding="utf-8") as fh:
        data = json.load(fh)
    if not isinstance(data, list):
        raise ValueError("backends file must contain a list")
    specs = []
    for i, obj in enumerate(data):
        if not isinstance(obj, dict):
            raise ValueError(f"backends[{i}] must be an object")
        unknown = set(obj) - {"name", "command", "parser", "timeout_s"}
        if unknown:
            raise ValueError(f"backends[{i}]: unknown keys {sorted(unknown)}")
        try:
            specs.append(
                BackendSpec(
                    name=obj.get("name", ""),
                    invocation_template=obj.get("command", ""),
                    parser=obj.get("parser", ""),
                    timeout_s=obj.get("timeout_s", DEFAULT_TIMEOUT_S),
                )
            )
        except ValueError as exc:
            raise ValueError(f"backends[{i}]: {exc}") from None
    names = [s.name for s in specs]
    if len(set(names)) != len(names):
        raise ValueError("duplicate backend names")
    return specs


# ---------------------------------------------------------------------------
# Whole-profile estimation


class InsertOrGetCache:
    """Thread-safe insert-or-get memo table for analysis requests.

    Computation runs outside the lock; the first stored value wins, so
    concurrent duplicate computations (deterministic by construction)
    cannot produce divergent entries.
    """

    def __init__(self) -> None:
        self._lock = threading.Lock()
        self._table: dict = {}
        self.hits = 0
        self.misses = 0

    def get_or_compute(self, key, compute: Callable[[], object]):
        with self._lock:
            if key in self._table:
                self.hits += 1
                return self._table[key]
        value = compute()
        with self._lock:
            if key not in self._table:
                self.misses += 1
                self._table[key] = value
            else:
                self.hits += 1
            return self._table[key]


@dataclass
class EstimationReport:
    """What happened while annotating a profile."""

    estimates: dict[tuple[int, int, int, int], ThroughputEstimate] = field(default_factory=dict)
    unknown_mnemonics: tuple[str, ...] = ()
    backend_failures: dict[str, int] = field(default_factory=dict)
    failure_details: list[str] = field(default_factory=list)
    unannotated_edges: int = 0
    analyzed_requests: int = 0
    cached_requests: int = 0


def _content_key(block: BasicBlock) -> tuple:
    return tuple((i.mnemonic, i.operands) for i in block.instructions)


def _looping_blocks(edges) -> set[int]:
    return {e.dst for e in edges if e.src == e.dst and e.calls > 0}


def estimate_all_blocks(
    profile: WorkloadProfile,
    model: MachineModel,
    backends: Sequence[BackendSpec] = (),
    *,
    include_builtin: bool = True,
    parallelism: int | None = None,
    iterations: int = DEFAULT_ITERATIONS,
    keep_artifacts: bool = False,
) -> tuple[WorkloadProfile, EstimationReport]:
    """Annotate every taken edge of a profile with a median cpiter estimate.

    For an edge (A, B) with calls > 0: when B loops (it has a positive
    self-edge, or B == A) the estimate is B's Loop-mode cpiter; otherwise
    it is the pair cost of B running once after A.  Identical requests are
    deduplicated by block content.  External backends run in a bounded
    thread pool (default: logical CPU count); results are aggregated in a
    fixed order, so the outcome does not depend on completion order.
    Backends that fail are recorded and skipped; edges for which every
    backend failed stay unannotated.
    """
    if not include_builtin and not backends:
        raise ValueError("need at least one backend (the built-in counts)")
    names = [s.name for s in backends]
    if len(set(names)) != len(names):
        raise ValueError("duplicate backend names")

    # Collect unique analysis requests across all ranks and threads.
    requests: dict[tuple, tuple] = {}  # key -> ("loop", B) | ("pair", A, B)
    edge_requests: dict[tuple[int, int, int, int], tuple] = {}
    for rank_id, threads in profile.ranks.items():
        for thread_id, cfg in threads.items():
            looping = _looping_blocks(cfg.edges)
            for e in cfg.edges:
                if e.calls <= 0:
                    continue
                if e.src not in cfg.blocks or e.dst not in cfg.blocks:
                    continue
                callee = cfg.blocks[e.dst]
                if e.dst in looping or e.dst == e.src:
                    key = ("loop", _content_key(callee))
                    requests.setdefault(key, ("loop", callee, None))
                else:
                    caller = cfg.blocks[e.src]
                    key = ("pair", _content_key(caller), _content_key(callee))
                    requests.setdefault(key, ("pair", callee, caller))
                edge_requests[(rank_id, thread_id, e.src, e.dst)] = key

    cache = InsertOrGetCache()
    report = EstimationReport()
    unknown: set[str] = set()

    def builtin_value(kind: str, callee: BasicBlock, caller: BasicBlock | None) -> Fraction:
        if kind == "loop":
            result = analyze_block(callee, model, AnalysisMode.LOOP)
            unknown.update(result.unknown_mnemonics)
            return result.cpiter
        assert caller is not None
        for block in (caller, callee):
            for ins in block.instructions:
                if not model.lookup(ins.mnemonic)[1]:
                    unknown.add(ins.mnemonic)
        return analyze_pair(caller, callee, model)

    def external_value(spec: BackendSpec, kind: str, callee: BasicBlock,
                       caller: BasicBlock | None) -> Fraction | Failure:
        def compute() -> Fraction | Failure:
            try:
                if kind == "loop":
                    return run_backend(spec, callee, AnalysisMode.LOOP,
                                       iterations=iterations, keep_artifacts=keep_artifacts)
                assert caller is not None
                return run_backend_pair(spec, caller, callee, keep_artifacts=keep_artifacts)
            except BackendMissingError as exc:
                return Failure("missing", str(exc))
            except BackendTimeoutError as exc:
                return Failure("timeout", str(exc))
            except BackendError as exc:
                return Failure("parse", str(exc))

        return cache.get_or_compute((spec.name, *_request_key(kind, callee, caller)), compute)

    def _request_key(kind: str, callee: BasicBlock, caller: BasicBlock | None) -> tuple:
        if caller is None:
            return (kind, _content_key(callee))
        return (kind, _content_key(caller), _content_key(callee))

    ordered_keys = sorted(requests)
    results: dict[tuple, dict[str, Fraction | Failure]] = {k: {} for k in ordered_keys}

    if backends:
        workers = parallelism if parallelism else (os.cpu_count() or 1)
        with ThreadPoolExecutor(max_workers=max(1, workers)) as pool:
            futures = {}
            for key in ordered_keys:
                kind, callee, caller = requests[key]
                for spec in backends:
                    futures[(key, spec.name)] = pool.submit(
                        external_value, spec, kind, callee, caller
                    )
            for (key, name), future in futures.items():
                results[key][name] = future.result()

    for key in ordered_keys:
        kind, callee, caller = requests[key]
        if include_builtin:
            results[key][BUILTIN_BACKEND_NAME] = builtin_value(kind, callee, caller)

    annotations: dict[tuple[int, int, int, int], Fraction] = {}
    estimates: dict[tuple, ThroughputEstimate] = {}
    for key in ordered_keys:
        kind, callee, caller = requests[key]
        per_backend = results[key]
        successes = [v for _, v in sorted(per_backend.items()) if isinstance(v, Fraction)]
        for name, value in sorted(per_backend.items()):
            if isinstance(value, Failure):
                report.backend_failures[name] = report.backend_failures.get(name, 0) + 1
                report.failure_details.append(f"{name}: {value.reason}")
        if successes:
            estimates[key] = ThroughputEstimate(
                block_id=callee.id,
                caller_id=None if caller is None else caller.id,
                mode=kind,
                per_backend=dict(per_backend),
                median_cpiter=median_aggregate(successes),
                backends_used=len(successes),
            )

    for edge_key, request_key in edge_requests.items():
        estimate = estimates.get(request_key)
        if estimate is not None:
            annotations[edge_key] = estimate.median_cpiter
            report.estimates[edge_key] = estimate

    annotated = with_annotations(profile, annotations)
    for threads in annotated.ranks.values():
        for cfg in threads.values():
            for e in cfg.edges:
                if e.calls > 0 and e.cpiter is None:
                    report.unannotated_edges += 1
    report.unknown_mnemonics = tuple(sorted(unknown))
    report.analyzed_requests = len(ordered_keys)
    report.cached_requests = cache.hits
    return annotated, report
