"""Command-line surface: validate, estimate, speedup, arch, trace-to-profile.

Exit codes are a stable contract: 0 means success, 1 means a domain
violation (structurally invalid CFG, refused estimate), 2 means a usage
or I/O error (missing files, malformed JSON, unknown presets, bad flag
values).  Every command supports ``--format json``; the JSON validates
against the schemas shipped under ``locus/data/schemas/``.  Warnings
(unknown mnemonics, unannotated edges, backend failures, engaged rank
sampling) go to standard error and are also counted in the report; output
is deterministic for a fixed seed and backend set.
"""

from __future__ import annotations

import argparse
import csv
import dataclasses
import io
import json
import os
import sys
from dataclasses import dataclass
from fractions import Fraction
from pathlib import Path
from typing import Sequence

from locus.arch import (
    ArchModelError,
    PowerChain,
    Presets,
    StackedCacheSpec,
    UnknownPresetError,
    cache_bandwidth,
    cache_capacity,
    chip_power_summary,
    get_cache_preset,
    get_power_preset,
    load_presets,
    parse_frequency,
    parse_size,
    round_display,
    tag_array_bytes,
)
from locus.backends import DEFAULT_ITERATIONS, load_backend_specs, estimate_all_blocks
from locus.cfg import validate_cfg
from locus.profile import (
    DanglingEdgeError,
    FlowViolationError,
    MissingSourceOrSinkError,
    ProfileError,
    ProfileSyntaxError,
    WorkloadProfile,
    parse_profile,
    serialize_profile,
    thread_cfg_from_trace,
)
from locus.runtime import (
    NoAnnotatedEdgesError,
    NonPositiveInputError,
    SpeedupReport,
    estimate_runtime,
    select_ranks,
    speedup,
)
from locus.throughput import ModelError, default_machine_model, load_machine_model

BACKENDS_ENV_VAR = "LOCUS_BACKENDS"
MIB = 1 << 20


@dataclass(frozen=True)
class RunConfig:
    """Everything cmd_estimate needs, resolved from flags and environment."""

    profile_path: Path
    machine_model_path: Path | None
    backends_path: Path | None
    output_format: str
    seed: int
    max_sampled_ranks: int
    parallelism: int
    lenient: bool
    keep_artifacts: bool
    all_ranks: bool = False
    iterations: int = DEFAULT_ITERATIONS
    output_path: Path | None = None

    def __post_init__(self) -> None:
        if self.parallelism < 1:
            raise ValueError("parallelism must be >= 1")
        if self.output_format not in ("table", "json", "csv"):
            raise ValueError("output_format must be table, json or csv")
        if self.max_sampled_ranks < 0:
            raise ValueError("max_sampled_ranks must be >= 0")
        if self.iterations < 1:
            raise ValueError("iterations must be >= 1")


def _warn(message: str) -> None:
    print(f"warning: {message}", file=sys.stderr)


def _error(message: str) -> None:
    print(f"error: {message}", file=sys.stderr)


def _emit(text: str, output: Path | None) -> None:
    if output is None:
        sys.stdout.write(text)
    else:
        output.write_text(text, encoding="utf-8")


def _json_text(document: dict) -> str:
    return json.dumps(document, indent=2, sort_keys=True) + "\n"


def _csv_text(header: Sequence[str], rows: Sequence[Sequence[object]]) -> str:
    buffer = io.StringIO()
    writer = csv.writer(buffer, lineterminator="\n")
    writer.writerow(header)
    for row in rows:
        writer.writerow(row)
    return buffer.getvalue()


def _num(value: Fraction) -> int | float:
    """JSON-ready number: int when exact, shortest-repr float otherwise."""
    return int(value) if value.denominator == 1 else float(value)


# ---------------------------------------------------------------------------
# validate


def cmd_validate(args: argparse.Namespace) -> int:
    profile = parse_profile(args.profile, lenient=args.lenient, validate=False)
    rows = []
    for rank_id in sorted(profile.ranks):
        for thread_id in sorted(profile.ranks[rank_id]):
            for violation in validate_cfg(profile.ranks[rank_id][thread_id]):
                rows.append(
                    {
                        "rank": rank_id,
                        "thread": thread_id,
                        "kind": type(violation).__name__,
                        "detail": violation.describe(),
                    }
                )
    ok = not rows
    if args.format == "json":
        text = _json_text({"profile": str(args.profile), "ok": ok, "violations": rows})
    else:
        lines = [f"profile: {args.profile}"]
        if ok:
            lines.append("OK")
        else:
            lines.extend(
                f"rank {r['rank']} thread {r['thread']}: {r['detail']}" for r in rows
            )
        text = "\n".join(lines) + "\n"
    _emit(text, args.output)
    return 0 if ok else 1


# ---------------------------------------------------------------------------
# estimate


def _load_backends(config: RunConfig):
    path = config.backends_path
    if path is None:
        env = os.environ.get(BACKENDS_ENV_VAR)
        if env:
            path = Path(env)
    if path is None:
        return []
    return load_backend_specs(path)


def _speedup_json(report: SpeedupReport) -> dict:
    return {
        "workload": report.workload,
        "measured_s": _num(report.measured_s),
        "estimated_s": _num(report.estimated_s),
        "speedup": _num(report.speedup),
        "classification": report.classification.value,
    }


def cmd_estimate(config: RunConfig) -> int:
    profile = parse_profile(config.profile_path, lenient=config.lenient, validate=True)
    model = (
        default_machine_model()
        if config.machine_model_path is None
        else load_machine_model(config.machine_model_path)
    )
    backends = _load_backends(config)

    total_ranks = len(profile.ranks)
    kept_ids = sorted(profile.ranks)
    engaged = (not config.all_ranks) and total_ranks > 1 + config.max_sampled_ranks
    if engaged:
        profile, kept_ids = select_ranks(
            profile, max_extra=config.max_sampled_ranks, seed=config.seed
        )
        _warn(
            f"rank sampling engaged: analyzing {len(kept_ids)} of {total_ranks} ranks "
            f"(seed {config.seed})"
        )

    annotated, report = estimate_all_blocks(
        profile,
        model,
        backends,
        parallelism=config.parallelism,
        iterations=config.iterations,
        keep_artifacts=config.keep_artifacts,
    )
    if report.unknown_mnemonics:
        _warn(
            f"{len(report.unknown_mnemonics)} unknown mnemonics defaulted: "
            + ", ".join(report.unknown_mnemonics)
        )
    for name in sorted(report.backend_failures):
        _warn(f"backend {name} failed {report.backend_failures[name]} time(s)")
    if report.unannotated_edges:
        _warn(f"{report.unannotated_edges} taken edge(s) left unannotated")

    estimate = estimate_runtime(annotated)

    speedup_report = None
    if profile.measured_runtime_s is not None:
        speedup_report = speedup(
            profile.measured_runtime_s, estimate.t_app_s, workload=profile.workload_name
        )

    document = {
        "workload": profile.workload_name,
        "frequency_hz": _num(profile.frequency_hz),
        "estimated_runtime_s": float(estimate.t_app_s),
        "critical": {"rank": estimate.critical_rank, "thread": estimate.critical_thread},
        "cycles": {
            str(rank): {
                str(thread): float(cycles)
                for thread, cycles in sorted(threads.items())
            }
            for rank, threads in sorted(estimate.per_rank_per_thread_cycles.items())
        },
        "sampling": {
            "engaged": engaged,
            "seed": config.seed,
            "ranks_total": total_ranks,
            "ranks_used": kept_ids,
        },
        "warnings": {
            "unannotated_edges": report.unannotated_edges,
            "unknown_mnemonics": list(report.unknown_mnemonics),
            "backend_failures": dict(sorted(report.backend_failures.items())),
        },
        "speedup": None if speedup_report is None else _speedup_json(speedup_report),
    }

    if config.output_format == "json":
        text = _json_text(document)
    elif config.output_format == "csv":
        text = _csv_text(
            (
                "workload", "measured_s", "estimated_s", "speedup",
                "critical_rank", "critical_thread",
                "unannotated_edges", "unknown_mnemonics",
            ),
            [
                (
                    profile.workload_name,
                    "" if speedup_report is None else _num(speedup_report.measured_s),
                    float(estimate.t_app_s),
                    "" if speedup_report is None else _num(speedup_report.speedup),
                    estimate.critical_rank,
                    estimate.critical_thread,
                    report.unannotated_edges,
                    len(report.unknown_mnemonics),
                )
            ],
        )
    else:
        lines = [
            f"workload:          {profile.workload_name}",
            f"frequency:         {_num(profile.frequency_hz)} Hz",
            f"estimated runtime: {float(estimate.t_app_s)!r} s",
            f"critical rank:     {estimate.critical_rank}",
            f"critical thread:   {estimate.critical_thread}",
            "sampling:          "
            + (
                f"engaged ({len(kept_ids)} of {total_ranks} ranks, seed {config.seed})"
                if engaged
                else "all ranks"
            ),
            f"unannotated edges: {report.unannotated_edges}",
            f"unknown mnemonics: {len(report.unknown_mnemonics)}",
            f"backend failures:  {sum(report.backend_failures.values())}",
        ]
        if speedup_report is not None:
            lines.append(
                f"speedup:           {float(speedup_report.speedup)!r}x "
                f"({speedup_report.classification.value}) "
                f"[measured {_num(speedup_report.measured_s)} s]"
            )
        text = "\n".join(lines) + "\n"
    _emit(text, config.output_path)
    return 0


def _estimate_config(args: argparse.Namespace) -> RunConfig:
    return RunConfig(
        profile_path=args.profile,
        machine_model_path=args.machine_model,
        backends_path=args.backends,
        output_format=args.format,
        seed=args.seed,
        max_sampled_ranks=args.max_sampled_ranks,
        parallelism=args.parallelism if args.parallelism else max(1, os.cpu_count() or 1),
        lenient=args.lenient,
        keep_artifacts=args.keep_artifacts,
        all_ranks=args.all_ranks,
        iterations=args.iterations,
        output_path=args.output,
    )


# ---------------------------------------------------------------------------
# speedup


def cmd_speedup(args: argparse.Namespace) -> int:
    report = speedup(
        Fraction(args.measured), Fraction(args.estimated), workload=args.workload
    )
    if args.format == "json":
        text = _json_text(_speedup_json(report))
    elif args.format == "csv":
        text = _csv_text(
            ("workload", "measured_s", "estimated_s", "speedup", "classification"),
            [
                (
                    report.workload,
                    _num(report.measured_s),
                    _num(report.estimated_s),
                    _num(report.speedup),
                    report.classification.value,
                )
            ],
        )
    else:
        text = "\n".join(
            [
                f"workload:  {report.workload}",
                f"measured:  {_num(report.measured_s)} s",
                f"estimated: {_num(report.estimated_s)} s",
                f"speedup:   {float(report.speedup)!r}x",
                f"class:     {report.classification.value}",
            ]
        ) + "\n"
    _emit(text, args.output)
    return 0


# ---------------------------------------------------------------------------
# arch


def _cache_spec_from_args(args: argparse.Namespace, presets: Presets) -> tuple[StackedCacheSpec, str | None]:
    if args.preset is not None:
        spec = get_cache_preset(presets, args.preset)
        base = {
            "n_dies": spec.n_dies,
            "n_ch": spec.n_ch,
            "n_cap_bytes": spec.n_cap_bytes,
            "width_bytes": spec.width_bytes,
            "f_clk_hz": spec.f_clk_hz,
            "tag_bytes_per_line": spec.tag_bytes_per_line,
            "line_bytes": spec.line_bytes,
        }
    else:
        if args.dies is None or args.channels is None or args.cap is None:
            raise ValueError("without --preset, --dies, --channels and --cap are required")
        base = {
            "n_dies": None,
            "n_ch": None,
            "n_cap_bytes": None,
            "width_bytes": 16,
            "f_clk_hz": Fraction(10**9),
            "tag_bytes_per_line": 6,
            "line_bytes": 256,
        }
    if args.dies is not None:
        base["n_dies"] = args.dies
    if args.channels is not None:
        base["n_ch"] = args.channels
    if args.cap is not None:
        base["n_cap_bytes"] = parse_size(args.cap)
    if args.width is not None:
        base["width_bytes"] = parse_size(args.width)
    if args.fclk is not None:
        base["f_clk_hz"] = parse_frequency(args.fclk)
    if args.tag is not None:
        base["tag_bytes_per_line"] = args.tag
    if args.line is not None:
        base["line_bytes"] = parse_size(args.line)
    return StackedCacheSpec(**base), args.preset


def cmd_arch_cache(args: argparse.Namespace) -> int:
    presets = load_presets(args.presets_file)
    spec, preset_name = _cache_spec_from_args(args, presets)
    capacity = cache_capacity(spec)
    bandwidth = cache_bandwidth(spec)
    tags = tag_array_bytes(spec)
    document = {
        "preset": preset_name,
        "spec": {
            "n_dies": spec.n_dies,
            "n_ch": spec.n_ch,
            "n_cap_bytes": spec.n_cap_bytes,
            "width_bytes": spec.width_bytes,
            "f_clk_hz": _num(spec.f_clk_hz),
            "tag_bytes_per_line": spec.tag_bytes_per_line,
            "line_bytes": spec.line_bytes,
        },
        "capacity_bytes": capacity,
        "capacity_mib": _num(Fraction(capacity, MIB)),
        "bandwidth_bytes_per_s": _num(bandwidth),
        "bandwidth_gb_s": _num(bandwidth / 10**9),
        "tag_array_bytes": tags,
        "tag_array_mib": _num(Fraction(tags, MIB)),
    }
    if args.format == "json":
        text = _json_text(document)
    else:
        text = "\n".join(
            [
                f"preset:       {preset_name or '(custom)'}",
                f"geometry:     {spec.n_dies} dies x {spec.n_ch} channels x "
                f"{spec.n_cap_bytes} B, {spec.width_bytes} B wide @ {_num(spec.f_clk_hz)} Hz",
                f"capacity:     {capacity} B ({round_display(Fraction(capacity, MIB))} MiB)",
                f"bandwidth:    {_num(bandwidth)} B/s "
                f"({round_display(bandwidth / 10**9)} GB/s)",
                f"tag array:    {tags} B ({round_display(Fraction(tags, MIB))} MiB)"
                f" at {spec.tag_bytes_per_line} B per {spec.line_bytes} B line",
            ]
        ) + "\n"
    _emit(text, args.output)
    return 0


def cmd_arch_power(args: argparse.Namespace) -> int:
    presets = load_presets(args.presets_file)
    if args.preset is not None:
        chain = get_power_preset(presets, args.preset)
        cache_name = presets.power_cache.get(args.preset)
        areas = list(presets.reference_areas_mm2.get(args.preset, ()))
    else:
        required = {
            "--w-per-core": args.w_per_core,
            "--w-per-mif": args.w_per_mif,
            "--cores": args.cores,
            "--cmgs": args.cmgs,
        }
        missing = [flag for flag, value in required.items() if value is None]
        if missing:
            raise ValueError(f"without --preset, {', '.join(missing)} required")
        scalings = []
        for step in args.scaling or []:
            parts = step.split(":")
            if len(parts) != 3:
                raise ValueError("--scaling expects FROM:TO:MULTIPLIER")
            scalings.append((parts[0], parts[1], Fraction(parts[2])))
        chain = PowerChain(
            w_per_core=Fraction(args.w_per_core),
            w_per_mif=Fraction(args.w_per_mif),
            cores_per_cmg=args.cores,
            cmg_count=args.cmgs,
            node_scalings=tuple(scalings),
            sram_static_w_per_4mib=Fraction(args.sram_static_w),
            static_fraction=Fraction(args.static_fraction),
        )
        cache_name = None
        areas = []
    if args.preset is not None and (args.cores is not None or args.cmgs is not None):
        chain = dataclasses.replace(
            chain,
            cores_per_cmg=chain.cores_per_cmg if args.cores is None else args.cores,
            cmg_count=chain.cmg_count if args.cmgs is None else args.cmgs,
        )
    if args.cache_preset is not None:
        cache_name = args.cache_preset
    if cache_name is None:
        raise ValueError("no cache geometry: give --preset with one attached or --cache-preset")
    spec = get_cache_preset(presets, cache_name)
    if args.area:
        areas = [Fraction(a) for a in args.area]
    summary = chip_power_summary(chain, spec)
    density = {str(a): summary.power_density(a) for a in areas}

    document = {
        "preset": args.preset,
        "cache_preset": cache_name,
        "cmg_power_by_node": [
            {"node": node, "power_w": float(power)}
            for node, power in summary.cmg_power_by_node
        ],
        "cmg_power_w": float(summary.cmg_power_w),
        "core_w": float(summary.core_w),
        "cache_capacity_bytes": summary.cache_capacity_bytes,
        "cache_static_per_cmg_w": float(summary.cache_static_per_cmg_w),
        "cache_static_w": float(summary.cache_static_w),
        "cache_total_w": float(summary.cache_total_w),
        "tdp_w": float(summary.tdp_w),
        "power_density_w_per_mm2": {k: float(v) for k, v in density.items()},
    }
    if args.format == "json":
        text = _json_text(document)
    else:
        lines = [f"preset:            {args.preset or '(custom)'}"]
        for node, power in summary.cmg_power_by_node:
            lines.append(f"CMG power ({node}):".ljust(19) + f"{round_display(power)} W")
        lines.extend(
            [
                f"core power:        {round_display(summary.core_w)} W "
                f"({chain.cmg_count} CMGs)",
                f"cache capacity:    {summary.cache_capacity_bytes} B per CMG "
                f"({round_display(Fraction(summary.cache_capacity_bytes, MIB))} MiB)",
                f"cache static:      {round_display(summary.cache_static_per_cmg_w)} W per CMG, "
                f"{round_display(summary.cache_static_w)} W total",
                f"cache total:       {round_display(summary.cache_total_w)} W",
                f"TDP:               {round_display(summary.tdp_w)} W",
            ]
        )
        for key in sorted(density, key=lambda k: Fraction(k)):
            lines.append(
                f"power density:     {round_display(density[key])} W/mm2 at {key} mm2"
            )
        text = "\n".join(lines) + "\n"
    _emit(text, args.output)
    return 0


# ---------------------------------------------------------------------------
# trace-to-profile


def cmd_trace_to_profile(args: argparse.Namespace) -> int:
    tokens: list[int] = []
    for line in Path(args.trace).read_text(encoding="utf-8").splitlines():
        stripped = line.split("#", 1)[0]
        tokens.extend(int(tok) for tok in stripped.split())
    if not tokens:
        raise ValueError(f"trace file {args.trace} contains no block ids")
    cfg = thread_cfg_from_trace(tokens)
    profile = WorkloadProfile(
        workload_name=args.workload,
        frequency_hz=parse_frequency(args.frequency),
        ranks={0: {0: cfg}},
        measured_runtime_s=(
            None if args.measured_runtime_s is None else Fraction(args.measured_runtime_s)
        ),
    )
    text = _json_text(serialize_profile(profile))
    _emit(text, args.output)
    return 0


# ---------------------------------------------------------------------------
# Parser


def _add_output_flags(parser: argparse.ArgumentParser, formats: tuple[str, ...]) -> None:
    parser.add_argument("--format", choices=formats, default="table",
                        help="output format (default: table)")
    parser.add_argument("-o", "--output", type=Path, default=None,
                        help="write the report to a file instead of stdout")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="locus",
        description="Upper-bound runtime estimation from basic-block throughput, "
        "plus stacked-cache and chip-power calculators.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p_validate = sub.add_parser("validate", help="check a profile's CFG invariants")
    p_validate.add_argument("profile", type=Path)
    p_validate.add_argument("--lenient", action="store_true",
                            help="ignore unknown keys in the profile file")
    _add_output_flags(p_validate, ("table", "json"))
    p_validate.set_defaults(handler=cmd_validate)

    p_estimate = sub.add_parser(
        "estimate", help="annotate a profile with throughput estimates and project runtime"
    )
    p_estimate.add_argument("profile", type=Path)
    p_estimate.add_argument("--machine-model", type=Path, default=None,
                            help="machine model JSON (default: shipped generic model)")
    p_estimate.add_argument("--backends", type=Path, default=None,
                            help=f"backends JSON (default: ${BACKENDS_ENV_VAR} if set)")
    p_estimate.add_argument("--seed", type=int, default=0,
                            help="seed for rank sampling (default: 0)")
    p_estimate.add_argument("--max-sampled-ranks", type=int, default=9,
                            help="extra ranks sampled beyond rank 0 (default: 9)")
    p_estimate.add_argument("--all-ranks", action="store_true",
                            help="disable rank sampling")
    p_estimate.add_argument("--parallelism", type=int, default=None,
                            help="external backend pool size (default: CPU count)")
    p_estimate.add_argument("--iterations", type=int, default=DEFAULT_ITERATIONS,
                            help="loop iterations requested from external tools")
    p_estimate.add_argument("--lenient", action="store_true",
                            help="ignore unknown keys in the profile file")
    p_estimate.add_argument("--keep-artifacts", action="store_true",
                            help="keep temporary assembly files")
    _add_output_flags(p_estimate, ("table", "json", "csv"))
    p_estimate.set_defaults(handler=lambda args: cmd_estimate(_estimate_config(args)))

    p_speedup = sub.add_parser("speedup", help="measured / estimated runtime ratio")
    p_speedup.add_argument("--measured", required=True,
                           help="measured runtime in seconds")
    p_speedup.add_argument("--estimated", required=True,
                           help="estimated runtime in seconds")
    p_speedup.add_argument("--workload", default="", help="name for the report")
    _add_output_flags(p_speedup, ("table", "json", "csv"))
    p_speedup.set_defaults(handler=cmd_speedup)

    p_arch = sub.add_parser("arch", help="stacked-cache and chip-power calculators")
    arch_sub = p_arch.add_subparsers(dest="arch_command", required=True)

    p_cache = arch_sub.add_parser("cache", help="capacity, bandwidth and tag-array size")
    p_cache.add_argument("--preset", default=None, help="named cache preset")
    p_cache.add_argument("--presets-file", type=Path, default=None,
                         help="presets JSON (default: shipped presets)")
    p_cache.add_argument("--dies", type=int, default=None, help="stacked die count")
    p_cache.add_argument("--channels", type=int, default=None, help="channels per die")
    p_cache.add_argument("--cap", default=None, help="per-channel capacity (e.g. 512KiB)")
    p_cache.add_argument("--width", default=None, help="bytes per transfer (e.g. 16B)")
    p_cache.add_argument("--fclk", default=None, help="channel clock (e.g. 1GHz)")
    p_cache.add_argument("--tag", type=int, default=None, help="tag bytes per line")
    p_cache.add_argument("--line", default=None, help="cache line size (e.g. 256B)")
    _add_output_flags(p_cache, ("table", "json"))
    p_cache.set_defaults(handler=cmd_arch_cache)

    p_power = arch_sub.add_parser("power", help="chip power and TDP extrapolation")
    p_power.add_argument("--preset", default=None, help="named power preset")
    p_power.add_argument("--presets-file", type=Path, default=None,
                         help="presets JSON (default: shipped presets)")
    p_power.add_argument("--cache-preset", default=None,
                         help="cache preset supplying per-CMG capacity")
    p_power.add_argument("--w-per-core", default=None, help="watts per core")
    p_power.add_argument("--w-per-mif", default=None, help="watts per memory interface")
    p_power.add_argument("--cores", type=int, default=None, help="cores per CMG")
    p_power.add_argument("--cmgs", type=int, default=None, help="CMG count")
    p_power.add_argument("--scaling", action="append", default=None,
                         metavar="FROM:TO:MULT",
                         help="node scaling step, repeatable, applied in order")
    p_power.add_argument("--sram-static-w", default="0.064",
                         help="static watts per 4 MiB of SRAM")
    p_power.add_argument("--static-fraction", default="0.9",
                         help="static share of total cache power")
    p_power.add_argument("--area", action="append", default=None, metavar="MM2",
                         help="die area for power density, repeatable")
    _add_output_flags(p_power, ("table", "json"))
    p_power.set_defaults(handler=cmd_arch_power)

    p_trace = sub.add_parser(
        "trace-to-profile", help="build a single-thread profile from a block-id trace"
    )
    p_trace.add_argument("trace", type=Path, help="text file of whitespace-separated ids")
    p_trace.add_argument("--workload", required=True)
    p_trace.add_argument("--frequency", required=True, help="e.g. 2.2GHz or 1000000000")
    p_trace.add_argument("--measured-runtime-s", default=None)
    p_trace.add_argument("-o", "--output", type=Path, default=None)
    p_trace.set_defaults(handler=cmd_trace_to_profile)

    return parser


def main(argv: Sequence[str] | None = None) -> int:
    try:
        args = build_parser().parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    try:
        return args.handler(args)
    except ProfileSyntaxError as exc:
        _error(str(exc))
        return 2
    except (DanglingEdgeError, FlowViolationError, MissingSourceOrSinkError) as exc:
        _error(f"invalid profile: {exc}")
        return 1
    except NoAnnotatedEdgesError as exc:
        _error(str(exc))
        return 1
    except ProfileError as exc:
        _error(str(exc))
        return 2
    except (UnknownPresetError, ArchModelError, ModelError) as exc:
        _error(str(exc))
        return 2
    except NonPositiveInputError as exc:
        _error(str(exc))
        return 2
    except (FileNotFoundError, IsADirectoryError, PermissionError) as exc:
        _error(str(exc))
        return 2
    except json.JSONDecodeError as exc:
        _error(f"bad JSON: {exc}")
        return 2
    except (ValueError, ZeroDivisionError) as exc:
        _error(str(exc))
        return 2


if __name__ == "__main__":
    sys.exit(main())
