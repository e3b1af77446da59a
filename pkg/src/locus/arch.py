"""Closed-form calculators for 3D-stacked SRAM caches and chip power.

Two independent calculators:

* geometry - capacity, bandwidth and tag-array size of a die-stacked
  SRAM cache described by :class:`StackedCacheSpec`;
* power - a per-core/per-MIF power model folded through an ordered list
  of process-node scaling multipliers, plus SRAM static power and a
  static-to-total ratio, yielding chip TDP and power density.

All arithmetic is exact (:class:`fractions.Fraction`); numbers are
rounded half-even to two decimals only for display.  Named presets for
both calculators ship as package data (``locus/data/presets.json``) so
the calculators stay fully general.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from decimal import ROUND_HALF_EVEN, Decimal, localcontext
from fractions import Fraction
from importlib import resources
from pathlib import Path
from typing import Mapping, Sequence


class ArchModelError(Exception):
    """Base for architecture-calculator input problems."""


class IndivisibleCapacityError(ArchModelError):
    """Cache capacity is not a whole number of cache lines."""


class UnknownPresetError(ArchModelError):
    pass


MIB = 1 << 20


def round_display(value: Fraction, places: int = 2) -> float:
    """Round an exact rational half-even at ``places`` decimals.

    Used only at display boundaries; internal arithmetic never rounds.
    """
    with localcontext() as ctx:
        ctx.prec = 60
        quantum = Decimal(1).scaleb(-places)
        d = (Decimal(value.numerator) / Decimal(value.denominator)).quantize(
            quantum, rounding=ROUND_HALF_EVEN
        )
    return float(d)


def _positive_int(value, name: str) -> int:
    if isinstance(value, bool) or not isinstance(value, int) or value < 1:
        raise ArchModelError(f"{name} must be a positive integer")
    return value


def _positive_fraction(value, name: str) -> Fraction:
    fr = value if isinstance(value, Fraction) else Fraction(value)
    if fr <= 0:
        raise ArchModelError(f"{name} must be positive")
    return fr


@dataclass(frozen=True)
class StackedCacheSpec:
    """Geometry of a die-stacked SRAM cache attached to one core group.

    ``n_ch`` counts channels per die; per-die channel count alone sets the
    bandwidth while capacity additionally scales with ``n_dies``.
    """

    n_dies: int
    n_ch: int
    n_cap_bytes: int
    width_bytes: int
    f_clk_hz: Fraction
    tag_bytes_per_line: int
    line_bytes: int

    def __post_init__(self) -> None:
        _positive_int(self.n_dies, "n_dies")
        _positive_int(self.n_ch, "n_ch")
        _positive_int(self.n_cap_bytes, "n_cap_bytes")
        _positive_int(self.width_bytes, "width_bytes")
        object.__setattr__(self, "f_clk_hz", _positive_fraction(self.f_clk_hz, "f_clk_hz"))
        _positive_int(self.tag_bytes_per_line, "tag_bytes_per_line")
        _positive_int(self.line_bytes, "line_bytes")
        if self.line_bytes & (self.line_bytes - 1):
            raise ArchModelError("line_bytes must be a power of two")


@dataclass(frozen=True)
class PowerChain:
    """Per-core/per-MIF power plus node-scaling and SRAM static parameters.

    ``node_scalings`` is an ordered list of ``(from_node, to_node,
    multiplier)`` steps applied to the core-group power; multipliers are
    in (0, 1].  ``static_fraction`` is the static share of total cache
    power, in (0, 1].
    """

    w_per_core: Fraction
    w_per_mif: Fraction
    cores_per_cmg: int
    cmg_count: int
    node_scalings: tuple[tuple[str, str, Fraction], ...]
    sram_static_w_per_4mib: Fraction
    static_fraction: Fraction

    def __post_init__(self) -> None:
        object.__setattr__(self, "w_per_core", _positive_fraction(self.w_per_core, "w_per_core"))
        object.__setattr__(self, "w_per_mif", _positive_fraction(self.w_per_mif, "w_per_mif"))
        if isinstance(self.cores_per_cmg, bool) or not isinstance(self.cores_per_cmg, int) \
                or self.cores_per_cmg < 0:
            raise ArchModelError("cores_per_cmg must be a non-negative integer")
        _positive_int(self.cmg_count, "cmg_count")
        steps = []
        for step in self.node_scalings:
            if len(step) != 3:
                raise ArchModelError("node scaling steps are (from, to, multiplier)")
            src, dst, mult = step
            mult = _positive_fraction(mult, "scaling multiplier")
            if mult > 1:
                raise ArchModelError("scaling multipliers must be in (0, 1]")
            steps.append((str(src), str(dst), mult))
        object.__setattr__(self, "node_scalings", tuple(steps))
        object.__setattr__(
            self,
            "sram_static_w_per_4mib",
            _positive_fraction(self.sram_static_w_per_4mib, "sram_static_w_per_4mib"),
        )
        static = _positive_fraction(self.static_fraction, "static_fraction")
        if static > 1:
            raise ArchModelError("static_fraction must be in (0, 1]")
        object.__setattr__(self, "static_fraction", static)


# ---------------------------------------------------------------------------
# Cache geometry


def cache_capacity(spec: StackedCacheSpec) -> int:
    """Total bytes: dies x channels/die x bytes/channel."""
    return spec.n_dies * spec.n_ch * spec.n_cap_bytes


def cache_bandwidth(spec: StackedCacheSpec) -> Fraction:
    """Bytes per second: channels/die x clock x bytes-per-transfer.

    Deliberately independent of the die count - every die's channels
    share the same vertical links, so stacking adds capacity, not
    bandwidth.
    """
    return spec.n_ch * spec.f_clk_hz * spec.width_bytes


def tag_array_bytes(spec: StackedCacheSpec) -> int:
    """Bytes of tag storage: one tag per cache line."""
    capacity = cache_capacity(spec)
    lines, remainder = divmod(capacity, spec.line_bytes)
    if remainder:
        raise IndivisibleCapacityError(
            f"capacity {capacity} B is not a multiple of the {spec.line_bytes} B line size"
        )
    return lines * spec.tag_bytes_per_line


# ---------------------------------------------------------------------------
# Power


def cmg_core_power(chain: PowerChain, cores: int | None = None) -> Fraction:
    """Watts for one core group: cores x W/core + the memory interface."""
    n = chain.cores_per_cmg if cores is None else cores
    if n < 0:
        raise ArchModelError("core count must be >= 0")
    return n * chain.w_per_core + chain.w_per_mif


def apply_node_scaling(
    power_w: Fraction | int,
    chain: PowerChain,
) -> list[tuple[str, Fraction]]:
    """Fold the node-scaling multipliers, emitting every intermediate.

    The first entry is the input power labelled with the starting node
    (or ``"base"`` when no scalings are configured); each following entry
    is one scaling step.  The last entry is the fully scaled power.
    """
    power = _positive_fraction(power_w, "power_w")
    start = chain.node_scalings[0][0] if chain.node_scalings else "base"
    out = [(start, power)]
    for _, to_node, mult in chain.node_scalings:
        power = power * mult
        out.append((to_node, power))
    return out


@dataclass(frozen=True)
class ChipPowerSummary:
    """End-to-end chip power figures, all exact.

    ``cmg_power_by_node`` records the scaling chain for one core group;
    ``core_w`` multiplies its final value by the group count.  Cache
    static power is per 4 MiB of attached capacity; dividing by the
    static fraction yields total cache power.
    """

    cmg_power_by_node: tuple[tuple[str, Fraction], ...]
    cmg_power_w: Fraction
    core_w: Fraction
    cache_capacity_bytes: int
    cache_static_per_cmg_w: Fraction
    cache_static_w: Fraction
    cache_total_w: Fraction
    tdp_w: Fraction

    def power_density(self, area_mm2: Fraction | int) -> Fraction:
        area = _positive_fraction(area_mm2, "area_mm2")
        return self.tdp_w / area


def chip_power_summary(chain: PowerChain, spec: StackedCacheSpec) -> ChipPowerSummary:
    """Combine the power chain with one core group's cache geometry.

    ``spec`` describes the cache attached to EACH core group; the chip
    total multiplies both the scaled group power and the cache static
    power by ``cmg_count``.
    """
    scaling = apply_node_scaling(cmg_core_power(chain), chain)
    cmg_power = scaling[-1][1]
    core_w = chain.cmg_count * cmg_power
    capacity = cache_capacity(spec)
    static_per_cmg = Fraction(capacity, 4 * MIB) * chain.sram_static_w_per_4mib
    cache_static = static_per_cmg * chain.cmg_count
    cache_total = cache_static / chain.static_fraction
    return ChipPowerSummary(
        cmg_power_by_node=tuple(scaling),
        cmg_power_w=cmg_power,
        core_w=core_w,
        cache_capacity_bytes=capacity,
        cache_static_per_cmg_w=static_per_cmg,
        cache_static_w=cache_static,
        cache_total_w=cache_total,
        tdp_w=core_w + cache_total,
    )


# ---------------------------------------------------------------------------
# Presets


@dataclass(frozen=True)
class Presets:
    """Named calculator inputs shipped as package data.

    ``chip_tables`` carries descriptive configuration records (cores,
    cache sizes, bandwidths) used for report headers only - no
    calculator semantics are attached to them.
    """

    cache: Mapping[str, StackedCacheSpec]
    power: Mapping[str, PowerChain]
    power_cache: Mapping[str, str]
    reference_areas_mm2: Mapping[str, tuple[Fraction, ...]]
    chip_tables: Mapping[str, Mapping[str, object]]


def _fraction_from_json(value, name: str) -> Fraction:
    if isinstance(value, bool) or not isinstance(value, (int, float, str)):
        raise ArchModelError(f"{name} must be a number")
    if isinstance(value, float):
        return Fraction(repr(value))
    return Fraction(value)


def _cache_spec_from_dict(obj: dict, name: str) -> StackedCacheSpec:
    required = {"n_dies", "n_ch", "n_cap_bytes", "width_bytes",
                "f_clk_hz", "tag_bytes_per_line", "line_bytes"}
    missing = required - set(obj)
    if missing:
        raise ArchModelError(f"cache preset {name!r}: missing {sorted(missing)}")
    unknown = set(obj) - required
    if unknown:
        raise ArchModelError(f"cache preset {name!r}: unknown keys {sorted(unknown)}")
    return StackedCacheSpec(
        n_dies=obj["n_dies"],
        n_ch=obj["n_ch"],
        n_cap_bytes=obj["n_cap_bytes"],
        width_bytes=obj["width_bytes"],
        f_clk_hz=_fraction_from_json(obj["f_clk_hz"], "f_clk_hz"),
        tag_bytes_per_line=obj["tag_bytes_per_line"],
        line_bytes=obj["line_bytes"],
    )


def _power_chain_from_dict(obj: dict, name: str) -> tuple[PowerChain, str | None, tuple]:
    required = {"w_per_core", "w_per_mif", "cores_per_cmg", "cmg_count",
                "node_scalings", "sram_static_w_per_4mib", "static_fraction"}
    optional = {"cache_preset", "reference_areas_mm2"}
    missing = required - set(obj)
    if missing:
        raise ArchModelError(f"power preset {name!r}: missing {sorted(missing)}")
    unknown = set(obj) - required - optional
    if unknown:
        raise ArchModelError(f"power preset {name!r}: unknown keys {sorted(unknown)}")
    scalings = tuple(
        (step[0], step[1], _fraction_from_json(step[2], "multiplier"))
        for step in obj["node_scalings"]
    )
    chain = PowerChain(
        w_per_core=_fraction_from_json(obj["w_per_core"], "w_per_core"),
        w_per_mif=_fraction_from_json(obj["w_per_mif"], "w_per_mif"),
        cores_per_cmg=obj["cores_per_cmg"],
        cmg_count=obj["cmg_count"],
        node_scalings=scalings,
        sram_static_w_per_4mib=_fraction_from_json(
            obj["sram_static_w_per_4mib"], "sram_static_w_per_4mib"
        ),
        static_fraction=_fraction_from_json(obj["static_fraction"], "static_fraction"),
    )
    areas = tuple(
        _fraction_from_json(a, "reference area")
        for a in obj.get("reference_areas_mm2", [])
    )
    return chain, obj.get("cache_preset"), areas


def presets_from_dict(data: dict) -> Presets:
    if not isinstance(data, dict):
        raise ArchModelError("presets file must contain an object")
    unknown = set(data) - {"cache", "power", "aliases", "chip_tables"}
    if unknown:
        raise ArchModelError(f"presets: unknown top-level keys {sorted(unknown)}")
    cache = {
        name: _cache_spec_from_dict(obj, name)
        for name, obj in data.get("cache", {}).items()
    }
    power: dict[str, PowerChain] = {}
    power_cache: dict[str, str] = {}
    areas: dict[str, tuple[Fraction, ...]] = {}
    for name, obj in data.get("power", {}).items():
        chain, cache_name, ref_areas = _power_chain_from_dict(obj, name)
        power[name] = chain
        if cache_name is not None:
            if cache_name not in cache:
                raise ArchModelError(
                    f"power preset {name!r} references unknown cache preset {cache_name!r}"
                )
            power_cache[name] = cache_name
        areas[name] = ref_areas
    for alias, target in data.get("aliases", {}).items():
        if target not in power:
            raise ArchModelError(f"alias {alias!r} points at unknown power preset {target!r}")
        power[alias] = power[target]
        if target in power_cache:
            power_cache[alias] = power_cache[target]
        areas[alias] = areas[target]
    return Presets(
        cache=cache,
        power=power,
        power_cache=power_cache,
        reference_areas_mm2=areas,
        chip_tables=data.get("chip_tables", {}),
    )


def load_presets(path: str | Path | None = None) -> Presets:
    """Load presets from a file, or the copy shipped with the package."""
    if path is None:
        text = resources.files("locus.data").joinpath("presets.json").read_text("utf-8")
    else:
        text = Path(path).read_text("utf-8")
    return presets_from_dict(json.loads(text))


def get_cache_preset(presets: Presets, name: str) -> StackedCacheSpec:
    try:
        return presets.cache[name]
    except KeyError:
        raise UnknownPresetError(
            f"unknown cache preset {name!r}; available: {sorted(presets.cache)}"
        ) from None


def get_power_preset(presets: Presets, name: str) -> PowerChain:
    try:
        return presets.power[name]
    except KeyError:
        raise UnknownPresetError(
            f"unknown power preset {name!r}; available: {sorted(presets.power)}"
        ) from None


# ---------------------------------------------------------------------------
# Size parsing for CLI convenience

_SIZE_SUFFIXES: Sequence[tuple[str, int]] = (
    ("GIB", 1 << 30),
    ("MIB", 1 << 20),
    ("KIB", 1 << 10),
    ("GB", 10**9),
    ("MB", 10**6),
    ("KB", 10**3),
    ("B", 1),
)


def parse_size(text: str) -> int:
    """Parse sizes like ``512KiB``, ``384 MiB``, ``256B`` or plain ``1024``."""
    cleaned = text.strip().upper().replace(" ", "")
    for suffix, scale in _SIZE_SUFFIXES:
        if cleaned.endswith(suffix):
            digits = cleaned[: -len(suffix)]
            if not digits.isdigit():
                raise ValueError(f"bad size {text!r}")
            return int(digits) * scale
    if not cleaned.isdigit():
        raise ValueError(f"bad size {text!r}")
    return int(cleaned)


def parse_frequency(text: str) -> Fraction:
    """Parse frequencies like ``1GHz``, ``300MHz``, ``2.2e9`` or plain Hz."""
    cleaned = text.strip().upper().replace(" ", "")
    for suffix, scale in (("GHZ", 10**9), ("MHZ", 10**6), ("KHZ", 10**3), ("HZ", 1)):
        if cleaned.endswith(suffix):
            number = cleaned[: -len(suffix)]
            break
    else:
        number, scale = cleaned, 1
    try:
        value = Fraction(number) * scale
    except (ValueError, ZeroDivisionError):
        raise ValueError(f"bad frequency {text!r}") from None
    if value <= 0:
        raise ValueError("frequency must be positive")
    return value
