"""Stacked-cache geometry, chip power arithmetic, presets, unit parsing.

Every headline number is asserted as an exact rational, with display
rounding checked separately so no float noise can hide an arithmetic slip.
"""

from __future__ import annotations

from fractions import Fraction

import pytest

from locus.arch import (
    ArchModelError,
    ChipPowerSummary,
    IndivisibleCapacityError,
    MIB,
    PowerChain,
    StackedCacheSpec,
    UnknownPresetError,
    apply_node_scaling,
    cache_bandwidth,
    cache_capacity,
    chip_power_summary,
    cmg_core_power,
    get_cache_preset,
    get_power_preset,
    load_presets,
    parse_frequency,
    parse_size,
    presets_from_dict,
    round_display,
    tag_array_bytes,
)


def big_cache():
    """8 dies x 96 channels x 512 KiB @ 16 B / 1 GHz, 6 B tags, 256 B lines."""
    return StackedCacheSpec(
        n_dies=8,
        n_ch=96,
        n_cap_bytes=512 * 1024,
        width_bytes=16,
        f_clk_hz=Fraction(10**9),
        tag_bytes_per_line=6,
        line_bytes=256,
    )


def scaled_chain():
    """32 cores/group, 16 groups, two shrink steps 0.7 then 0.58."""
    return PowerChain(
        w_per_core=Fraction("1.98"),
        w_per_mif=Fraction("3.75"),
        cores_per_cmg=32,
        cmg_count=16,
        node_scalings=(("7nm", "5nm", Fraction("0.7")), ("5nm", "1.5nm", Fraction("0.58"))),
        sram_static_w_per_4mib=Fraction("0.064"),
        static_fraction=Fraction("0.9"),
    )


# ---------------------------------------------------------------------------
# Cache geometry
# ---------------------------------------------------------------------------


def test_capacity_bandwidth_tags_of_the_big_stack():
    spec = big_cache()
    assert cache_capacity(spec) == 402_653_184  # 384 MiB
    assert cache_capacity(spec) == 384 * MIB
    assert cache_bandwidth(spec) == Fraction(1_536_000_000_000)  # 1.536 TB/s
    assert tag_array_bytes(spec) == 9_437_184  # 6 B per 256 B line = 9 MiB
    assert tag_array_bytes(spec) == 9 * MIB


def test_narrow_slow_stack_numbers():
    spec = StackedCacheSpec(
        n_dies=8,
        n_ch=128,
        n_cap_bytes=512 * 1024,
        width_bytes=4,
        f_clk_hz=Fraction(300_000_000),
        tag_bytes_per_line=6,
        line_bytes=256,
    )
    assert cache_capacity(spec) == 512 * MIB
    assert cache_bandwidth(spec) == Fraction(153_600_000_000)  # 153.6 GB/s


def test_stacking_more_dies_adds_capacity_not_bandwidth():
    base = big_cache()
    taller = StackedCacheSpec(
        n_dies=base.n_dies * 2,
        n_ch=base.n_ch,
        n_cap_bytes=base.n_cap_bytes,
        width_bytes=base.width_bytes,
        f_clk_hz=base.f_clk_hz,
        tag_bytes_per_line=base.tag_bytes_per_line,
        line_bytes=base.line_bytes,
    )
    assert cache_capacity(taller) == 2 * cache_capacity(base)
    assert cache_bandwidth(taller) == cache_bandwidth(base)
    assert tag_array_bytes(taller) == 2 * tag_array_bytes(base)


def test_capacity_scales_in_each_factor():
    spec = big_cache()
    for field, factor in (("n_dies", 3), ("n_ch", 2), ("n_cap_bytes", 4)):
        import dataclasses

        bigger = dataclasses.replace(spec, **{field: getattr(spec, field) * factor})
        assert cache_capacity(bigger) == factor * cache_capacity(spec)


def test_tag_array_requires_whole_lines():
    spec = StackedCacheSpec(
        n_dies=1,
        n_ch=1,
        n_cap_bytes=1000,  # not a multiple of 256
        width_bytes=16,
        f_clk_hz=Fraction(10**9),
        tag_bytes_per_line=6,
        line_bytes=256,
    )
    with pytest.raises(IndivisibleCapacityError):
        tag_array_bytes(spec)


def test_cache_spec_validation():
    good = dict(
        n_dies=1, n_ch=1, n_cap_bytes=1024, width_bytes=16,
        f_clk_hz=Fraction(10**9), tag_bytes_per_line=6, line_bytes=256,
    )
    StackedCacheSpec(**good)
    for bad in (
        {"n_dies": 0},
        {"n_ch": -1},
        {"n_cap_bytes": True},
        {"width_bytes": 0},
        {"f_clk_hz": 0},
        {"line_bytes": 100},  # not a power of two
    ):
        with pytest.raises(ArchModelError):
            StackedCacheSpec(**{**good, **bad})


# ---------------------------------------------------------------------------
# Power chain
# ---------------------------------------------------------------------------


def test_small_group_power():
    chain = PowerChain(
        w_per_core=Fraction("1.98"),
        w_per_mif=Fraction("3.75"),
        cores_per_cmg=12,
        cmg_count=4,
        node_scalings=(),
        sram_static_w_per_4mib=Fraction("0.064"),
        static_fraction=Fraction("0.9"),
    )
    assert cmg_core_power(chain) == Fraction("27.51")  # 12 x 1.98 + 3.75
    assert cmg_core_power(chain, cores=48) == Fraction("98.79")
    assert cmg_core_power(chain, cores=0) == Fraction("3.75")
    with pytest.raises(ArchModelError):
        cmg_core_power(chain, cores=-1)


def test_node_scaling_chain_is_exact():
    chain = scaled_chain()
    steps = apply_node_scaling(cmg_core_power(chain), chain)
    assert steps == [
        ("7nm", Fraction("67.11")),
        ("5nm", Fraction("46.977")),
        ("1.5nm", Fraction("27.24666")),
    ]


def test_node_scaling_without_steps_passes_through():
    chain = PowerChain(
        w_per_core=1,
        w_per_mif=1,
        cores_per_cmg=1,
        cmg_count=1,
        node_scalings=(),
        sram_static_w_per_4mib=1,
        static_fraction=1,
    )
    assert apply_node_scaling(Fraction(5), chain) == [("base", Fraction(5))]


def test_scaling_steps_compound_multiplicatively():
    def chain_with(*steps):
        return PowerChain(
            w_per_core=1, w_per_mif=1, cores_per_cmg=1, cmg_count=1,
            node_scalings=steps, sram_static_w_per_4mib=1, static_fraction=1,
        )

    a, b = Fraction(7, 10), Fraction(29, 50)
    both = apply_node_scaling(100, chain_with(("x", "y", a), ("y", "z", b)))
    assert both[-1][1] == 100 * a * b
    swapped = apply_node_scaling(100, chain_with(("x", "y", b), ("y", "z", a)))
    assert swapped[-1][1] == both[-1][1]


def test_full_chip_summary_is_exact():
    summary = chip_power_summary(scaled_chain(), big_cache())
    assert isinstance(summary, ChipPowerSummary)
    assert summary.cmg_power_w == Fraction("27.24666")
    assert summary.core_w == Fraction("435.94656")
    assert summary.cache_capacity_bytes == 384 * MIB
    assert summary.cache_static_per_cmg_w == Fraction("6.144")  # 96 x 0.064
    assert summary.cache_static_w == Fraction("98.304")
    assert summary.cache_total_w == Fraction(8192, 75)  # 98.304 / 0.9
    assert summary.tdp_w == Fraction(5_110_999, 9375)  # ~545.17 W
    assert summary.cmg_power_by_node[0] == ("7nm", Fraction("67.11"))
    assert summary.cmg_power_by_node[-1] == ("1.5nm", Fraction("27.24666"))


def test_power_density_at_reference_areas():
    summary = chip_power_summary(scaled_chain(), big_cache())
    dense = summary.power_density(192)
    sparse = summary.power_density(400)
    assert dense == Fraction(5_110_999, 1_800_000)
    assert round_display(dense) == 2.84
    assert round_display(sparse) == 1.36
    assert abs(sparse - Fraction("1.37")) <= Fraction("1.37") * Fraction(5, 100)
    with pytest.raises(ArchModelError):
        summary.power_density(0)


def test_static_fraction_one_means_all_static():
    chain = PowerChain(
        w_per_core=1, w_per_mif=1, cores_per_cmg=1, cmg_count=2,
        node_scalings=(), sram_static_w_per_4mib=Fraction(1, 2), static_fraction=1,
    )
    spec = StackedCacheSpec(
        n_dies=1, n_ch=1, n_cap_bytes=8 * MIB, width_bytes=1,
        f_clk_hz=1, tag_bytes_per_line=1, line_bytes=256,
    )
    summary = chip_power_summary(chain, spec)
    assert summary.cache_static_per_cmg_w == 1  # 8 MiB / 4 MiB x 1/2
    assert summary.cache_total_w == summary.cache_static_w == 2
    assert summary.tdp_w == 2 * 2 + 2  # groups x (core+mif) + cache


def test_tdp_monotonicity():
    import dataclasses

    base_chain, spec = scaled_chain(), big_cache()
    base = chip_power_summary(base_chain, spec).tdp_w
    more_cores = dataclasses.replace(base_chain, cores_per_cmg=64)
    hotter_sram = dataclasses.replace(base_chain, sram_static_w_per_4mib=Fraction("0.128"))
    leakier = dataclasses.replace(base_chain, static_fraction=Fraction("0.45"))
    assert chip_power_summary(more_cores, spec).tdp_w > base
    assert chip_power_summary(hotter_sram, spec).tdp_w > base
    assert chip_power_summary(leakier, spec).tdp_w > base  # same static, more dynamic


def test_power_chain_validation():
    good = dict(
        w_per_core=1, w_per_mif=1, cores_per_cmg=1, cmg_count=1,
        node_scalings=(), sram_static_w_per_4mib=1, static_fraction=1,
    )
    PowerChain(**good)
    PowerChain(**{**good, "cores_per_cmg": 0})  # cacheless group is fine
    for bad in (
        {"w_per_core": 0},
        {"w_per_mif": -1},
        {"cores_per_cmg": -1},
        {"cmg_count": 0},
        {"node_scalings": (("a", "b", Fraction(3, 2)),)},  # > 1
        {"node_scalings": (("a", "b", 0),)},
        {"node_scalings": (("a", "b"),)},  # malformed step
        {"static_fraction": 0},
        {"static_fraction": Fraction(11, 10)},
    ):
        with pytest.raises(ArchModelError):
            PowerChain(**{**good, **bad})


# ---------------------------------------------------------------------------
# Presets
# ---------------------------------------------------------------------------


def test_shipped_presets_load_and_match_the_calculators():
    presets = load_presets()
    large = get_cache_preset(presets, "LARC")
    assert large == big_cache()
    chain = get_power_preset(presets, "LARC-1.5nm")
    assert chain == scaled_chain()
    small = get_power_preset(presets, "A64FX-7nm")
    assert cmg_core_power(small) == Fraction("27.51")
    assert small.node_scalings == ()


def test_alias_points_at_the_same_chain():
    presets = load_presets()
    assert get_power_preset(presets, "LARC") == get_power_preset(presets, "LARC-1.5nm")
    assert presets.power_cache["LARC"] == presets.power_cache["LARC-1.5nm"] == "LARC"
    assert presets.reference_areas_mm2["LARC"] == (Fraction(192), Fraction(400))


def test_unknown_presets_list_what_exists():
    presets = load_presets()
    with pytest.raises(UnknownPresetError, match="LARC"):
        get_cache_preset(presets, "nope")
    with pytest.raises(UnknownPresetError, match="A64FX-7nm"):
        get_power_preset(presets, "nope")


def test_chip_tables_are_descriptive_records():
    presets = load_presets()
    assert presets.chip_tables  # present and non-empty
    for name, record in presets.chip_tables.items():
        assert isinstance(name, str) and isinstance(record, dict)


def test_presets_from_dict_validation():
    with pytest.raises(ArchModelError, match="top-level"):
        presets_from_dict({"nonsense": {}})
    with pytest.raises(ArchModelError, match="missing"):
        presets_from_dict({"cache": {"c": {"n_dies": 1}}})
    with pytest.raises(ArchModelError, match="unknown keys"):
        presets_from_dict(
            {
                "cache": {
                    "c": dict(
                        n_dies=1, n_ch=1, n_cap_bytes=1024, width_bytes=1,
                        f_clk_hz=1, tag_bytes_per_line=1, line_bytes=256, extra=1,
                    )
                }
            }
        )
    power = dict(
        w_per_core=1, w_per_mif=1, cores_per_cmg=1, cmg_count=1,
        node_scalings=[], sram_static_w_per_4mib=1, static_fraction=1,
    )
    with pytest.raises(ArchModelError, match="unknown cache preset"):
        presets_from_dict({"power": {"p": {**power, "cache_preset": "ghost"}}})
    with pytest.raises(ArchModelError, match="alias"):
        presets_from_dict({"power": {"p": power}, "aliases": {"a": "ghost"}})


def test_load_presets_from_custom_file(tmp_path):
    path = tmp_path / "p.json"
    path.write_text(
        '{"power": {"tiny": {"w_per_core": 2, "w_per_mif": 1, "cores_per_cmg": 4,'
        ' "cmg_count": 1, "node_scalings": [], "sram_static_w_per_4mib": 1,'
        ' "static_fraction": 1}}}'
    )
    presets = load_presets(path)
    assert cmg_core_power(get_power_preset(presets, "tiny")) == 9
    assert presets.cache == {}


def test_float_preset_values_convert_exactly():
    # JSON 0.58 must become Fraction("0.58") = 29/50, not the binary float.
    presets = load_presets()
    chain = get_power_preset(presets, "LARC-1.5nm")
    assert chain.node_scalings[1][2] == Fraction(29, 50)
    assert chain.w_per_core == Fraction(198, 100)


# ---------------------------------------------------------------------------
# Unit parsing and display rounding
# ---------------------------------------------------------------------------


def test_parse_size():
    assert parse_size("512KiB") == 512 * 1024
    assert parse_size("384 MiB") == 384 * MIB
    assert parse_size("1GiB") == 1 << 30
    assert parse_size("1GB") == 10**9
    assert parse_size("2MB") == 2 * 10**6
    assert parse_size("3kb") == 3000
    assert parse_size("256B") == 256
    assert parse_size("1024") == 1024
    for bad in ("12XB", "-5", "1.5MiB", "", "MiB"):
        with pytest.raises(ValueError):
            parse_size(bad)


def test_parse_frequency():
    assert parse_frequency("1GHz") == 10**9
    assert parse_frequency("300MHz") == 300 * 10**6
    assert parse_frequency("2.2GHz") == Fraction("2.2") * 10**9
    assert parse_frequency("2.2e9") == 2_200_000_000
    assert parse_frequency("450khz") == 450_000
    assert parse_frequency(" 5 Hz ") == 5
    for bad in ("abc", "0", "-1GHz", ""):
        with pytest.raises(ValueError):
            parse_frequency(bad)


def test_round_display_is_half_even():
    assert round_display(Fraction(1, 8)) == 0.12  # 0.125 rounds to even
    assert round_display(Fraction(3, 8)) == 0.38  # 0.375 rounds to even
    assert round_display(Fraction(2345, 1000)) == 2.34
    assert round_display(Fraction(2355, 1000)) == 2.36
    assert round_display(Fraction(1, 3), places=4) == 0.3333
    assert round_display(Fraction(2, 3), places=0) == 1.0


def test_round_display_beats_float_artifacts():
    # 2.675 is exactly representable as a Fraction but not as a float; the
    # decimal path must round the true tie up to the even digit, 2.68.
    assert round_display(Fraction(2675, 1000)) == 2.68
    assert round(2.675, 2) == 2.67  # the float trap this avoids
