"""Profile parsing, operand grammar, trace collapsing, serialization."""

from __future__ import annotations

import json
from fractions import Fraction

import pytest

from locus.profile import (
    BasicBlock,
    CfgEdge,
    DEFAULT_REGISTERS,
    DanglingEdgeError,
    EmptyTraceError,
    FlowViolationError,
    Instruction,
    ProfileSyntaxError,
    ThreadCfg,
    WorkloadProfile,
    edges_from_trace,
    parse_profile,
    profile_from_dict,
    save_profile,
    serialize_profile,
    thread_cfg_from_trace,
    with_annotations,
)

from conftest import FIXTURES, block, ins


def minimal_profile_dict(**overrides) -> dict:
    data = {
        "workload": "w",
        "frequency_hz": 1000000000,
        "ranks": {
            "0": {
                "0": {
                    "source": 0,
                    "sink": 0,
                    "blocks": {"0": {"addr": None, "asm": ["NOP"]}},
                    "edges": [{"src": 0, "dst": 0, "calls": 0}],
                }
            }
        },
    }
    data.update(overrides)
    return data


class TestOperandGrammar:
    def test_destination_first(self):
        instruction = ins("ADD r1, r1, r2")
        assert instruction.mnemonic == "ADD"
        assert instruction.writes == frozenset({"r1"})
        assert instruction.reads == frozenset({"r1", "r2"})

    def test_case_insensitive_registers_and_mnemonic_uppercased(self):
        instruction = ins("add RAX, rbx")
        assert instruction.mnemonic == "ADD"
        assert instruction.writes == frozenset({"rax"})
        assert instruction.reads == frozenset({"rbx"})

    def test_non_register_tokens_ignored(self):
        instruction = ins("JNZ loop, flags")
        assert instruction.writes == frozenset()
        assert instruction.reads == frozenset({"flags"})

    def test_immediates_ignored(self):
        instruction = ins("MOV r1, 42")
        assert instruction.writes == frozenset({"r1"})
        assert instruction.reads == frozenset()

    def test_memory_destination_only_reads_address_registers(self):
        instruction = ins("STORE [r1 + 8], r2")
        assert instruction.writes == frozenset()
        assert instruction.reads == frozenset({"r1", "r2"})

    def test_paren_memory_expression(self):
        instruction = ins("MOV 8(rsp), rax")
        assert instruction.writes == frozenset()
        assert instruction.reads == frozenset({"rsp", "rax"})

    def test_no_operands(self):
        instruction = ins("RET")
        assert instruction.operands == ()
        assert instruction.writes == frozenset() and instruction.reads == frozenset()

    def test_aliasing_not_resolved(self):
        # eax and rax are distinct names on purpose.
        a = ins("MOV eax, 1")
        b = ins("ADD r3, rax, r4")
        assert a.writes == {"eax"}
        assert "rax" in b.reads and "eax" not in b.reads


class TestTraces:
    def test_counting_example(self):
        edges = edges_from_trace([0, 1, 1, 1, 2])
        assert {(e.src, e.dst): e.calls for e in edges} == {
            (0, 1): 1,
            (1, 1): 2,
            (1, 2): 1,
        }

    def test_single_block_trace_has_no_edges(self):
        assert edges_from_trace([7]) == []

    def test_empty_trace_rejected(self):
        with pytest.raises(EmptyTraceError):
            edges_from_trace([])

    def test_accumulation_loop_n42(self):
        trace = [0] + [1] * 42 + [2]
        edges = {(e.src, e.dst): e.calls for e in edges_from_trace(trace)}
        assert edges == {(0, 1): 1, (1, 1): 41, (1, 2): 1}

    def test_thread_cfg_from_trace_validates_clean(self):
        from locus.cfg import validate_cfg

        cfg = thread_cfg_from_trace([3, 4, 4, 5, 3])
        assert cfg.source == 3 and cfg.sink == 3
        assert validate_cfg(cfg) == []


class TestParsing:
    def test_minimal_profile(self):
        profile = profile_from_dict(minimal_profile_dict())
        assert profile.workload_name == "w"
        assert profile.frequency_hz == Fraction(10**9)
        cfg = profile.ranks[0][0]
        assert cfg.source == cfg.sink == 0
        assert cfg.edges[0].calls == 0

    def test_linear_chain_flow_conserved(self):
        data = minimal_profile_dict()
        data["ranks"]["0"]["0"] = {
            "source": 0,
            "sink": 2,
            "blocks": {
                "0": {"addr": "0x10", "asm": ["NOP"]},
                "1": {"addr": None, "asm": ["NOP"]},
                "2": {"addr": None, "asm": ["NOP"]},
            },
            "edges": [
                {"src": 0, "dst": 1, "calls": 1},
                {"src": 1, "dst": 2, "calls": 1},
            ],
        }
        profile = profile_from_dict(data)
        assert profile.ranks[0][0].blocks[0].start_address == 0x10

    def test_dangling_edge_raises(self):
        data = minimal_profile_dict()
        data["ranks"]["0"]["0"]["edges"] = [{"src": 0, "dst": 7, "calls": 1}]
        with pytest.raises(DanglingEdgeError) as excinfo:
            profile_from_dict(data)
        assert excinfo.value.src == 0 and excinfo.value.dst == 7

    def test_flow_violation_raises(self):
        data = minimal_profile_dict()
        data["ranks"]["0"]["0"] = {
            "source": 0,
            "sink": 2,
            "blocks": {
                "0": {"addr": None, "asm": ["NOP"]},
                "1": {"addr": None, "asm": ["NOP"]},
                "2": {"addr": None, "asm": ["NOP"]},
            },
            "edges": [
                {"src": 0, "dst": 1, "calls": 2},
                {"src": 1, "dst": 2, "calls": 1},
            ],
        }
        with pytest.raises(FlowViolationError) as excinfo:
            profile_from_dict(data)
        # Lowest violating block id is reported first; the source emitting
        # two traversals breaks both block 0 (out=2) and block 1 (in=2,out=1).
        assert excinfo.value.block == 0
        assert (excinfo.value.in_sum, excinfo.value.out_sum) == (0, 2)

    def test_unknown_key_rejected_strict_accepted_lenient(self):
        data = minimal_profile_dict(extra="x")
        with pytest.raises(ProfileSyntaxError):
            profile_from_dict(data)
        assert profile_from_dict(data, lenient=True).workload_name == "w"

    def test_calls_must_be_exact_integer(self):
        data = minimal_profile_dict()
        data["ranks"]["0"]["0"]["edges"] = [{"src": 0, "dst": 0, "calls": 1.5}]
        with pytest.raises(ProfileSyntaxError):
            profile_from_dict(data)

    def test_decimal_cpiter_is_exact_tenth(self):
        data = minimal_profile_dict()
        data["ranks"]["0"]["0"]["edges"] = [
            {"src": 0, "dst": 0, "calls": 0, "cpiter": 0.1}
        ]
        profile = profile_from_dict(data)
        assert profile.ranks[0][0].edges[0].cpiter == Fraction(1, 10)

    def test_huge_calls_are_exact(self):
        data = minimal_profile_dict()
        data["ranks"]["0"]["0"]["edges"] = [
            {"src": 0, "dst": 0, "calls": 6_080_000_000_000_1}
        ]
        profile = profile_from_dict(data)
        assert profile.ranks[0][0].edges[0].calls == 6_080_000_000_000_1

    def test_missing_file_and_bad_json(self, tmp_path):
        with pytest.raises(FileNotFoundError):
            parse_profile(tmp_path / "missing.json")
        bad = tmp_path / "bad.json"
        bad.write_text("{nope", encoding="utf-8")
        with pytest.raises(ProfileSyntaxError) as excinfo:
            parse_profile(bad)
        assert excinfo.value.line is not None

    def test_fixture_parses(self):
        profile = parse_profile(FIXTURES / "accumulate42.json")
        assert profile.workload_name == "accumulate42"
        assert profile.measured_runtime_s == Fraction(9, 10**7)


class TestSerialization:
    def test_round_trip_structural_equality(self):
        profile = parse_profile(FIXTURES / "accumulate42.json")
        again = profile_from_dict(serialize_profile(profile))
        assert again == profile

    def test_save_and_reload(self, tmp_path):
        profile = parse_profile(FIXTURES / "accumulate42.json")
        out = tmp_path / "copy.json"
        save_profile(profile, out)
        assert parse_profile(out) == profile

    def test_serialized_numbers_json_clean(self):
        profile = parse_profile(FIXTURES / "accumulate42.json")
        annotated = with_annotations(
            profile, {(0, 0, 1, 1): Fraction(3, 2), (0, 0, 0, 1): Fraction(2)}
        )
        text = json.dumps(serialize_profile(annotated))
        reparsed = profile_from_dict(json.loads(text))
        edges = {(e.src, e.dst): e.cpiter for e in reparsed.ranks[0][0].edges}
        assert edges[(1, 1)] == Fraction(3, 2)
        assert edges[(0, 1)] == Fraction(2)

    def test_with_annotations_leaves_unmapped_edges(self):
        profile = parse_profile(FIXTURES / "accumulate42.json")
        annotated = with_annotations(profile, {(0, 0, 1, 1): Fraction(1)})
        edges = {(e.src, e.dst): e.cpiter for e in annotated.ranks[0][0].edges}
        assert edges[(1, 1)] == 1 and edges[(0, 1)] is None


class TestStructures:
    def test_negative_calls_rejected(self):
        with pytest.raises(ValueError):
            CfgEdge(0, 1, -1)

    def test_bool_calls_rejected(self):
        with pytest.raises(ValueError):
            CfgEdge(0, 1, True)

    def test_negative_cpiter_rejected(self):
        with pytest.raises(ValueError):
            CfgEdge(0, 1, 1, Fraction(-1))

    def test_empty_block_rejected(self):
        with pytest.raises(ValueError):
            BasicBlock(0, ())

    def test_profile_requires_positive_frequency(self):
        cfg = thread_cfg_from_trace([0])
        with pytest.raises(ValueError):
            WorkloadProfile("w", Fraction(0), {0: {0: cfg}})

    def test_profile_requires_ranks(self):
        with pytest.raises(ValueError):
            WorkloadProfile("w", Fraction(1), {})
