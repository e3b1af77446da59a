"""Shared test helpers: block builders, mini machine models, CLI runner."""

from __future__ import annotations

import re
from fractions import Fraction
from pathlib import Path

import pytest

from locus.profile import BasicBlock, DEFAULT_REGISTERS, Instruction
from locus.throughput.model import InstrSpec, MachineModel

FIXTURES = Path(__file__).parent / "fixtures"


def ins(line: str) -> Instruction:
    return Instruction.parse(line, DEFAULT_REGISTERS)


def block(block_id: int, *lines: str) -> BasicBlock:
    return BasicBlock(block_id, tuple(ins(line) for line in lines))


def spec(uops: int, latency: int, *choices, writes_flags: bool = False) -> InstrSpec:
    """InstrSpec from port-choice varargs; one choice set per uop."""
    return InstrSpec(
        uops=uops,
        latency=latency,
        port_choices=tuple(frozenset(c) for c in choices),
        writes_flags=writes_flags,
    )


def model(width: int, ports: tuple[str, ...], table: dict, *,
          default: InstrSpec | None = None, corrections: dict | None = None) -> MachineModel:
    if default is None:
        default = InstrSpec(uops=1, latency=1, port_choices=(frozenset(ports),))
    return MachineModel(
        name="test",
        dispatch_width=width,
        ports=tuple(ports),
        instruction_table=dict(table),
        default_spec=default,
        correction_table=dict(corrections or {}),
    )


@pytest.fixture
def run_cli(capsys):
    """Invoke the CLI in-process; returns (exit_code, stdout, stderr)."""

    def run(*argv: str):
        from locus.cli import main

        code = main(list(argv))
        captured = capsys.readouterr()
        return code, captured.out, captured.err

    return run


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    """One pass/fail line per acceptance criterion at the end of the run."""
    rows: dict[int, str] = {}
    for outcome, word in (("passed", "PASS"), ("failed", "FAIL"), ("error", "FAIL")):
        for report in terminalreporter.stats.get(outcome, ()):
            match = re.search(r"test_criterion_(\d+)", getattr(report, "nodeid", ""))
            if match:
                number = int(match.group(1))
                if word == "FAIL" or number not in rows:
                    rows[number] = word
    if rows:
        terminalreporter.write_sep("=", "acceptance criteria")
        for number in sorted(rows):
            terminalreporter.write_line(f"criterion {number}: {rows[number]}")
