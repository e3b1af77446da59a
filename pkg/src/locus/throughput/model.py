"""Abstract machine models for throughput analysis.

A model names a dispatch width, a set of execution ports, and an
instruction table mapping mnemonics to uop count, result latency and
per-uop admissible ports.  Mnemonics missing from the table get a default
spec (one uop, latency 1, any port) and are reported as unknown.  A
correction table can override the latency of specific mnemonics after
table lookup, which is how per-tool cycle fixups are expressed.

File format (JSON)::

    {
      "name": "toy-4wide",
      "dispatch_width": 4,
      "ports": ["P0", "P1", "P2", "P3"],
      "default": {"uops": 1, "latency": 1, "ports_per_uop": [["P0","P1","P2","P3"]]},
      "instructions": {
        "ADD": {"uops": 1, "latency": 1, "ports_per_uop": [["P0","P1"]],
                "writes_flags": true}
      },
      "corrections": { "DIV": {"latency": 18} }
    }

``default`` and ``corrections`` are optional.  The shipped model
(``locus/data/machine_model.json``) is a small illustrative 4-wide machine
for demonstrations and tests; it does not claim to reproduce any real CPU.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Mapping

_MAX_PORTS = 16  # subset enumeration is 2^ports; 16 keeps it bounded
_MAX_UOPS_PER_INSTRUCTION = 256


class ModelError(Exception):
    """Malformed machine model definition."""


@dataclass(frozen=True)
class InstrSpec:
    """Execution characteristics of one mnemonic."""

    uops: int
    latency: int
    port_choices: tuple[frozenset[str], ...]
    writes_flags: bool = False

    def __post_init__(self) -> None:
        if self.uops < 1 or self.uops > _MAX_UOPS_PER_INSTRUCTION:
            raise ModelError(f"uops must be in 1..{_MAX_UOPS_PER_INSTRUCTION}")
        if self.latency < 0:
            raise ModelError("latency must be non-negative")
        if len(self.port_choices) != self.uops:
            raise ModelError("need exactly one port choice set per uop")
        if any(not c for c in self.port_choices):
            raise ModelError("each uop needs at least one admissible port")


@dataclass(frozen=True)
class MachineModel:
    name: str
    dispatch_width: int
    ports: tuple[str, ...]
    instruction_table: Mapping[str, InstrSpec]
    default_spec: InstrSpec
    correction_table: Mapping[str, int] = field(default_factory=dict)

    def __post_init__(self) -> None:
        if self.dispatch_width < 1:
            raise ModelError("dispatch_width must be >= 1")
        if not self.ports:
            raise ModelError("need at least one port")
        if len(set(self.ports)) != len(self.ports):
            raise ModelError("duplicate port names")
        if len(self.ports) > _MAX_PORTS:
            raise ModelError(f"at most {_MAX_PORTS} ports supported")
        port_set = set(self.ports)
        for mnemonic, spec in list(self.instruction_table.items()) + [("", self.default_spec)]:
            for choices in spec.port_choices:
                unknown = choices - port_set
                if unknown:
                    raise ModelError(
                        f"spec for {mnemonic or 'default'} uses undeclared ports {sorted(unknown)}"
                    )
        for mnemonic, latency in self.correction_table.items():
            if not isinstance(latency, int) or isinstance(latency, bool) or latency < 0:
                raise ModelError(f"correction for {mnemonic} must be a non-negative integer")

    def port_index(self) -> dict[str, int]:
        return {p: i for i, p in enumerate(self.ports)}

    def lookup(self, mnemonic: str) -> tuple[InstrSpec, bool]:
        """Resolve a mnemonic to its (possibly corrected) spec.

        Returns (spec, known); unknown mnemonics get the default spec, and
        corrections apply in both cases.
        """
        spec = self.instruction_table.get(mnemonic)
        known = spec is not None
        if spec is None:
            spec = self.default_spec
        corrected = self.correction_table.get(mnemonic)
        if corrected is not None and corrected != spec.latency:
            spec = InstrSpec(spec.uops, corrected, spec.port_choices, spec.writes_flags)
        return spec, known


def _parse_spec(obj: object, location: str) -> InstrSpec:
    if not isinstance(obj, dict):
        raise ModelError(f"{location}: expected an object")
    unknown = set(obj) - {"uops", "latency", "ports_per_uop", "writes_flags"}
    if unknown:
        raise ModelError(f"{location}: unknown keys {sorted(unknown)}")
    for key in ("uops", "latency", "ports_per_uop"):
        if key not in obj:
            raise ModelError(f"{location}: missing {key!r}")
    uops = obj["uops"]
    latency = obj["latency"]
    if not isinstance(uops, int) or isinstance(uops, bool):
        raise ModelError(f"{location}: uops must be an integer")
    if not isinstance(latency, int) or isinstance(latency, bool):
        raise ModelError(f"{location}: latency must be an integer")
    ppu = obj["ports_per_uop"]
    if not isinstance(ppu, list) or not all(isinstance(c, list) for c in ppu):
        raise ModelError(f"{location}: ports_per_uop must be a list of lists")
    choices = tuple(frozenset(c) for c in ppu)
    writes_flags = obj.get("writes_flags", False)
    if not isinstance(writes_flags, bool):
        raise ModelError(f"{location}: writes_flags must be a boolean")
    try:
        return InstrSpec(uops, latency, choices, writes_flags)
    except ModelError as exc:
        raise ModelError(f"{location}: {exc}") from None


def machine_model_from_dict(data: object) -> MachineModel:
    if not isinstance(data, dict):
        raise ModelError("model must be an object")
    unknown = set(data) - {"name", "dispatch_width", "ports", "default", "instructions", "corrections"}
    if unknown:
        raise ModelError(f"unknown keys {sorted(unknown)}")
    for key in ("name", "dispatch_width", "ports"):
        if key not in data:
            raise ModelError(f"missing {key!r}")
    name = data["name"]
    if not isinstance(name, str) or not name:
        raise ModelError("name must be a non-empty string")
    width = data["dispatch_width"]
    if not isinstance(width, int) or isinstance(width, bool):
        raise ModelError("dispatch_width must be an integer")
    ports_raw = data["ports"]
    if (
        not isinstance(ports_raw, list)
        or not ports_raw
        or not all(isinstance(p, str) and p for p in ports_raw)
    ):
        raise ModelError("ports must be a non-empty list of names")
    ports = tuple(ports_raw)
    if "default" in data and data["default"] is not None:
        default = _parse_spec(data["default"], "default")
    else:
        default = InstrSpec(1, 1, (frozenset(ports),))
    table: dict[str, InstrSpec] = {}
    for mnemonic, obj in (data.get("instructions") or {}).items():
        if mnemonic != mnemonic.upper():
            raise ModelError(f"mnemonic {mnemonic!r} must be uppercase")
        table[mnemonic] = _parse_spec(obj, f"instructions[{mnemonic}]")
    corrections: dict[str, int] = {}
    for mnemonic, obj in (data.get("corrections") or {}).items():
        if not isinstance(obj, dict) or set(obj) != {"latency"}:
            raise ModelError(f"corrections[{mnemonic}] must be {{'latency': int}}")
        corrections[mnemonic] = obj["latency"]
    return MachineModel(name, width, ports, table, default, corrections)


def load_machine_model(path: str | Path) -> MachineModel:
    with open(path, "r", encoding="utf-8") as fh:
        try:
            data = json.load(fh)
        except json.JSONDecodeError as exc:
            raise ModelError(f"line {exc.lineno}: {exc.msg}") from None
    return machine_model_from_dict(data)


def default_machine_model() -> MachineModel:
    """The shipped illustrative model (locus/data/machine_model.json)."""
    from importlib.resources import files

    data = json.loads(files("locus.data").joinpath("machine_model.json").read_text())
    return machine_model_from_dict(data)
