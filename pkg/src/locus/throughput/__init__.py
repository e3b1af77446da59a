"""Built-in machine-code throughput model.

Estimates steady-state cycles-per-iteration for basic blocks against a
small abstract machine (dispatch width, execution ports, per-instruction
uop/latency/port specs).  The numeric core lives in twin kernel modules -
a compiled Cython extension and a pure-Python fallback with identical,
exactly-equal semantics - selected at import by :mod:`._dispatch`.
"""

from locus.throughput._dispatch import KERNEL_IMPLEMENTATION
from locus.throughput.model import (
    InstrSpec,
    MachineModel,
    ModelError,
    default_machine_model,
    load_machine_model,
    machine_model_from_dict,
)
from locus.throughput.analyzer import (
    AnalysisMode,
    BlockThroughput,
    Bottleneck,
    analyze_block,
    analyze_pair,
)

__all__ = [
    "AnalysisMode",
    "BlockThroughput",
    "Bottleneck",
    "InstrSpec",
    "KERNEL_IMPLEMENTATION",
    "MachineModel",
    "ModelError",
    "analyze_block",
    "analyze_pair",
    "default_machine_model",
    "load_machine_model",
    "machine_model_from_dict",
]
