"""locus: upper-bound runtime estimation for HPC workloads.

The toolkit answers the question "how fast could this workload run if every
memory access were a cache hit?" by combining three ingredients:

* weighted control-flow graphs recorded per MPI rank and thread
  (:mod:`locus.profile`),
* per-basic-block cycles-per-iteration estimates from a built-in machine-code
  throughput model and/or external analyzer tools, aggregated by median
  (:mod:`locus.throughput`, :mod:`locus.backends`),
* an exact weighted-cycle aggregation that turns the annotated graphs into a
  runtime estimate and an upper-bound speedup (:mod:`locus.cfg`,
  :mod:`locus.runtime`).

A separate module (:mod:`locus.arch`) holds the arithmetic for sizing
3D-stacked SRAM caches and the power budget of a many-core chip built from
them.

All cycle math is exact (integers and :class:`fractions.Fraction`); floats
only appear at display boundaries.
"""

from locus.profile import (
    BasicBlock,
    CfgEdge,
    Instruction,
    ThreadCfg,
    WorkloadProfile,
    edges_from_trace,
    parse_profile,
    serialize_profile,
)
from locus.cfg import WeightedCfgSummary, replay_estimate, sum_weighted_cycles, validate_cfg
from locus.runtime import RuntimeEstimate, SpeedupReport, estimate_runtime, sample_ranks, speedup

__version__ = "0.1.0"

__all__ = [
    "BasicBlock",
    "CfgEdge",
    "Instruction",
    "RuntimeEstimate",
    "SpeedupReport",
    "ThreadCfg",
    "WeightedCfgSummary",
    "WorkloadProfile",
    "edges_from_trace",
    "estimate_runtime",
    "parse_profile",
    "replay_estimate",
    "sample_ranks",
    "serialize_profile",
    "speedup",
    "sum_weighted_cycles",
    "validate_cfg",
]
