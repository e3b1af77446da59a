"""Kernel implementation selection.

At import time the compiled Cython kernels are preferred; if the extension
is unavailable (not built, wrong platform) the pure-Python twin takes over
transparently.  Setting ``LOCUS_PURE_PYTHON=1`` forces the fallback, which
the parity tests and the benchmark use to compare both implementations in
one process.

The compiled kernels do exact signed 64-bit arithmetic, so
``select_kernels`` routes any block outside a conservative size envelope
to the pure-Python twin, whose integers are unbounded.  Results are
identical either way; only speed differs.
"""

from __future__ import annotations

import os

from locus.throughput import _kernels_py

if os.environ.get("LOCUS_PURE_PYTHON"):
    kernels = _kernels_py
else:
    try:
        from locus.throughput import _kernels as kernels  # type: ignore[no-redef]
    except ImportError:
        kernels = _kernels_py

KERNEL_IMPLEMENTATION: str = kernels.IMPLEMENTATION

#: Envelope for the compiled path; see the 64-bit overflow analysis in the
#: kernel docstrings.  2^12 instructions x 2^20 latency keeps every
#: intermediate below 2^58.
MAX_COMPILED_INSTRUCTIONS = 4096
MAX_COMPILED_UOPS = 1 << 20
MAX_COMPILED_LATENCY = (1 << 20) - 1


def select_kernels(n_instructions: int, n_uops: int, max_latency: int):
    """Pick the kernel module for a block of the given dimensions."""
    if kernels is _kernels_py:
        return kernels
    if (
        n_instructions > MAX_COMPILED_INSTRUCTIONS
        or n_uops > MAX_COMPILED_UOPS
        or max_latency > MAX_COMPILED_LATENCY
    ):
        return _kernels_py
    return kernels
