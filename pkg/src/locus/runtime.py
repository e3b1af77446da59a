"""Whole-workload runtime estimation, rank sampling and speedup reporting.

The runtime model assumes ranks and threads never share computational
resources, so the application's runtime is the slowest thread of the
slowest rank:

    t_app = max over ranks, max over threads of (total cycles / frequency)

where each thread's total cycles is the exact weighted CFG sum from
:func:`locus.cfg.sum_weighted_cycles`.  Everything is computed in exact
rationals; callers convert to float only for display.
"""

from __future__ import annotations

import random
from dataclasses import dataclass
from enum import Enum
from fractions import Fraction
from typing import Mapping

from locus.cfg import sum_weighted_cycles
from locus.profile import WorkloadProfile


class NoAnnotatedEdgesError(Exception):
    """Refusing to report a zero runtime estimate.

    Raised when no taken edge carries a cycles-per-iteration annotation
    (or every annotated contribution sums to zero): the estimate would be
    0 s, which is a missing-data artifact, not a prediction.
    """


class NonPositiveInputError(ValueError):
    """Speedup inputs must be strictly positive durations."""


class SpeedupClass(Enum):
    SLOWDOWN = "slowdown"       # speedup < 1
    MODEST = "modest"           # 1 <= speedup < 2
    SIGNIFICANT = "significant"  # speedup >= 2


@dataclass(frozen=True)
class RuntimeEstimate:
    """Estimated lower-bound runtime of a workload.

    ``per_rank_per_thread_cycles`` holds the exact per-thread totals;
    the critical pair attains the maximum (ties broken toward the lowest
    rank id, then the lowest thread id).  ``unannotated_edges`` counts
    taken edges that contributed nothing for lack of an annotation.
    """

    t_app_s: Fraction
    critical_rank: int
    critical_thread: int
    per_rank_per_thread_cycles: Mapping[int, Mapping[int, Fraction]]
    frequency_hz: Fraction
    unannotated_edges: int


@dataclass(frozen=True)
class SpeedupReport:
    workload: str
    measured_s: Fraction
    estimated_s: Fraction
    speedup: Fraction
    classification: SpeedupClass


def estimate_runtime(profile: WorkloadProfile) -> RuntimeEstimate:
    """Exact runtime estimate: slowest thread of the slowest rank.

    Raises :class:`NoAnnotatedEdgesError` when the result would be zero
    seconds, which happens exactly when no taken edge carries a positive
    weighted contribution.
    """
    per_rank: dict[int, dict[int, Fraction]] = {}
    unannotated = 0
    annotated_taken = 0
    best: Fraction | None = None
    critical = (0, 0)
    for rank_id in sorted(profile.ranks):
        threads = profile.ranks[rank_id]
        per_thread: dict[int, Fraction] = {}
        for thread_id in sorted(threads):
            summary = sum_weighted_cycles(threads[thread_id])
            per_thread[thread_id] = summary.total_cycles
            unannotated += summary.unannotated_edges
            for e in threads[thread_id].edges:
                if e.calls > 0 and e.cpiter is not None:
                    annotated_taken += 1
            if best is None or summary.total_cycles > best:
                best = summary.total_cycles
                critical = (rank_id, thread_id)
        per_rank[rank_id] = per_thread
    assert best is not None  # WorkloadProfile guarantees >= 1 rank / thread
    if annotated_taken == 0 or best == 0:
        raise NoAnnotatedEdgesError(
            "estimate would be 0 s: no taken edge carries a cycle annotation"
        )
    return RuntimeEstimate(
        t_app_s=best / profile.frequency_hz,
        critical_rank=critical[0],
        critical_thread=critical[1],
        per_rank_per_thread_cycles=per_rank,
        frequency_hz=profile.frequency_hz,
        unannotated_edges=unannotated,
    )


def sample_ranks(total_ranks: int, max_extra: int = 9, seed: int = 0) -> set[int]:
    """Rank 0 plus up to ``max_extra`` distinct others, seeded and reproducible.

    The extras are drawn uniformly without replacement from
    ``1..total_ranks-1``.
    """
    if total_ranks < 1:
        raise ValueError("total_ranks must be >= 1")
    if max_extra < 0:
        raise ValueError("max_extra must be >= 0")
    rng = random.Random(seed)
    extras = rng.sample(range(1, total_ranks), min(max_extra, total_ranks - 1))
    return {0, *extras}


def select_ranks(profile: WorkloadProfile, max_extra: int = 9,
                 seed: int = 0) -> tuple[WorkloadProfile, list[int]]:
    """Restrict a profile to a sampled subset of its ranks.

    Rank ids need not be contiguous: sampled positions index into the
    sorted rank-id list, with position 0 always kept.  Returns the reduced
    profile and the sorted kept ids.  Profiles small enough (at most
    ``1 + max_extra`` ranks) come back unchanged.
    """
    rank_ids = sorted(profile.ranks)
    if len(rank_ids) <= 1 + max_extra:
        return profile, rank_ids
    positions = sample_ranks(len(rank_ids), max_extra=max_extra, seed=seed)
    kept = sorted(rank_ids[p] for p in positions)
    reduced = WorkloadProfile(
        workload_name=profile.workload_name,
        frequency_hz=profile.frequency_hz,
        ranks={r: profile.ranks[r] for r in kept},
        measured_runtime_s=profile.measured_runtime_s,
    )
    return reduced, kept


def speedup(
    measured_s: Fraction | int,
    estimated_s: Fraction | int,
    *,
    workload: str = "",
    modest_at: Fraction | int = 1,
    significant_at: Fraction | int = 2,
) -> SpeedupReport:
    """Upper-bound speedup = measured / estimated, with a coarse label.

    Labels: below ``modest_at`` is a slowdown, at least ``significant_at``
    is significant, in between is modest.  Both inputs must be positive.
    """
    measured = Fraction(measured_s)
    estimated = Fraction(estimated_s)
    if measured <= 0 or estimated <= 0:
        raise NonPositiveInputError("measured and estimated runtimes must be > 0")
    ratio = measured / estimated
    if ratio < modest_at:
        label = SpeedupClass.SLOWDOWN
    elif ratio < significant_at:
        label = SpeedupClass.MODEST
    else:
        label = SpeedupClass.SIGNIFICANT
    return SpeedupReport(
        workload=workload,
        measured_s=measured,
        estimated_s=estimated,
        speedup=ratio,
        classification=label,
    )
