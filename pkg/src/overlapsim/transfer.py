"""Placement of group transfers on the single network resource.

The iteration timeline runs from 0 to L (compute makespan): the forward pass
occupies [0, fp_end] and backprop [fp_end, L]. Group windows extend past L
because the reads they must beat happen in the next iteration's forward pass,
so that region of the axis, [L, L + fp_len], is network room overlapping
next-iteration compute.

Greedy 2D bin packing: groups sorted by descending size (ties by id) are
first-fit packed into backprop idle time within their window, then into the
forward-pass region within their window. Leftovers go beyond compute: either
spilling past the end of backprop (reclaiming any idle network time first) or
stacked before the forward pass starts; whichever adds less iteration time
wins, ties to the backprop side. Every microsecond of network time not
overlapped by compute extends the iteration.
"""

from __future__ import annotations

import bisect
from dataclasses import dataclass
from enum import Enum
from typing import TYPE_CHECKING

if TYPE_CHECKING:
    from .batching import BatchPlan


class PlacementKind(str, Enum):
    BP_OVERLAP = "bp_overlap"
    FP_OVERLAP = "fp_overlap"
    OVERFLOW_AFTER_BP = "overflow_after_bp"
    OVERFLOW_BEFORE_FP = "overflow_before_fp"


@dataclass(frozen=True)
class TransferWindow:
    start_us: float
    end_us: float


@dataclass(frozen=True)
class PlacedTransfer:
    group_id: str
    begin_us: float
    finish_us: float
    placement: PlacementKind

    @property
    def duration_us(self) -> float:
        return self.finish_us - self.begin_us


@dataclass(frozen=True)
class TransferSchedule:
    transfers: tuple[PlacedTransfer, ...]
    added_iteration_time_us: float

    def to_json(self) -> dict:
        from .costmodel import round_us

        return {
            "added_iteration_time_us": round_us(self.added_iteration_time_us),
            "transfers": [
                {
                    "group_id": t.group_id,
                    "begin_us": round_us(t.begin_us),
                    "finish_us": round_us(t.finish_us),
                    "placement": t.placement.value,
                }
                for t in self.transfers
            ],
        }


class _BusyList:
    """Sorted, non-overlapping busy intervals on one resource."""

    def __init__(self):
        self.intervals: list[tuple[float, float]] = []

    def first_fit(self, earliest: float, latest: float, duration: float) -> float | None:
        """Earliest start in [earliest, latest - duration] clear of any busy
        interval, or None."""
        if duration <= 0:
            return earliest if earliest <= latest else None
        t = earliest
        for s, e in self.intervals:
            if e <= t:
                continue
            if s >= t + duration:
                break
            t = max(t, e)
        if t + duration <= latest:
            return t
        return None

    def first_fit_unbounded(self, earliest: float, duration: float) -> float:
        """Earliest start >= earliest with no collision; always succeeds."""
        t = earliest
        for s, e in self.intervals:
            if e <= t:
                continue
            if s >= t + duration:
                break
            t = max(t, e)
        return t

    def add(self, start: float, end: float) -> None:
        bisect.insort(self.intervals, (start, end))


def placement_overlap_us(transfer: PlacedTransfer, compute_end_us: float) -> float:
    """Network time of one placement that coincides with busy compute.

    Forward-pass placements sit fully inside next-iteration compute. Backprop
    spills only count their portion before compute ends; head-of-iteration
    placements never overlap.
    """
    if transfer.placement in (PlacementKind.BP_OVERLAP, PlacementKind.FP_OVERLAP):
        return transfer.duration_us
    if transfer.placement is PlacementKind.OVERFLOW_AFTER_BP:
        return max(0.0, min(transfer.finish_us, compute_end_us) - transfer.begin_us)
    return 0.0


def schedule_transfers(
    plan: BatchPlan,
    windows: dict[str, TransferWindow],
    bp_interval: tuple[float, float],
    fp_interval: tuple[float, float],
    collective_times: dict[str, float],
) -> TransferSchedule:
    bp_start, compute_end = bp_interval
    fp_start, fp_end = fp_interval
    if fp_start != compute_end:
        raise ValueError("forward-pass room must start where compute ends")

    groups = sorted(plan.groups, key=lambda g: (-g.total_bytes, g.group_id))
    busy = _BusyList()
    placed: list[PlacedTransfer] = []
    head_ext = 0.0

    for group in groups:
        window = windows[group.group_id]
        duration = collective_times[group.group_id]
        if duration <= 0:
            raise ValueError(f"non-positive collective time for {group.group_id!r}")

        start = busy.first_fit(
            max(window.start_us, bp_start), min(window.end_us, compute_end), duration
        )
        if start is not None:
            kind = PlacementKind.BP_OVERLAP
        else:
            start = busy.first_fit(
                max(window.start_us, fp_start), min(window.end_us, fp_end), duration
            )
            if start is not None:
                kind = PlacementKind.FP_OVERLAP
        if start is not None:
            busy.add(start, start + duration)
            placed.append(PlacedTransfer(group.group_id, start, start + duration, kind))
            continue

        # Stage 3: beyond compute. The backprop-side candidate reuses idle
        # network time inside the window's start but ignores its end; the
        # forward-pass-side candidate stacks before the iteration head.
        tail_start = busy.first_fit_unbounded(max(window.start_us, bp_start), duration)
        tail_delta = (tail_start + duration) - max(tail_start, compute_end)
        tail_delta = max(0.0, min(duration, tail_delta))
        head_delta = duration
        if tail_delta <= head_delta:
            busy.add(tail_start, tail_start + duration)
            placed.append(
                PlacedTransfer(
                    group.group_id,
                    tail_start,
                    tail_start + duration,
                    PlacementKind.OVERFLOW_AFTER_BP,
                )
            )
        else:  # pragma: no cover - tail never loses under this cost model
            begin = -head_ext - duration
            head_ext += duration
            placed.append(
                PlacedTransfer(
                    group.group_id, begin, begin + duration, PlacementKind.OVERFLOW_BEFORE_FP
                )
            )

    added = sum(t.duration_us - placement_overlap_us(t, compute_end) for t in placed)
    placed.sort(key=lambda t: (t.begin_us, t.group_id))
    return TransferSchedule(transfers=tuple(placed), added_iteration_time_us=added)


def fifo_schedule(
    plan: BatchPlan,
    compute_end_us: float,
    collective_times: dict[str, float],
) -> TransferSchedule:
    """Baseline placement: transfers start when ready, one after another,
    backprop side only. Anything past the end of compute extends the
    iteration."""
    groups = sorted(plan.groups, key=lambda g: (g.ready_time_us, g.group_id))
    placed: list[PlacedTransfer] = []
    net_free = 0.0
    for group in groups:
        duration = collective_times[group.group_id]
        begin = max(net_free, group.ready_time_us)
        finish = begin + duration
        kind = (
            PlacementKind.BP_OVERLAP if finish <= compute_end_us else PlacementKind.OVERFLOW_AFTER_BP
        )
        placed.append(PlacedTransfer(group.group_id, begin, finish, kind))
        net_free = finish
    added = sum(t.duration_us - placement_overlap_us(t, compute_end_us) for t in placed)
    return TransferSchedule(transfers=tuple(placed), added_iteration_time_us=added)


def overlap_stats(
    schedule: TransferSchedule,
    bp_interval: tuple[float, float],
    fp_interval: tuple[float, float],
    compute_total_us: float,
) -> tuple[float, float, float]:
    """(alpha, rho, network_total_us) for one placed schedule.

    N is total network busy time, rho = N / C, and alpha is the overlapped
    share normalized by min(N, C). An empty schedule has rho = 0 and, by
    convention, alpha = 1 (nothing needed hiding).
    """
    compute_end = bp_interval[1]
    n_total = sum(t.duration_us for t in schedule.transfers)
    if n_total == 0:
        return 1.0, 0.0, 0.0
    if compute_total_us <= 0:
        raise ValueError("compute total must be positive when transfers exist")
    overlap = sum(placement_overlap_us(t, compute_end) for t in schedule.transfers)
    alpha = overlap / min(n_total, compute_total_us)
    rho = n_total / compute_total_us
    return alpha, rho, n_total
