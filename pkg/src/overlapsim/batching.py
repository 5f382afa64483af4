"""Grouping of small parameters into batched transfers.

Parameters are visited in ascending update time against a simulated transfer
queue (empty and idle at iteration start). A parameter larger than the
threshold always becomes its own group and is enqueued immediately. A small
parameter is sent alone when the queue is predicted idle at its update time;
otherwise it joins the active batch. The active batch is flushed once its
size exceeds the threshold, when the queue drains before the next update
arrives, or when admitting the next parameter would leave the batch with an
empty feasible window. Queue occupancy is predicted with the network model.
"""

from __future__ import annotations

from dataclasses import dataclass

from .costmodel import NetworkModel, p2p_time
from .dag import TransferBoundary
from .ordering import ActivationOrder
from .transfer import TransferWindow


class InfeasibleGroup(ValueError):
    """A group's members have no common transfer window."""


@dataclass(frozen=True)
class BatchGroup:
    group_id: str
    param_ids: tuple[str, ...]
    total_bytes: int
    ready_time_us: float       # latest member update time
    earliest_read_us: float    # earliest member read time


@dataclass(frozen=True)
class BatchPlan:
    groups: tuple[BatchGroup, ...]
    threshold_bytes: int

    def to_json(self) -> dict:
        from .costmodel import round_us

        return {
            "threshold_bytes": self.threshold_bytes,
            "groups": [
                {
                    "group_id": g.group_id,
                    "param_ids": list(g.param_ids),
                    "total_bytes": g.total_bytes,
                    "ready_time_us": round_us(g.ready_time_us),
                    "earliest_read_us": round_us(g.earliest_read_us),
                }
                for g in self.groups
            ],
        }


def _window(params: list[str], boundaries: dict[str, TransferBoundary]) -> tuple[float, float]:
    start = max(boundaries[p].start_us for p in params)
    end = min(boundaries[p].end_us for p in params)
    return start, end


def plan_batches(
    order: ActivationOrder,
    update_times: dict[str, float],
    boundaries: dict[str, TransferBoundary],
    sizes: dict[str, int],
    threshold: int,
    model: NetworkModel,
) -> BatchPlan:
    position = {pid: i for i, pid in enumerate(order.param_ids)}
    if set(order.param_ids) - set(update_times) or set(order.param_ids) - set(sizes):
        raise ValueError("update_times and sizes must cover every ordered parameter")
    sequence = sorted(order.param_ids, key=lambda p: (update_times[p], position[p], p))

    groups: list[BatchGroup] = []
    queue_free_at = 0.0
    active: list[str] = []
    active_bytes = 0

    def emit(params: list[str], nbytes: int) -> BatchGroup:
        start, end = _window(params, boundaries)
        group = BatchGroup(
            group_id=f"g{len(groups):03d}",
            param_ids=tuple(params),
            total_bytes=nbytes,
            ready_time_us=start,
            earliest_read_us=end,
        )
        groups.append(group)
        return group

    def enqueue(group: BatchGroup) -> None:
        nonlocal queue_free_at
        begin = max(queue_free_at, group.ready_time_us)
        queue_free_at = begin + p2p_time(model, group.total_bytes)

    def flush_active() -> None:
        nonlocal active, active_bytes
        if active:
            enqueue(emit(active, active_bytes))
            active = []
            active_bytes = 0

    for pid in sequence:
        now = update_times[pid]
        if active and queue_free_at <= now:
            flush_active()  # queue drained before this update
        size = sizes[pid]
        if size > threshold:
            enqueue(emit([pid], size))
            continue
        if queue_free_at <= now and not active:
            enqueue(emit([pid], size))  # transfer immediately
            continue
        if active:
            start, end = _window(active + [pid], boundaries)
            if start > end:
                flush_active()  # would have an empty window together
        active.append(pid)
        active_bytes += size
        if active_bytes > threshold:
            flush_active()
    flush_active()
    return BatchPlan(groups=tuple(groups), threshold_bytes=threshold)


def singleton_plan(
    order: ActivationOrder,
    update_times: dict[str, float],
    boundaries: dict[str, TransferBoundary],
    sizes: dict[str, int],
    threshold: int,
) -> BatchPlan:
    """Unbatched plan: one group per parameter in update-time order."""
    position = {pid: i for i, pid in enumerate(order.param_ids)}
    sequence = sorted(order.param_ids, key=lambda p: (update_times[p], position[p], p))
    groups = []
    for i, pid in enumerate(sequence):
        b = boundaries[pid]
        groups.append(
            BatchGroup(
                group_id=f"g{i:03d}",
                param_ids=(pid,),
                total_bytes=sizes[pid],
                ready_time_us=b.start_us,
                earliest_read_us=b.end_us,
            )
        )
    return BatchPlan(groups=tuple(groups), threshold_bytes=threshold)


def group_boundaries(
    plan: BatchPlan, boundaries: dict[str, TransferBoundary]
) -> dict[str, TransferWindow]:
    """Feasible window per group: latest member start to earliest member end."""
    out: dict[str, TransferWindow] = {}
    for group in plan.groups:
        start, end = _window(list(group.param_ids), boundaries)
        if start > end:
            raise InfeasibleGroup(
                f"group {group.group_id!r} window is empty ({start} > {end})"
            )
        out[group.group_id] = TransferWindow(start_us=start, end_us=end)
    return out
