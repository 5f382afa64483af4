"""End-to-end composition: order, enforce, batch, place, simulate.

With order enforcement toggled off the pipeline deliberately pins the
*reverse* of the greedy order, modeling the adversarial activation order an
unenforced decentralized run can degenerate to; with it on, the greedy order
is pinned. Either way the realized schedule is a plain lexicographic list
schedule of the (enforced) graph, which the added control edges constrain to
activate parameters as ordered.
"""

from __future__ import annotations

from dataclasses import dataclass, replace

from .batching import BatchPlan, group_boundaries, plan_batches, singleton_plan
from .collective import (
    MAX_DEPTH,
    CollectiveSpec,
    adaptive_depth,
    collective_time,
)
from .costmodel import batching_threshold
from .dag import DataflowDag, Phase, Schedule, TransferBoundary, serial_schedule, transfer_boundaries
from .ordering import ActivationOrder, ControlEdge, best_order, enforce_order, order_with_costs
from .sim import EventLog, Metrics, SimConfig, simulate_iteration
from .transfer import TransferSchedule, TransferWindow, fifo_schedule, schedule_transfers


@dataclass(frozen=True)
class PipelineArtifacts:
    order: ActivationOrder
    enforced_dag: DataflowDag
    control_edges: tuple[ControlEdge, ...]
    schedule: Schedule
    boundaries: dict[str, TransferBoundary]
    threshold_bytes: int
    batch_plan: BatchPlan
    windows: dict[str, TransferWindow]
    depths: dict[str, int]
    collective_times: dict[str, float]
    bp_interval: tuple[float, float]
    fp_interval: tuple[float, float]
    transfer_schedule: TransferSchedule


def _apply_skew(dag: DataflowDag, config: SimConfig) -> DataflowDag:
    # Uniform per-worker multipliers make the slowest worker the barrier for
    # every aggregation, so scaling all durations by that multiplier is exact.
    if not config.worker_skew:
        return dag
    scale = max(config.worker_skew)
    if scale <= 0:
        raise ValueError("skew multipliers must be positive")
    if scale == 1.0:
        return dag
    ops = {oid: replace(op, duration_us=op.duration_us * scale) for oid, op in dag.ops.items()}
    return DataflowDag(ops=ops, params=dict(dag.params))


def run_pipeline(dag: DataflowDag, config: SimConfig) -> PipelineArtifacts:
    dag = _apply_skew(dag, config)
    greedy = best_order(dag)
    if config.enforce_order:
        order = greedy
    else:
        order = order_with_costs(dag, tuple(reversed(greedy.param_ids)))
    enforced, edges = enforce_order(dag, order)
    schedule = serial_schedule(enforced, sorted(enforced.ops))
    boundaries = transfer_boundaries(enforced, schedule)
    update_times = {pid: b.start_us for pid, b in boundaries.items()}
    sizes = {pid: p.size_bytes for pid, p in dag.params.items()}
    threshold = batching_threshold(config.network)

    if config.batching:
        plan = plan_batches(order, update_times, boundaries, sizes, threshold, config.network)
    else:
        plan = singleton_plan(order, update_times, boundaries, sizes, threshold)
    windows = group_boundaries(plan, boundaries)

    depths: dict[str, int] = {}
    times: dict[str, float] = {}
    for group in plan.groups:
        if config.depth_policy.adaptive:
            depth = adaptive_depth(group.total_bytes, threshold)
        else:
            depth = min(MAX_DEPTH, max(1, config.depth_policy.fixed))
        depths[group.group_id] = depth
        spec = CollectiveSpec(
            pattern=config.pattern,
            workers=config.workers,
            data_bytes=group.total_bytes,
            depth=depth,
        )
        times[group.group_id] = collective_time(spec, config.network, config.reduce)

    compute_end = schedule.makespan_us()
    fp_end = max(
        (schedule.end_us[oid] for oid in enforced.ops if enforced.ops[oid].phase is Phase.FORWARD),
        default=0.0,
    )
    bp_interval = (fp_end, compute_end)
    fp_interval = (compute_end, compute_end + fp_end)

    if config.fp_scheduling:
        tsched = schedule_transfers(plan, windows, bp_interval, fp_interval, times)
    else:
        tsched = fifo_schedule(plan, compute_end, times)

    return PipelineArtifacts(
        order=order,
        enforced_dag=enforced,
        control_edges=tuple(edges),
        schedule=schedule,
        boundaries=boundaries,
        threshold_bytes=threshold,
        batch_plan=plan,
        windows=windows,
        depths=depths,
        collective_times=times,
        bp_interval=bp_interval,
        fp_interval=fp_interval,
        transfer_schedule=tsched,
    )


def run_simulation(
    dag: DataflowDag, config: SimConfig, event_log: EventLog | None = None
) -> tuple[Metrics, PipelineArtifacts]:
    artifacts = run_pipeline(dag, config)
    metrics = simulate_iteration(
        _apply_skew(dag, config),
        artifacts.schedule,
        artifacts.batch_plan,
        artifacts.transfer_schedule,
        config,
        event_log=event_log,
    )
    return metrics, artifacts
