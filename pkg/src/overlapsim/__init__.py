"""Dataflow-DAG optimizer and discrete-event simulator for decentralized
gradient aggregation: activation ordering, small-parameter batching, transfer
placement across backprop and the next forward pass, and depth-adaptive
collectives, with iteration-time/overlap/utilization metrics."""

from .batching import BatchGroup, BatchPlan, InfeasibleGroup, group_boundaries, plan_batches
from .collective import (
    CollectiveSpec,
    Pattern,
    ReduceModel,
    StagePlan,
    UnsupportedWorkerCount,
    adaptive_depth,
    collective_time,
    stage_plan,
)
from .costmodel import (
    DegenerateInput,
    EmptyProfile,
    Measurement,
    NetworkModel,
    OpProfile,
    batching_threshold,
    estimate_op_times,
    fit_network_model,
    p2p_time,
)
from .dag import (
    DataflowDag,
    NotTopological,
    Op,
    OpKind,
    Parameter,
    Phase,
    Schedule,
    TransferBoundary,
    ancestors,
    serial_schedule,
    transfer_boundaries,
    validate_dag,
)
from .generator import gen_dag
from .ordering import (
    ActivationOrder,
    ControlEdge,
    CycleIntroduced,
    best_order,
    enforce_order,
    verify_enforcement,
)
from .pipeline import PipelineArtifacts, run_pipeline, run_simulation
from .sim import (
    DeadlockDetected,
    DepthPolicy,
    Metrics,
    Scenario,
    SimConfig,
    compare_scenarios,
    simulate_iteration,
    utilization,
)
from .transfer import (
    PlacedTransfer,
    PlacementKind,
    TransferSchedule,
    TransferWindow,
    overlap_stats,
    schedule_transfers,
)

__version__ = "0.1.0"
