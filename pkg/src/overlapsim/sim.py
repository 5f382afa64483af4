"""Deterministic single-iteration simulation and its metrics.

For one iteration: C is total compute time, N total network busy time, and
alpha the fraction of network time hidden under compute, normalized by
min(N, C). They tie together as

    rho = N / C
    U   = 1 / (1 + rho - alpha * min(rho, 1))

and because every non-overlapped network microsecond extends the iteration,
the measured iteration time is T = C + N - overlap, which makes C / T equal
the utilization formula identically. Workers are homogeneous and execute the
same enforced schedule, so one worker's timeline stands for all and the
all-workers-ready barrier before each aggregation holds by construction; a
skew knob scales durations by the slowest worker's multiplier instead of
simulating workers separately.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace

from .batching import BatchPlan
from .collective import Pattern, ReduceModel
from .costmodel import NetworkModel, round_us
from .dag import DataflowDag, Schedule
from .transfer import PlacementKind, TransferSchedule, placement_overlap_us

_REL_TOL = 1e-9


class DeadlockDetected(RuntimeError):
    """Input plans are inconsistent: work remains that can never run."""


@dataclass(frozen=True)
class DepthPolicy:
    adaptive: bool = True
    fixed: int = 1

    @classmethod
    def parse(cls, text: str) -> "DepthPolicy":
        if text == "adaptive":
            return cls(adaptive=True)
        if text.startswith("fixed:"):
            return cls(adaptive=False, fixed=int(text.split(":", 1)[1]))
        raise ValueError(f"bad depth policy {text!r}; use 'adaptive' or 'fixed:k'")

    def __str__(self) -> str:
        return "adaptive" if self.adaptive else f"fixed:{self.fixed}"


@dataclass(frozen=True)
class SimConfig:
    workers: int
    network: NetworkModel
    reduce: ReduceModel
    pattern: Pattern = Pattern.SHUFFLE
    depth_policy: DepthPolicy = DepthPolicy()
    enforce_order: bool = True
    batching: bool = True
    fp_scheduling: bool = True
    worker_skew: tuple[float, ...] | None = None

    def __post_init__(self):
        if self.workers < 2:
            raise ValueError("need at least 2 workers")
        if self.worker_skew is not None and len(self.worker_skew) != self.workers:
            raise ValueError("worker_skew must list one multiplier per worker")


@dataclass(frozen=True)
class Metrics:
    T_us: float
    C_us: float
    N_us: float
    alpha: float
    rho: float
    U: float

    def to_json(self) -> dict:
        return {
            "T_us": round_us(self.T_us),
            "C_us": round_us(self.C_us),
            "N_us": round_us(self.N_us),
            "alpha": self.alpha,
            "rho": self.rho,
            "U": self.U,
        }


def utilization(rho: float, alpha: float) -> float:
    """U = 1 / (1 + rho - alpha * min(rho, 1))."""
    if rho < 0:
        raise ValueError("rho must be non-negative")
    if not 0.0 <= alpha <= 1.0:
        raise ValueError("alpha must lie in [0, 1]")
    return 1.0 / (1.0 + rho - alpha * min(rho, 1.0))


@dataclass
class EventLog:
    events: list[dict] = field(default_factory=list)

    def record(self, time_us: float, resource: str, event: str, subject: str) -> None:
        self.events.append(
            {
                "time_us": round_us(time_us),
                "worker": 0,
                "resource": resource,
                "event": event,
                "subject": subject,
            }
        )


def simulate_iteration(
    dag: DataflowDag,
    schedule: Schedule,
    batch_plan: BatchPlan,
    transfer_schedule: TransferSchedule,
    config: SimConfig,
    event_log: EventLog | None = None,
) -> Metrics:
    """Measure Metrics from the planned timelines.

    Compute ops run serially per `schedule`; each group occupies the network
    for its placed interval. Raises DeadlockDetected when the plans are
    inconsistent: a group without a placement, a transfer starting before its
    group is ready on every worker, or two transfers sharing the network.
    """
    compute_end = schedule.makespan_us()
    c_total = float(dag.compute_total_us())

    placed = {t.group_id: t for t in transfer_schedule.transfers}
    ready = {g.group_id: g.ready_time_us for g in batch_plan.groups}
    if set(placed) != set(ready):
        raise DeadlockDetected(
            f"groups without placements or placements without groups: "
            f"{sorted(set(placed) ^ set(ready))}"
        )
    for gid, transfer in sorted(placed.items()):
        if transfer.placement is not PlacementKind.OVERFLOW_BEFORE_FP and (
            transfer.begin_us < ready[gid] - 1e-9
        ):
            raise DeadlockDetected(
                f"group {gid!r} transfer begins at {transfer.begin_us} before "
                f"ready time {ready[gid]}"
            )
    spans = sorted((t.begin_us, t.finish_us, t.group_id) for t in transfer_schedule.transfers)
    for (_, prev_end, prev_id), (cur_start, _, cur_id) in zip(spans, spans[1:]):
        if cur_start < prev_end - 1e-9:
            raise DeadlockDetected(f"transfers {prev_id!r} and {cur_id!r} overlap on the network")

    n_total = sum(t.duration_us for t in transfer_schedule.transfers)
    overlap = sum(placement_overlap_us(t, compute_end) for t in transfer_schedule.transfers)
    t_total = c_total + n_total - overlap

    if n_total == 0:
        alpha, rho = 1.0, 0.0
    else:
        alpha = overlap / min(n_total, c_total)
        rho = n_total / c_total
    u_measured = c_total / t_total
    u_formula = utilization(rho, alpha)
    if abs(u_measured - u_formula) > _REL_TOL * max(abs(u_measured), abs(u_formula)):
        raise AssertionError(
            f"utilization accounting diverged: measured {u_measured!r} vs formula {u_formula!r}"
        )

    if event_log is not None:
        for oid in schedule.order:
            event_log.record(schedule.start_us[oid], "compute", "op_start", oid)
            event_log.record(schedule.end_us[oid], "compute", "op_end", oid)
        for t in sorted(transfer_schedule.transfers, key=lambda t: (t.begin_us, t.group_id)):
            event_log.record(t.begin_us, "network", "transfer_start", t.group_id)
            event_log.record(t.finish_us, "network", "transfer_end", t.group_id)
        event_log.events.sort(key=lambda e: (e["time_us"], e["resource"], e["event"], e["subject"]))

    return Metrics(T_us=t_total, C_us=c_total, N_us=n_total, alpha=alpha, rho=rho, U=u_measured)


@dataclass(frozen=True)
class Scenario:
    """One ablation point: which optimizations are active."""

    name: str
    enforce_order: bool
    batching: bool
    fp_scheduling: bool
    depth_policy: DepthPolicy


BASELINE = Scenario(
    name="baseline",
    enforce_order=False,
    batching=False,
    fp_scheduling=False,
    depth_policy=DepthPolicy(adaptive=False, fixed=1),
)

#: cumulative ablation: each row switches on one more optimization
DEFAULT_SCENARIOS = (
    Scenario("+order-enforcement", True, False, False, DepthPolicy(adaptive=False, fixed=1)),
    Scenario("+batching", True, True, False, DepthPolicy(adaptive=False, fixed=1)),
    Scenario("+fp-scheduling", True, True, True, DepthPolicy(adaptive=False, fixed=1)),
    Scenario("+adaptive-depth", True, True, True, DepthPolicy(adaptive=True)),
)


def compare_scenarios(
    dag: DataflowDag,
    config: SimConfig,
    scenarios: tuple[Scenario, ...] = DEFAULT_SCENARIOS,
) -> list[tuple[str, Metrics]]:
    """Baseline row (worst order, unbatched, backprop-only FIFO, depth 1)
    followed by one row per scenario, all from the same graph and models."""
    from .pipeline import run_simulation

    rows: list[tuple[str, Metrics]] = []
    for scenario in (BASELINE,) + tuple(scenarios):
        scenario_config = replace(
            config,
            enforce_order=scenario.enforce_order,
            batching=scenario.batching,
            fp_scheduling=scenario.fp_scheduling,
            depth_policy=scenario.depth_policy,
        )
        metrics, _ = run_simulation(dag, scenario_config)
        rows.append((scenario.name, metrics))
    return rows
