"""Training-iteration dataflow graphs.

A graph holds compute ops plus zero-duration parameter markers: one update
marker per parameter (fed by the compute that produces its gradient) and one
or more read markers (consumed by next-iteration forward-pass computes).
This module validates graphs, list-schedules them on a single compute
resource, and derives per-parameter transfer windows from a schedule.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from enum import Enum
from pathlib import Path


class OpKind(str, Enum):
    COMPUTE = "compute"
    PARAM_UPDATE = "param_update"
    PARAM_READ = "param_read"


class Phase(str, Enum):
    FORWARD = "forward"
    BACKPROP = "backprop"


class NotTopological(ValueError):
    """A priority list could not be realized: some op never became ready."""


@dataclass(frozen=True)
class Op:
    id: str
    kind: OpKind
    duration_us: int
    deps: frozenset[str] = frozenset()
    phase: Phase = Phase.BACKPROP
    param: str | None = None


@dataclass(frozen=True)
class Parameter:
    id: str
    size_bytes: int


@dataclass(frozen=True)
class DataflowDag:
    """Immutable op/parameter maps. All iteration is by sorted id."""

    ops: dict[str, Op]
    params: dict[str, Parameter]

    def op_ids(self) -> list[str]:
        return sorted(self.ops)

    def param_ids(self) -> list[str]:
        return sorted(self.params)

    def update_op(self, param_id: str) -> Op:
        for oid in self.op_ids():
            op = self.ops[oid]
            if op.kind is OpKind.PARAM_UPDATE and op.param == param_id:
                return op
        raise KeyError(f"no update op for parameter {param_id!r}")

    def read_ops(self, param_id: str) -> list[Op]:
        return [
            self.ops[oid]
            for oid in self.op_ids()
            if self.ops[oid].kind is OpKind.PARAM_READ and self.ops[oid].param == param_id
        ]

    def consumers(self) -> dict[str, list[str]]:
        """Map op id -> sorted ids of ops that depend on it."""
        out: dict[str, list[str]] = {oid: [] for oid in self.ops}
        for oid in self.op_ids():
            for dep in sorted(self.ops[oid].deps):
                if dep in out:
                    out[dep].append(oid)
        return out

    def compute_total_us(self) -> int:
        return sum(op.duration_us for op in self.ops.values())


@dataclass(frozen=True)
class Schedule:
    """Serial execution of every op on one compute resource."""

    order: tuple[str, ...]
    start_us: dict[str, float]
    end_us: dict[str, float]

    def makespan_us(self) -> float:
        return max(self.end_us.values(), default=0.0)


@dataclass(frozen=True)
class TransferBoundary:
    """Feasible aggregation window of one parameter under a schedule.

    start_us is when the gradient is available (completion of the update
    marker's producers); end_us is when the earliest next-iteration reader
    needs it, expressed as iteration_length + reader start so both ends live
    on one axis.
    """

    param_id: str
    start_us: float
    end_us: float


@dataclass
class ValidationReport:
    errors: list[str] = field(default_factory=list)
    warnings: list[str] = field(default_factory=list)

    @property
    def ok(self) -> bool:
        return not self.errors


def validate_dag(dag: DataflowDag) -> ValidationReport:
    """Structural checks. An empty error list means the graph is usable."""
    report = ValidationReport()
    for oid in dag.op_ids():
        op = dag.ops[oid]
        for dep in sorted(op.deps):
            if dep not in dag.ops:
                report.errors.append(f"dangling dep: op {oid!r} depends on unknown op {dep!r}")
        if op.kind in (OpKind.PARAM_UPDATE, OpKind.PARAM_READ):
            if op.param is None or op.param not in dag.params:
                report.errors.append(f"unknown parameter: op {oid!r} references {op.param!r}")
            if op.duration_us != 0:
                report.errors.append(f"marker op {oid!r} must have duration 0")
            if op.kind is OpKind.PARAM_UPDATE and op.phase is Phase.FORWARD:
                report.warnings.append(f"update op {oid!r} is marked forward-pass")
        if op.duration_us < 0:
            report.errors.append(f"negative duration on op {oid!r}")

    for pid in dag.param_ids():
        updates = [
            oid
            for oid in dag.op_ids()
            if dag.ops[oid].kind is OpKind.PARAM_UPDATE and dag.ops[oid].param == pid
        ]
        reads = [
            oid
            for oid in dag.op_ids()
            if dag.ops[oid].kind is OpKind.PARAM_READ and dag.ops[oid].param == pid
        ]
        if len(updates) == 0:
            report.errors.append(f"parameter {pid!r} has no update op")
        elif len(updates) > 1:
            report.errors.append(f"duplicate update for parameter {pid!r}: {updates}")
        if not reads:
            report.errors.append(f"parameter {pid!r} has no read op")
        if dag.params[pid].size_bytes <= 0:
            report.errors.append(f"parameter {pid!r} has non-positive size")

    if _has_cycle(dag):
        report.errors.append("cycle in dependency relation")
    return report


def _has_cycle(dag: DataflowDag) -> bool:
    indeg = {oid: 0 for oid in dag.ops}
    for op in dag.ops.values():
        for dep in op.deps:
            if dep in dag.ops:
                indeg[op.id] += 1
    ready = [oid for oid in dag.op_ids() if indeg[oid] == 0]
    seen = 0
    consumers = dag.consumers()
    while ready:
        oid = ready.pop()
        seen += 1
        for nxt in consumers[oid]:
            indeg[nxt] -= 1
            if indeg[nxt] == 0:
                ready.append(nxt)
    return seen != len(dag.ops)


def serial_schedule(dag: DataflowDag, priority: list[str]) -> Schedule:
    """Greedy list scheduling on one compute resource.

    Repeatedly runs the ready op (all deps finished) that appears earliest in
    `priority`; an op listed before its dependencies simply waits until it
    becomes ready. Raises NotTopological when no op is ready but work remains.
    """
    if sorted(priority) != dag.op_ids():
        raise ValueError("priority must be a permutation of the op ids")
    rank = {oid: i for i, oid in enumerate(priority)}
    remaining_deps = {oid: {d for d in dag.ops[oid].deps if d in dag.ops} for oid in dag.ops}
    consumers = dag.consumers()
    ready = {oid for oid, deps in remaining_deps.items() if not deps}

    order: list[str] = []
    start: dict[str, float] = {}
    end: dict[str, float] = {}
    t = 0.0
    while len(order) < len(dag.ops):
        if not ready:
            raise NotTopological("no ready op but work remains (cycle)")
        oid = min(ready, key=lambda o: rank[o])
        ready.discard(oid)
        start[oid] = t
        t += dag.ops[oid].duration_us
        end[oid] = t
        order.append(oid)
        for nxt in consumers[oid]:
            remaining_deps[nxt].discard(oid)
            if not remaining_deps[nxt]:
                ready.add(nxt)
    return Schedule(order=tuple(order), start_us=start, end_us=end)


def transfer_boundaries(dag: DataflowDag, sched: Schedule) -> dict[str, TransferBoundary]:
    """Per-parameter windows under `sched`.

    Start is the completion of the update marker's producers (the marker
    itself waits for no resource). End is the start of the earliest compute
    consuming one of the parameter's read markers, shifted by one iteration
    length because those reads happen next iteration. A read with no consumer
    contributes its own start time.
    """
    iteration = sched.makespan_us()
    consumers = dag.consumers()
    out: dict[str, TransferBoundary] = {}
    for pid in dag.param_ids():
        upd = dag.update_op(pid)
        if upd.deps:
            start = max(sched.end_us[d] for d in upd.deps)
        else:
            start = sched.end_us[upd.id]
        read_points: list[float] = []
        for read in dag.read_ops(pid):
            consumer_ids = consumers[read.id]
            if consumer_ids:
                read_points.extend(sched.start_us[c] for c in consumer_ids)
            else:
                read_points.append(sched.start_us[read.id])
        end = iteration + min(read_points)
        out[pid] = TransferBoundary(param_id=pid, start_us=start, end_us=end)
    return out


def ancestors(dag: DataflowDag, op_id: str) -> set[str]:
    """Transitive dependency closure of an op, excluding the op itself."""
    if op_id not in dag.ops:
        raise KeyError(f"unknown op {op_id!r}")
    seen: set[str] = set()
    stack = [d for d in dag.ops[op_id].deps if d in dag.ops]
    while stack:
        cur = stack.pop()
        if cur in seen:
            continue
        seen.add(cur)
        stack.extend(d for d in dag.ops[cur].deps if d in dag.ops and d not in seen)
    return seen


# --- JSON wire format -------------------------------------------------------
#
# { "ops":    [{"id", "kind", "duration_us", "deps": [...], "phase", "param"?}],
#   "params": [{"id", "size_bytes"}] }
#
# Field order is irrelevant; unknown fields are rejected. "param" is required
# on markers and must be absent on compute ops.

_OP_FIELDS = {"id", "kind", "duration_us", "deps", "phase", "param"}
_PARAM_FIELDS = {"id", "size_bytes"}


class DagFormatError(ValueError):
    """The JSON document does not match the graph schema."""


def dag_from_json(obj: dict) -> DataflowDag:
    if not isinstance(obj, dict):
        raise DagFormatError("top-level document must be an object")
    unknown = set(obj) - {"ops", "params"}
    if unknown:
        raise DagFormatError(f"unknown top-level fields: {sorted(unknown)}")
    if "ops" not in obj or "params" not in obj:
        raise DagFormatError("document requires 'ops' and 'params' arrays")

    ops: dict[str, Op] = {}
    for entry in obj["ops"]:
        unknown = set(entry) - _OP_FIELDS
        if unknown:
            raise DagFormatError(f"unknown op fields: {sorted(unknown)}")
        try:
            kind = OpKind(entry["kind"])
            phase = Phase(entry["phase"])
        except (ValueError, KeyError) as exc:
            raise DagFormatError(f"bad op entry {entry.get('id')!r}: {exc}") from exc
        oid = entry["id"]
        if not isinstance(oid, str) or oid in ops:
            raise DagFormatError(f"missing, non-string, or duplicate op id: {oid!r}")
        duration = entry.get("duration_us")
        if not isinstance(duration, int) or isinstance(duration, bool):
            raise DagFormatError(f"op {oid!r}: duration_us must be an integer")
        param = entry.get("param")
        if kind is OpKind.COMPUTE and param is not None:
            raise DagFormatError(f"compute op {oid!r} must not carry a param")
        if kind is not OpKind.COMPUTE and not isinstance(param, str):
            raise DagFormatError(f"marker op {oid!r} requires a param id")
        deps = entry.get("deps", [])
        if not isinstance(deps, list) or not all(isinstance(d, str) for d in deps):
            raise DagFormatError(f"op {oid!r}: deps must be a list of op ids")
        ops[oid] = Op(
            id=oid, kind=kind, duration_us=duration,
            deps=frozenset(deps), phase=phase, param=param,
        )

    params: dict[str, Parameter] = {}
    for entry in obj["params"]:
        unknown = set(entry) - _PARAM_FIELDS
        if unknown:
            raise DagFormatError(f"unknown param fields: {sorted(unknown)}")
        pid = entry.get("id")
        size = entry.get("size_bytes")
        if not isinstance(pid, str) or pid in params:
            raise DagFormatError(f"missing, non-string, or duplicate param id: {pid!r}")
        if not isinstance(size, int) or isinstance(size, bool) or size <= 0:
            raise DagFormatError(f"param {pid!r}: size_bytes must be a positive integer")
        params[pid] = Parameter(id=pid, size_bytes=size)

    return DataflowDag(ops=ops, params=params)


def dag_to_json(dag: DataflowDag) -> dict:
    ops = []
    for oid in dag.op_ids():
        op = dag.ops[oid]
        entry: dict = {
            "id": op.id,
            "kind": op.kind.value,
            "duration_us": op.duration_us,
            "deps": sorted(op.deps),
            "phase": op.phase.value,
        }
        if op.param is not None:
            entry["param"] = op.param
        ops.append(entry)
    params = [
        {"id": pid, "size_bytes": dag.params[pid].size_bytes} for pid in dag.param_ids()
    ]
    return {"ops": ops, "params": params}


def load_dag(path: str | Path) -> DataflowDag:
    with open(path, encoding="utf-8") as fh:
        return dag_from_json(json.load(fh))


def save_dag(dag: DataflowDag, path: str | Path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(dag_to_json(dag), fh, indent=2)
        fh.write("\n")
