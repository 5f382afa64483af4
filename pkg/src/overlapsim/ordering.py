"""Parameter activation ordering and its enforcement via control edges.

Stage 1 picks an activation order greedily: at each step the parameter whose
not-yet-executed ancestor computes cost the least is activated next, and its
ancestors stop counting for later steps.

Stage 2 pins that order into the graph. For consecutive parameters i, i+1 it
adds control edges from the *end set* of i (direct dependencies of its update
marker) to the *free set* of i+1 (ancestors of its update that are ready to
execute once everything needed for parameters <= i has run). When the free
set is empty, i+1's entire cone was already executed and the edges target its
update marker instead; otherwise nothing would keep it from activating early.
A parameter "activates" once all dependencies of its update marker have
completed; simultaneous activations count as in-order.
"""

from __future__ import annotations

import random
from dataclasses import dataclass, replace

from .dag import DataflowDag, ancestors


class CycleIntroduced(RuntimeError):
    """Enforcement would create a cycle; the order was not feasible."""


@dataclass(frozen=True)
class ActivationOrder:
    param_ids: tuple[str, ...]
    cumulative_cost_us: tuple[float, ...]


@dataclass(frozen=True)
class ControlEdge:
    from_op: str
    to_op: str


def best_order(dag: DataflowDag, durations: dict[str, float] | None = None) -> ActivationOrder:
    """Iterative greedy choice of the cheapest next parameter to activate.

    Cost of a parameter is the total duration of its unexecuted ancestor ops;
    picking it marks those ancestors executed. Ties break on the smaller
    param id.
    """
    if durations is None:
        durations = {oid: float(op.duration_us) for oid, op in dag.ops.items()}
    cones = {
        pid: ancestors(dag, dag.update_op(pid).id) | {dag.update_op(pid).id}
        for pid in dag.param_ids()
    }
    executed: set[str] = set()
    cumulative = 0.0
    chosen: list[str] = []
    costs: list[float] = []
    remaining = set(dag.param_ids())
    while remaining:
        best_pid = None
        best_cost = None
        for pid in sorted(remaining):
            cost = sum(durations.get(oid, 0.0) for oid in cones[pid] if oid not in executed)
            if best_cost is None or cost < best_cost:
                best_pid, best_cost = pid, cost
        assert best_pid is not None and best_cost is not None
        remaining.discard(best_pid)
        executed |= cones[best_pid]
        cumulative += best_cost
        chosen.append(best_pid)
        costs.append(cumulative)
    return ActivationOrder(param_ids=tuple(chosen), cumulative_cost_us=tuple(costs))


def order_with_costs(
    dag: DataflowDag, sequence: tuple[str, ...], durations: dict[str, float] | None = None
) -> ActivationOrder:
    """Cumulative ancestor-compute cost along an arbitrary activation order."""
    if durations is None:
        durations = {oid: float(op.duration_us) for oid, op in dag.ops.items()}
    executed: set[str] = set()
    cumulative = 0.0
    costs: list[float] = []
    for pid in sequence:
        cone = ancestors(dag, dag.update_op(pid).id) | {dag.update_op(pid).id}
        cumulative += sum(durations.get(oid, 0.0) for oid in cone if oid not in executed)
        executed |= cone
        costs.append(cumulative)
    return ActivationOrder(param_ids=tuple(sequence), cumulative_cost_us=tuple(costs))


def _reachable(deps_out: dict[str, set[str]], src: str, dst: str) -> bool:
    """True when dst is reachable from src along forward edges."""
    if src == dst:
        return True
    stack = [src]
    seen = {src}
    while stack:
        cur = stack.pop()
        for nxt in deps_out.get(cur, ()):
            if nxt == dst:
                return True
            if nxt not in seen:
                seen.add(nxt)
                stack.append(nxt)
    return False


def enforce_order(
    dag: DataflowDag, order: ActivationOrder
) -> tuple[DataflowDag, list[ControlEdge]]:
    """Add control dependencies so every feasible execution activates the
    parameters in `order`. Free and end sets are computed on the original
    graph; duplicate and already-implied edges are skipped by a direct
    reachability check on the augmented graph.
    """
    if sorted(order.param_ids) != dag.param_ids():
        raise ValueError("order must cover exactly the parameters of the graph")

    # forward adjacency of the augmented graph, op -> consumers
    out_edges: dict[str, set[str]] = {oid: set() for oid in dag.ops}
    for oid, op in dag.ops.items():
        for dep in op.deps:
            if dep in out_edges:
                out_edges[dep].add(oid)

    cones: dict[str, set[str]] = {}
    for pid in order.param_ids:
        upd = dag.update_op(pid)
        cones[pid] = ancestors(dag, upd.id) | {upd.id}

    added: list[ControlEdge] = []
    new_deps: dict[str, set[str]] = {oid: set(op.deps) for oid, op in dag.ops.items()}
    executed: set[str] = set()
    for i in range(len(order.param_ids) - 1):
        cur_pid = order.param_ids[i]
        nxt_pid = order.param_ids[i + 1]
        executed |= cones[cur_pid]
        # direct deps of the current update in the augmented graph, so that
        # fallback edges chain across consecutive parameters
        end_set = sorted(d for d in new_deps[dag.update_op(cur_pid).id] if d in dag.ops)
        nxt_upd = dag.update_op(nxt_pid)
        free_set = sorted(
            oid
            for oid in cones[nxt_pid] - {nxt_upd.id}
            if oid not in executed
            and all(d in executed for d in dag.ops[oid].deps if d in dag.ops)
        )
        targets = free_set if free_set else [nxt_upd.id]
        for src in end_set:
            for dst in targets:
                if _reachable(out_edges, src, dst):
                    continue  # implied or duplicate
                if _reachable(out_edges, dst, src):
                    raise CycleIntroduced(f"edge {src!r}->{dst!r} would close a cycle")
                out_edges[src].add(dst)
                new_deps[dst].add(src)
                added.append(ControlEdge(from_op=src, to_op=dst))

    new_ops = {
        oid: replace(op, deps=frozenset(new_deps[oid])) for oid, op in dag.ops.items()
    }
    return DataflowDag(ops=new_ops, params=dict(dag.params)), added


def _activation_positions(dag: DataflowDag, topo: tuple[str, ...]) -> dict[str, int]:
    """Position at which each parameter's update becomes unblocked."""
    pos = {oid: i for i, oid in enumerate(topo)}
    out: dict[str, int] = {}
    for pid in dag.param_ids():
        upd = dag.update_op(pid)
        deps = [d for d in upd.deps if d in pos]
        out[pid] = max((pos[d] for d in deps), default=-1)
    return out


def _respects(dag: DataflowDag, topo: tuple[str, ...], order: ActivationOrder) -> bool:
    act = _activation_positions(dag, topo)
    seq = [act[pid] for pid in order.param_ids]
    return all(a <= b for a, b in zip(seq, seq[1:]))


def iter_topological_orders(dag: DataflowDag, limit: int | None = None):
    """Yield every topological order of the graph (backtracking, sorted-id
    branching). Raises RuntimeError when `limit` orders were produced and
    more remain."""
    consumers = dag.consumers()
    indeg = {oid: sum(1 for d in dag.ops[oid].deps if d in dag.ops) for oid in dag.ops}
    ready = sorted(oid for oid, d in indeg.items() if d == 0)
    chosen: list[str] = []
    produced = 0

    def backtrack(ready_list: list[str]):
        nonlocal produced
        if len(chosen) == len(dag.ops):
            produced += 1
            if limit is not None and produced > limit:
                raise RuntimeError(f"more than {limit} topological orders")
            yield tuple(chosen)
            return
        for idx, oid in enumerate(list(ready_list)):
            chosen.append(oid)
            nxt_ready = ready_list[:idx] + ready_list[idx + 1 :]
            opened = []
            for c in consumers[oid]:
                indeg[c] -= 1
                if indeg[c] == 0:
                    opened.append(c)
            if opened:
                nxt_ready = sorted(nxt_ready + opened)
            yield from backtrack(nxt_ready)
            for c in consumers[oid]:
                indeg[c] += 1
            chosen.pop()

    yield from backtrack(ready)


def sample_topological_order(dag: DataflowDag, rng: random.Random) -> tuple[str, ...]:
    indeg = {oid: sum(1 for d in dag.ops[oid].deps if d in dag.ops) for oid in dag.ops}
    consumers = dag.consumers()
    ready = sorted(oid for oid, d in indeg.items() if d == 0)
    out: list[str] = []
    while ready:
        oid = ready.pop(rng.randrange(len(ready)))
        out.append(oid)
        for c in consumers[oid]:
            indeg[c] -= 1
            if indeg[c] == 0:
                ready.append(c)
        ready.sort()
    if len(out) != len(dag.ops):
        raise ValueError("graph is cyclic")
    return tuple(out)


def verify_enforcement(
    dag_enforced: DataflowDag,
    order: ActivationOrder,
    *,
    exhaustive_ops: int = 20,
    enumeration_cap: int = 200_000,
    samples: int = 500,
    seed: int = 0,
) -> bool:
    """True iff every topological order activates parameters in `order`.

    Graphs with at most `exhaustive_ops` ops are enumerated exhaustively
    (falling back to sampling if the enumeration exceeds `enumeration_cap`
    orders); larger graphs are checked on `samples` random orders.
    """
    if len(dag_enforced.ops) <= exhaustive_ops:
        try:
            for topo in iter_topological_orders(dag_enforced, limit=enumeration_cap):
                if not _respects(dag_enforced, topo, order):
                    return False
            return True
        except RuntimeError:
            pass  # too many orders; sample instead
    rng = random.Random(seed)
    for _ in range(samples):
        topo = sample_topological_order(dag_enforced, rng)
        if not _respects(dag_enforced, topo, order):
            return False
    return True
