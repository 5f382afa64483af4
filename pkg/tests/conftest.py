"""Shared builders for the test suite."""

from __future__ import annotations

import random

import pytest

from overlapsim.dag import DataflowDag, Op, OpKind, Parameter, Phase


def op(
    oid: str,
    kind: str = "compute",
    dur: int = 0,
    deps: tuple[str, ...] = (),
    phase: str = "backprop",
    param: str | None = None,
) -> Op:
    return Op(
        id=oid,
        kind=OpKind(kind),
        duration_us=dur,
        deps=frozenset(deps),
        phase=Phase(phase),
        param=param,
    )


def make_dag(ops: list[Op], sizes: dict[str, int] | None = None) -> DataflowDag:
    sizes = sizes or {}
    params = {}
    for o in ops:
        if o.param is not None and o.param not in params:
            params[o.param] = Parameter(id=o.param, size_bytes=sizes.get(o.param, 1024))
    return DataflowDag(ops={o.id: o for o in ops}, params=params)


def random_small_dag(rng: random.Random) -> DataflowDag:
    """Small graph (<= 12 ops, <= 5 params) with a compute backbone plus a
    few parallel branch computes, read markers as sources, and update markers
    as leaves. Kept narrow so exhaustive topological enumeration stays cheap.
    """
    n_chain = rng.randint(2, 4)
    n_branch = rng.randint(0, 2)
    n_params = rng.randint(1, min(5, (12 - n_chain - n_branch) // 2))

    ops: list[Op] = []
    chain = [f"c{i}" for i in range(n_chain)]
    for i, cid in enumerate(chain):
        deps: list[str] = [chain[i - 1]] if i > 0 else []
        ops.append(op(cid, dur=rng.randint(1, 9), deps=tuple(deps),
                      phase="forward" if i == 0 else "backprop"))
    branch = [f"x{i}" for i in range(n_branch)]
    for i, xid in enumerate(branch):
        anchor = chain[rng.randrange(n_chain)]
        ops.append(op(xid, dur=rng.randint(1, 9), deps=(anchor,)))

    computes = chain + branch
    sizes = {}
    for i in range(n_params):
        pid = f"p{i}"
        sizes[pid] = rng.randint(1_000, 50_000)
        consumer_idx = rng.randrange(n_chain)
        # read marker feeds a chain op: recreate that op with the extra dep
        rid = f"r{i}"
        ops.append(op(rid, kind="param_read", phase="forward", param=pid))
        target = ops[consumer_idx]
        ops[consumer_idx] = op(target.id, dur=target.duration_us,
                               deps=tuple(target.deps | {rid}), phase=target.phase.value)
        producer = computes[rng.randrange(len(computes))]
        ops.append(op(f"u{i}", kind="param_update", param=pid, deps=(producer,)))
    return make_dag(ops, sizes)


def enumerate_topo_orders(dag: DataflowDag, cap: int = 200_000) -> list[tuple[str, ...]]:
    """Independent exhaustive enumeration: repeatedly extend by every op
    whose dependencies are all placed."""
    ids = sorted(dag.ops)
    deps = {oid: {d for d in dag.ops[oid].deps if d in dag.ops} for oid in ids}
    orders: list[tuple[str, ...]] = []

    def extend(prefix: list[str], placed: set[str]):
        if len(orders) > cap:
            raise AssertionError("enumeration blew past the cap; narrow the test graph")
        if len(prefix) == len(ids):
            orders.append(tuple(prefix))
            return
        for oid in ids:
            if oid in placed or not deps[oid] <= placed:
                continue
            prefix.append(oid)
            placed.add(oid)
            extend(prefix, placed)
            placed.discard(oid)
            prefix.pop()

    extend([], set())
    return orders


def build_fp_heavy_dag() -> DataflowDag:
    """Forward pass is 30% of compute, backprop is too short to hold all
    three transfers, and reads land late in the forward pass so it has room.
    Under the f(d) = 1000 + 0.001 d model with 4-worker shuffle each 100 KB
    transfer takes ~2.35 ms against 5 ms of backprop room and 2.9 ms of
    forward-pass room."""
    ops = [
        op("f0", dur=1000, phase="forward"),
        op("f1", dur=1900, deps=("f0",), phase="forward"),
        op("f2", dur=100, deps=("f1", "r_pa", "r_pb", "r_pc"), phase="forward"),
        op("b0", dur=2000, deps=("f2",)),
        op("b1", dur=2500, deps=("b0",)),
        op("b2", dur=2500, deps=("b1",)),
        op("r_pa", kind="param_read", phase="forward", param="pa"),
        op("r_pb", kind="param_read", phase="forward", param="pb"),
        op("r_pc", kind="param_read", phase="forward", param="pc"),
        op("u_pa", kind="param_update", param="pa", deps=("b0",)),
        op("u_pb", kind="param_update", param="pb", deps=("b1",)),
        op("u_pc", kind="param_update", param="pc", deps=("b2",)),
    ]
    return make_dag(ops, sizes={"pa": 100_000, "pb": 100_000, "pc": 100_000})


@pytest.fixture
def fp_heavy_dag() -> DataflowDag:
    return build_fp_heavy_dag()
