"""Decentralized aggregation patterns and chunked pipelining.

Each pattern expands to per-worker stages of network transfer plus an
application-layer reduction. Stage arithmetic follows the standard
constructions (d = payload bytes, p = workers):

  ring     2(p-1) stages moving d/p each; the first p-1 stages reduce d/p
           (reduce-scatter), the rest only gather.
  hd       recursive vector halving with distance doubling: log2(p) halving
           stages moving d/2, d/4, ..., d/p (each reduced), mirrored by
           doubling stages moving d/p, ..., d/2. Requires p a power of two.
  shuffle  one all-to-all stage moving d(p-1)/p with a local reduce of the
           same volume, then one allgather stage moving d(p-1)/p.

Every pattern moves 2 d (p-1)/p bytes per worker and reduces d (p-1)/p,
which is exactly what an allreduce must.

Splitting the payload into `depth` equal chunks lets one chunk's reduction
overlap another's transfer: network and reducer are separate serial
resources, each chunk walks its stage list independently, and the collective
time is the makespan of that pipeline. Depth is capped at 8.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from enum import Enum

from .costmodel import NetworkModel, p2p_time

MAX_DEPTH = 8


class Pattern(str, Enum):
    RING = "ring"
    HALVING_DOUBLING = "hd"
    SHUFFLE = "shuffle"


class UnsupportedWorkerCount(ValueError):
    """Pattern constraints on the worker count were violated."""


@dataclass(frozen=True)
class Stage:
    transfer_bytes: float
    reduce_bytes: float


@dataclass(frozen=True)
class StagePlan:
    stages: tuple[Stage, ...]

    def total_transfer_bytes(self) -> float:
        return sum(s.transfer_bytes for s in self.stages)

    def total_reduce_bytes(self) -> float:
        return sum(s.reduce_bytes for s in self.stages)


@dataclass(frozen=True)
class ReduceModel:
    """Application-layer aggregation throughput and fixed per-call cost."""

    rate_bytes_per_us: float
    per_reduce_overhead_us: float = 0.0


@dataclass(frozen=True)
class CollectiveSpec:
    pattern: Pattern
    workers: int
    data_bytes: float
    depth: int = 1

    def __post_init__(self):
        if self.workers < 2:
            raise UnsupportedWorkerCount("collectives need at least 2 workers")
        if self.pattern is Pattern.HALVING_DOUBLING and self.workers & (self.workers - 1):
            raise UnsupportedWorkerCount("halving-doubling requires a power-of-two worker count")
        if not 1 <= self.depth <= MAX_DEPTH:
            raise ValueError(f"depth must be in [1, {MAX_DEPTH}]")


def stage_plan(spec: CollectiveSpec) -> StagePlan:
    p = spec.workers
    d = float(spec.data_bytes)
    if spec.pattern is Pattern.RING:
        share = d / p
        stages = [Stage(share, share) for _ in range(p - 1)]
        stages += [Stage(share, 0.0) for _ in range(p - 1)]
    elif spec.pattern is Pattern.HALVING_DOUBLING:
        rounds = int(math.log2(p))
        halving = [Stage(d / 2 ** (i + 1), d / 2 ** (i + 1)) for i in range(rounds)]
        doubling = [Stage(d / 2 ** (rounds - i), 0.0) for i in range(rounds)]
        stages = halving + doubling
    elif spec.pattern is Pattern.SHUFFLE:
        share = d * (p - 1) / p
        stages = [Stage(share, share), Stage(share, 0.0)]
    else:  # pragma: no cover - exhaustive enum
        raise ValueError(f"unknown pattern {spec.pattern!r}")
    return StagePlan(stages=tuple(stages))


def collective_time(
    spec: CollectiveSpec, model: NetworkModel, reduce: ReduceModel
) -> float:
    """Makespan of the chunk pipeline for one collective.

    Each of the `depth` chunks performs, per stage, a transfer of
    stage_bytes/depth on the network followed (when the stage reduces) by a
    reduction of reduce_bytes/depth on the reducer. Both resources run one
    task at a time; tasks are started greedily at the earliest possible time
    with ties broken by (stage, chunk). With depth 1 this degenerates to the
    plain serial sum of transfer and reduce times.
    """
    plan = stage_plan(spec)
    k = spec.depth

    # per-chunk task list: (resource, duration), alternating transfer/reduce
    tasks: list[tuple[str, float]] = []
    for stage in plan.stages:
        tasks.append(("net", p2p_time(model, stage.transfer_bytes / k)))
        if stage.reduce_bytes > 0:
            tasks.append(
                (
                    "red",
                    stage.reduce_bytes / (k * reduce.rate_bytes_per_us)
                    + reduce.per_reduce_overhead_us,
                )
            )

    free = {"net": 0.0, "red": 0.0}
    ready = [0.0] * k
    idx = [0] * k
    makespan = 0.0
    remaining = k * len(tasks)
    while remaining:
        best = None
        for c in range(k):
            if idx[c] >= len(tasks):
                continue
            res, dur = tasks[idx[c]]
            start = max(ready[c], free[res])
            key = (start, idx[c], c)
            if best is None or key < best[0]:
                best = (key, c, res, dur, start)
        assert best is not None
        _, c, res, dur, start = best
        end = start + dur
        free[res] = end
        ready[c] = end
        idx[c] += 1
        makespan = max(makespan, end)
        remaining -= 1
    return makespan


def adaptive_depth(data_bytes: float, threshold_bytes: int) -> int:
    """Depth 1 at or below the threshold, growing with size, capped at 8."""
    if threshold_bytes < 1:
        raise ValueError("threshold must be at least 1 byte")
    return min(MAX_DEPTH, max(1, math.ceil(data_bytes / threshold_bytes)))
