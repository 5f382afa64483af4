"""Seeded synthetic training-graph generator.

Shape: parameter reads feed a forward-pass compute chain, a backprop chain
hangs off the last forward op, and each parameter's update marker hangs off a
backprop compute. Forward-pass durations are rescaled so the forward share of
compute lands near the requested fraction (common models spend roughly 30%
of an iteration there). Size presets:

  small-heavy   at least 60% of parameters drawn below 20 KB, the rest up to
                10 MB; mirrors the many-tiny-parameters profile of real DNNs.
  log-uniform   sizes log-uniform between 1 KB and 100 MB.
"""

from __future__ import annotations

import math
import random

from .dag import DataflowDag, Op, OpKind, Parameter, Phase

PRESETS = ("small-heavy", "log-uniform")
SMALL_CUTOFF_BYTES = 20_000


def _log_uniform(rng: random.Random, lo: float, hi: float) -> int:
    return int(round(math.exp(rng.uniform(math.log(lo), math.log(hi)))))


def _sizes(rng: random.Random, n_params: int, preset: str) -> list[int]:
    if preset == "small-heavy":
        n_small = math.ceil(0.6 * n_params)
        sizes = [_log_uniform(rng, 256, SMALL_CUTOFF_BYTES - 1) for _ in range(n_small)]
        sizes += [
            _log_uniform(rng, SMALL_CUTOFF_BYTES, 10_000_000)
            for _ in range(n_params - n_small)
        ]
        rng.shuffle(sizes)
        return sizes
    if preset == "log-uniform":
        return [_log_uniform(rng, 1_024, 100_000_000) for _ in range(n_params)]
    raise ValueError(f"unknown preset {preset!r}; choose from {PRESETS}")


def gen_dag(
    n_ops: int,
    n_params: int,
    seed: int,
    preset: str = "small-heavy",
    fp_fraction: float = 0.3,
) -> DataflowDag:
    """Generate a well-formed graph with `n_ops` ops and `n_params` parameters.

    Each parameter contributes one read marker and one update marker, so
    n_ops must leave room for at least two compute ops besides the markers.
    """
    if n_params < 1:
        raise ValueError("need at least one parameter")
    if not 0.0 < fp_fraction < 1.0:
        raise ValueError("fp_fraction must be in (0, 1)")
    n_compute = n_ops - 2 * n_params
    if n_compute < 2:
        raise ValueError(
            f"{n_ops} ops cannot hold {n_params} parameters plus at least 2 computes"
        )
    rng = random.Random(seed)

    n_fp = max(1, round(n_compute * 0.4))
    n_bp = n_compute - n_fp
    if n_bp < 1:
        n_fp, n_bp = n_compute - 1, 1

    width = len(str(max(n_fp, n_bp, n_params)))

    def pid(i: int) -> str:
        return f"p{i:0{width}d}"

    fp_ids = [f"f{i:0{width}d}" for i in range(n_fp)]
    bp_ids = [f"b{i:0{width}d}" for i in range(n_bp)]

    fp_raw = [rng.randint(50, 500) for _ in range(n_fp)]
    bp_raw = [rng.randint(50, 500) for _ in range(n_bp)]
    scale = (fp_fraction / (1.0 - fp_fraction)) * (sum(bp_raw) / sum(fp_raw))
    fp_durations = [max(1, round(d * scale)) for d in fp_raw]

    params = {pid(i): Parameter(id=pid(i), size_bytes=s) for i, s in
              enumerate(_sizes(rng, n_params, preset))}

    ops: dict[str, Op] = {}
    read_consumer = {pid(i): rng.choice(fp_ids) for i in range(n_params)}
    for p in read_consumer:
        rid = f"r_{p}"
        ops[rid] = Op(id=rid, kind=OpKind.PARAM_READ, duration_us=0,
                      deps=frozenset(), phase=Phase.FORWARD, param=p)

    for i, fid in enumerate(fp_ids):
        deps = {fp_ids[i - 1]} if i > 0 else set()
        deps |= {f"r_{p}" for p, f in read_consumer.items() if f == fid}
        ops[fid] = Op(id=fid, kind=OpKind.COMPUTE, duration_us=fp_durations[i],
                      deps=frozenset(deps), phase=Phase.FORWARD)

    # backprop fans out into parallel gradient branches off the last forward op
    n_branches = min(4, max(1, n_bp // 4))
    branches: list[list[str]] = [[] for _ in range(n_branches)]
    for i, bid in enumerate(bp_ids):
        branches[i % n_branches].append(bid)
    for branch in branches:
        for j, bid in enumerate(branch):
            deps = {branch[j - 1]} if j > 0 else {fp_ids[-1]}
            ops[bid] = Op(id=bid, kind=OpKind.COMPUTE, duration_us=bp_raw[bp_ids.index(bid)],
                          deps=frozenset(deps), phase=Phase.BACKPROP)

    for i in range(n_params):
        p = pid(i)
        uid = f"u_{p}"
        producer = bp_ids[rng.randrange(n_bp)]
        ops[uid] = Op(id=uid, kind=OpKind.PARAM_UPDATE, duration_us=0,
                      deps=frozenset({producer}), phase=Phase.BACKPROP, param=p)

    return DataflowDag(ops=ops, params=params)
