"""Network cost model and op-time estimation.

End-to-end transfer time is modeled as a fitted line f(d) = latency_us +
per_byte_us * d over microbenchmark measurements. The same curve drives the
batching threshold: the smallest size x where doubling the payload still
costs more than 80% of two separate transfers,

    threshold = min x >= 1  such that  f(2x) / (2 f(x)) > 0.8

which for the linear model reduces to x > 1.5 * latency_us / per_byte_us.
"""

from __future__ import annotations

import csv
import json
import math
import warnings
from dataclasses import dataclass
from pathlib import Path

import numpy as np

#: slope floor applied when a degenerate fit would produce a flat or
#: decreasing line; keeps f strictly increasing.
MIN_SLOPE = 1e-9


class EmptyProfile(ValueError):
    """An op profile carried no samples."""


class DegenerateInput(ValueError):
    """Measurements do not span at least two distinct sizes."""


@dataclass(frozen=True)
class OpProfile:
    """Observed durations of one op across repeated single-machine runs."""

    op_id: str
    samples_us: tuple[int, ...]


@dataclass(frozen=True)
class Measurement:
    """One end-to-end aggregation transfer observation."""

    size_bytes: int
    observed_time_us: float


@dataclass(frozen=True)
class NetworkModel:
    latency_us: float
    per_byte_us: float

    def to_json(self) -> dict:
        return {"latency_us": self.latency_us, "per_byte_us": self.per_byte_us}

    @classmethod
    def from_json(cls, obj: dict) -> "NetworkModel":
        unknown = set(obj) - {"latency_us", "per_byte_us"}
        if unknown:
            raise ValueError(f"unknown model fields: {sorted(unknown)}")
        return cls(latency_us=float(obj["latency_us"]), per_byte_us=float(obj["per_byte_us"]))


def round_us(x: float) -> int:
    """Round-half-up to integer microseconds; used only at reporting edges."""
    return int(math.floor(x + 0.5))


def estimate_op_times(profiles: list[OpProfile]) -> dict[str, int]:
    """Duration of each op is the minimum observed across runs."""
    out: dict[str, int] = {}
    for profile in profiles:
        if not profile.samples_us:
            raise EmptyProfile(f"profile for {profile.op_id!r} has no samples")
        out[profile.op_id] = min(profile.samples_us)
    return out


def fit_network_model(measurements: list[Measurement]) -> NetworkModel:
    """Ordinary least squares over (size, time).

    With exactly two distinct sizes the line passes through both group means.
    All-equal sizes raise DegenerateInput. A non-positive slope or negative
    intercept is clamped (and warned about) rather than fatal so that
    parameter sweeps over pathological inputs can proceed.
    """
    if len(measurements) < 2:
        raise DegenerateInput("need at least two measurements")
    sizes = np.array([m.size_bytes for m in measurements], dtype=float)
    times = np.array([m.observed_time_us for m in measurements], dtype=float)
    if np.all(sizes == sizes[0]):
        raise DegenerateInput("all measurement sizes are equal")

    slope, intercept = np.polyfit(sizes, times, 1)
    slope = float(slope)
    intercept = float(intercept)
    if slope <= 0:
        warnings.warn(f"non-positive fitted slope {slope:g}; clamping", stacklevel=2)
        slope = MIN_SLOPE
    if intercept < 0:
        warnings.warn(f"negative fitted latency {intercept:g}; clamping to 0", stacklevel=2)
        intercept = 0.0
    return NetworkModel(latency_us=intercept, per_byte_us=slope)


def p2p_time(model: NetworkModel, size_bytes: float) -> float:
    """f(d): end-to-end transfer time for a payload of d bytes."""
    if size_bytes < 0:
        raise ValueError("size must be non-negative")
    return model.latency_us + model.per_byte_us * size_bytes


def batching_threshold(model: NetworkModel) -> int:
    """Smallest integer x >= 1 with f(2x) / (2 f(x)) > 0.8.

    Algebra: (a + 2bx) / (2a + 2bx) > 0.8  <=>  x > 1.5 a / b. The candidate
    ceil(1.5 a / b) is then nudged by direct ratio evaluation so the strict
    inequality holds exactly even when the bound is an integer or suffers
    float error. With a = 0 the ratio is identically 1, so the threshold is 1
    and batching never looks beneficial.
    """
    a, b = model.latency_us, model.per_byte_us
    if a == 0:
        return 1

    def ratio(x: int) -> float:
        return p2p_time(model, 2 * x) / (2 * p2p_time(model, x))

    x = max(1, math.ceil(1.5 * a / b))
    while ratio(x) <= 0.8:
        x += 1
    while x > 1 and ratio(x - 1) > 0.8:
        x -= 1
    return x


# --- wire formats -----------------------------------------------------------

CSV_HEADER = ["size_bytes", "observed_time_us"]


def measurements_from_csv(path: str | Path) -> list[Measurement]:
    """Read `size_bytes,observed_time_us` rows; a header line is required."""
    out: list[Measurement] = []
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None or [h.strip() for h in header] != CSV_HEADER:
            raise ValueError(f"expected header {','.join(CSV_HEADER)!r}")
        for lineno, row in enumerate(reader, start=2):
            if not row:
                continue
            if len(row) != 2:
                raise ValueError(f"line {lineno}: expected 2 columns, got {len(row)}")
            try:
                size = int(row[0])
                time_us = float(row[1])
            except ValueError as exc:
                raise ValueError(f"line {lineno}: {exc}") from exc
            if size <= 0 or time_us <= 0:
                raise ValueError(f"line {lineno}: size and time must be positive")
            out.append(Measurement(size_bytes=size, observed_time_us=time_us))
    return out


def save_model(model: NetworkModel, path: str | Path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(model.to_json(), fh, indent=2)
        fh.write("\n")


def load_model(path: str | Path) -> NetworkModel:
    with open(path, encoding="utf-8") as fh:
        return NetworkModel.from_json(json.load(fh))
