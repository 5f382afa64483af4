import math
import random

import pytest

from overlapsim.costmodel import (
    DegenerateInput,
    EmptyProfile,
    Measurement,
    NetworkModel,
    OpProfile,
    batching_threshold,
    estimate_op_times,
    fit_network_model,
    p2p_time,
    round_us,
)


def scan_threshold(model: NetworkModel) -> int:
    """Oracle: doubling search then bisection for the smallest integer x
    with f(2x) / (2 f(x)) > 0.8."""

    def good(x: int) -> bool:
        return p2p_time(model, 2 * x) / (2 * p2p_time(model, x)) > 0.8

    hi = 1
    while not good(hi):
        hi *= 2
    lo = hi // 2 if hi > 1 else 1
    while lo < hi:
        mid = (lo + hi) // 2
        if good(mid):
            hi = mid
        else:
            lo = mid + 1
    return hi


class TestEstimateOpTimes:
    def test_minimum_across_runs(self):
        assert estimate_op_times([OpProfile("op", (12, 10, 11))]) == {"op": 10}

    def test_singleton(self):
        assert estimate_op_times([OpProfile("op", (7,))]) == {"op": 7}

    def test_constant(self):
        assert estimate_op_times([OpProfile("op", (5, 5, 5))]) == {"op": 5}

    def test_empty_profile(self):
        with pytest.raises(EmptyProfile):
            estimate_op_times([OpProfile("op", ())])


class TestFit:
    def test_two_point_exact(self):
        model = fit_network_model([
            Measurement(64, 100.064),
            Measurement(4_194_304, 4294.304),
        ])
        assert model.latency_us == pytest.approx(100.0, rel=1e-9)
        assert model.per_byte_us == pytest.approx(0.001, rel=1e-9)

    def test_replicated_points_same_model(self):
        points = [Measurement(64, 100.064), Measurement(4_194_304, 4294.304)]
        model = fit_network_model(points * 3)
        assert model.latency_us == pytest.approx(100.0, rel=1e-9)
        assert model.per_byte_us == pytest.approx(0.001, rel=1e-9)

    def test_noisy_fit_recovers_generator(self):
        rng = random.Random(42)
        a, b = 200.0, 0.002
        measurements = []
        for _ in range(200):
            size = int(math.exp(rng.uniform(math.log(1_000), math.log(10_000_000))))
            noise = 1.0 + rng.uniform(-0.01, 0.01)
            measurements.append(Measurement(size, (a + b * size) * noise))
        model = fit_network_model(measurements)
        assert abs(model.latency_us - a) / a <= 0.05
        assert abs(model.per_byte_us - b) / b <= 0.02

    def test_degenerate_sizes(self):
        with pytest.raises(DegenerateInput):
            fit_network_model([Measurement(64, 1.0), Measurement(64, 2.0)])
        with pytest.raises(DegenerateInput):
            fit_network_model([Measurement(64, 1.0)])

    def test_non_positive_slope_clamped_with_warning(self):
        with pytest.warns(UserWarning, match="slope"):
            model = fit_network_model([Measurement(64, 500.0), Measurement(1 << 22, 100.0)])
        assert model.per_byte_us > 0


class TestP2pTime:
    def test_direct_substitution(self):
        assert p2p_time(NetworkModel(100, 0.01), 10_000) == 200

    def test_intercept_at_zero_size(self):
        assert p2p_time(NetworkModel(100, 0.01), 0) == 100

    def test_zero_latency_model(self):
        assert p2p_time(NetworkModel(0, 0.001), 1_000_000) == 1000

    def test_monotone(self):
        model = NetworkModel(17.5, 0.003)
        sizes = [0, 1, 64, 4096, 10**6, 10**8]
        times = [p2p_time(model, s) for s in sizes]
        assert times == sorted(times)

    def test_negative_size_rejected(self):
        with pytest.raises(ValueError):
            p2p_time(NetworkModel(1, 1), -1)


class TestThreshold:
    def test_integral_bound_lands_just_above(self):
        # 1.5 a / b is exactly 1.5e6 here; the strict inequality first holds
        # one byte later, where the oracle agrees
        model = NetworkModel(1000, 0.001)
        t = batching_threshold(model)
        assert t == 1_500_001
        assert t == scan_threshold(model)

    def test_second_closed_form_case(self):
        model = NetworkModel(1000, 0.01)
        t = batching_threshold(model)
        assert t == 150_001
        assert t == scan_threshold(model)

    def test_zero_latency_threshold_is_one(self):
        assert batching_threshold(NetworkModel(0, 0.5)) == 1

    def test_matches_scan_on_random_models(self):
        rng = random.Random(1234)
        for _ in range(100):
            model = NetworkModel(
                latency_us=math.exp(rng.uniform(math.log(0.1), math.log(1e5))),
                per_byte_us=math.exp(rng.uniform(math.log(1e-6), math.log(1.0))),
            )
            t = batching_threshold(model)
            assert t == scan_threshold(model)

    def test_boundary_ratios(self):
        rng = random.Random(99)
        for _ in range(100):
            model = NetworkModel(
                latency_us=math.exp(rng.uniform(math.log(0.1), math.log(1e4))),
                per_byte_us=math.exp(rng.uniform(math.log(1e-5), math.log(0.1))),
            )
            t = batching_threshold(model)
            assert p2p_time(model, 2 * t) / (2 * p2p_time(model, t)) > 0.8
            if t > 1:
                assert p2p_time(model, 2 * (t - 1)) / (2 * p2p_time(model, t - 1)) <= 0.8


def test_round_us_half_up():
    assert round_us(1.4) == 1
    assert round_us(1.5) == 2
    assert round_us(2.5) == 3
    assert round_us(0.0) == 0
