import pytest

from overlapsim.collective import (
    CollectiveSpec,
    Pattern,
    ReduceModel,
    UnsupportedWorkerCount,
    adaptive_depth,
    collective_time,
    stage_plan,
)
from overlapsim.costmodel import NetworkModel, p2p_time

MB4 = 4 * 1024 * 1024


class TestStagePlan:
    def test_ring_four_workers(self):
        plan = stage_plan(CollectiveSpec(Pattern.RING, 4, MB4))
        assert len(plan.stages) == 6
        assert all(s.transfer_bytes == MB4 / 4 for s in plan.stages)
        assert [s.reduce_bytes > 0 for s in plan.stages] == [True] * 3 + [False] * 3

    def test_halving_doubling_four_workers(self):
        plan = stage_plan(CollectiveSpec(Pattern.HALVING_DOUBLING, 4, MB4))
        assert [s.transfer_bytes for s in plan.stages] == [
            MB4 / 2, MB4 / 4, MB4 / 4, MB4 / 2
        ]
        assert [s.reduce_bytes for s in plan.stages] == [MB4 / 2, MB4 / 4, 0.0, 0.0]

    def test_shuffle_two_workers(self):
        plan = stage_plan(CollectiveSpec(Pattern.SHUFFLE, 2, MB4))
        assert [s.transfer_bytes for s in plan.stages] == [MB4 / 2, MB4 / 2]
        assert [s.reduce_bytes for s in plan.stages] == [MB4 / 2, 0.0]

    def test_halving_doubling_rejects_non_power_of_two(self):
        with pytest.raises(UnsupportedWorkerCount):
            CollectiveSpec(Pattern.HALVING_DOUBLING, 6, MB4)

    def test_minimum_two_workers(self):
        with pytest.raises(UnsupportedWorkerCount):
            CollectiveSpec(Pattern.RING, 1, MB4)

    @pytest.mark.parametrize("pattern", list(Pattern))
    @pytest.mark.parametrize("workers", [2, 4, 8, 16])
    def test_allreduce_byte_accounting(self, pattern, workers):
        # every worker must move 2 d (p-1)/p bytes and reduce d (p-1)/p
        d = 1_000_000
        plan = stage_plan(CollectiveSpec(pattern, workers, d))
        expected = d * (workers - 1) / workers
        assert plan.total_transfer_bytes() == pytest.approx(2 * expected)
        assert plan.total_reduce_bytes() == pytest.approx(expected)


class TestCollectiveTime:
    model = NetworkModel(5.0, 0.001)
    reduce = ReduceModel(rate_bytes_per_us=1000.0, per_reduce_overhead_us=10.0)

    def test_depth_one_is_serial_sum(self):
        spec = CollectiveSpec(Pattern.SHUFFLE, 2, 20_000, depth=1)
        expected = 0.0
        for stage in stage_plan(spec).stages:
            expected += p2p_time(self.model, stage.transfer_bytes)
            if stage.reduce_bytes:
                expected += stage.reduce_bytes / 1000.0 + 10.0
        assert collective_time(spec, self.model, self.reduce) == pytest.approx(expected)

    def test_pipelining_helps_when_reduce_dominates(self):
        model = NetworkModel(0.0, 0.001)
        d1 = collective_time(CollectiveSpec(Pattern.SHUFFLE, 2, MB4, depth=1), model, self.reduce)
        d2 = collective_time(CollectiveSpec(Pattern.SHUFFLE, 2, MB4, depth=2), model, self.reduce)
        assert d2 < d1

    def test_latency_dominated_small_payload_prefers_depth_one(self):
        model = NetworkModel(1000.0, 0.001)
        small = 4096
        d1 = collective_time(CollectiveSpec(Pattern.SHUFFLE, 4, small, depth=1), model, self.reduce)
        d8 = collective_time(CollectiveSpec(Pattern.SHUFFLE, 4, small, depth=8), model, self.reduce)
        assert d8 > d1

    @pytest.mark.parametrize("pattern", list(Pattern))
    def test_zero_latency_depth_monotone_non_increasing(self, pattern):
        model = NetworkModel(0.0, 0.002)
        reduce = ReduceModel(rate_bytes_per_us=500.0, per_reduce_overhead_us=0.0)
        times = [
            collective_time(CollectiveSpec(pattern, 4, MB4, depth=k), model, reduce)
            for k in range(1, 9)
        ]
        for a, b in zip(times, times[1:]):
            assert b <= a + 1e-6

    @pytest.mark.parametrize("pattern", list(Pattern))
    def test_pure_latency_depth_monotone_non_decreasing(self, pattern):
        model = NetworkModel(400.0, 0.0)
        reduce = ReduceModel(rate_bytes_per_us=1e12, per_reduce_overhead_us=0.0)
        times = [
            collective_time(CollectiveSpec(pattern, 4, MB4, depth=k), model, reduce)
            for k in range(1, 9)
        ]
        for a, b in zip(times, times[1:]):
            assert b >= a - 1e-6

    def test_adaptive_close_to_best_fixed_across_sweep(self):
        model = NetworkModel(1000.0, 0.001)
        reduce = ReduceModel(rate_bytes_per_us=400.0, per_reduce_overhead_us=10.0)
        threshold = 1_500_001
        for size in [4096 * 4**i for i in range(8)] + [100 * 2**20]:
            fixed = {
                k: collective_time(CollectiveSpec(Pattern.SHUFFLE, 4, size, depth=k), model, reduce)
                for k in (1, 8)
            }
            chosen = adaptive_depth(size, threshold)
            adaptive = collective_time(
                CollectiveSpec(Pattern.SHUFFLE, 4, size, depth=chosen), model, reduce
            )
            assert adaptive <= min(fixed.values()) * 1.10


class TestAdaptiveDepth:
    def test_small_payload_depth_one(self):
        assert adaptive_depth(1000, 1000) == 1
        assert adaptive_depth(1, 1000) == 1

    def test_large_payload_depth_eight(self):
        assert adaptive_depth(8000, 1000) == 8
        assert adaptive_depth(10**9, 1000) == 8

    def test_fractional_ratio_rounds_up(self):
        assert adaptive_depth(2500, 1000) == 3

    def test_threshold_must_be_positive(self):
        with pytest.raises(ValueError):
            adaptive_depth(100, 0)
