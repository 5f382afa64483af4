import random

import pytest

from overlapsim.batching import BatchGroup, BatchPlan
from overlapsim.transfer import (
    PlacementKind,
    TransferWindow,
    fifo_schedule,
    overlap_stats,
    schedule_transfers,
)


def make_plan(entries):
    """entries: (group_id, size, window_start, window_end, duration)."""
    groups = tuple(
        BatchGroup(gid, (f"{gid}_p",), size, ws, we) for gid, size, ws, we, _ in entries
    )
    windows = {gid: TransferWindow(ws, we) for gid, size, ws, we, _ in entries}
    times = {gid: dur for gid, _, _, _, dur in entries}
    return BatchPlan(groups=groups, threshold_bytes=1), windows, times


BP = (3000.0, 10000.0)
FP = (10000.0, 13000.0)


class TestScheduleTransfers:
    def test_single_group_placed_at_window_start(self):
        plan, windows, times = make_plan([("g0", 100, 4000.0, 12000.0, 500.0)])
        sched = schedule_transfers(plan, windows, BP, FP, times)
        (t,) = sched.transfers
        assert (t.begin_us, t.finish_us) == (4000.0, 4500.0)
        assert t.placement is PlacementKind.BP_OVERLAP
        assert sched.added_iteration_time_us == 0

    def test_second_group_overflows_minimally(self):
        # both windows cover only a backprop gap that holds one transfer
        plan, windows, times = make_plan([
            ("g0", 100, 8000.0, 10000.0, 1500.0),
            ("g1", 100, 8000.0, 10000.0, 1500.0),
        ])
        sched = schedule_transfers(plan, windows, BP, FP, times)
        by_id = {t.group_id: t for t in sched.transfers}
        assert by_id["g0"].begin_us == 8000.0
        assert by_id["g0"].placement is PlacementKind.BP_OVERLAP
        # g1 reclaims the remaining backprop idle time and spills past compute
        assert by_id["g1"].begin_us == 9500.0
        assert by_id["g1"].placement is PlacementKind.OVERFLOW_AFTER_BP
        assert sched.added_iteration_time_us == pytest.approx(1000.0)

    def test_fp_only_window_goes_to_forward_pass(self):
        # bp room for this window is empty: [10000, 10000]
        plan, windows, times = make_plan([("g0", 100, 10000.0, 12500.0, 2000.0)])
        sched = schedule_transfers(plan, windows, BP, FP, times)
        (t,) = sched.transfers
        assert t.placement is PlacementKind.FP_OVERLAP
        assert t.begin_us == 10000.0

    def test_sorted_by_size_then_id(self):
        plan, windows, times = make_plan([
            ("g_small", 10, 3000.0, 13000.0, 4000.0),
            ("g_big", 99, 3000.0, 13000.0, 4000.0),
        ])
        sched = schedule_transfers(plan, windows, BP, FP, times)
        by_id = {t.group_id: t for t in sched.transfers}
        assert by_id["g_big"].begin_us < by_id["g_small"].begin_us

    def test_no_two_transfers_overlap(self):
        rng = random.Random(21)
        for _ in range(50):
            entries = []
            for i in range(rng.randint(1, 12)):
                ws = rng.uniform(3000, 9000)
                we = rng.uniform(ws + 100, 13000)
                entries.append(
                    (f"g{i:02d}", rng.randint(1, 10**6), ws, we, rng.uniform(100, 2500))
                )
            plan, windows, times = make_plan(entries)
            sched = schedule_transfers(plan, windows, BP, FP, times)
            spans = sorted((t.begin_us, t.finish_us) for t in sched.transfers)
            for (s1, e1), (s2, e2) in zip(spans, spans[1:]):
                assert s2 >= e1 - 1e-9
            assert len(sched.transfers) == len(entries)
            for t in sched.transfers:
                if t.placement in (PlacementKind.BP_OVERLAP, PlacementKind.FP_OVERLAP):
                    w = windows[t.group_id]
                    assert t.begin_us >= w.start_us - 1e-9
                    assert t.finish_us <= w.end_us + 1e-9
                elif t.placement is PlacementKind.OVERFLOW_AFTER_BP:
                    assert t.begin_us >= windows[t.group_id].start_us - 1e-9

    def test_zero_overflow_when_capacity_suffices(self):
        entries = [
            (f"g{i}", 100, 3000.0 + 700 * i, 13000.0, 600.0) for i in range(8)
        ]
        plan, windows, times = make_plan(entries)
        sched = schedule_transfers(plan, windows, BP, FP, times)
        assert sched.added_iteration_time_us == 0

    def test_deterministic(self):
        entries = [
            ("ga", 500, 4000.0, 11000.0, 900.0),
            ("gb", 500, 4000.0, 11000.0, 900.0),
            ("gc", 200, 9000.0, 10500.0, 800.0),
        ]
        plan, windows, times = make_plan(entries)
        first = schedule_transfers(plan, windows, BP, FP, times)
        second = schedule_transfers(plan, windows, BP, FP, times)
        assert first == second


class TestFifoSchedule:
    def test_sequential_from_ready_times(self):
        plan, _, times = make_plan([
            ("g0", 100, 5000.0, 13000.0, 1000.0),
            ("g1", 100, 5500.0, 13000.0, 1000.0),
        ])
        sched = fifo_schedule(plan, 10000.0, times)
        by_id = {t.group_id: t for t in sched.transfers}
        assert (by_id["g0"].begin_us, by_id["g0"].finish_us) == (5000.0, 6000.0)
        assert (by_id["g1"].begin_us, by_id["g1"].finish_us) == (6000.0, 7000.0)
        assert sched.added_iteration_time_us == 0

    def test_spill_extends_iteration(self):
        plan, _, times = make_plan([("g0", 100, 9500.0, 13000.0, 1000.0)])
        sched = fifo_schedule(plan, 10000.0, times)
        (t,) = sched.transfers
        assert t.placement is PlacementKind.OVERFLOW_AFTER_BP
        assert sched.added_iteration_time_us == pytest.approx(500.0)


class TestOverlapStats:
    def test_full_overlap(self):
        plan, windows, times = make_plan([("g0", 100, 4000.0, 9000.0, 1000.0)])
        sched = schedule_transfers(plan, windows, BP, FP, times)
        alpha, rho, n = overlap_stats(sched, BP, FP, 10000.0)
        assert alpha == 1.0
        assert rho == pytest.approx(0.1)
        assert n == pytest.approx(1000.0)

    def test_no_overlap_after_bp(self):
        plan, _, times = make_plan([("g0", 100, 10000.0, 10000.0, 700.0)])
        sched = fifo_schedule(plan, 10000.0, times)
        alpha, rho, n = overlap_stats(sched, BP, FP, 10000.0)
        assert alpha == 0.0
        assert n == pytest.approx(700.0)

    def test_empty_schedule_convention(self):
        plan = BatchPlan(groups=(), threshold_bytes=1)
        sched = fifo_schedule(plan, 10000.0, {})
        alpha, rho, n = overlap_stats(sched, BP, FP, 10000.0)
        assert (alpha, rho, n) == (1.0, 0.0, 0.0)
