import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from skyalloc import (
    HeuristicConfig,
    InfeasibleAllocationError,
    PartitionIndex,
    Strategy,
    coarse_allocate,
    even_allocation,
    fine_tune,
    memory_feasible,
    objective,
    sky_allocate,
    workloads,
)

from conftest import make_problem, random_problem


def reference_fine_tune(problem, bounds, max_iter):
    """Straight re-reading of the fine-tuning loop using only full recomputation."""
    pi = list(bounds)
    D = problem.num_devices

    def w():
        return workloads(problem, PartitionIndex(tuple(pi)))

    def fits(candidate):
        try:
            return all(memory_feasible(problem, PartitionIndex(tuple(candidate))))
        except ValueError:
            return False

    for _ in range(max_iter):
        target = float(np.mean(w()))
        start = list(pi)
        for i in range(D - 1):
            cur = w()
            take = list(pi)
            take[i + 1] += 1
            give = list(pi)
            give[i + 1] -= 1
            last = problem.dt[i] * problem.sec_per_flop * problem.lf[pi[i + 1] - 1]
            if cur[i] < target and pi[i + 2] - pi[i + 1] > 1 and fits(take):
                pi = take
            elif (cur[i + 1] < target and cur[i] - last > target
                  and pi[i + 1] - pi[i] > 1 and fits(give)):
                pi = give
        if pi == start:
            break
    return tuple(pi)


def verify_trace(problem, start, final, trace):
    """Re-check every guard of every accepted fine-tuning move; return the number checked."""
    bounds = tuple(start.bounds)
    iteration = None
    for mv in trace:
        assert mv.bounds_before == bounds, "moves must chain"
        i = mv.device
        pi = PartitionIndex(bounds)
        w = workloads(problem, pi)
        if mv.iteration != iteration:
            iteration = mv.iteration
            pass_target = float(np.mean(w))
        assert mv.target == pytest.approx(pass_target, rel=1e-12)
        assert mv.this_workload == w[i] and mv.next_workload == w[i + 1]
        last = problem.dt[i] * problem.sec_per_flop * problem.lf[bounds[i + 1] - 1]
        assert mv.last_layer_workload == last
        after = PartitionIndex(mv.bounds_after)
        assert after.bounds[i + 1] - bounds[i + 1] == mv.direction
        assert [a for k, a in enumerate(after.bounds) if k != i + 1] == \
               [b for k, b in enumerate(bounds) if k != i + 1]
        assert all(memory_feasible(problem, after))
        n_this, n_next = bounds[i + 1] - bounds[i], bounds[i + 2] - bounds[i + 1]
        if mv.direction == 1:
            assert mv.this_workload < mv.target and n_next > 1
        else:
            assert mv.next_workload < mv.target
            assert mv.this_workload - mv.last_layer_workload > mv.target
            assert n_this > 1
            # The give branch only runs when the take branch was rejected.
            took = list(bounds)
            took[i + 1] += 1
            take_ok = (mv.this_workload < mv.target and n_next > 1
                       and all(memory_feasible(problem, PartitionIndex(tuple(took)))))
            assert not take_ok
        bounds = mv.bounds_after
    assert bounds == tuple(final.bounds)
    return len(trace)


class TestCoarseAllocate:
    def test_sheds_layer_when_over_budget(self):
        p = make_problem([1, 1, 1], [1, 1], layer_mem=[6, 6, 4], dev_mem=[10, 10])
        assert even_allocation(3, 2).bounds == (0, 2, 3)
        assert coarse_allocate(p).bounds == (0, 1, 3)

    def test_unconstrained_returns_even(self):
        p = make_problem([5, 1, 2, 8, 3, 3, 1], [1, 2, 3], layer_mem=[4] * 7, dev_mem=[28] * 3)
        assert coarse_allocate(p) == even_allocation(7, 3)

    def test_infeasible(self):
        p = make_problem([1, 1], [1, 1], layer_mem=[9, 9], dev_mem=[8, 8])
        with pytest.raises(InfeasibleAllocationError, match="Cannot fulfill memory requirement"):
            coarse_allocate(p)

    def test_last_device_overflow_pulled_forward(self):
        # Even split puts 12 bytes on the last device; device 0 has room to absorb.
        p = make_problem([1] * 4, [1, 1], layer_mem=[1, 1, 6, 6], dev_mem=[20, 7])
        pi = coarse_allocate(p)
        assert pi.bounds == (0, 3, 4)
        assert all(memory_feasible(p, pi))

    def test_sweep_cap(self):
        # The first sweep moves boundaries without fixing memory; the cap stops it there.
        p = make_problem([1] * 10, [1] * 4, layer_mem=[7, 8, 1, 2, 7, 8, 2, 3, 7, 4],
                         dev_mem=[6, 16, 6, 9])
        with pytest.raises(InfeasibleAllocationError, match="within 1 sweeps"):
            coarse_allocate(p, HeuristicConfig(coarse_max_sweeps=1))
        with pytest.raises(InfeasibleAllocationError, match="^Cannot fulfill memory requirement$"):
            coarse_allocate(p)


class TestFineTune:
    def test_donation_guard_blocks_move(self):
        # w = [7, 3], target 5: giving layer 1 would leave device 0 at 4 < 5,
        # so the guard refuses and the partition is a fixed point (q stays 7).
        p = make_problem([4, 3, 2, 1], [1.0, 1.0])
        trace = []
        pi = fine_tune(p, PartitionIndex((0, 2, 4)), trace=trace)
        assert pi.bounds == (0, 2, 4)
        assert trace == []
        assert objective(p, pi) == 7.0

    def test_underloaded_device_takes(self):
        p = make_problem([1, 1, 1, 1, 1, 1], [1.0, 3.0])
        trace = []
        pi = fine_tune(p, PartitionIndex((0, 3, 6)), trace=trace)
        # w=[3, 9], target 6: device 0 takes until it reaches the target.
        assert pi.bounds == (0, 5, 6)
        assert [m.direction for m in trace] == [1, 1]
        verify_trace(p, PartitionIndex((0, 3, 6)), pi, trace)

    def test_overloaded_device_gives(self):
        p = make_problem([1] * 8, [3.0, 1.0])
        trace = []
        pi = fine_tune(p, PartitionIndex((0, 4, 8)), trace=trace)
        # w=[12, 4], target 8: one give leaves [9, 5]; a second would drop device 0 to 6 < 7.
        assert pi.bounds == (0, 3, 8)
        assert all(m.direction == -1 for m in trace)
        verify_trace(p, PartitionIndex((0, 4, 8)), pi, trace)

    def test_balanced_is_unchanged(self):
        p = make_problem([2] * 6, [1.0, 1.0, 1.0])
        trace = []
        assert fine_tune(p, even_allocation(6, 3), trace=trace) == even_allocation(6, 3)
        assert trace == []

    def test_max_iter_limits_passes(self):
        p = make_problem([1] * 12, [1.0, 5.0])
        start = PartitionIndex((0, 6, 12))
        trace = []
        one = fine_tune(p, start, HeuristicConfig(max_iter=1), trace=trace)
        assert {m.iteration for m in trace} == {0}
        assert len(trace) == 1
        assert one.bounds == (0, 7, 12)
        assert fine_tune(p, start).bounds[1] > 7

    def test_max_iter_zero_rejected(self):
        with pytest.raises(ValueError):
            HeuristicConfig(max_iter=0)
        with pytest.raises(ValueError):
            HeuristicConfig(coarse_max_sweeps=0)

    def test_memory_guard(self):
        # Device 0 is below target but cannot fit another layer.
        p = make_problem([1] * 6, [1.0, 3.0], layer_mem=[1] * 6, dev_mem=[3, 100])
        assert fine_tune(p, PartitionIndex((0, 3, 6))).bounds == (0, 3, 6)

    def test_latency_counts_in_workload(self):
        # Latency keeps device 1 above target, so device 0 takes until device 1 is down to one layer.
        p = make_problem([1] * 4, [1.0, 1.0], ct=[0.0, 10.0])
        assert fine_tune(p, PartitionIndex((0, 2, 4))).bounds == (0, 3, 4)


class TestSkyAllocate:
    def test_homogeneous_is_even(self):
        p = make_problem([3] * 10, [2.0] * 5)
        r = sky_allocate(p)
        assert r.partition == even_allocation(10, 5)
        assert r.feasible and r.strategy is Strategy.HEURISTIC

    def test_one_layer_per_device(self):
        p = make_problem([5, 1, 9], [1.0, 7.0, 2.0])
        assert sky_allocate(p).partition.bounds == (0, 1, 2, 3)

    def test_propagates_infeasibility(self):
        p = make_problem([1, 1], [1, 1], layer_mem=[9, 9], dev_mem=[8, 8])
        with pytest.raises(InfeasibleAllocationError):
            sky_allocate(p)

    def test_matches_reference_loop(self):
        rng = np.random.default_rng(7)
        checked = 0
        for _ in range(300):
            p = random_problem(rng, 25, 6)
            try:
                start = coarse_allocate(p)
            except InfeasibleAllocationError:
                continue
            assert fine_tune(p, start).bounds == reference_fine_tune(p, start.bounds, 100)
            checked += 1
        assert checked > 100


@settings(max_examples=60, deadline=None)
@given(st.integers(0, 2**32 - 1))
def test_outputs_feasible_and_deterministic(seed):
    p = random_problem(np.random.default_rng(seed), 20, 6)
    try:
        start = coarse_allocate(p)
    except InfeasibleAllocationError:
        return
    assert all(memory_feasible(p, start))
    trace = []
    a = fine_tune(p, start, trace=trace)
    assert a == fine_tune(p, start)
    assert all(memory_feasible(p, a))
    verify_trace(p, start, a, trace)
