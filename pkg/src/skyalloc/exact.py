"""Exact min-max allocation over contiguous partitions.

``optimal_dp`` solves the order-fixed problem by dynamic programming,
``optimal_exhaustive`` enumerates every partition as an independent check,
and ``optimal_permuted`` additionally lets the solver choose the device order.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import replace

import numpy as np

from .core import (
    AllocationError,
    AllocationProblem,
    AllocationResult,
    InfeasibleAllocationError,
    PartitionIndex,
    Strategy,
    evaluate,
)

DEFAULT_ENUMERATION_CAP = 10**7
DEFAULT_MAX_PERMUTED_DEVICES = 8


class SolverLimitError(AllocationError):
    """The instance is larger than the solver is allowed to handle."""


def _segment_costs(problem: AllocationProblem, i: int, lo, hi) -> np.ndarray:
    """Workload of device ``i`` on layers ``lo .. hi - 1``, broadcast over arrays; inf if out of memory.

    Same arithmetic as ``AllocationProblem.segment_workload`` so results match bit-for-bit.
    """
    fp, mp = problem.flops_prefix, problem.mem_prefix
    cost = problem.dt[i] * problem.sec_per_flop * (fp[hi] - fp[lo]) + problem.ct[i]
    return np.where(mp[hi] - mp[lo] <= problem.dm[i], cost, np.inf)


def _suffix_table(problem: AllocationProblem) -> np.ndarray:
    """``best[d, j]``: optimal max workload of layers ``j..L-1`` on devices ``d..D-1``."""
    D, L = problem.num_devices, problem.num_layers
    best = np.full((D + 1, L + 1), np.inf)
    best[D, L] = -np.inf
    for d in range(D - 1, -1, -1):
        # Devices after d need at least one layer each.
        for j in range(d, L - (D - d) + 1):
            ends = np.arange(j + 1, L - (D - d - 1) + 1)
            seg = _segment_costs(problem, d, j, ends)
            best[d, j] = np.min(np.maximum(seg, best[d + 1, ends]))
    return best


def optimal_dp(problem: AllocationProblem) -> AllocationResult:
    """Optimal identity-order partition; ties go to the lexicographically smallest one."""
    D, L = problem.num_devices, problem.num_layers
    best = _suffix_table(problem)
    q = best[0, 0]
    if not np.isfinite(q):
        raise InfeasibleAllocationError("no contiguous partition satisfies the memory limits")
    # Greedy front-to-back reconstruction: the smallest boundary that still
    # admits an optimal completion gives the lexicographically smallest pi.
    bounds = [0]
    j = 0
    for d in range(D):
        ends = np.arange(j + 1, L - (D - d - 1) + 1)
        seg = _segment_costs(problem, d, j, ends)
        ok = (seg <= q) & (best[d + 1, ends] <= q)
        j = int(ends[np.argmax(ok)])
        bounds.append(j)
    result = evaluate(problem, PartitionIndex(tuple(bounds)), Strategy.OPTIMAL_DP)
    assert result.objective == q
    return result


def optimal_exhaustive(problem: AllocationProblem, cap: int = DEFAULT_ENUMERATION_CAP) -> AllocationResult:
    """Brute-force every contiguous partition.

    Partitions are visited in lexicographic order and only a strictly better
    objective replaces the incumbent, which reproduces the DP's tie-break.
    """
    D, L = problem.num_devices, problem.num_layers
    n = math.comb(L - 1, D - 1)
    if n > cap:
        raise SolverLimitError(f"{n} partitions exceeds the enumeration cap of {cap}")
    best_q, best_bounds = math.inf, None
    dm = problem.dm
    for cuts in itertools.combinations(range(1, L), D - 1):
        bounds = (0, *cuts, L)
        q = -math.inf
        for i in range(D):
            lo, hi = bounds[i], bounds[i + 1]
            if problem.segment_memory(lo, hi) > dm[i]:
                break
            q = max(q, problem.segment_workload(i, lo, hi))
        else:
            if q < best_q:
                best_q, best_bounds = q, bounds
    if best_bounds is None:
        raise InfeasibleAllocationError("no contiguous partition satisfies the memory limits")
    return evaluate(problem, PartitionIndex(best_bounds), Strategy.OPTIMAL_EXHAUSTIVE)


def optimal_permuted(problem: AllocationProblem,
                     max_devices: int = DEFAULT_MAX_PERMUTED_DEVICES) -> AllocationResult:
    """Optimal partition when the pipeline order of devices is also free.

    Dynamic programming over (set of devices already placed, layers covered),
    so the cost is ``2^D * D * L^2`` rather than ``D! * D * L^2``.
    """
    D, L = problem.num_devices, problem.num_layers
    if D > max_devices:
        raise SolverLimitError(f"{D} devices exceeds the permutation limit of {max_devices}")
    full = (1 << D) - 1
    # f[mask][j]: best max workload placing the devices in mask on layers 0..j-1.
    f = np.full((full + 1, L + 1), np.inf)
    f[0, 0] = -np.inf
    choice: dict[tuple[int, int], tuple[int, int]] = {}
    masks = sorted(range(1, full + 1), key=lambda m: (bin(m).count("1"), m))
    starts_all = np.arange(L + 1)
    for mask in masks:
        k = bin(mask).count("1")
        for j in range(k, L - (D - k) + 1):
            best, arg = np.inf, None
            for d in range(D):
                if not mask >> d & 1:
                    continue
                prev = f[mask ^ (1 << d)]
                starts = starts_all[k - 1:j]
                seg = _segment_costs(problem, d, starts, j)
                vals = np.maximum(prev[starts], seg)
                pos = int(np.argmin(vals))
                if vals[pos] < best:
                    best, arg = vals[pos], (d, int(starts[pos]))
            f[mask, j] = best
            if arg is not None:
                choice[(mask, j)] = arg
    if not np.isfinite(f[full, L]):
        raise InfeasibleAllocationError("no contiguous partition satisfies the memory limits")
    order, bounds = [], [L]
    mask, j = full, L
    while mask:
        d, lo = choice[(mask, j)]
        order.append(d)
        bounds.append(lo)
        mask ^= 1 << d
        j = lo
    order.reverse()
    bounds.reverse()
    result = evaluate(problem, PartitionIndex(tuple(bounds)), Strategy.OPTIMAL_PERMUTED,
                      device_order=tuple(order))
    # Prefer the identity order whenever it is already optimal.
    try:
        identity = optimal_dp(problem)
    except InfeasibleAllocationError:
        return result
    if identity.objective <= result.objective:
        return replace(identity, strategy=Strategy.OPTIMAL_PERMUTED,
                       device_order=tuple(range(D)))
    return result

