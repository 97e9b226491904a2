"""Two-stage load-balancing heuristic.

Stage one (``coarse_allocate``) starts from the even split and slides partition
boundaries until every device's layers fit in its memory. Stage two
(``fine_tune``) walks the boundaries left to right, trading single boundary
layers between neighbours so each device's workload approaches the mean.
Nothing here is random: the same problem always yields the same partition.
"""

from __future__ import annotations

from dataclasses import dataclass

from .core import (
    AllocationProblem,
    AllocationResult,
    InfeasibleAllocationError,
    PartitionIndex,
    Strategy,
    even_allocation,
    evaluate,
)


@dataclass(frozen=True)
class HeuristicConfig:
    max_iter: int = 100
    # None means 10 * D sweeps.
    coarse_max_sweeps: int | None = None

    def __post_init__(self):
        if self.max_iter < 1:
            raise ValueError(f"max_iter must be >= 1, got {self.max_iter}")
        if self.coarse_max_sweeps is not None and self.coarse_max_sweeps < 1:
            raise ValueError(f"coarse_max_sweeps must be >= 1, got {self.coarse_max_sweeps}")

    def sweeps_for(self, num_devices: int) -> int:
        return self.coarse_max_sweeps if self.coarse_max_sweeps is not None else 10 * num_devices


@dataclass(frozen=True)
class Move:
    """One accepted boundary move during fine-tuning.

    ``direction`` is +1 when device ``device`` takes the first layer of its
    successor and -1 when it gives its last layer away.
    """

    iteration: int
    device: int
    direction: int
    target: float
    this_workload: float
    next_workload: float
    last_layer_workload: float
    bounds_before: tuple[int, ...]
    bounds_after: tuple[int, ...]


def _mem_ok(problem: AllocationProblem, pi: list[int], i: int) -> bool:
    # Only devices i and i+1 change when pi[i+1] moves.
    dm = problem.dm
    return (problem.segment_memory(pi[i], pi[i + 1]) <= dm[i]
            and problem.segment_memory(pi[i + 1], pi[i + 2]) <= dm[i + 1])


def coarse_allocate(problem: AllocationProblem, cfg: HeuristicConfig | None = None) -> PartitionIndex:
    """Shift boundaries from the even split until every device fits in memory.

    Raises InfeasibleAllocationError when a full sweep changes nothing while
    some device is still over its limit, or when the sweep cap runs out.
    """
    cfg = cfg or HeuristicConfig()
    D, L = problem.num_devices, problem.num_layers
    pi = list(even_allocation(L, D).bounds)
    lm, dm = problem.lm, problem.dm
    am = [problem.segment_memory(pi[i], pi[i + 1]) for i in range(D)]

    def n_layers(i):
        return pi[i + 1] - pi[i]

    for _ in range(cfg.sweeps_for(D)):
        if all(a <= m for a, m in zip(am, dm)):
            return PartitionIndex(tuple(pi))
        snapshot = list(pi)
        for i in range(D - 1):
            # Over budget: hand the top layer to the next device.
            while am[i] > dm[i] and n_layers(i) > 1:
                pi[i + 1] -= 1
                moved = int(lm[pi[i + 1]])
                am[i] -= moved
                am[i + 1] += moved
            # Strict slack: absorb the next device's first layer.
            while dm[i] > am[i] + lm[pi[i + 1]] and n_layers(i + 1) > 1:
                moved = int(lm[pi[i + 1]])
                pi[i + 1] += 1
                am[i] += moved
                am[i + 1] -= moved
        if pi == snapshot:
            raise InfeasibleAllocationError("Cannot fulfill memory requirement")
    if all(a <= m for a, m in zip(am, dm)):
        return PartitionIndex(tuple(pi))
    raise InfeasibleAllocationError(
        f"Cannot fulfill memory requirement within {cfg.sweeps_for(D)} sweeps"
    )


def fine_tune(problem: AllocationProblem, pi: PartitionIndex, cfg: HeuristicConfig | None = None,
              trace: list[Move] | None = None) -> PartitionIndex:
    """Move boundary layers between neighbours toward the mean workload.

    The target is recomputed once per pass; workloads are refreshed after
    every accepted move. A device takes its successor's first layer when it
    is below target, otherwise it gives away its last layer when the
    successor is below target and it would stay above target without that
    layer. Both moves must keep each device non-empty and within memory.
    Accepted moves are appended to ``trace`` when one is supplied.
    """
    cfg = cfg or HeuristicConfig()
    problem.check_partition(pi)
    D = problem.num_devices
    b = list(pi.bounds)

    def w(i):
        return problem.segment_workload(i, b[i], b[i + 1])

    def n_layers(i):
        return b[i + 1] - b[i]

    counter = 0
    while counter < cfg.max_iter:
        target = sum(w(i) for i in range(D)) / D
        snapshot = list(b)
        for i in range(D - 1):
            this_w, next_w = w(i), w(i + 1)
            last_w = problem.layer_workload(i, b[i + 1] - 1)
            before = tuple(b)
            direction = 0
            if this_w < target and n_layers(i + 1) > 1:
                b[i + 1] += 1
                if _mem_ok(problem, b, i):
                    direction = 1
                else:
                    b[i + 1] -= 1
            if direction == 0 and next_w < target and this_w - last_w > target and n_layers(i) > 1:
                b[i + 1] -= 1
                if _mem_ok(problem, b, i):
                    direction = -1
                else:
                    b[i + 1] += 1
            if direction and trace is not None:
                trace.append(Move(counter, i, direction, target, this_w, next_w, last_w,
                                  before, tuple(b)))
        if b == snapshot:
            break
        counter += 1
    return PartitionIndex(tuple(b))


def sky_allocate(problem: AllocationProblem, cfg: HeuristicConfig | None = None,
                 trace: list[Move] | None = None) -> AllocationResult:
    """Coarse memory allocation followed by workload fine-tuning."""
    cfg = cfg or HeuristicConfig()
    pi = coarse_allocate(problem, cfg)
    pi = fine_tune(problem, pi, cfg, trace)
    return evaluate(problem, pi, Strategy.HEURISTIC)
