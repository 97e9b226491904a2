"""Deterministic timing model of layer-wise model-parallel training.

One iteration runs the forward pass device by device, then the backward pass
in reverse order. The link between devices ``i`` and ``i + 1`` costs
``ct[i + 1]`` in each direction. There is no micro-batch overlap, so the
sequential makespan is just the sum of every compute and hop component.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .core import AllocationProblem, PartitionIndex, memory_feasible

DEFAULT_SEC_PER_FLOP = 1e-12
DEFAULT_BACKWARD_RATIO = 2.0


class OutOfMemoryError(RuntimeError):
    """The partition overflows a device, so the run could not be executed."""

    def __init__(self, device: int, needed: int, available: int):
        super().__init__(f"device {device} needs {needed} bytes but has {available}")
        self.device = device


@dataclass(frozen=True)
class IterationTiming:
    forward_per_device: tuple[float, ...]
    backward_per_device: tuple[float, ...]
    comm_per_hop: tuple[float, ...]
    total_forward: float
    total_backward: float
    makespan_sequential: float
    stage_time_max: float

    def stage_times(self) -> list[float]:
        """Per-device compute plus the latency of its incoming link in both directions."""
        hop_in = (0.0, *self.comm_per_hop)
        return [f + b + 2 * c for f, b, c in
                zip(self.forward_per_device, self.backward_per_device, hop_in)]

    def to_dict(self) -> dict:
        return {
            "forward_per_device": list(self.forward_per_device),
            "backward_per_device": list(self.backward_per_device),
            "comm_per_hop": list(self.comm_per_hop),
            "total_forward": self.total_forward,
            "total_backward": self.total_backward,
            "makespan_sequential": self.makespan_sequential,
            "stage_time_max": self.stage_time_max,
        }


def _check_memory(problem: AllocationProblem, pi: PartitionIndex) -> None:
    for i, ok in enumerate(memory_feasible(problem, pi)):
        if not ok:
            lo, hi = pi.bounds[i], pi.bounds[i + 1]
            raise OutOfMemoryError(i, problem.segment_memory(lo, hi), int(problem.dm[i]))


def _timing(forward: np.ndarray, backward: np.ndarray, hops: np.ndarray) -> IterationTiming:
    comm = math.fsum(hops)
    total_forward = math.fsum(forward) + comm
    total_backward = math.fsum(backward) + comm
    hop_in = np.concatenate([[0.0], hops])
    stage = forward + backward + 2 * hop_in
    return IterationTiming(
        forward_per_device=tuple(forward.tolist()),
        backward_per_device=tuple(backward.tolist()),
        comm_per_hop=tuple(hops.tolist()),
        total_forward=total_forward,
        total_backward=total_backward,
        makespan_sequential=total_forward + total_backward,
        stage_time_max=float(stage.max()),
    )


def device_flops(problem: AllocationProblem, pi: PartitionIndex) -> np.ndarray:
    b = np.asarray(pi.bounds)
    return problem.flops_prefix[b[1:]] - problem.flops_prefix[b[:-1]]


def simulate_iteration(problem: AllocationProblem, pi: PartitionIndex,
                       calib: float = DEFAULT_SEC_PER_FLOP,
                       beta: float = DEFAULT_BACKWARD_RATIO) -> IterationTiming:
    """Timing of one forward + backward iteration; refuses out-of-memory partitions."""
    problem.check_partition(pi)
    _check_memory(problem, pi)
    forward = problem.dt * calib * device_flops(problem, pi)
    return _timing(forward, beta * forward, problem.ct[1:].astype(float))


@dataclass(frozen=True)
class TrainingStats:
    iterations: tuple[IterationTiming, ...]

    def _series(self, attr: str) -> np.ndarray:
        return np.array([getattr(t, attr) for t in self.iterations])

    def summary(self) -> dict:
        out = {"iterations": len(self.iterations)}
        for attr in ("total_forward", "total_backward", "makespan_sequential", "stage_time_max"):
            s = self._series(attr)
            total = math.fsum(s)
            out[attr] = {"mean": total / len(s), "min": float(s.min()), "max": float(s.max()),
                         "sum": total}
        return out


def run_training(problem: AllocationProblem, pi: PartitionIndex, iterations: int = 30,
                 calib: float = DEFAULT_SEC_PER_FLOP, beta: float = DEFAULT_BACKWARD_RATIO,
                 jitter: float = 0.0, seed: int | None = None) -> TrainingStats:
    """Simulate ``iterations`` iterations.

    With ``jitter > 0`` every device's compute time in every iteration is
    scaled by an independent factor drawn uniformly from ``[1 - jitter, 1 + jitter]``
    using ``seed``.
    """
    if iterations < 1:
        raise ValueError(f"iterations must be >= 1, got {iterations}")
    if not 0 <= jitter < 1:
        raise ValueError("jitter must lie in [0, 1)")
    base = simulate_iteration(problem, pi, calib, beta)
    if jitter == 0:
        return TrainingStats((base,) * iterations)
    rng = np.random.default_rng(seed)
    forward0 = np.asarray(base.forward_per_device)
    hops = np.asarray(base.comm_per_hop)
    timings = []
    for _ in range(iterations):
        fwd = forward0 * rng.uniform(1 - jitter, 1 + jitter, forward0.size)
        bwd = beta * forward0 * rng.uniform(1 - jitter, 1 + jitter, forward0.size)
        timings.append(_timing(fwd, bwd, hops))
    return TrainingStats(tuple(timings))
