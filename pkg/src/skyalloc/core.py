"""Domain types and workload arithmetic shared by every allocator and the simulator.

A model is an ordered list of layers, a fleet is an ordered list of devices, and
an allocation hands each device one contiguous, non-empty run of layers. The
allocation is stored as a partition index ``bounds`` of length ``D + 1``: device
``i`` owns layers ``bounds[i] .. bounds[i + 1] - 1``.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from enum import Enum
from typing import Sequence

import numpy as np


class AllocationError(Exception):
    """Base class for allocation failures."""


class InfeasibleAllocationError(AllocationError):
    """No partition satisfies the per-device memory limits (or L < D)."""


class PartitionError(ValueError):
    """A partition index violates its structural invariants."""


class Strategy(str, Enum):
    EVEN = "even"
    HEURISTIC = "heuristic"
    OPTIMAL_DP = "optimal-dp"
    OPTIMAL_EXHAUSTIVE = "optimal-exhaustive"
    OPTIMAL_PERMUTED = "optimal-permuted"


@dataclass(frozen=True)
class LayerProfile:
    """Forward FLOPs and peak training memory of one discrete layer."""

    flops: float
    mem_bytes: int
    name: str = ""

    def __post_init__(self):
        if not self.flops > 0:
            raise ValueError(f"layer flops must be > 0, got {self.flops}")
        if not self.mem_bytes > 0:
            raise ValueError(f"layer mem_bytes must be > 0, got {self.mem_bytes}")


@dataclass(frozen=True)
class DeviceProfile:
    """Benchmark time (relative slowness), memory capacity and link latency of one device."""

    bench_time: float
    mem_bytes: int
    comm_latency: float = 0.0

    def __post_init__(self):
        if not self.bench_time > 0:
            raise ValueError(f"bench_time must be > 0, got {self.bench_time}")
        if not self.mem_bytes > 0:
            raise ValueError(f"device mem_bytes must be > 0, got {self.mem_bytes}")
        if not self.comm_latency >= 0:
            raise ValueError(f"comm_latency must be >= 0, got {self.comm_latency}")


@dataclass(frozen=True)
class PartitionIndex:
    """Monotone layer boundaries; device ``i`` holds ``bounds[i]:bounds[i+1]``."""

    bounds: tuple[int, ...]

    def __post_init__(self):
        b = tuple(int(x) for x in self.bounds)
        object.__setattr__(self, "bounds", b)
        if len(b) < 2:
            raise PartitionError("partition index needs at least 2 entries (one device)")
        if b[0] != 0:
            raise PartitionError(f"partition index must start at 0, got {b[0]}")
        for lo, hi in zip(b, b[1:]):
            if hi <= lo:
                raise PartitionError(f"partition index must be strictly increasing: {list(b)}")

    @classmethod
    def from_counts(cls, counts: Sequence[int]) -> "PartitionIndex":
        return cls((0, *np.cumsum(counts).tolist()))

    @property
    def num_devices(self) -> int:
        return len(self.bounds) - 1

    @property
    def num_layers(self) -> int:
        return self.bounds[-1]

    def layer_range(self, i: int) -> range:
        return range(self.bounds[i], self.bounds[i + 1])

    def counts(self) -> list[int]:
        return [hi - lo for lo, hi in zip(self.bounds, self.bounds[1:])]

    def first_layer(self, i: int) -> int:
        """Lowest layer index held by device ``i`` (the MILP's ``z_i``)."""
        return self.bounds[i]

    def last_layer(self, i: int) -> int:
        """Highest layer index held by device ``i`` (the MILP's ``y_i``)."""
        return self.bounds[i + 1] - 1

    def assignment(self) -> np.ndarray:
        """Device id of every layer, length L."""
        return np.repeat(np.arange(self.num_devices), self.counts())

    def __len__(self):
        return len(self.bounds)

    def __iter__(self):
        return iter(self.bounds)

    def __getitem__(self, k):
        return self.bounds[k]


def _frozen(a) -> np.ndarray:
    arr = np.asarray(a)
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True)
class AllocationProblem:
    """An ordered model and an ordered fleet.

    ``sec_per_flop`` converts ``bench_time * flops`` into seconds so that the
    latency term shares units with the compute term. The default of 1.0 keeps
    the raw ``dt * sum(lf) + ct`` arithmetic.
    """

    layers: tuple[LayerProfile, ...]
    devices: tuple[DeviceProfile, ...]
    sec_per_flop: float = 1.0

    lf: np.ndarray = field(init=False, repr=False, compare=False)
    lm: np.ndarray = field(init=False, repr=False, compare=False)
    dt: np.ndarray = field(init=False, repr=False, compare=False)
    dm: np.ndarray = field(init=False, repr=False, compare=False)
    ct: np.ndarray = field(init=False, repr=False, compare=False)
    flops_prefix: np.ndarray = field(init=False, repr=False, compare=False)
    mem_prefix: np.ndarray = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        layers = tuple(self.layers)
        devices = tuple(self.devices)
        object.__setattr__(self, "layers", layers)
        object.__setattr__(self, "devices", devices)
        if not devices:
            raise ValueError("problem needs at least one device")
        if len(layers) < len(devices):
            raise InfeasibleAllocationError(
                f"{len(layers)} layers cannot cover {len(devices)} devices with >= 1 layer each"
            )
        if not self.sec_per_flop > 0:
            raise ValueError("sec_per_flop must be > 0")
        set_ = object.__setattr__
        set_(self, "lf", _frozen(np.array([l.flops for l in layers], dtype=float)))
        # Memory stays integral so feasibility checks are exact.
        set_(self, "lm", _frozen(np.array([l.mem_bytes for l in layers], dtype=np.int64)))
        set_(self, "dt", _frozen(np.array([d.bench_time for d in devices], dtype=float)))
        set_(self, "dm", _frozen(np.array([d.mem_bytes for d in devices], dtype=np.int64)))
        set_(self, "ct", _frozen(np.array([d.comm_latency for d in devices], dtype=float)))
        set_(self, "flops_prefix", _frozen(np.concatenate([[0.0], np.cumsum(self.lf)])))
        set_(self, "mem_prefix", _frozen(np.concatenate([[0], np.cumsum(self.lm)]).astype(np.int64)))

    @property
    def num_layers(self) -> int:
        return len(self.layers)

    @property
    def num_devices(self) -> int:
        return len(self.devices)

    def check_partition(self, pi: PartitionIndex) -> None:
        if pi.num_devices != self.num_devices or pi.num_layers != self.num_layers:
            raise PartitionError(
                f"partition {list(pi.bounds)} does not fit {self.num_layers} layers "
                f"on {self.num_devices} devices"
            )

    def segment_workload(self, i: int, lo: int, hi: int) -> float:
        """Workload of device ``i`` if it held layers ``lo .. hi - 1``.

        All solvers go through this expression (or its vectorised twin in
        ``exact``) so that objective values compare bit-for-bit.
        """
        flops = self.flops_prefix[hi] - self.flops_prefix[lo]
        return float(self.dt[i] * self.sec_per_flop * flops + self.ct[i])

    def segment_memory(self, lo: int, hi: int) -> int:
        return int(self.mem_prefix[hi] - self.mem_prefix[lo])

    def layer_workload(self, i: int, j: int) -> float:
        """Marginal workload layer ``j`` adds to device ``i`` (no latency term)."""
        return float(self.dt[i] * self.sec_per_flop * self.lf[j])


@dataclass(frozen=True)
class AllocationResult:
    partition: PartitionIndex
    workloads: tuple[float, ...]
    objective: float
    feasible: bool
    strategy: Strategy
    # Pipeline position -> original device index; None means identity order.
    device_order: tuple[int, ...] | None = None

    def to_dict(self) -> dict:
        return {
            "strategy": self.strategy.value,
            "partition": list(self.partition.bounds),
            "device_order": None if self.device_order is None else list(self.device_order),
            "workloads": list(self.workloads),
            "objective": self.objective,
            "feasible": self.feasible,
        }


def device_workload(problem: AllocationProblem, pi: PartitionIndex, i: int) -> float:
    """``dt_i * sum(flops of device i's layers) + ct_i``."""
    problem.check_partition(pi)
    if not 0 <= i < problem.num_devices:
        raise IndexError(f"device index {i} out of range for {problem.num_devices} devices")
    return problem.segment_workload(i, pi.bounds[i], pi.bounds[i + 1])


def workloads(problem: AllocationProblem, pi: PartitionIndex) -> list[float]:
    problem.check_partition(pi)
    b = pi.bounds
    return [problem.segment_workload(i, b[i], b[i + 1]) for i in range(problem.num_devices)]


def objective(problem: AllocationProblem, pi: PartitionIndex) -> float:
    """Min-max objective: the largest device workload."""
    return max(workloads(problem, pi))


def allocated_memory(problem: AllocationProblem, pi: PartitionIndex) -> list[int]:
    problem.check_partition(pi)
    b = pi.bounds
    return [problem.segment_memory(b[i], b[i + 1]) for i in range(problem.num_devices)]


def memory_feasible(problem: AllocationProblem, pi: PartitionIndex) -> list[bool]:
    return [am <= int(dm) for am, dm in zip(allocated_memory(problem, pi), problem.dm)]


def even_allocation(num_layers: int, num_devices: int) -> PartitionIndex:
    """Equal layer counts; the first ``L mod D`` devices take one extra layer."""
    if num_devices < 1:
        raise ValueError("need at least one device")
    if num_layers < num_devices:
        raise InfeasibleAllocationError(
            f"{num_layers} layers cannot cover {num_devices} devices with >= 1 layer each"
        )
    base, extra = divmod(num_layers, num_devices)
    return PartitionIndex.from_counts([base + (i < extra) for i in range(num_devices)])


def evaluate(problem: AllocationProblem, pi: PartitionIndex, strategy: Strategy,
             device_order: tuple[int, ...] | None = None) -> AllocationResult:
    """Package a partition as an AllocationResult (workloads, objective, feasibility)."""
    if device_order is not None:
        problem = reorder_devices(problem, device_order)
    w = workloads(problem, pi)
    return AllocationResult(
        partition=pi,
        workloads=tuple(w),
        objective=max(w),
        feasible=all(memory_feasible(problem, pi)),
        strategy=strategy,
        device_order=device_order,
    )


def reorder_devices(problem: AllocationProblem, order: Sequence[int]) -> AllocationProblem:
    """Same model with the fleet placed in pipeline order ``order``."""
    return AllocationProblem(problem.layers, tuple(problem.devices[k] for k in order),
                             problem.sec_per_flop)
