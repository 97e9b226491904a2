"""Load-balanced layer allocation for model-parallel training on heterogeneous devices."""

from .core import (
    AllocationError,
    AllocationProblem,
    AllocationResult,
    DeviceProfile,
    InfeasibleAllocationError,
    LayerProfile,
    PartitionError,
    PartitionIndex,
    Strategy,
    allocated_memory,
    device_workload,
    even_allocation,
    evaluate,
    memory_feasible,
    objective,
    workloads,
)
from .exact import SolverLimitError, optimal_dp, optimal_exhaustive, optimal_permuted
from .experiment import (
    ComparisonReport,
    ScenarioConfig,
    emit_report,
    preset_strong_scaling,
    preset_weak_scaling,
    run_scenario,
)
from .heuristic import HeuristicConfig, Move, coarse_allocate, fine_tune, sky_allocate
from .profiling import (
    BertSpec,
    FleetSpec,
    bert_layer_profiles,
    sample_fleet,
    simulate_device_benchmark,
)
from .simulator import IterationTiming, OutOfMemoryError, run_training, simulate_iteration

__version__ = "0.1.0"
