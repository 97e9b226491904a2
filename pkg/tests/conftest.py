import numpy as np
import pytest

from skyalloc import AllocationProblem, DeviceProfile, LayerProfile
from skyalloc.profiling import sample_slow_down

_ACCEPTANCE_LINES = []


@pytest.fixture
def acceptance_log():
    """Collects one pass/fail line per acceptance criterion for the terminal summary."""

    def record(criterion: str, passed: bool, detail: str = ""):
        status = "PASS" if passed else "FAIL"
        _ACCEPTANCE_LINES.append(f"[{status}] {criterion}" + (f" -- {detail}" if detail else ""))
        return passed

    return record


def pytest_terminal_summary(terminalreporter):
    if _ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in _ACCEPTANCE_LINES:
            terminalreporter.write_line(line)


def make_problem(flops, dt, ct=None, layer_mem=None, dev_mem=None, sec_per_flop=1.0):
    L, D = len(flops), len(dt)
    ct = [0.0] * D if ct is None else ct
    layer_mem = [1] * L if layer_mem is None else layer_mem
    dev_mem = [10**12] * D if dev_mem is None else dev_mem
    layers = [LayerProfile(float(f), int(m)) for f, m in zip(flops, layer_mem)]
    devices = [DeviceProfile(float(t), int(m), float(c)) for t, m, c in zip(dt, dev_mem, ct)]
    return AllocationProblem(layers, devices, sec_per_flop)


def random_problem(rng: np.random.Generator, max_layers: int, max_devices: int,
                   integer: bool = False, memory: str = "mixed") -> AllocationProblem:
    """Random instance with truncated-normal slow-downs on [1, 7].

    ``integer`` draws small integer flops and bench times so exact ties are common.
    ``memory`` is "loose", "tight" or "mixed" (either, at random).
    """
    D = int(rng.integers(1, max_devices + 1))
    L = int(rng.integers(D, max_layers + 1))
    if integer:
        flops = rng.integers(1, 6, L)
        dt = rng.integers(1, 4, D)
    else:
        flops = rng.uniform(1.0, 10.0, L)
        dt = 1.0 + sample_slow_down(rng, D, 4.0, 1.5, 1.0, 7.0)
    ct = rng.uniform(0.0, 2.0, D) if rng.random() < 0.5 else np.zeros(D)
    layer_mem = rng.integers(1, 10, L)
    if memory == "mixed":
        memory = "tight" if rng.random() < 0.5 else "loose"
    if memory == "tight":
        # Around the per-device average with spread, so some instances are infeasible.
        avg = layer_mem.sum() / D
        dev_mem = np.maximum(1, (avg * rng.uniform(0.6, 1.8, D)).astype(int))
    else:
        dev_mem = np.full(D, int(layer_mem.sum()) + 1)
    return make_problem(flops, dt, ct, layer_mem, dev_mem)
