"""Analytical layer profiles for BERT-style models and seeded synthetic fleets.

Layer FLOPs count one multiply-add as two operations and cover the forward
pass only. Memory per layer is ``4 bytes * (4 * params + activation floats)``:
weights, gradients and two Adam moments, plus the input/output tensors kept
for the backward pass.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .core import DeviceProfile, LayerProfile

BYTES_PER_FLOAT = 4
# weights + gradients + two optimizer moments
STATE_COPIES = 4
GIB = 1 << 30

ENCODER_UNITS = ("qkv", "attention", "attention_output", "intermediate", "output")


@dataclass(frozen=True)
class BertSpec:
    num_encoders: int = 24
    hidden: int = 1024
    heads: int = 16
    intermediate: int = 4096
    seq_len: int = 128
    batch: int = 32
    vocab_size: int = 30522
    max_position: int = 512
    type_vocab_size: int = 2
    num_labels: int = 3

    def __post_init__(self):
        for name in ("num_encoders", "hidden", "heads", "intermediate", "seq_len", "batch",
                     "vocab_size", "max_position", "type_vocab_size", "num_labels"):
            if getattr(self, name) < 1:
                raise ValueError(f"BertSpec.{name} must be >= 1")
        if self.hidden % self.heads:
            raise ValueError(f"hidden size {self.hidden} is not divisible by {self.heads} heads")

    @property
    def num_layers(self) -> int:
        return 5 * self.num_encoders + 3


@dataclass(frozen=True)
class UnitCost:
    name: str
    flops: float
    params: int
    activations: int

    def profile(self) -> LayerProfile:
        mem = BYTES_PER_FLOAT * (STATE_COPIES * self.params + self.activations)
        return LayerProfile(flops=float(self.flops), mem_bytes=int(mem), name=self.name)


def encoder_unit_costs(spec: BertSpec, prefix: str = "") -> list[UnitCost]:
    """Costs of the five discrete units of one encoder block."""
    b, n, h, i, a = spec.batch, spec.seq_len, spec.hidden, spec.intermediate, spec.heads
    bnh = b * n * h
    return [
        UnitCost(prefix + "qkv", 3 * 2 * b * n * h * h, 3 * (h * h + h), bnh + 3 * bnh),
        # QK^T and the probability-weighted sum over V; softmax is not counted.
        UnitCost(prefix + "attention", 2 * (2 * b * n * n * h), 0, 3 * bnh + 2 * b * a * n * n + bnh),
        UnitCost(prefix + "attention_output", 2 * b * n * h * h, h * h + h + 2 * h, bnh + 2 * bnh),
        UnitCost(prefix + "intermediate", 2 * b * n * h * i, h * i + i, bnh + 2 * b * n * i),
        UnitCost(prefix + "output", 2 * b * n * i * h, i * h + h + 2 * h, b * n * i + 2 * bnh),
    ]


def bert_unit_costs(spec: BertSpec) -> list[UnitCost]:
    b, n, h = spec.batch, spec.seq_len, spec.hidden
    emb_rows = spec.vocab_size + spec.max_position + spec.type_vocab_size
    units = [UnitCost("embedding", 7 * b * n * h, emb_rows * h + 2 * h, 2 * b * n * h)]
    for k in range(spec.num_encoders):
        units.extend(encoder_unit_costs(spec, prefix=f"encoder{k}."))
    c = spec.num_labels
    # Pooler and classifier only see the first token of each sequence.
    units.append(UnitCost("pooler", 2 * b * h * h, h * h + h, 2 * b * h))
    units.append(UnitCost("classifier", 2 * b * h * c, h * c + c, b * h + b * c))
    return units


def bert_layer_profiles(spec: BertSpec) -> list[LayerProfile]:
    """Per-layer profiles in model order: embedding, 5 units per encoder, pooler, classifier."""
    return [u.profile() for u in bert_unit_costs(spec)]


def bert_parameter_count(spec: BertSpec) -> int:
    return sum(u.params for u in bert_unit_costs(spec))


# Benchmark network: 10 conv layers, 256 -> 256 channels, 3x3 kernel, padding 1,
# input (32, 256, 64, 64).
CNN_BENCH_LAYERS = 10
CNN_BENCH_FLOPS = 2 * 32 * 64 * 64 * 3 * 3 * 256 * 256


def cnn_benchmark_profiles() -> list[LayerProfile]:
    params = 256 * 256 * 3 * 3 + 256
    act = 2 * 32 * 256 * 64 * 64
    mem = BYTES_PER_FLOAT * (params + act)
    return [LayerProfile(float(CNN_BENCH_FLOPS), mem, f"conv{k}") for k in range(CNN_BENCH_LAYERS)]


def simulate_device_benchmark(device: DeviceProfile, bench: Sequence[LayerProfile] | None = None,
                              iterations: int = 30, sec_per_flop: float = 1e-12) -> float:
    """Seconds the device needs for ``iterations`` forward passes of the benchmark net."""
    if iterations < 1:
        raise ValueError(f"iterations must be >= 1, got {iterations}")
    bench = cnn_benchmark_profiles() if bench is None else bench
    return iterations * sum(l.flops for l in bench) * sec_per_flop * device.bench_time


@dataclass(frozen=True)
class FleetSpec:
    device_count: int
    seed: int = 0
    slow_down_min: float = 1.0
    slow_down_max: float = 7.0
    slow_down_mean: float = 4.0
    slow_down_std: float = 1.5
    base_bench_time: float = 1.0
    mem_bytes_base: int = 16 * GIB
    comm_latency_base: float = 0.01
    mem_jitter: float = 0.1
    latency_jitter: float = 0.1

    def __post_init__(self):
        if self.device_count < 1:
            raise ValueError("device_count must be >= 1")
        if not 1 <= self.slow_down_min <= self.slow_down_max:
            raise ValueError("need 1 <= slow_down_min <= slow_down_max")
        if self.slow_down_std < 0:
            raise ValueError("slow_down_std must be >= 0")
        if self.base_bench_time <= 0 or self.mem_bytes_base <= 0 or self.comm_latency_base < 0:
            raise ValueError("fleet bases must be positive (latency may be 0)")
        if not (0 <= self.mem_jitter < 1 and 0 <= self.latency_jitter < 1):
            raise ValueError("jitter fractions must lie in [0, 1)")


def sample_slow_down(rng: np.random.Generator, size: int, mean: float, std: float,
                     lo: float, hi: float, max_rounds: int = 10_000) -> np.ndarray:
    """Normal(mean, std) draws truncated to ``[lo, hi]`` by resampling."""
    if lo == hi:
        return np.full(size, float(lo))
    if std == 0:
        if not lo <= mean <= hi:
            raise ValueError("degenerate slow_down distribution lies outside its bounds")
        return np.full(size, float(mean))
    out = rng.normal(mean, std, size)
    for _ in range(max_rounds):
        bad = (out < lo) | (out > hi)
        if not bad.any():
            return out
        out[bad] = rng.normal(mean, std, int(bad.sum()))
    raise RuntimeError("truncated normal resampling did not converge; check the bounds")


def sample_fleet(spec: FleetSpec) -> list[DeviceProfile]:
    """Seeded heterogeneous fleet; device ``i`` computes ``1 + slow_down_i`` times slower."""
    rng = np.random.default_rng(spec.seed)
    D = spec.device_count
    slow = sample_slow_down(rng, D, spec.slow_down_mean, spec.slow_down_std,
                            spec.slow_down_min, spec.slow_down_max)
    mem = spec.mem_bytes_base * (1 + rng.uniform(-spec.mem_jitter, spec.mem_jitter, D))
    lat = spec.comm_latency_base * (1 + rng.uniform(-spec.latency_jitter, spec.latency_jitter, D))
    return [
        DeviceProfile(bench_time=float(spec.base_bench_time * (1 + s)), mem_bytes=int(m),
                      comm_latency=float(c))
        for s, m, c in zip(slow, mem, lat)
    ]


def profiles_to_dict(layers: Sequence[LayerProfile], devices: Sequence[DeviceProfile]) -> dict:
    return {
        "layers": [{"name": l.name, "flops": l.flops, "mem_bytes": l.mem_bytes} for l in layers],
        "devices": [{"bench_time": d.bench_time, "mem_bytes": d.mem_bytes,
                     "comm_latency": d.comm_latency} for d in devices],
    }


def profiles_from_dict(doc: dict) -> tuple[list[LayerProfile], list[DeviceProfile]]:
    layers = [LayerProfile(flops=float(l["flops"]), mem_bytes=int(l["mem_bytes"]),
                           name=str(l.get("name", ""))) for l in doc.get("layers", [])]
    devices = [DeviceProfile(bench_time=float(d["bench_time"]), mem_bytes=int(d["mem_bytes"]),
                             comm_latency=float(d["comm_latency"])) for d in doc.get("devices", [])]
    return layers, devices


def dump_profiles(layers, devices, path) -> None:
    with open(path, "w") as fh:
        json.dump(profiles_to_dict(layers, devices), fh, indent=2)


def load_profiles(path) -> tuple[list[LayerProfile], list[DeviceProfile]]:
    with open(path) as fh:
        return profiles_from_dict(json.load(fh))
