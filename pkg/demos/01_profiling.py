"""
Profiling a BERT model and a heterogeneous fleet
================================================

Layer FLOPs and memory come from closed-form counts; devices come from a
seeded fleet whose benchmark times are slowed down by a truncated normal.
"""

# %%
# Every encoder contributes five layers, plus embedding, pooler and classifier.
import numpy as np

from skyalloc import BertSpec, FleetSpec, bert_layer_profiles, sample_fleet
from skyalloc.profiling import bert_parameter_count, dump_profiles

spec = BertSpec(num_encoders=80)
layers = bert_layer_profiles(spec)
print(f"{spec.num_encoders} encoders -> {len(layers)} layers")

# %%
# The largest layers by compute are the feed-forward projections.
flops = np.array([l.flops for l in layers])
for j in np.argsort(flops)[::-1][:3]:
    print(f"  {layers[j].name:<24} {flops[j]:.3e} FLOPs  {layers[j].mem_bytes / 2**20:8.1f} MiB")
print(f"total {flops.sum():.3e} FLOPs per forward pass")

# %%
# Sanity check against the well-known BERT-Large size.
large = bert_parameter_count(BertSpec(num_encoders=24))
print(f"BERT-Large parameters: {large / 1e6:.1f}M")

# %%
# A 15-device fleet. bench_time = 1 + slow_down, so the spread is roughly 2x..8x.
fleet = sample_fleet(FleetSpec(device_count=15, seed=16))
times = np.array([d.bench_time for d in fleet])
print("bench times:", np.round(times, 2))
print(f"fastest/slowest ratio {times.max() / times.min():.2f}")

# %%
# Profiles can be saved and reloaded as JSON.
dump_profiles(layers, fleet, "profiles.json")
print("wrote profiles.json")
