"""
Weak scaling across fleet seeds
===============================

Model and fleet grow together. Because the fleet is random, the interesting
question is how the heuristic's advantage varies from seed to seed.
"""

# %%
import dataclasses

import numpy as np

from skyalloc import Strategy, run_scenario
from skyalloc.experiment import preset_weak_scaling

rows = []
for seed in range(10):
    configs = [dataclasses.replace(c, strategies=(Strategy.EVEN, Strategy.HEURISTIC))
               for c in preset_weak_scaling(seed)]
    rows.append([run_scenario(c).reduction_vs_even(Strategy.HEURISTIC) for c in configs])
table = np.array(rows)

# %%
print("seed   (40,15)  (80,31)  (160,63)")
for seed, row in enumerate(table):
    print(f"{seed:>4}  " + "  ".join(f"{x:7.1f}%" for x in row))
print("mean  " + "  ".join(f"{x:7.1f}%" for x in table.mean(axis=0)))

# %%
wins = int((table.argmax(axis=1) == 2).sum())
print(f"largest reduction at the biggest scale on {wins}/10 seeds")
