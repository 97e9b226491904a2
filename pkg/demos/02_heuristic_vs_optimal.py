"""
Heuristic allocation against the exact optimum
==============================================

A small instance where the whole pipeline can be followed by eye: coarse
memory allocation, fine-tuning moves, and the dynamic-programming optimum.
"""

# %%
from skyalloc import (AllocationProblem, DeviceProfile, LayerProfile, even_allocation, memory_feasible,
                      objective, optimal_dp, optimal_permuted, sky_allocate)
from skyalloc.heuristic import coarse_allocate

layers = [LayerProfile(f, m) for f, m in zip([4, 2, 6, 3, 5, 1, 2, 7, 3, 2], [3, 1, 4, 2, 3, 1, 1, 5, 2, 1])]
devices = [DeviceProfile(1.0, 6), DeviceProfile(1.5, 30), DeviceProfile(2.0, 9)]
problem = AllocationProblem(layers, devices)

# %%
# The even split ignores device speed and memory; here it does not even fit.
even = even_allocation(problem.num_layers, problem.num_devices)
print("even        ", even.bounds, "q =", objective(problem, even), "fits:", memory_feasible(problem, even))

# %%
# Device 0 holds only 6 bytes, so coarse allocation shifts layers onward.
# Fine-tuning then balances the workloads.
print("coarse      ", coarse_allocate(problem).bounds)
trace = []
heur = sky_allocate(problem, trace=trace)
for mv in trace:
    kind = "take" if mv.direction == 1 else "give"
    print(f"  pass {mv.iteration}: device {mv.device} {kind}s  {mv.bounds_before} -> {mv.bounds_after}")
print("heuristic   ", heur.partition.bounds, "q =", heur.objective)

# %%
# The exact solver gives the best contiguous split for this device order.
best = optimal_dp(problem)
print("optimal-dp  ", best.partition.bounds, "q =", best.objective)
print(f"heuristic gap {heur.objective / best.objective:.3f}x")

# %%
# Reordering the devices can do even better.
perm = optimal_permuted(problem)
print("permuted    ", perm.partition.bounds, "order", perm.device_order, "q =", perm.objective)

# %%
# Fine-tuning can also oscillate: a layer taken in one step is given back in
# the next, and the loop stops only at max_iter.
stuck = AllocationProblem(layers, [DeviceProfile(1.0, 9), DeviceProfile(1.5, 12), DeviceProfile(2.0, 9)])
trace = []
sky_allocate(stuck, trace=trace)
print(f"{len(trace)} moves, last two:", [(m.device, m.direction) for m in trace[-2:]])
