"""
Strong scaling: a fixed model on more devices
=============================================

The 403-layer model on 15, 31 and 63 devices, comparing simulated iteration
time of each strategy with the even split.
"""

# %%
from skyalloc import Strategy, emit_report, run_scenario
from skyalloc.experiment import preset_strong_scaling

reports = [run_scenario(cfg) for cfg in preset_strong_scaling(seed=0)]

# %%
for r in reports:
    parts = [f"D={r.num_devices:<3}"]
    for o in r.outcomes:
        red = r.reduction_vs_even(o.strategy)
        parts.append(f"{o.strategy.value} {o.makespan:.3f}s ({red:+.1f}%)")
    print("  ".join(parts))

# %%
# The same data as a markdown table.
print(emit_report(reports, "md"))
