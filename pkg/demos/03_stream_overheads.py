# %% [markdown]
# # What does access tracking cost?
#
# STREAM kernels over 2M-element arrays, compiled three ways: raw loops,
# a "generic" path calling a separately compiled tracking routine through a
# function pointer, and a "fast" path with the tracking pasted into the loop.
# Tracked runs happen inside an active region (counting) and with no region
# (the gate is closed).

# %%
from mdmp.benchmarks import StreamConfig, run_stream
from mdmp.metrics import overhead_ratio

res = run_stream(StreamConfig(nelems=2_000_000, repeats=10))
base = res.mean("baseline", "raw")
for cfg, path in [("inside", "generic"), ("inside", "fast"), ("inactive", "generic"),
                  ("inactive", "fast")]:
    ratios = overhead_ratio(res.mean(cfg, path), base)
    print(f"{cfg:8s} {path:7s}", {k: round(v, 1) for k, v in ratios.items()})

# %% [markdown]
# With the region inactive nothing is counted at all:

# %%
print(res.counter_updates)
