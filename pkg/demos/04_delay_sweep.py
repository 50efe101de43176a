# %% [markdown]
# # Where would fine-grained messaging pay off?
#
# DelayPingPong adds a busy loop per element to the copy. Bulk mode pays the
# latency twice per round trip; managed mode can overlap it with the copy, but
# pays for every per-element message. The ratio below is managed time over
# bulk time for a modelled link with 50 us latency and 1 ns/byte.
#
# Rank threads here share one interpreter lock, so the ranks cannot compute
# in parallel: the ratio falls as the delay grows but stays above 1 on this
# kind of host. The same sweep is available from the command line:
#
#     mdmp sweep --benchmark delay --elements 1024 --iters 10 \
#         --delay 0,16,64,256,1024,4096,16384 --modes bulk,managed \
#         --alpha 50e-6 --beta 1e-9

# %%
from mdmp.benchmarks import BenchConfig, run_delay_pingpong

base = BenchConfig(nelems=1024, iterations=10, repeats=2, alpha=50e-6, beta=1e-9)
for d in (0, 64, 1024, 16384):
    bulk = run_delay_pingpong(base.with_(delay_elems=d, mode="bulk")).mean
    managed = run_delay_pingpong(base.with_(delay_elems=d, mode="managed")).mean
    print(f"delay {d:6d}: bulk {bulk * 1e3:8.2f} ms  managed {managed * 1e3:8.2f} ms  "
          f"ratio {managed / bulk:5.2f}")

# %% [markdown]
# Sending only a few elements shrinks the gap, because the per-message cost
# is paid only for what is communicated.

# %%
from mdmp.benchmarks import run_selective_pingpong

for s in (1024, 256, 32, 1):
    cfg = BenchConfig(nelems=1024, selected=s, iterations=10, repeats=3)
    b = run_selective_pingpong(cfg.with_(mode="bulk")).median
    m = run_selective_pingpong(cfg).median
    print(f"selected {s:5d}: ratio {m / b:5.2f}")
