"""Purpose-built kernels that exercise runtime paths the benchmarks never hit."""
from __future__ import annotations

import numpy as np

from ..metrics import BenchResult, MessageLog
from ..runtime import ModeHint, Runtime
from ..transport import Endpoint, World
from .config import BenchConfig, BenchMode, checksum


def demotion_rank(ep: Endpoint, cfg: BenchConfig, bad_iteration: int):
    """Symmetric exchange where rank 0 writes a sent element once more in ``bad_iteration``.

    The extra write lands after the send call site, so in a managed
    iteration it exceeds the profiled trigger and the region demotes.
    """
    rt = Runtime(ep, fast_accessors=cfg.fast_accessors, chunk=cfg.chunk)
    n = cfg.nelems
    send = rt.create_buffer("float64", n)
    recv = rt.create_buffer("float64", n)
    recv.load(np.arange(n, dtype=np.float64) * (ep.rank + 1))
    peer = 1 - ep.rank
    hint = ModeHint.AUTO if cfg.mode is BenchMode.MANAGED else ModeHint.PASSTHROUGH
    region = rt.region_begin(hint)
    rt.track(send, 0, n, region)
    rt.track(recv, 0, n, region)
    rd = rt.accessors(recv).read
    wr = rt.accessors(send).write
    for it in range(1, cfg.iterations + 1):
        rt.iteration_begin(region)
        for i in range(n):
            wr(i, rd(i) * 0.5 + it + ep.rank)
        rt.post_send(region, send, 0, n, peer)
        if ep.rank == 0 and it == bad_iteration:
            wr(0, send.read(0) + 1.0)
        rt.post_recv(region, recv, 0, n, peer)
        rt.iteration_end(region)
    report = rt.region_end(region)
    return rt.log, report, send.snapshot(), recv.snapshot()


def run_demotion_probe(cfg: BenchConfig | None = None, bad_iteration: int = 3) -> BenchResult:
    """Two ranks, ``cfg.iterations`` iterations (default 5); reports carry the mode history."""
    cfg = cfg or BenchConfig(benchmark="demotion", nelems=16, iterations=5)
    outs = World(2, cfg.cost, timeout=cfg.timeout).run(
        demotion_rank, [(cfg, bad_iteration)] * 2)
    arrays = [a for o in outs for a in o[2:]]
    return BenchResult(
        wall_times=[0.0], config=cfg, log=MessageLog.merge(o[0] for o in outs),
        reports=[o[1] for o in outs], checksum=checksum(arrays),
        buffers={(r, name): o[k] for r, o in enumerate(outs) for k, name in ((2, "send"), (3, "recv"))})
