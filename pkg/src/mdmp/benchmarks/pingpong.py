"""The PingPong family: plain, selective, delayed and selective-delayed.

Rank 0 copies its receive buffer into its send buffer, sends it and
receives the reply; rank 1 receives, copies and sends back.  The copy loop
runs through instrumented accessors over all elements, with the optional
delay routine between the read and the write of every element.  Only the
selected elements (first ceil(s/2), last floor(s/2)) are communicated.

In managed mode rank 1's copy reads wait for each element as it arrives,
and both ranks' copy writes trigger per-element sends: the intermingling
the runtime exists for.
"""
from __future__ import annotations

import time

import numpy as np

from ..compiled import delay as delay_routine
from ..errors import ConfigError
from ..metrics import BenchResult, MessageLog
from ..runtime import ModeHint, Runtime
from ..transport import Endpoint, World
from .config import PINGPONG_FAMILY, BenchConfig, BenchMode, checksum, selected_ranges


def initial_data(cfg: BenchConfig) -> np.ndarray:
    rng = np.random.default_rng(cfg.seed)
    vals = rng.standard_normal(cfg.nelems) * 100.0
    if cfg.elem_kind.value == "int32":
        vals = np.round(vals)
    return vals.astype(cfg.elem_kind.dtype)


def pingpong_rank(ep: Endpoint, cfg: BenchConfig) -> dict:
    """One rank's side of a PingPong-family run."""
    if ep.nranks != 2:
        raise ConfigError(f"PingPong needs exactly 2 ranks, got {ep.nranks}")
    rt = Runtime(ep, fast_accessors=cfg.fast_accessors, chunk=cfg.chunk,
                 log_timestamps=cfg.log_timestamps)
    n = cfg.nelems
    send = rt.create_buffer(cfg.elem_kind, n)
    recv = rt.create_buffer(cfg.elem_kind, n)
    ranges = selected_ranges(n, cfg.selected)
    peer = 1 - ep.rank
    hint = ModeHint.AUTO if cfg.mode is BenchMode.MANAGED else ModeHint.PASSTHROUGH
    d = cfg.delay_elems
    data = initial_data(cfg)
    times, reports = [], []
    delay_routine(d)  # load the compiled routine outside the timed loop

    for _ in range(cfg.repeats):
        send.load(0)
        recv.load(data if ep.rank == 0 else 0)
        region = rt.region_begin(hint)
        # declared ahead of the loop so the first iteration's profile is complete
        for s, c in ranges:
            rt.track(send, s, c, region)
            rt.track(recv, s, c, region)
        rd = rt.accessors(recv).read
        wr = rt.accessors(send).write
        ep.barrier()
        t0 = time.perf_counter()
        for _it in range(cfg.iterations):
            rt.iteration_begin(region)
            if ep.rank == 1:
                incoming = [rt.post_recv(region, recv, s, c, peer) for s, c in ranges]
                for dr in incoming:
                    rt.complete(region, dr)
            if d:
                for i in range(n):
                    v = rd(i)
                    delay_routine(d)
                    wr(i, v)
            else:
                for i in range(n):
                    wr(i, rd(i))
            for s, c in ranges:
                rt.post_send(region, send, s, c, peer)
            if ep.rank == 0:
                for s, c in ranges:
                    rt.post_recv(region, recv, s, c, peer)
            rt.iteration_end(region)
        times.append(time.perf_counter() - t0)
        reports.append(rt.region_end(region))

    return {"times": times, "log": rt.log, "reports": reports,
            "send": send.snapshot(), "recv": recv.snapshot()}


def _collect(cfg: BenchConfig, outs: list[dict]) -> BenchResult:
    outs = sorted(outs, key=lambda o: o["log"].rank)
    arrays = [a for o in outs for a in (o["send"], o["recv"])]
    return BenchResult(
        wall_times=outs[0]["times"], config=cfg,
        log=MessageLog.merge(o["log"] for o in outs),
        reports=[r for o in outs for r in o["reports"]],
        checksum=checksum(arrays),
        buffers={(o["log"].rank, name): o[name] for o in outs for name in ("send", "recv")})


def run_family(cfg: BenchConfig, endpoint: Endpoint | None = None) -> BenchResult:
    """Run a PingPong-family benchmark.

    Without ``endpoint`` both ranks run in-process; with one (socket
    transport) only the local rank runs and the result covers that rank.
    """
    if cfg.benchmark not in PINGPONG_FAMILY:
        raise ConfigError(f"{cfg.benchmark!r} is not a PingPong-family benchmark")
    if endpoint is not None:
        return _collect(cfg, [pingpong_rank(endpoint, cfg)])
    world = World(2, cfg.cost, timeout=cfg.timeout)
    return _collect(cfg, world.run(pingpong_rank, [(cfg,), (cfg,)]))


def run_pingpong(cfg: BenchConfig, endpoint: Endpoint | None = None) -> BenchResult:
    return run_family(cfg.with_(benchmark="pingpong", selected=cfg.nelems, delay_elems=0), endpoint)


def run_selective_pingpong(cfg: BenchConfig, endpoint: Endpoint | None = None) -> BenchResult:
    return run_family(cfg.with_(benchmark="selective", delay_elems=0), endpoint)


def run_delay_pingpong(cfg: BenchConfig, endpoint: Endpoint | None = None) -> BenchResult:
    return run_family(cfg.with_(benchmark="delay", selected=cfg.nelems), endpoint)


def run_selective_delay_pingpong(cfg: BenchConfig, endpoint: Endpoint | None = None) -> BenchResult:
    return run_family(cfg.with_(benchmark="selective-delay"), endpoint)


RUNNERS = {
    "pingpong": run_pingpong,
    "selective": run_selective_pingpong,
    "delay": run_delay_pingpong,
    "selective-delay": run_selective_delay_pingpong,
}
