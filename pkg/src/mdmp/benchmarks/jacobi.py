"""2-D Jacobi-style stencil with a 1-D row decomposition, in three variants.

Each rank owns MP = M / ranks consecutive rows of an M x N grid and keeps
them in a flat float32 array of (MP + 2) x (N + 2) cells: halo rows 0 and
MP + 1, halo columns 0 and N + 1 (always zero).

bulk
    halo exchange with four non-blocking requests at the top of every
    iteration, then compute and copy back.
hand
    hand-intermingled: every boundary value is sent as its own message the
    moment it is computed; halos land in temporary rows and are installed
    after the copy-back.
managed
    plain loop code with send/recv directives; the runtime learns when the
    boundary rows are final and sends them element by element.

All variants evaluate ``0.25 * (up + down + left + right - edge)`` left to
right in double precision and store to float32, so their results are
bit-identical to :func:`serial_jacobi`.
"""
from __future__ import annotations

import time

import numpy as np

from ..errors import ConfigError
from ..metrics import JacobiResult, MessageLog
from ..runtime import ModeHint, Runtime
from ..transport import NULL_RANK, Endpoint, World
from .config import BenchConfig, BenchMode, JacobiVariant

TAG_DOWN = 1  # data travelling to the next rank
TAG_UP = 2  # data travelling to the previous rank


def make_edge(cfg: BenchConfig) -> np.ndarray:
    rng = np.random.default_rng(cfg.seed)
    return rng.random((cfg.rows, cfg.cols), dtype=np.float32)


def serial_jacobi(edge: np.ndarray, maxiter: int) -> np.ndarray:
    """Reference solution on the undivided grid; returns the final interior."""
    m, n = edge.shape
    old = np.zeros((m + 2, n + 2), dtype=np.float32)
    e = edge.astype(np.float64)
    for _ in range(maxiter):
        o = old.astype(np.float64)
        new = 0.25 * ((((o[:-2, 1:-1] + o[2:, 1:-1]) + o[1:-1, :-2]) + o[1:-1, 2:]) - e)
        old[1:-1, 1:-1] = new.astype(np.float32)
    return old[1:-1, 1:-1].copy()


def _layout(cfg: BenchConfig, ep: Endpoint):
    if cfg.rows % ep.nranks:
        raise ConfigError(f"{cfg.rows} rows cannot be split evenly over {ep.nranks} ranks")
    mp, np_ = cfg.rows // ep.nranks, cfg.cols
    if mp < 1 or np_ < 1:
        raise ConfigError("the grid needs at least one row per rank and one column")
    prev = ep.rank - 1 if ep.rank > 0 else NULL_RANK
    nxt = ep.rank + 1 if ep.rank < ep.nranks - 1 else NULL_RANK
    return mp, np_, prev, nxt


def _local_edge(cfg: BenchConfig, ep: Endpoint, mp: int, np_: int) -> np.ndarray:
    full = make_edge(cfg)
    w = np_ + 2
    local = np.zeros((mp + 2, w), dtype=np.float32)
    local[1:mp + 1, 1:np_ + 1] = full[ep.rank * mp:(ep.rank + 1) * mp]
    return local.reshape(-1)


def _sweep(old, new, edge, mp: int, w: int) -> None:
    """One stencil pass reading ``old`` (memoryview or accessor-free)."""
    for i in range(1, mp + 1):
        row = i * w
        for k in range(row + 1, row + w - 1):
            new[k] = 0.25 * (old[k - w] + old[k + w] + old[k - 1] + old[k + 1] - edge[k])


def _bulk(ep: Endpoint, cfg: BenchConfig, log: MessageLog):
    mp, np_, prev, nxt = _layout(cfg, ep)
    w = np_ + 2
    old_a = np.zeros((mp + 2) * w, dtype=np.float32)
    new_a = np.zeros_like(old_a)
    old, new = memoryview(old_a), memoryview(new_a)
    edge = memoryview(_local_edge(cfg, ep, mp, np_))
    nb = 4 * np_
    ep.barrier()
    t0 = time.perf_counter()
    for it in range(1, cfg.maxiter + 1):
        reqs = []
        if prev != NULL_RANK:
            reqs.append((0, ep.irecv(prev, TAG_DOWN, nb)))
        if nxt != NULL_RANK:
            reqs.append((mp + 1, ep.irecv(nxt, TAG_UP, nb)))
        if nxt != NULL_RANK:
            ep.send_nowait(nxt, TAG_DOWN, old_a[mp * w + 1:mp * w + 1 + np_].tobytes())
            log.record(0, it, "send", nxt, TAG_DOWN, -1, nb)
        if prev != NULL_RANK:
            ep.send_nowait(prev, TAG_UP, old_a[w + 1:w + 1 + np_].tobytes())
            log.record(0, it, "send", prev, TAG_UP, -1, nb)
        for row, h in reqs:
            h.wait()
            old_a[row * w + 1:row * w + 1 + np_] = np.frombuffer(h.data, dtype=np.float32)
            log.record(0, it, "recv", h.peer, h.tag, -1, nb)
        _sweep(old, new, edge, mp, w)
        for i in range(1, mp + 1):
            old[i * w + 1:i * w + 1 + np_] = new[i * w + 1:i * w + 1 + np_]
    elapsed = time.perf_counter() - t0
    return elapsed, old_a, []


def _hand(ep: Endpoint, cfg: BenchConfig, log: MessageLog):
    mp, np_, prev, nxt = _layout(cfg, ep)
    w = np_ + 2
    old_a = np.zeros((mp + 2) * w, dtype=np.float32)
    new_a = np.zeros_like(old_a)
    old, new = memoryview(old_a), memoryview(new_a)
    edge = memoryview(_local_edge(cfg, ep, mp, np_))
    ep.barrier()
    t0 = time.perf_counter()
    for it in range(1, cfg.maxiter + 1):
        from_prev = [ep.irecv(prev, TAG_DOWN, 4) for _ in range(np_)] if prev != NULL_RANK else []
        from_next = [ep.irecv(nxt, TAG_UP, 4) for _ in range(np_)] if nxt != NULL_RANK else []
        for i in range(1, mp + 1):
            row = i * w
            for j in range(1, np_ + 1):
                k = row + j
                new[k] = 0.25 * (old[k - w] + old[k + w] + old[k - 1] + old[k + 1] - edge[k])
                # independent tests so a one-row slab feeds both neighbours
                if i == 1 and prev != NULL_RANK:
                    ep.send_nowait(prev, TAG_UP, new_a[k:k + 1].tobytes())
                    log.record(0, it, "send", prev, TAG_UP, j - 1, 4)
                if i == mp and nxt != NULL_RANK:
                    ep.send_nowait(nxt, TAG_DOWN, new_a[k:k + 1].tobytes())
                    log.record(0, it, "send", nxt, TAG_DOWN, j - 1, 4)
        for i in range(1, mp + 1):
            old[i * w + 1:i * w + 1 + np_] = new[i * w + 1:i * w + 1 + np_]
        for row, hs in ((0, from_prev), (mp + 1, from_next)):
            for j, h in enumerate(hs, start=1):
                h.wait()
                old_a[row * w + j] = np.frombuffer(h.data, dtype=np.float32)[0]
                log.record(0, it, "recv", h.peer, h.tag, j - 1, 4)
    elapsed = time.perf_counter() - t0
    return elapsed, old_a, []


def _managed(ep: Endpoint, cfg: BenchConfig, log: MessageLog, hint: ModeHint):
    mp, np_, prev, nxt = _layout(cfg, ep)
    w = np_ + 2
    rt = Runtime(ep, fast_accessors=cfg.fast_accessors, chunk=cfg.chunk,
                 log_timestamps=cfg.log_timestamps)
    old_b = rt.create_buffer("float32", (mp + 2) * w)
    new_a = np.zeros((mp + 2) * w, dtype=np.float32)
    new = memoryview(new_a)
    edge = memoryview(_local_edge(cfg, ep, mp, np_))
    region = rt.region_begin(hint)
    top, bottom = w + 1, mp * w + 1
    halo_prev, halo_next = 1, (mp + 1) * w + 1
    if prev != NULL_RANK:
        rt.track(old_b, halo_prev, np_, region)
        rt.track(old_b, top, np_, region)
    if nxt != NULL_RANK:
        rt.track(old_b, halo_next, np_, region)
        rt.track(old_b, bottom, np_, region)  # same range as `top` when MP == 1
    acc = rt.accessors(old_b)
    rd, wr = acc.read, acc.write
    ep.barrier()
    t0 = time.perf_counter()
    for _it in range(cfg.maxiter):
        rt.iteration_begin(region)
        if prev != NULL_RANK:
            rt.post_recv(region, old_b, halo_prev, np_, prev)
        if nxt != NULL_RANK:
            rt.post_recv(region, old_b, halo_next, np_, nxt)
        for i in range(1, mp + 1):
            row = i * w
            for k in range(row + 1, row + w - 1):
                new[k] = 0.25 * (rd(k - w) + rd(k + w) + rd(k - 1) + rd(k + 1) - edge[k])
        for i in range(1, mp + 1):
            row = i * w
            for k in range(row + 1, row + w - 1):
                wr(k, new[k])
        if nxt != NULL_RANK:
            rt.post_send(region, old_b, bottom, np_, nxt)
        if prev != NULL_RANK:
            rt.post_send(region, old_b, top, np_, prev)
        rt.iteration_end(region)
    elapsed = time.perf_counter() - t0
    report = rt.region_end(region)
    log.entries.extend(rt.log.entries)
    return elapsed, old_b.snapshot(), [report]


def jacobi_rank(ep: Endpoint, cfg: BenchConfig, variant: JacobiVariant):
    log = MessageLog(ep.rank, timestamps=cfg.log_timestamps)
    if variant is JacobiVariant.BULK:
        elapsed, old, reports = _bulk(ep, cfg, log)
    elif variant is JacobiVariant.HAND:
        elapsed, old, reports = _hand(ep, cfg, log)
    else:
        hint = ModeHint.AUTO if cfg.mode is BenchMode.MANAGED else ModeHint.PASSTHROUGH
        elapsed, old, reports = _managed(ep, cfg, log, hint)
    mp, np_ = cfg.rows // ep.nranks, cfg.cols
    interior = np.asarray(old, dtype=np.float32).reshape(mp + 2, np_ + 2)[1:mp + 1, 1:np_ + 1].copy()
    return elapsed, interior, log, reports


def run_jacobi(cfg: BenchConfig, variant: JacobiVariant | str = JacobiVariant.MANAGED,
               endpoint: Endpoint | None = None) -> JacobiResult:
    """Run one Jacobi variant; repeats re-run the whole solve from zero."""
    variant = JacobiVariant.parse(variant)
    times, arrays, log, reports = [], [], None, []
    for _ in range(cfg.repeats):
        if endpoint is not None:
            outs = [jacobi_rank(endpoint, cfg, variant)]
        else:
            world = World(cfg.ranks, cfg.cost, timeout=cfg.timeout)
            outs = world.run(jacobi_rank, [(cfg, variant)] * cfg.ranks)
        times.append(max(o[0] for o in outs))
        arrays = [o[1] for o in outs]
        log = MessageLog.merge(o[2] for o in outs) if log is None else log
        reports += [r for o in outs for r in o[3]]
    return JacobiResult(wall_times=times, config=cfg, variant=variant.value, arrays=arrays,
                        log=log, reports=reports)
