"""STREAM-style tracking overhead suite (single rank, no communication).

Configurations:

baseline
    the raw compiled kernels on plain arrays.
inside
    every element of every array is tracked inside an active region; no
    directive is posted, so accesses are only counted.
inactive
    the same ranges are tracked but no region is active, so the gate in
    front of the counters is closed.

Each tracked configuration runs on the generic and the fast path.
"""
from __future__ import annotations

import time
from dataclasses import dataclass

from ..compiled import ARRAY_KINDS, KERNELS, run_kernel
from ..errors import ConfigError
from ..metrics import StreamResult
from ..runtime import ModeHint, Runtime
from .config import checksum

DEFAULT_ELEMENTS = 2_000_000
INITIAL = {"ia": 1, "a": 1.0, "b": 2.0, "c": 0.0}


@dataclass(frozen=True)
class StreamConfig:
    nelems: int = DEFAULT_ELEMENTS
    repeats: int = 10
    kernels: tuple[str, ...] = tuple(KERNELS)
    paths: tuple[str, ...] = ("generic", "fast")

    def __post_init__(self):
        if self.nelems < 1:
            raise ConfigError(f"nelems must be >= 1, got {self.nelems}")
        if self.repeats < 1:
            raise ConfigError(f"repeats must be >= 1, got {self.repeats}")
        unknown = set(self.kernels) - set(KERNELS)
        if unknown:
            raise ConfigError(f"unknown STREAM kernels: {sorted(unknown)}")
        bad = set(self.paths) - {"generic", "fast"}
        if bad or not self.paths:
            raise ConfigError(f"tracked paths must be generic and/or fast, got {self.paths}")


@dataclass
class StreamRun(StreamResult):
    checksums: dict | None = None  # (config, path) -> sha256 of the final arrays


def _reset(arrays: dict) -> None:
    for name, buf in arrays.items():
        buf.storage[:] = INITIAL[name]


def _time_kernels(cfg: StreamConfig, arrays: dict, path: str) -> dict[str, list[float]]:
    out: dict[str, list[float]] = {k: [] for k in cfg.kernels}
    for _ in range(cfg.repeats):
        for k in cfg.kernels:
            t0 = time.perf_counter()
            run_kernel(k, path, arrays)
            out[k].append(time.perf_counter() - t0)
    return out


def _counter_total(arrays: dict) -> int:
    return int(sum(int(b.reads.sum()) + int(b.writes.sum()) for b in arrays.values()))


def run_stream(cfg: StreamConfig | None = None) -> StreamRun:
    cfg = cfg or StreamConfig()
    rt = Runtime()
    arrays = {name: rt.create_buffer(kind, cfg.nelems) for name, kind in ARRAY_KINDS.items()}
    # compile everything up front so no repeat pays for it
    for path in ("raw",) + cfg.paths:
        for k in cfg.kernels:
            run_kernel(k, path, arrays, n=1)
    times, updates, sums = {}, {}, {}

    def snapshot():
        return checksum(arrays[x].storage for x in ARRAY_KINDS)

    _reset(arrays)
    times[("baseline", "raw")] = _time_kernels(cfg, arrays, "raw")
    updates[("baseline", "raw")] = 0
    sums[("baseline", "raw")] = snapshot()

    for path in cfg.paths:
        _reset(arrays)
        region = rt.region_begin(ModeHint.AUTO)
        for buf in arrays.values():
            rt.track(buf, 0, cfg.nelems, region)
        rt.iteration_begin(region)
        times[("inside", path)] = _time_kernels(cfg, arrays, path)
        updates[("inside", path)] = _counter_total(arrays)
        sums[("inside", path)] = snapshot()
        rt.iteration_end(region)
        rt.region_end(region)

    ranges = [rt.track(buf, 0, cfg.nelems) for buf in arrays.values()]
    try:
        for path in cfg.paths:
            _reset(arrays)
            for buf in arrays.values():
                buf.reset_counters()
            times[("inactive", path)] = _time_kernels(cfg, arrays, path)
            updates[("inactive", path)] = _counter_total(arrays)
            sums[("inactive", path)] = snapshot()
    finally:
        for rng in ranges:
            rt.untrack(rng)
    return StreamRun(config=cfg, times=times, counter_updates=updates, checksums=sums)


def expected_updates(cfg: StreamConfig) -> int:
    """Counter increments one tracked pass over all kernels must produce."""
    per = sum(len(KERNELS[k][2]) + 1 for k in cfg.kernels)
    return per * cfg.nelems * cfg.repeats
