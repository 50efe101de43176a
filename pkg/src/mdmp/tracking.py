"""Managed buffers, tracked ranges and the two instrumented accessor paths.

A buffer counts accesses only to indices inside its tracked ranges, and only
while the owning runtime has a region in a counting mode.  Counters live in
one uint32 array per buffer; each range holds views into it, so the compiled
kernels and the Python accessors update the same storage.

Accessor paths
--------------
generic
    ``ManagedBuffer.read``/``write``: index check, bisect range lookup, then a
    call into the range, which either counts or hands over to the engine hook.
fast
    closures from :func:`fast_accessors` with the common case (one range, no
    hook) inlined and every attribute hoisted into locals.

Both must be observationally identical.
"""
from __future__ import annotations

import bisect
import os
from enum import Enum
from typing import Callable, NamedTuple

import numpy as np

from .errors import ConfigError, CounterOverflow, IndexOutOfBounds, OverlapConflict, RangeError

COUNTER_DTYPE = np.uint32
COUNTER_MAX = np.iinfo(COUNTER_DTYPE).max

# compiled-kernel metadata layout: [counting, nranges, overflow, (start, count, offset) * nranges]
META_COUNTING, META_NRANGES, META_OVERFLOW, META_HEAD = 0, 1, 2, 3


class ElemKind(Enum):
    INT32 = "int32"
    FLOAT32 = "float32"
    FLOAT64 = "float64"

    @property
    def dtype(self) -> np.dtype:
        return np.dtype(self.value)

    @property
    def itemsize(self) -> int:
        return self.dtype.itemsize

    @classmethod
    def parse(cls, name: "str | ElemKind") -> "ElemKind":
        if isinstance(name, ElemKind):
            return name
        key = str(name).strip().lower()
        aliases = {"int32": "int32", "i4": "int32", "int": "int32",
                   "float32": "float32", "f4": "float32", "float": "float32",
                   "float64": "float64", "f8": "float64", "double": "float64"}
        if key not in aliases:
            raise ConfigError(f"unknown element kind {name!r}; use int32, float32 or float64")
        return cls(aliases[key])


def fast_accessors_default() -> bool:
    """Accessor path selected by ``MDMP_FAST_ACCESSORS`` (default: fast)."""
    raw = os.environ.get("MDMP_FAST_ACCESSORS", "1").strip()
    if raw not in ("0", "1"):
        raise ConfigError(f"MDMP_FAST_ACCESSORS must be 0 or 1, got {raw!r}")
    return raw == "1"


def _overflow(rng: "TrackedRange", k: int, what: str):
    return CounterOverflow(f"{what} counter of buffer {rng.buffer.buffer_id} element "
                           f"{rng.start + k} exceeds {COUNTER_MAX}")


class TrackedRange:
    """Per-element read/write counters over ``[start, start + count)`` of one buffer.

    ``hook`` is set by the engine while a managed iteration needs per-access
    notifications; ``region`` is None for ranges tracked independently of
    any region (kept across regions, as for the STREAM runs).
    """

    __slots__ = ("buffer", "start", "count", "region", "reads", "writes", "_rmv", "_wmv",
                 "hook", "late", "_offset", "__weakref__")

    def __init__(self, buffer: "ManagedBuffer", start: int, count: int, region=None):
        self.buffer = buffer
        self.start = start
        self.count = count
        self.region = region
        self.hook = None
        self.late = False  # attached mid-iteration after the buffer was accessed
        self._offset = 0
        self.reads = self.writes = None
        self._rmv = self._wmv = None

    @property
    def stop(self) -> int:
        return self.start + self.count

    def _bind(self, reads: np.ndarray, writes: np.ndarray, offset: int):
        self._offset = offset
        self.reads = reads[offset:offset + self.count]
        self.writes = writes[offset:offset + self.count]
        self._rmv = self.reads.data
        self._wmv = self.writes.data

    def reset(self):
        self.reads[:] = 0
        self.writes[:] = 0

    def count_read(self, k: int) -> int:
        try:
            self._rmv[k] += 1
        except ValueError:
            raise _overflow(self, k, "read") from None
        return self._rmv[k]

    def count_write(self, k: int) -> int:
        try:
            self._wmv[k] += 1
        except ValueError:
            raise _overflow(self, k, "write") from None
        return self._wmv[k]

    def tracked_read(self, k: int, index: int):
        if self.hook is not None:
            return self.hook.read(self, k, index)
        self.count_read(k)
        return self.buffer._mv[index]

    def tracked_write(self, k: int, index: int, value) -> None:
        if self.hook is not None:
            self.hook.write(self, k, index, value)
            return
        self.buffer._mv[index] = value
        self.count_write(k)

    def __repr__(self):
        return f"TrackedRange(buffer={self.buffer.buffer_id}, [{self.start}, {self.stop}))"


class ManagedBuffer:
    """A rank-local typed array whose accesses in tracked ranges are counted."""

    def __init__(self, buffer_id: int, kind: ElemKind, length: int):
        if length < 0:
            raise RangeError(f"buffer length must be >= 0, got {length}")
        self.buffer_id = buffer_id
        self.kind = ElemKind.parse(kind)
        self.length = int(length)
        self.storage = np.zeros(self.length, dtype=self.kind.dtype)
        self._mv = self.storage.data
        self._bytes = self._mv.cast("B")
        self.ranges: list[TrackedRange] = []
        self._starts: list[int] = []
        self.reads = np.zeros(0, COUNTER_DTYPE)
        self.writes = np.zeros(0, COUNTER_DTYPE)
        # hot-path state, maintained by the runtime
        self.counting = False
        self.touched = False
        self.lo = self.hi = 0
        self.single: TrackedRange | None = None
        self.meta = np.zeros(META_HEAD, np.int64)

    @property
    def elem_kind(self) -> ElemKind:
        return self.kind

    @property
    def tracked(self) -> list[TrackedRange]:
        return list(self.ranges)

    def __len__(self):
        return self.length

    def __repr__(self):
        return f"ManagedBuffer(id={self.buffer_id}, {self.kind.value}[{self.length}], ranges={len(self.ranges)})"

    # -- range management ------------------------------------------------
    def attach(self, start: int, count: int, region=None) -> tuple[TrackedRange, bool]:
        """Track ``[start, start + count)``; returns (range, newly_created).

        An identical existing range is shared; a partial overlap is refused.
        """
        if count < 1 or start < 0 or start + count > self.length:
            raise RangeError(f"range [{start}, {start + count}) does not fit buffer of length {self.length}")
        for r in self.ranges:
            if r.start == start and r.count == count:
                return r, False
            if start < r.stop and r.start < start + count:
                raise OverlapConflict(f"range [{start}, {start + count}) partially overlaps {r}")
        rng = TrackedRange(self, start, count, region)
        pos = bisect.bisect(self._starts, start)
        self.ranges.insert(pos, rng)
        self._starts.insert(pos, start)
        self._rebuild()
        return rng, True

    def detach(self, rng: TrackedRange) -> None:
        pos = self.ranges.index(rng)
        del self.ranges[pos]
        del self._starts[pos]
        rng.hook = None
        self._rebuild()

    def _rebuild(self):
        total = sum(r.count for r in self.ranges)
        reads = np.zeros(total, COUNTER_DTYPE)
        writes = np.zeros(total, COUNTER_DTYPE)
        meta = np.zeros(META_HEAD + 3 * len(self.ranges), np.int64)
        off = 0
        for n, r in enumerate(self.ranges):
            if r.reads is not None:
                reads[off:off + r.count] = r.reads
                writes[off:off + r.count] = r.writes
            r._bind(reads, writes, off)
            meta[META_HEAD + 3 * n:META_HEAD + 3 * n + 3] = (r.start, r.count, off)
            off += r.count
        self.reads, self.writes = reads, writes
        meta[META_COUNTING] = int(self.counting)
        meta[META_NRANGES] = len(self.ranges)
        self.meta = meta
        if self.ranges:
            self.lo, self.hi = self.ranges[0].start, self.ranges[-1].stop
        else:
            self.lo = self.hi = 0
        self.single = self.ranges[0] if len(self.ranges) == 1 else None

    def set_counting(self, flag: bool) -> None:
        self.counting = flag
        self.meta[META_COUNTING] = int(flag)

    def reset_counters(self) -> None:
        self.reads[:] = 0
        self.writes[:] = 0
        self.touched = False

    def find_range(self, index: int) -> TrackedRange | None:
        pos = bisect.bisect_right(self._starts, index) - 1
        if pos >= 0:
            r = self.ranges[pos]
            if index < r.stop:
                return r
        return None

    # -- generic accessor path -------------------------------------------
    def _check_index(self, index: int):
        if not 0 <= index < self.length:
            raise IndexOutOfBounds(f"index {index} outside buffer {self.buffer_id} of length {self.length}")

    def read(self, index: int):
        self._check_index(index)
        if self.counting:
            self.touched = True
            rng = self.find_range(index)
            if rng is not None:
                return rng.tracked_read(index - rng.start, index)
        return self._mv[index]

    def write(self, index: int, value) -> None:
        self._check_index(index)
        if self.counting:
            self.touched = True
            rng = self.find_range(index)
            if rng is not None:
                rng.tracked_write(index - rng.start, index, value)
                return
        self._mv[index] = value

    # -- untracked bulk helpers (setup and inspection only) ---------------
    def load(self, values) -> None:
        self.storage[:] = values

    def snapshot(self) -> np.ndarray:
        return self.storage.copy()


class Accessors(NamedTuple):
    read: Callable[[int], object]
    write: Callable[[int, object], None]


def generic_accessors(buf: ManagedBuffer) -> Accessors:
    return Accessors(buf.read, buf.write)


def fast_accessors(buf: ManagedBuffer) -> Accessors:
    mv = buf._mv
    n = buf.length
    find = buf.find_range

    def read(i):
        if i < 0 or i >= n:
            raise IndexOutOfBounds(f"index {i} outside buffer {buf.buffer_id} of length {n}")
        if buf.counting:
            buf.touched = True
            if buf.lo <= i < buf.hi:
                rng = buf.single or find(i)
                if rng is not None:
                    k = i - rng.start
                    if rng.hook is not None:
                        return rng.hook.read(rng, k, i)
                    try:
                        rng._rmv[k] += 1
                    except ValueError:
                        raise _overflow(rng, k, "read") from None
        return mv[i]

    def write(i, v):
        if i < 0 or i >= n:
            raise IndexOutOfBounds(f"index {i} outside buffer {buf.buffer_id} of length {n}")
        if buf.counting:
            buf.touched = True
            if buf.lo <= i < buf.hi:
                rng = buf.single or find(i)
                if rng is not None:
                    k = i - rng.start
                    if rng.hook is not None:
                        rng.hook.write(rng, k, i, v)
                        return
                    mv[i] = v
                    try:
                        rng._wmv[k] += 1
                    except ValueError:
                        raise _overflow(rng, k, "write") from None
                    return
        mv[i] = v

    return Accessors(read, write)
