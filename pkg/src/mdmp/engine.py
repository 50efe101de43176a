"""Send/receive directives, readiness profiles and the trigger scheduler.

Message tags pack ``(region, per-(peer, direction) ordinal)`` into bits
31..61; element messages additionally set bit 63 and carry the element
ordinal of their first element in bits 0..30.  A receive posts masked
receives that accept any message of its directive, bulk or element, so a
rank can switch between bulk and managed realisations without telling its
peer: the payload length plus the start ordinal says which elements arrived.
"""
from __future__ import annotations

import itertools
from dataclasses import dataclass
from enum import Enum, IntEnum
from typing import TYPE_CHECKING

import numpy as np

from .errors import OverlapConflict, RangeError, TransportFailure
from .metrics import BULK, LogEntry
from .tracking import ManagedBuffer, TrackedRange
from .transport import FULL_MASK, NULL_RANK

if TYPE_CHECKING:
    from .runtime import Region, Runtime

ELEMENT_BIT = 1 << 63
ELEMENT_MASK = (1 << 31) - 1
DIRECTIVE_MASK = FULL_MASK ^ (ELEMENT_BIT | ELEMENT_MASK)
MAX_ORDINAL = (1 << 15) - 1

_directive_ids = itertools.count()
_NAN = float("nan")


def directive_tag(region_id: int, ordinal: int) -> int:
    if not 0 <= ordinal <= MAX_ORDINAL:
        raise RangeError(f"too many directives per peer in one iteration ({ordinal})")
    return ((region_id & 0xFFFF) << 46) | (ordinal << 31)


def element_tag(dtag: int, start: int) -> int:
    return dtag | ELEMENT_BIT | start


def split_tag(tag: int) -> tuple[int, int, int | None]:
    """(region_id, ordinal, element start or None for bulk)."""
    elem = tag & ELEMENT_MASK if tag & ELEMENT_BIT else None
    return (tag >> 46) & 0xFFFF, (tag >> 31) & MAX_ORDINAL, elem


class Direction(Enum):
    SEND = "send"
    RECV = "recv"


class ElemState(IntEnum):
    PENDING = 0
    TRIGGERED = 1
    COMPLETED = 2


@dataclass(frozen=True)
class ChunkPolicy:
    """Elements per managed message; only scheduling changes, never content."""

    chunk: int = 1

    def __post_init__(self):
        if int(self.chunk) < 1:
            raise ValueError(f"chunk must be >= 1, got {self.chunk}")


@dataclass(eq=False)
class ReadinessProfile:
    """Per-element trigger counts of one directive, from the profiling iteration."""

    directive_id: int
    ordinal: int
    direction: Direction
    buffer: ManagedBuffer
    start: int
    count: int
    peer: int
    tag: int
    trigger_writes: np.ndarray
    trigger_reads: np.ndarray | None  # receives only
    total_reads: np.ndarray
    total_writes: np.ndarray

    def key(self):
        return (self.direction, self.buffer.buffer_id, self.start, self.count, self.peer)

    def same_as(self, other: "ReadinessProfile") -> bool:
        def eq(a, b):
            return (a is None and b is None) or (a is not None and b is not None and np.array_equal(a, b))
        return (self.key() == other.key() and self.ordinal == other.ordinal
                and eq(self.trigger_writes, other.trigger_writes)
                and eq(self.trigger_reads, other.trigger_reads)
                and eq(self.total_reads, other.total_reads)
                and eq(self.total_writes, other.total_writes))


_TRIGGERED = int(ElemState.TRIGGERED)
_COMPLETED = int(ElemState.COMPLETED)


class CommDirective:
    """One transfer of ``buffer[start:start+count]`` to or from ``peer``."""

    direction: Direction

    def __init__(self, engine: "CommEngine", region: "Region", ordinal: int, buffer: ManagedBuffer,
                 start: int, count: int, peer: int, *, managed: bool = False,
                 in_iteration: bool = True):
        self.directive_id = next(_directive_ids)
        self.engine = engine
        self.region = region
        self.ordinal = ordinal
        self.buffer = buffer
        self.start = start
        self.count = count
        self.peer = peer
        self.tag = directive_tag(region.region_id, ordinal)
        self.managed = managed
        self.in_iteration = in_iteration
        self.state = np.full(count, ElemState.PENDING, np.int8)
        self._isz = buffer.kind.itemsize
        self.range: TrackedRange | None = None
        self.posted = False  # program reached the call site
        self.done = False
        self.lossless = True  # tracked from iteration_begin on (profiling only)
        self.profile: ReadinessProfile | None = None

    @property
    def buffer_id(self) -> int:
        return self.buffer.buffer_id

    @property
    def stop(self) -> int:
        return self.start + self.count

    def key(self):
        return (self.direction, self.buffer.buffer_id, self.start, self.count, self.peer)

    def _mismatch(self, why: str):
        self.region._flag_mismatch(f"{self.direction.value} directive {self.ordinal} "
                                   f"(peer {self.peer}, [{self.start}, {self.stop})): {why}")

    def __repr__(self):
        mode = "managed" if self.managed else "bulk"
        return (f"{type(self).__name__}(id={self.directive_id}, buffer={self.buffer.buffer_id}, "
                f"[{self.start}, {self.stop}), peer={self.peer}, {mode})")


class SendDirective(CommDirective):
    direction = Direction.SEND

    def __init__(self, *args, **kw):
        super().__init__(*args, **kw)
        self.trigger_snapshot: np.ndarray | None = None

    # -- bulk ------------------------------------------------------------
    def issue_bulk(self):
        self.engine._send(self, 0, self.count, bulk=True)
        self.state[:] = ElemState.COMPLETED

    # -- managed ---------------------------------------------------------
    def arm(self, profile: ReadinessProfile, chunk: int):
        self.profile = profile
        self._tw = profile.trigger_writes.tolist()
        self._chunk = chunk
        nchunks = -(-self.count // chunk)
        self._left = [min(chunk, self.count - j * chunk) for j in range(nchunks)]
        self._sent = [False] * nchunks
        for k, t in enumerate(self._tw):
            if t == 0:
                self._trigger(k)

    def _trigger(self, k: int):
        self.state[k] = _TRIGGERED
        j = k // self._chunk
        self._left[j] -= 1
        if self._left[j] == 0:
            self._issue_chunks(j, j + 1)

    def _issue_chunks(self, j0: int, j1: int):
        c = self._chunk
        s, e = j0 * c, min(j1 * c, self.count)
        self.engine._send(self, s, e - s, bulk=False)
        for j in range(j0, j1):
            self._sent[j] = True
        if e - s == 1:
            self.state[s] = _COMPLETED
        else:
            self.state[s:e] = _COMPLETED

    def on_write(self, k: int, w: int):
        t = self._tw[k]
        if w == t:
            self._trigger(k)
        elif w > t:
            self._mismatch(f"element {k} written after its trigger ({w} > {t})")

    def flush(self) -> bool:
        """Send every chunk not yet sent, one message per run; True if any."""
        any_sent = False
        j = 0
        n = len(self._sent)
        while j < n:
            if self._sent[j]:
                j += 1
                continue
            j1 = j
            while j1 < n and not self._sent[j1]:
                j1 += 1
            self._issue_chunks(j, j1)
            any_sent = True
            j = j1
        return any_sent

    def bind(self):
        """The program reached this directive's call site."""
        self.posted = True
        if self.flush():
            self._mismatch("elements still pending at the call site")

    def finish(self):
        if self.managed:
            if not self.posted:
                self._mismatch("profiled directive was not posted")
            if self.flush():
                if self.posted:
                    self._mismatch("elements still pending at iteration end")
        self.done = True


class RecvDirective(CommDirective):
    direction = Direction.RECV

    def __init__(self, *args, **kw):
        super().__init__(*args, **kw)
        self.staging = np.zeros(self.count, self.buffer.kind.dtype)
        self._smv = self.staging.data
        self._fmt = self._smv.format
        self._arrived = bytearray(self.count)
        self._n_arrived = 0
        self._installed = bytearray(self.count)
        self.trigger_snapshot: tuple[np.ndarray, np.ndarray] | None = None
        if self.peer == NULL_RANK:
            self._n_arrived = self.count

    @property
    def arrived_all(self) -> bool:
        return self._n_arrived == self.count

    def pull(self, block: bool = False, until: int | None = None) -> None:
        """Consume this directive's messages in link order.

        Non-blocking unless ``block``; with ``until`` stop once that element
        has arrived.
        """
        ep = self.engine.endpoint
        while self._n_arrived < self.count:
            if until is not None and self._arrived[until]:
                return
            m = ep.take(self.peer, self.tag, DIRECTIVE_MASK)
            if m is not None:
                now = ep.clock() if self.engine.rt.log.timestamps else _NAN
                self._accept(m[0], m[1], now, now)
            elif block:
                h = ep.irecv(self.peer, self.tag, None, DIRECTIVE_MASK)
                ep.wait(h)
                self._accept(h.matched_tag, h.data, h.posted_at, h.completed_at)
            else:
                return

    def _accept(self, tag: int, data: bytes, t_post: float, t_done: float):
        start = tag & ELEMENT_MASK if tag & ELEMENT_BIT else 0
        isz = self._isz
        n, rem = divmod(len(data), isz)
        if rem or n == 0 or start + n > self.count or self._arrived[start] \
                or (n > 1 and any(self._arrived[start:start + n])):
            raise TransportFailure(f"malformed or duplicate message for {self!r}: "
                                   f"start {start}, {len(data)} bytes")
        if n == 1:
            self._smv[start] = memoryview(data).cast(self._fmt)[0]
            self._arrived[start] = 1
        else:
            self.staging[start:start + n] = np.frombuffer(data, self.staging.dtype)
            self._arrived[start:start + n] = b"\x01" * n
        self._n_arrived += n
        self.engine._log_recv(self, tag, BULK if not tag & ELEMENT_BIT else start, len(data),
                              t_post, t_done)
        if self.managed:
            rng = self.range
            rmv, wmv, tr, tw = rng._rmv, rng._wmv, self._tr, self._tw
            for k in range(start, start + n):
                if not self._installed[k] and rmv[k] >= tr[k] and wmv[k] >= tw[k]:
                    self._install(k)

    def _install(self, k: int):
        self.buffer._mv[self.start + k] = self._smv[k]
        self._installed[k] = 1
        self.state[k] = _COMPLETED

    def install_all(self):
        """Copy every staged element not yet installed into the buffer."""
        if self.peer == NULL_RANK:
            self.state[:] = ElemState.COMPLETED
            return
        idx = [k for k in range(self.count) if not self._installed[k]]
        if len(idx) == self.count:
            self.buffer.storage[self.start:self.stop] = self.staging
        else:
            for k in idx:
                self.buffer.storage[self.start + k] = self.staging[k]
        self._installed[:] = b"\x01" * self.count
        self.state[:] = ElemState.COMPLETED

    # -- managed ---------------------------------------------------------
    def arm(self, profile: ReadinessProfile):
        self.profile = profile
        self._tr = profile.trigger_reads.tolist()
        self._tw = profile.trigger_writes.tolist()
        self.state[(profile.trigger_reads == 0) & (profile.trigger_writes == 0)] = ElemState.TRIGGERED

    def before_access(self, k: int):
        """Accesses past the trigger must see the new value: install first."""
        if self._installed[k]:
            return
        rng = self.range
        if rng._rmv[k] >= self._tr[k] and rng._wmv[k] >= self._tw[k]:
            if not self._arrived[k]:
                self.pull(block=True, until=k)
            self._install(k)

    def after_access(self, k: int):
        if self._installed[k]:
            return
        rng = self.range
        if rng._rmv[k] >= self._tr[k] and rng._wmv[k] >= self._tw[k]:
            self.state[k] = _TRIGGERED
            if not self._arrived[k]:
                self.pull(block=False, until=k)
            if self._arrived[k] and not self._installed[k]:
                self._install(k)

    def bind(self):
        self.posted = True

    def finish(self):
        self.pull(block=True)
        self.install_all()
        if self.managed and not self.posted:
            self._mismatch("profiled directive was not posted")
        self.done = True


class _SendHook:
    """Range hook for one or more managed sends sharing a range."""

    __slots__ = ("directives", "mv")

    def __init__(self, directives, buffer):
        self.directives = directives
        self.mv = buffer._mv

    def read(self, rng, k, i):
        rng.count_read(k)
        return self.mv[i]

    def write(self, rng, k, i, v):
        self.mv[i] = v
        w = rng.count_write(k)
        for d in self.directives:
            d.on_write(k, w)


class _RecvHook:
    __slots__ = ("d", "mv")

    def __init__(self, directive, buffer):
        self.d = directive
        self.mv = buffer._mv

    def read(self, rng, k, i):
        d = self.d
        if not d._installed[k]:
            d.before_access(k)
            v = self.mv[i]
            rng.count_read(k)
            d.after_access(k)
            return v
        rng.count_read(k)
        return self.mv[i]

    def write(self, rng, k, i, v):
        d = self.d
        if not d._installed[k]:
            d.before_access(k)
            self.mv[i] = v
            rng.count_write(k)
            d.after_access(k)
            return
        self.mv[i] = v
        rng.count_write(k)


class CommEngine:
    """Realises directives for one runtime according to the region mode."""

    def __init__(self, runtime: "Runtime", chunk: ChunkPolicy):
        self.rt = runtime
        self.endpoint = runtime.endpoint
        self.chunk = chunk

    # -- logging ---------------------------------------------------------
    def _send(self, d: SendDirective, s: int, n: int, bulk: bool):
        isz = d._isz
        a = (d.start + s) * isz
        payload = bytes(d.buffer._bytes[a:a + n * isz])
        tag = d.tag if bulk else d.tag | ELEMENT_BIT | s
        ep = self.endpoint
        ep.send_nowait(d.peer, tag, payload)
        log = self.rt.log
        ts = ep.clock() if log.timestamps else _NAN
        log.entries.append(LogEntry(log.rank, d.region.region_id, d.region.iteration + 1, "send",
                                    d.peer, tag, BULK if bulk else s, len(payload), ts, ts))

    def _log_recv(self, d: RecvDirective, tag: int, offset: int, nbytes: int, t_post: float,
                  t_done: float):
        log = self.rt.log
        if not log.timestamps:
            t_post = t_done = _NAN
        log.entries.append(LogEntry(log.rank, d.region.region_id, d.region.iteration + 1, "recv",
                                    d.peer, tag, offset, nbytes, t_post, t_done))

    # -- posting ---------------------------------------------------------
    def _validate(self, region: "Region", direction: Direction, buf: ManagedBuffer,
                  start: int, count: int, peer: int):
        if count < 1 or start < 0 or start + count > buf.length:
            raise RangeError(f"directive range [{start}, {start + count}) does not fit buffer "
                             f"{buf.buffer_id} of length {buf.length}")
        ep = self.endpoint
        if peer != NULL_RANK and not 0 <= peer < ep.nranks:
            raise RangeError(f"peer {peer} is not a rank of a {ep.nranks}-rank world")
        for d in region.directives:
            if d.buffer is not buf or d.peer == NULL_RANK:
                continue
            if start < d.stop and d.start < start + count:
                if d.direction is not direction:
                    raise OverlapConflict(f"{direction.value} range [{start}, {start + count}) overlaps {d!r}")
                if direction is Direction.RECV and d.posted:
                    raise OverlapConflict(f"receive range [{start}, {start + count}) overlaps {d!r}")

    def post(self, region: "Region", direction: Direction, buf: ManagedBuffer, start: int,
             count: int, peer: int) -> CommDirective:
        from .runtime import Mode

        self._validate(region, direction, buf, start, count, peer)
        cls = SendDirective if direction is Direction.SEND else RecvDirective

        if peer == NULL_RANK:
            d = cls(self, region, 0, buf, start, count, peer, in_iteration=region.in_iteration)
            d.posted = d.done = True
            d.state[:] = ElemState.COMPLETED
            return d

        if region.in_iteration and region.mode is Mode.MANAGED:
            d = region._bind_instance(direction, buf, start, count, peer)
            if d is not None:
                d.bind()
                return d
            region._flag_mismatch(f"{direction.value} directive to peer {peer} on buffer "
                                  f"{buf.buffer_id} [{start}, {start + count}) not in the profile")

        ordinal = region._next_ordinal(peer, direction)
        d = cls(self, region, ordinal, buf, start, count, peer, in_iteration=region.in_iteration)
        d.posted = True
        if not region.in_iteration:
            # a buffered send completes at its call site; only receives stay pending
            if direction is Direction.SEND:
                d.done = True
            else:
                region._outside.append(d)
        else:
            region.directives.append(d)
            if region.mode is Mode.PROFILING:
                d.range, fresh = buf.attach(start, count, region)
                if fresh:
                    region._ranges.append(d.range)
                    d.range.late = buf.touched
                d.lossless = not d.range.late
                if direction is Direction.SEND:
                    # a buffered bulk send completes here, so this is its trigger point
                    d.trigger_snapshot = d.range.writes.copy()
        if direction is Direction.SEND:
            d.issue_bulk()
        else:
            d.pull(block=False)
        return d

    def complete(self, region: "Region", d: CommDirective) -> None:
        """Program-order completion point of a directive (an MPI_Wait)."""
        from .runtime import Mode

        if d.done:
            return
        if isinstance(d, RecvDirective) and not d.managed:
            d.pull(block=True)
            d.install_all()
            if d.range is not None and region.mode is Mode.PROFILING and d.trigger_snapshot is None:
                d.trigger_snapshot = (d.range.reads.copy(), d.range.writes.copy())
            d.done = True
        elif not d.managed:
            d.done = True
        if not d.in_iteration and d.done and d in region._outside:
            region._outside.remove(d)

    # -- managed instantiation ---------------------------------------------
    def instantiate(self, region: "Region") -> None:
        """Create this iteration's directives from the profiles and arm triggers."""
        by_range: dict[int, list] = {}
        instances = []
        for p in region.profiles:
            cls = SendDirective if p.direction is Direction.SEND else RecvDirective
            ordinal = region._next_ordinal(p.peer, p.direction)
            d = cls(self, region, ordinal, p.buffer, p.start, p.count, p.peer, managed=True)
            d.range, _ = p.buffer.attach(p.start, p.count, region)
            by_range.setdefault(id(d.range), []).append(d)
            instances.append((d, p))
        for ds in by_range.values():
            rng = ds[0].range
            if ds[0].direction is Direction.SEND:
                rng.hook = _SendHook(ds, rng.buffer)
            else:
                rng.hook = _RecvHook(ds[0], rng.buffer)
        region.directives.extend(d for d, _ in instances)
        for d, p in instances:
            if isinstance(d, SendDirective):
                d.arm(p, self.chunk.chunk)
            else:
                d.arm(p)

    # -- iteration end -----------------------------------------------------
    def drain(self, region: "Region") -> None:
        """Complete every directive of the iteration; blocks for outstanding data."""
        from .runtime import Mode

        profiling = region.mode is Mode.PROFILING
        for d in region.directives:
            if d.done:
                continue
            if isinstance(d, RecvDirective):
                d.finish()
                if profiling and d.range is not None and d.trigger_snapshot is None:
                    d.trigger_snapshot = (d.range.reads.copy(), d.range.writes.copy())
            else:
                d.finish()
        for d in region.directives:
            if d.range is not None:
                d.range.hook = None

    def check_totals(self, region: "Region") -> None:
        for d in region.directives:
            p = d.profile
            if p is None:
                continue
            if not (np.array_equal(d.range.reads, p.total_reads)
                    and np.array_equal(d.range.writes, p.total_writes)):
                d._mismatch("access counts differ from the profile")

    def build_profiles(self, region: "Region") -> list[ReadinessProfile] | None:
        """Profiles of this profiling iteration, or None if some range was attached too late."""
        out = []
        for d in region.directives:
            if d.peer == NULL_RANK:
                continue
            if not d.lossless:
                return None
            rng = d.range
            if isinstance(d, SendDirective):
                tw, tr = d.trigger_snapshot, None
            else:
                tr, tw = d.trigger_snapshot
            out.append(ReadinessProfile(
                directive_id=d.directive_id, ordinal=d.ordinal, direction=d.direction,
                buffer=d.buffer, start=d.start, count=d.count, peer=d.peer, tag=d.tag,
                trigger_writes=tw, trigger_reads=tr,
                total_reads=rng.reads.copy(), total_writes=rng.writes.copy()))
        return out
