"""Per-rank runtime: communication regions, iterations and the mode machine.

    Profiling --(iteration end, complete profile)--> Managed
    Managed   --(iteration end, deviation seen)----> Passthrough (demoted)
    demoted Passthrough --(next iteration_begin)---> Profiling

A region opened with ``ModeHint.PASSTHROUGH`` stays in Passthrough forever.
"""
from __future__ import annotations

import csv
import io
import itertools
from dataclasses import dataclass, field
from enum import Enum

from .engine import ChunkPolicy, CommDirective, CommEngine, Direction, ReadinessProfile
from .errors import InactiveRegion, NestedRegion, OpenIteration, PendingCommunication, Unbalanced
from .metrics import MessageLog
from .tracking import (Accessors, ElemKind, ManagedBuffer, TrackedRange, fast_accessors,
                       fast_accessors_default, generic_accessors)
from .transport import Endpoint, World


class Mode(Enum):
    PASSTHROUGH = "passthrough"
    PROFILING = "profiling"
    MANAGED = "managed"


class ModeHint(Enum):
    AUTO = "auto"
    PASSTHROUGH = "passthrough"


@dataclass(frozen=True)
class ModeTransition:
    iteration: int  # 1-based iteration at whose boundary the change happened
    before: Mode
    after: Mode
    reason: str


@dataclass(frozen=True)
class DemotionEvent:
    iteration: int
    reasons: tuple[str, ...]


@dataclass(frozen=True)
class IterationStats:
    iteration: int
    mode: Mode
    msgs_sent: int
    bytes_sent: int
    msgs_recv: int
    bytes_recv: int
    mismatch: bool


REPORT_HEADER = "region,rank,iteration,mode,msgs_sent,bytes_sent,msgs_recv,bytes_recv,mismatch"


@dataclass
class RegionReport:
    region_id: int
    rank: int
    initial_mode: Mode
    iterations: list[IterationStats] = field(default_factory=list)
    transitions: list[ModeTransition] = field(default_factory=list)
    demotions: list[DemotionEvent] = field(default_factory=list)

    @property
    def mode_sequence(self) -> list[Mode]:
        return [self.initial_mode] + [t.after for t in self.transitions]

    def to_csv(self, header: bool = True) -> str:
        buf = io.StringIO()
        if header:
            buf.write(REPORT_HEADER + "\n")
        w = csv.writer(buf, lineterminator="\n")
        for s in self.iterations:
            w.writerow([self.region_id, self.rank, s.iteration, s.mode.value, s.msgs_sent,
                        s.bytes_sent, s.msgs_recv, s.bytes_recv, int(s.mismatch)])
        return buf.getvalue()


class Region:
    """A communication region. Create with :meth:`Runtime.region_begin`."""

    def __init__(self, region_id: int, mode: Mode, forced: bool):
        self.region_id = region_id
        self.mode = mode
        self.forced = forced
        self.iteration = 0
        self.active = True
        self.in_iteration = False
        self.directives: list[CommDirective] = []
        self.profiles: list[ReadinessProfile] | None = None
        self.demoted = False
        self.report: RegionReport | None = None
        self._ranges: list[TrackedRange] = []
        self._outside: list[CommDirective] = []
        self._ordinals: dict[tuple[int, Direction], int] = {}
        self._mismatches: list[str] = []
        self._log_mark = 0

    def __repr__(self):
        return (f"Region(id={self.region_id}, mode={self.mode.value}, iteration={self.iteration}, "
                f"active={self.active})")

    def _next_ordinal(self, peer: int, direction: Direction) -> int:
        key = (peer, direction)
        n = self._ordinals.get(key, 0)
        self._ordinals[key] = n + 1
        return n

    def _flag_mismatch(self, why: str):
        self._mismatches.append(why)

    def _bind_instance(self, direction, buf, start, count, peer):
        key = (direction, buf.buffer_id, start, count, peer)
        for d in self.directives:
            if d.managed and not d.posted and d.key() == key:
                return d
        return None


class Runtime:
    """One rank's runtime. Several may coexist in one process (one per rank thread).

    ``fast_accessors`` picks the accessor path; ``None`` defers to the
    ``MDMP_FAST_ACCESSORS`` environment variable.
    """

    def __init__(self, endpoint: Endpoint | None = None, *, fast_accessors: bool | None = None,
                 chunk: int = 1, log_timestamps: bool = False):
        self.endpoint = endpoint if endpoint is not None else World(1).endpoint(0)
        self.rank = self.endpoint.rank
        self.fast_accessors = fast_accessors_default() if fast_accessors is None else bool(fast_accessors)
        self.chunk = ChunkPolicy(chunk)
        self.log = MessageLog(self.rank, timestamps=log_timestamps)
        self.engine = CommEngine(self, self.chunk)
        self.buffers: list[ManagedBuffer] = []
        self._ids = itertools.count()
        self._region_ids = itertools.count()
        self._region: Region | None = None

    # -- buffers ----------------------------------------------------------
    def create_buffer(self, kind: ElemKind | str, length: int) -> ManagedBuffer:
        buf = ManagedBuffer(next(self._ids), ElemKind.parse(kind), length)
        buf.set_counting(self._counting())
        self.buffers.append(buf)
        return buf

    def read(self, buf: ManagedBuffer, index: int):
        return buf.read(index)

    def write(self, buf: ManagedBuffer, index: int, value) -> None:
        buf.write(index, value)

    def accessors(self, buf: ManagedBuffer, fast: bool | None = None) -> Accessors:
        use_fast = self.fast_accessors if fast is None else fast
        return fast_accessors(buf) if use_fast else generic_accessors(buf)

    def track(self, buf: ManagedBuffer, start: int, count: int, region: Region | None = None) -> TrackedRange:
        """Track a range without a directive.

        With ``region`` the range belongs to it (detached at region_end) and
        its counts are available to directives posted later on the same
        range, the way a declaration ahead of the loop would be.  Without, it
        persists across regions.
        """
        if region is not None:
            self._check_active(region)
        rng, fresh = buf.attach(start, count, region)
        if fresh and region is not None:
            region._ranges.append(rng)
            rng.late = region.in_iteration and buf.touched
        return rng

    def untrack(self, rng: TrackedRange) -> None:
        rng.buffer.detach(rng)

    # -- region lifecycle ---------------------------------------------------
    @property
    def region(self) -> Region | None:
        return self._region

    def _counting(self) -> bool:
        r = self._region
        return r is not None and r.mode is not Mode.PASSTHROUGH

    def _sync_counting(self):
        flag = self._counting()
        for b in self.buffers:
            if b.counting != flag:
                b.set_counting(flag)

    def _check_active(self, region: Region):
        if not region.active or region is not self._region:
            raise InactiveRegion(f"{region!r} is not the active region of rank {self.rank}")

    def _set_mode(self, region: Region, mode: Mode, reason: str):
        if region.mode is not mode:
            region.report.transitions.append(
                ModeTransition(region.iteration + 1 if region.in_iteration else region.iteration,
                               region.mode, mode, reason))
            region.mode = mode
            self._sync_counting()

    def region_begin(self, mode_hint: ModeHint | str = ModeHint.AUTO) -> Region:
        if self._region is not None:
            raise NestedRegion(f"rank {self.rank} already has an active region {self._region!r}")
        hint = ModeHint(mode_hint) if not isinstance(mode_hint, ModeHint) else mode_hint
        forced = hint is ModeHint.PASSTHROUGH
        region = Region(next(self._region_ids), Mode.PASSTHROUGH if forced else Mode.PROFILING, forced)
        region.report = RegionReport(region.region_id, self.rank, region.mode)
        self._region = region
        self._sync_counting()
        return region

    def region_end(self, region: Region) -> RegionReport:
        self._check_active(region)
        if region.in_iteration:
            raise OpenIteration(f"{region!r} still has iteration {region.iteration + 1} open")
        pending = [d for d in region._outside if not d.done]
        if pending:
            raise PendingCommunication(f"{len(pending)} directive(s) not completed: {pending}")
        for rng in region._ranges:
            rng.buffer.detach(rng)
        region._ranges.clear()
        region.active = False
        self._region = None
        self._sync_counting()
        return region.report

    def iteration_begin(self, region: Region) -> None:
        self._check_active(region)
        if region.in_iteration:
            raise Unbalanced(f"iteration_begin twice without iteration_end on {region!r}")
        region.in_iteration = True
        if region.mode is Mode.PASSTHROUGH and region.demoted:
            region.demoted = False
            self._set_mode(region, Mode.PROFILING, "re-profile after demotion")
        for b in self.buffers:
            b.reset_counters()
        for rng in region._ranges:
            rng.late = False
        region.directives = []
        region._ordinals = {}
        region._mismatches = []
        region._log_mark = len(self.log.entries)
        if region.mode is Mode.MANAGED:
            self.engine.instantiate(region)

    def iteration_end(self, region: Region) -> None:
        self._check_active(region)
        if not region.in_iteration:
            raise Unbalanced(f"iteration_end without iteration_begin on {region!r}")
        mode = region.mode
        self.engine.drain(region)
        if mode is Mode.MANAGED:
            self.engine.check_totals(region)
        mismatch = bool(region._mismatches)
        self._record_stats(region, mode, mismatch)
        if mode is Mode.PROFILING:
            profiles = self.engine.build_profiles(region)
            if profiles is not None:
                region.profiles = profiles
                self._set_mode(region, Mode.MANAGED, "profile committed")
        elif mode is Mode.MANAGED and mismatch:
            region.report.demotions.append(
                DemotionEvent(region.iteration + 1, tuple(region._mismatches)))
            region.profiles = None
            region.demoted = True
            self._set_mode(region, Mode.PASSTHROUGH, "profile mismatch")
        region.in_iteration = False
        region.iteration += 1

    def _record_stats(self, region: Region, mode: Mode, mismatch: bool):
        ms = bs = mr = br = 0
        for e in self.log.entries[region._log_mark:]:
            if e.direction == "send":
                ms += 1
                bs += e.nbytes
            else:
                mr += 1
                br += e.nbytes
        region.report.iterations.append(
            IterationStats(region.iteration + 1, mode, ms, bs, mr, br, mismatch))

    # -- directives ----------------------------------------------------------
    def post_send(self, region: Region, buf: ManagedBuffer, start: int, count: int, peer: int) -> CommDirective:
        self._check_active(region)
        return self.engine.post(region, Direction.SEND, buf, start, count, peer)

    def post_recv(self, region: Region, buf: ManagedBuffer, start: int, count: int, peer: int) -> CommDirective:
        self._check_active(region)
        return self.engine.post(region, Direction.RECV, buf, start, count, peer)

    def complete(self, region: Region, directive: CommDirective) -> None:
        """Program-order completion point of ``directive`` (like MPI_Wait).

        A bulk receive blocks here until its data is installed; in managed
        mode this is a no-op because installs follow the profiled triggers.
        """
        self._check_active(region)
        self.engine.complete(region, directive)
