"""Message logs, result records and derived statistics."""
from __future__ import annotations

import csv
import io
import math
import statistics
from dataclasses import dataclass, field
from typing import Any, Iterable, NamedTuple

from .errors import MismatchedKernels

BULK = -1  # offset marker for whole-directive messages

RESULT_HEADER = ("benchmark,mode,transport,elements,selected,delay_elems,chunk,iterations,repeat,"
                 "alpha_s,beta_s_per_byte,wall_time_s,msgs_per_iter,bytes_per_iter,demotions")
STREAM_HEADER = "kernel,config,path,elements,repeats,mean_s,min_s,max_s,counter_updates"
LOG_HEADER = "rank,region,iteration,direction,peer,tag,offset,bytes,issue_ts,completion_ts"


class LogEntry(NamedTuple):
    rank: int
    region: int
    iteration: int
    direction: str  # "send" | "recv"
    peer: int
    tag: int
    offset: int  # element offset within the directive, or BULK
    nbytes: int
    issue_ts: float = math.nan
    completion_ts: float = math.nan


class MsgStats(NamedTuple):
    count: int
    nbytes: int


class MessageLog:
    """Append-only per-rank message record.

    Counts are always kept; timestamps are sampled only when ``timestamps``
    is set so that logging cannot perturb the measurements it supports.
    """

    def __init__(self, rank: int = 0, timestamps: bool = False):
        self.rank = rank
        self.timestamps = timestamps
        self.entries: list[LogEntry] = []

    def record(self, region: int, iteration: int, direction: str, peer: int, tag: int,
               offset: int, nbytes: int, issue_ts: float = math.nan,
               completion_ts: float = math.nan) -> None:
        self.entries.append(LogEntry(self.rank, region, iteration, direction, peer, tag, offset,
                                     nbytes, issue_ts, completion_ts))

    def __len__(self):
        return len(self.entries)

    def __iter__(self):
        return iter(self.entries)

    def filter(self, *, rank: int | None = None, region: int | None = None,
               direction: str | None = None) -> "MessageLog":
        out = MessageLog(self.rank if rank is None else rank, self.timestamps)
        out.entries = [e for e in self.entries
                       if (rank is None or e.rank == rank)
                       and (region is None or e.region == region)
                       and (direction is None or e.direction == direction)]
        return out

    @classmethod
    def merge(cls, logs: Iterable["MessageLog"]) -> "MessageLog":
        logs = list(logs)
        out = cls(0, any(lg.timestamps for lg in logs))
        for lg in logs:
            out.entries.extend(lg.entries)
        return out

    def total_bytes(self, direction: str = "send") -> int:
        return sum(e.nbytes for e in self.entries if e.direction == direction)

    def to_csv(self) -> str:
        buf = io.StringIO()
        buf.write(LOG_HEADER + "\n")
        w = csv.writer(buf, lineterminator="\n")
        for e in self.entries:
            w.writerow([e.rank, e.region, e.iteration, e.direction, e.peer, e.tag, e.offset,
                        e.nbytes, _fmt(e.issue_ts), _fmt(e.completion_ts)])
        return buf.getvalue()


def _fmt(x: float) -> str:
    return "" if isinstance(x, float) and math.isnan(x) else repr(x)


def summarize(log: MessageLog | Iterable[LogEntry]) -> dict[int, dict[tuple[str, int], MsgStats]]:
    """Per iteration, per (direction, peer): message count and total bytes.

    Feed it one rank's entries (or one region's) to get per-direction
    figures; entries of several ranks are folded together by key.
    """
    acc: dict[int, dict[tuple[str, int], list[int]]] = {}
    for e in log:
        slot = acc.setdefault(e.iteration, {}).setdefault((e.direction, e.peer), [0, 0])
        slot[0] += 1
        slot[1] += e.nbytes
    return {it: {k: MsgStats(*v) for k, v in sorted(d.items())} for it, d in sorted(acc.items())}


# -- result records ------------------------------------------------------

@dataclass
class Timings:
    wall_times: list[float]

    def __post_init__(self):
        if not self.wall_times:
            raise ValueError("a result needs at least one repeat")

    @property
    def mean(self) -> float:
        return statistics.fmean(self.wall_times)

    @property
    def min(self) -> float:
        return min(self.wall_times)

    @property
    def max(self) -> float:
        return max(self.wall_times)

    @property
    def median(self) -> float:
        return statistics.median(self.wall_times)


@dataclass
class BenchResult(Timings):
    config: Any = None
    log: MessageLog = field(default_factory=MessageLog)
    reports: list = field(default_factory=list)  # RegionReports, all ranks and repeats
    checksum: str = ""
    buffers: dict = field(default_factory=dict)  # final arrays keyed by (rank, name)

    def summary(self, rank: int = 0, repeat: int = 0) -> dict[int, dict[tuple[str, int], MsgStats]]:
        """Per-iteration message summary of one rank in one repeat."""
        regions = sorted({e.region for e in self.log if e.rank == rank})
        if not regions:
            return {}
        return summarize(self.log.filter(rank=rank, region=regions[repeat]))

    @property
    def demotions(self) -> int:
        return sum(len(r.demotions) for r in self.reports)

    def steady_state(self, rank: int = 0) -> MsgStats:
        """Messages and bytes sent by ``rank`` in the last iteration of the first repeat."""
        s = self.summary(rank)
        if not s:
            return MsgStats(0, 0)
        last = s[max(s)]
        sent = [v for (d, _p), v in last.items() if d == "send"]
        return MsgStats(sum(v.count for v in sent), sum(v.nbytes for v in sent))


@dataclass
class JacobiResult(Timings):
    config: Any = None
    variant: str = ""
    arrays: list = field(default_factory=list)  # per-rank interior of `old`, MP x NP
    log: MessageLog = field(default_factory=MessageLog)
    reports: list = field(default_factory=list)

    @property
    def grid(self):
        import numpy as np
        return np.vstack(self.arrays)


@dataclass
class StreamResult:
    """Mean kernel time per (config, path, kernel), plus counter totals per config."""

    config: Any
    times: dict[tuple[str, str], dict[str, list[float]]]  # (config, path) -> kernel -> per-repeat
    counter_updates: dict[tuple[str, str], int] = field(default_factory=dict)

    @property
    def kernels(self) -> list[str]:
        first = next(iter(self.times.values()))
        return list(first)

    def mean(self, config: str, path: str = "raw") -> dict[str, float]:
        return {k: statistics.fmean(v) for k, v in self.times[(config, path)].items()}

    def to_csv(self) -> str:
        buf = io.StringIO()
        buf.write(STREAM_HEADER + "\n")
        w = csv.writer(buf, lineterminator="\n")
        n = getattr(self.config, "nelems", "")
        for (cfg, path), per in self.times.items():
            for kernel, ts in per.items():
                w.writerow([kernel, cfg, path, n, len(ts), repr(statistics.fmean(ts)),
                            repr(min(ts)), repr(max(ts)), self.counter_updates.get((cfg, path), 0)])
        return buf.getvalue()


def overhead_ratio(candidate: dict[str, float], baseline: dict[str, float]) -> dict[str, float]:
    """Per-kernel ``candidate / baseline`` of mean times."""
    if set(candidate) != set(baseline):
        raise MismatchedKernels(f"kernel sets differ: {sorted(candidate)} vs {sorted(baseline)}")
    return {k: candidate[k] / baseline[k] for k in baseline}


def result_rows(result: BenchResult, transport: str = "inproc") -> list[dict[str, Any]]:
    """One CSV row per repeat in the fixed benchmark schema."""
    cfg = result.config
    steady = result.steady_state()
    rows = []
    for rep, t in enumerate(result.wall_times):
        rows.append(dict(
            benchmark=cfg.benchmark, mode=cfg.mode_name, transport=transport,
            elements=cfg.nelems, selected=cfg.selected, delay_elems=cfg.delay_elems,
            chunk=cfg.chunk, iterations=cfg.iterations, repeat=rep, alpha_s=repr(cfg.alpha),
            beta_s_per_byte=repr(cfg.beta), wall_time_s=repr(t), msgs_per_iter=steady.count,
            bytes_per_iter=steady.nbytes, demotions=result.demotions))
    return rows


def rows_to_csv(rows: Iterable[dict[str, Any]], header: bool = True) -> str:
    buf = io.StringIO()
    cols = RESULT_HEADER.split(",")
    if header:
        buf.write(RESULT_HEADER + "\n")
    w = csv.DictWriter(buf, fieldnames=cols, lineterminator="\n")
    for r in rows:
        w.writerow(r)
    return buf.getvalue()

