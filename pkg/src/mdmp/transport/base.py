"""Endpoint, handles and the latency/bandwidth cost model.

Every concrete transport delivers frames into :meth:`Endpoint.deliver`; the
matching, visibility and waiting logic below is shared by all of them.
"""
from __future__ import annotations

import itertools
import threading
import time
from collections import deque
from dataclasses import dataclass
from enum import Enum
from typing import Iterable

from ..errors import LengthMismatch, TransportFailure

NULL_RANK = -1
TAG_LIMIT = 1 << 64
FULL_MASK = TAG_LIMIT - 1
# reserved for transport-internal traffic (barriers)
CONTROL_BIT = 1 << 62

_handle_ids = itertools.count()


@dataclass(frozen=True)
class CostModel:
    """Per-message latency ``alpha`` (s) and per-byte cost ``beta`` (s/byte)."""

    alpha: float = 0.0
    beta: float = 0.0

    def __post_init__(self):
        if not (self.alpha >= 0.0 and self.beta >= 0.0):
            raise ValueError(f"cost model needs alpha >= 0 and beta >= 0, got {self.alpha}, {self.beta}")

    def delay(self, nbytes: int) -> float:
        return self.alpha + self.beta * nbytes


class HandleKind(Enum):
    SEND = "send"
    RECV = "recv"


class HandleState(Enum):
    IN_FLIGHT = "in_flight"
    COMPLETE = "complete"


class CommHandle:
    """A non-blocking request. Receives expose the payload once complete."""

    __slots__ = ("handle_id", "kind", "peer", "tag", "mask", "nbytes", "state",
                 "data", "matched_tag", "posted_at", "completed_at", "error", "_ep")

    def __init__(self, ep, kind: HandleKind, peer: int, tag: int, mask: int = FULL_MASK,
                 nbytes: int | None = None):
        self.handle_id = next(_handle_ids)
        self.kind = kind
        self.peer = peer
        self.tag = tag
        self.mask = mask
        self.nbytes = nbytes
        self.state = HandleState.IN_FLIGHT
        self.data: bytes | None = None
        self.matched_tag: int | None = None
        self.posted_at = ep.clock()
        self.completed_at: float | None = None
        self.error: Exception | None = None
        self._ep = ep

    @property
    def complete(self) -> bool:
        return self.state is HandleState.COMPLETE

    def test(self) -> bool:
        return self._ep.test(self)

    def wait(self, timeout: float | None = None) -> None:
        self._ep.wait(self, timeout)

    def _finish(self, when: float, data: bytes | None = None, tag: int | None = None):
        self.data = data
        self.matched_tag = tag
        self.completed_at = when
        self.state = HandleState.COMPLETE

    def __repr__(self):
        return f"CommHandle({self.kind.value}, peer={self.peer}, tag={self.tag:#x}, {self.state.value})"


def _check_tag(tag: int):
    if not 0 <= tag < TAG_LIMIT:
        raise ValueError(f"tag must fit in 64 unsigned bits, got {tag}")


class Endpoint:
    """One rank's view of the transport.

    isend/irecv/test/wait are called only from the owning rank's thread;
    :meth:`deliver` may be called from any thread.  Messages from one source
    become visible in send order (link FIFO), each no earlier than its
    send time plus the cost-model delay.
    """

    def __init__(self, rank: int, nranks: int, cost: CostModel | None = None, *,
                 timeout: float | None = None, clock=time.perf_counter):
        if not 0 <= rank < nranks:
            raise ValueError(f"rank {rank} outside [0, {nranks})")
        self.rank = rank
        self.nranks = nranks
        self.cost = cost or CostModel()
        self.timeout = timeout
        self.clock = clock
        self._cond = threading.Condition(threading.Lock())
        self._inbox: list[deque] = [deque() for _ in range(nranks)]
        self._last_visible = [0.0] * nranks
        self._posted: list[list[CommHandle]] = [[] for _ in range(nranks)]
        self._waiting = 0
        self._failure: Exception | None = None
        self._barrier_epoch = 0

    # -- subclass hooks --------------------------------------------------
    def _transmit(self, peer: int, tag: int, payload: bytes) -> None:
        raise NotImplementedError

    # -- delivery side ---------------------------------------------------
    def deliver(self, src: int, tag: int, payload: bytes, visible_at: float) -> None:
        """Queue a message from ``src``; it becomes matchable at ``visible_at``.

        Each source has a single producing thread, and deque appends are
        atomic, so only sleeping waiters need the condition variable.
        """
        v = max(visible_at, self._last_visible[src])
        self._last_visible[src] = v
        self._inbox[src].append((v, tag, payload))
        if self._waiting:
            with self._cond:
                self._cond.notify_all()

    def fail(self, exc: Exception) -> None:
        """Make every current and future wait on this endpoint raise ``exc``."""
        with self._cond:
            if self._failure is None:
                self._failure = exc
            self._cond.notify_all()

    @property
    def failed(self) -> bool:
        return self._failure is not None

    # -- user side -------------------------------------------------------
    def _check_peer(self, peer: int):
        if peer != NULL_RANK and not 0 <= peer < self.nranks:
            raise ValueError(f"peer {peer} is not a rank of a {self.nranks}-rank world")

    def isend(self, peer: int, tag: int, payload) -> CommHandle:
        self._check_peer(peer)
        _check_tag(tag)
        h = CommHandle(self, HandleKind.SEND, peer, tag, nbytes=len(payload))
        if peer != NULL_RANK:
            if self._failure is not None:
                raise TransportFailure(f"rank {self.rank}: transport is down") from self._failure
            self._transmit(peer, tag, bytes(payload))
        # buffered: the payload is already copied
        h._finish(h.posted_at)
        return h

    def send_nowait(self, peer: int, tag: int, payload: bytes) -> None:
        """Buffered send without a request object (engine fast path)."""
        if self._failure is not None:
            raise TransportFailure(f"rank {self.rank}: transport is down") from self._failure
        self._transmit(peer, tag, payload)

    def take(self, peer: int, tag: int, mask: int = FULL_MASK) -> tuple[int, bytes] | None:
        """Non-blocking matched receive: pop the first visible matching message.

        Receives already posted for ``peer`` are matched first, so they keep
        priority over this call.
        """
        now = self.clock()
        if self._posted[peer]:
            self._match(peer, now)
        q = self._inbox[peer]
        # index loop: the producer may append concurrently
        i = 0
        while i < len(q):
            vis, t, payload = q[i]
            if vis > now:
                return None
            if (t ^ tag) & mask == 0:
                del q[i]
                return t, payload
            i += 1
        return None

    def irecv(self, peer: int, tag: int, nbytes: int | None = None,
              mask: int = FULL_MASK) -> CommHandle:
        """Post a receive matching messages with ``msg_tag & mask == tag & mask``."""
        self._check_peer(peer)
        _check_tag(tag)
        h = CommHandle(self, HandleKind.RECV, peer, tag, mask, nbytes)
        if peer == NULL_RANK:
            h._finish(h.posted_at)
            return h
        self._posted[peer].append(h)
        self._match(peer, self.clock())
        return h

    def _match(self, src: int, now: float) -> float | None:
        """Match visible messages from ``src`` against posted receives.

        Returns the visibility time of the first message still hidden, if any.
        Runs on the owning thread only; producers only ever append.
        """
        posted = self._posted[src]
        q = self._inbox[src]
        if not posted or not q:
            return None
        pending = None
        i = 0
        while i < len(q) and posted:
            vis, tag, payload = q[i]
            if vis > now:
                pending = vis
                break
            for j, h in enumerate(posted):
                if (tag ^ h.tag) & h.mask == 0:
                    del q[i]
                    del posted[j]
                    if h.nbytes is not None and h.nbytes != len(payload):
                        h.error = LengthMismatch(
                            f"rank {self.rank}: expected {h.nbytes} bytes from {src}, got {len(payload)}")
                    h._finish(now, payload, tag)
                    break
            else:
                i += 1
        return pending

    def test(self, h: CommHandle) -> bool:
        if h.state is not HandleState.COMPLETE:
            self._match(h.peer, self.clock())
        if h.error is not None:
            raise h.error
        return h.state is HandleState.COMPLETE

    def wait(self, h: CommHandle, timeout: float | None = None) -> None:
        if h.state is HandleState.COMPLETE:
            if h.error is not None:
                raise h.error
            return
        timeout = self.timeout if timeout is None else timeout
        deadline = None if timeout is None else self.clock() + timeout
        while True:
            with self._cond:
                # announce before matching: a concurrent deliver then either
                # lands before the match below or sees us waiting and notifies
                self._waiting += 1
                try:
                    now = self.clock()
                    nxt = self._match(h.peer, now)
                    if h.state is HandleState.COMPLETE:
                        break
                    # data already delivered stays receivable after a failure
                    if self._failure is not None and nxt is None:
                        raise TransportFailure(
                            f"rank {self.rank}: transport failed while waiting on {h}") from self._failure
                    wait_for = None if nxt is None else max(nxt - now, 0.0)
                    if deadline is not None:
                        left = deadline - now
                        if left <= 0:
                            raise TransportFailure(f"rank {self.rank}: timed out waiting on {h}")
                        wait_for = left if wait_for is None else min(wait_for, left)
                    self._cond.wait(wait_for)
                finally:
                    self._waiting -= 1
        if h.error is not None:
            raise h.error

    def wait_all(self, handles: Iterable[CommHandle]) -> None:
        for h in handles:
            self.wait(h)

    def barrier(self) -> None:
        """Gather-to-0 then release, over control-tagged messages."""
        if self.nranks == 1:
            return
        tag = CONTROL_BIT | (self._barrier_epoch & 0xFFFFFFFF)
        self._barrier_epoch += 1
        if self.rank == 0:
            self.wait_all([self.irecv(r, tag) for r in range(1, self.nranks)])
            for r in range(1, self.nranks):
                self.isend(r, tag, b"")
        else:
            self.isend(0, tag, b"")
            self.wait(self.irecv(0, tag))

    def close(self) -> None:
        self.fail(TransportFailure(f"rank {self.rank}: endpoint closed"))


def wait_all(handles: Iterable[CommHandle]) -> None:
    """Wait on handles that may belong to different endpoints."""
    for h in handles:
        h.wait()
