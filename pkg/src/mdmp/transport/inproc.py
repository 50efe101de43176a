"""In-process transport: ranks are threads of one process sharing endpoints."""
from __future__ import annotations

import threading
from typing import Any, Callable, Sequence

from ..errors import TransportFailure
from .base import CostModel, Endpoint


class InProcEndpoint(Endpoint):
    def __init__(self, world: "World", rank: int):
        super().__init__(rank, world.nranks, world.cost, timeout=world.timeout)
        self._world = world

    def _transmit(self, peer: int, tag: int, payload: bytes) -> None:
        now = self.clock()
        self._world.endpoints[peer].deliver(self.rank, tag, payload, now + self.cost.delay(len(payload)))


class World:
    """A set of in-process endpoints, one per rank.

    ``timeout`` bounds every individual wait; ``None`` waits until the world
    is aborted.
    """

    def __init__(self, nranks: int, cost: CostModel | None = None, *, timeout: float | None = None):
        if nranks < 1:
            raise ValueError("a world needs at least one rank")
        self.nranks = nranks
        self.cost = cost or CostModel()
        self.timeout = timeout
        self.endpoints = [InProcEndpoint(self, r) for r in range(nranks)]

    def endpoint(self, rank: int) -> InProcEndpoint:
        return self.endpoints[rank]

    def abort(self, exc: Exception | None = None) -> None:
        exc = exc or TransportFailure("world aborted")
        for ep in self.endpoints:
            ep.fail(exc)

    def run(self, fn: Callable[..., Any], args: Sequence[tuple] | None = None,
            join_timeout: float | None = None) -> list[Any]:
        """Run ``fn(endpoint, *args[rank])`` on one thread per rank.

        If any rank raises, the world is aborted so blocked peers wake up, and
        the first non-transport error is re-raised.
        """
        results: list[Any] = [None] * self.nranks
        errors: list[BaseException | None] = [None] * self.nranks

        def body(rank):
            try:
                extra = args[rank] if args is not None else ()
                results[rank] = fn(self.endpoints[rank], *extra)
            except BaseException as exc:  # noqa: BLE001 - re-raised below
                errors[rank] = exc
                self.abort(TransportFailure(f"rank {rank} failed: {exc!r}"))

        threads = [threading.Thread(target=body, args=(r,), name=f"rank-{r}", daemon=True)
                   for r in range(self.nranks)]
        for t in threads:
            t.start()
        for t in threads:
            t.join(join_timeout)
            if t.is_alive():
                self.abort(TransportFailure("rank did not finish in time"))
                t.join(5.0)
        first = [e for e in errors if e is not None]
        if first:
            primary = [e for e in first if not isinstance(e, TransportFailure)]
            raise (primary or first)[0]
        return results


def run_ranks(nranks: int, fn: Callable[..., Any], args: Sequence[tuple] | None = None, *,
              cost: CostModel | None = None, timeout: float | None = None) -> list[Any]:
    return World(nranks, cost, timeout=timeout).run(fn, args)
