"""TCP transport between processes, one rank per process.

Frame layout (little-endian): magic ``0x4D444D50`` u32, sender u32, tag u64,
payload length u32, payload.  Rank ``r`` listens on ``peers[r]``; every rank
connects to all lower ranks and introduces itself with an empty hello frame.
The cost model delay is added on top of physical latency at arrival.
"""
from __future__ import annotations

import queue
import socket
import struct
import threading
import time
from typing import Sequence

from ..errors import PeerUnreachable, TransportFailure
from .base import CostModel, Endpoint

MAGIC = 0x4D444D50
HEADER = struct.Struct("<IIQI")


def encode_frame(sender: int, tag: int, payload: bytes = b"") -> bytes:
    return HEADER.pack(MAGIC, sender, tag, len(payload)) + payload


def decode_header(raw: bytes) -> tuple[int, int, int]:
    """Return (sender, tag, length) of a frame header, checking the magic."""
    magic, sender, tag, length = HEADER.unpack(raw)
    if magic != MAGIC:
        raise TransportFailure(f"bad frame magic {magic:#x}")
    return sender, tag, length


def _recv_exact(sock: socket.socket, n: int) -> bytes:
    buf = bytearray()
    while len(buf) < n:
        chunk = sock.recv(n - len(buf))
        if not chunk:
            raise ConnectionError("peer closed the connection")
        buf += chunk
    return bytes(buf)


def parse_peers(spec: str) -> list[tuple[str, int]]:
    """``"host:port,host:port"`` -> list of (host, port)."""
    out = []
    for item in spec.split(","):
        host, _, port = item.strip().rpartition(":")
        if not host or not port.isdigit():
            raise ValueError(f"peer address must look like host:port, got {item!r}")
        out.append((host, int(port)))
    return out


class SocketEndpoint(Endpoint):
    def __init__(self, rank: int, peers: Sequence[tuple[str, int]], cost: CostModel | None = None, *,
                 timeout: float | None = None, connect_timeout: float = 30.0):
        super().__init__(rank, len(peers), cost, timeout=timeout)
        self.peers = list(peers)
        self._socks: dict[int, socket.socket] = {}
        self._outq: dict[int, queue.Queue] = {}
        self._threads: list[threading.Thread] = []
        self._closing = False
        self._connect(connect_timeout)

    # -- setup -----------------------------------------------------------
    def _connect(self, connect_timeout: float):
        n_accept = self.nranks - 1 - self.rank
        listener = None
        if n_accept:
            listener = socket.socket(socket.AF_INET, socket.SOCK_STREAM)
            listener.setsockopt(socket.SOL_SOCKET, socket.SO_REUSEADDR, 1)
            listener.bind(self.peers[self.rank])
            listener.listen(n_accept)
        deadline = time.monotonic() + connect_timeout
        for lower in range(self.rank):
            while True:
                try:
                    s = socket.create_connection(self.peers[lower], timeout=5.0)
                    break
                except OSError as exc:
                    if time.monotonic() > deadline:
                        raise PeerUnreachable(f"rank {self.rank} cannot reach rank {lower} at "
                                              f"{self.peers[lower]}") from exc
                    time.sleep(0.05)
            s.settimeout(None)
            s.sendall(encode_frame(self.rank, 0))
            self._attach(lower, s)
        if listener is not None:
            listener.settimeout(max(deadline - time.monotonic(), 0.1))
            try:
                for _ in range(n_accept):
                    s, _addr = listener.accept()
                    s.settimeout(None)
                    sender, _tag, length = decode_header(_recv_exact(s, HEADER.size))
                    if length:
                        _recv_exact(s, length)
                    self._attach(sender, s)
            except socket.timeout as exc:
                raise PeerUnreachable(f"rank {self.rank}: not all higher ranks connected") from exc
            finally:
                listener.close()

    def _attach(self, peer: int, s: socket.socket):
        s.setsockopt(socket.IPPROTO_TCP, socket.TCP_NODELAY, 1)
        self._socks[peer] = s
        self._outq[peer] = queue.Queue()
        for target, name in ((self._reader, "reader"), (self._writer, "writer")):
            t = threading.Thread(target=target, args=(peer, s), daemon=True,
                                 name=f"rank{self.rank}-{name}-{peer}")
            t.start()
            self._threads.append(t)

    # -- background threads ----------------------------------------------
    def _reader(self, peer: int, s: socket.socket):
        try:
            while True:
                sender, tag, length = decode_header(_recv_exact(s, HEADER.size))
                payload = _recv_exact(s, length) if length else b""
                self.deliver(sender, tag, payload, self.clock() + self.cost.delay(length))
        except (OSError, ConnectionError, TransportFailure) as exc:
            if not self._closing:
                self.fail(PeerUnreachable(f"rank {self.rank}: link to rank {peer} lost: {exc}"))

    def _writer(self, peer: int, s: socket.socket):
        q = self._outq[peer]
        while True:
            frame = q.get()
            if frame is None:
                return
            try:
                s.sendall(frame)
            except OSError as exc:
                self.fail(PeerUnreachable(f"rank {self.rank}: cannot send to rank {peer}: {exc}"))
                return

    def _transmit(self, peer: int, tag: int, payload: bytes) -> None:
        if peer == self.rank:
            self.deliver(peer, tag, payload, self.clock() + self.cost.delay(len(payload)))
            return
        if self.failed:
            raise PeerUnreachable(f"rank {self.rank}: link to rank {peer} is down")
        self._outq[peer].put(encode_frame(self.rank, tag, payload))

    def close(self) -> None:
        self._closing = True
        for q in self._outq.values():
            q.put(None)
        for t in self._threads:
            if t.name.split("-")[1] == "writer":
                t.join(5.0)
        for s in self._socks.values():
            try:
                s.shutdown(socket.SHUT_RDWR)
            except OSError:
                pass
            s.close()
        super().close()
