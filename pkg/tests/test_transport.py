import socket
import statistics
import threading
import time

import pytest

from mdmp import CostModel, TransportFailure, World
from mdmp.errors import LengthMismatch
from mdmp.transport import (NULL_RANK, SocketEndpoint, decode_header, encode_frame, parse_peers,
                            run_ranks)


def test_cost_model():
    assert CostModel(1e-6, 2e-9).delay(1000) == pytest.approx(3e-6)
    with pytest.raises(ValueError):
        CostModel(-1.0, 0.0)


def test_fifo_per_peer_and_tag():
    def body(ep):
        if ep.rank == 0:
            for i in range(20):
                ep.isend(1, 7, bytes([i]))
            return None
        hs = [ep.irecv(0, 7) for _ in range(20)]
        ep.wait_all(hs)
        return [h.data[0] for h in hs]

    assert run_ranks(2, body, timeout=10)[1] == list(range(20))


def test_tag_matching_and_mask():
    w = World(2, timeout=5)
    a, b = w.endpoint(0), w.endpoint(1)
    a.isend(1, 0x10, b"x")
    a.isend(1, 0x21, b"y")
    h = b.irecv(0, 0x21)
    b.wait(h)
    assert h.data == b"y"
    g = b.irecv(0, 0x1F, mask=0xF0)
    b.wait(g)
    assert (g.data, g.matched_tag) == (b"x", 0x10)


def test_null_rank_is_instant():
    ep = World(1).endpoint(0)
    assert ep.isend(NULL_RANK, 1, b"abc").complete
    h = ep.irecv(NULL_RANK, 1)
    assert h.test() and h.data is None


def test_delivery_respects_alpha():
    w = World(2, CostModel(alpha=0.02), timeout=5)
    a, b = w.endpoint(0), w.endpoint(1)
    t0 = time.perf_counter()
    a.isend(1, 1, b"abcd")
    h = b.irecv(0, 1, 4)
    assert not h.test()
    b.wait(h)
    assert time.perf_counter() - t0 >= 0.02


def test_link_fifo_across_sizes():
    # a large message then a small one: the small one may not overtake
    w = World(2, CostModel(alpha=0.0, beta=1e-6), timeout=5)
    a, b = w.endpoint(0), w.endpoint(1)
    a.isend(1, 1, bytes(10000))
    a.isend(1, 2, b"s")
    h2 = b.irecv(0, 2)
    h1 = b.irecv(0, 1)
    b.wait(h2)
    assert h1.test()


def test_length_mismatch():
    w = World(2, timeout=5)
    w.endpoint(0).isend(1, 1, b"abc")
    h = w.endpoint(1).irecv(0, 1, nbytes=4)
    with pytest.raises(LengthMismatch):
        w.endpoint(1).wait(h)


def test_wait_timeout_and_abort():
    w = World(2, timeout=0.05)
    with pytest.raises(TransportFailure):
        w.endpoint(0).wait(w.endpoint(0).irecv(1, 1))
    w2 = World(2)
    h = w2.endpoint(0).irecv(1, 1)
    threading.Timer(0.05, w2.abort).start()
    with pytest.raises(TransportFailure):
        w2.endpoint(0).wait(h)
    with pytest.raises(TransportFailure):
        w2.endpoint(0).isend(1, 1, b"")


def test_failed_rank_unblocks_peer():
    def body(ep):
        if ep.rank == 0:
            raise RuntimeError("boom")
        ep.wait(ep.irecv(0, 1))

    with pytest.raises(RuntimeError, match="boom"):
        World(2, timeout=10).run(body)


def test_barrier_three_ranks():
    order = []

    def body(ep):
        time.sleep(0.01 * ep.rank)
        order.append(("in", ep.rank))
        ep.barrier()
        order.append(("out", ep.rank))

    run_ranks(3, body, timeout=10)
    assert [k for k, _ in order[:3]] == ["in"] * 3


def test_take_is_nonblocking():
    w = World(2)
    a, b = w.endpoint(0), w.endpoint(1)
    assert b.take(0, 5) is None
    a.isend(1, 5, b"q")
    assert b.take(0, 5) == (5, b"q")


def test_frames_roundtrip():
    frame = encode_frame(3, 1 << 63, b"payload")
    sender, tag, n = decode_header(frame[:20])
    assert (sender, tag, n) == (3, 1 << 63, 7)
    with pytest.raises(TransportFailure):
        decode_header(b"\0" * 20)


def test_parse_peers():
    assert parse_peers("a:1, 127.0.0.1:80") == [("a", 1), ("127.0.0.1", 80)]
    with pytest.raises(ValueError):
        parse_peers("nohost")


def _free_ports(n):
    socks = [socket.socket() for _ in range(n)]
    for s in socks:
        s.bind(("127.0.0.1", 0))
    ports = [s.getsockname()[1] for s in socks]
    for s in socks:
        s.close()
    return ports


def test_socket_endpoints_exchange():
    peers = [("127.0.0.1", p) for p in _free_ports(2)]
    out = {}

    def rank(r):
        ep = SocketEndpoint(r, peers, CostModel(alpha=0.001), timeout=10, connect_timeout=10)
        try:
            ep.barrier()
            if r == 0:
                ep.isend(1, 9, b"ping")
                h = ep.irecv(1, 9)
                ep.wait(h)
                out[r] = h.data
            else:
                h = ep.irecv(0, 9)
                ep.wait(h)
                ep.isend(0, 9, h.data + b"!")
                out[r] = h.data
            ep.barrier()
        finally:
            ep.close()

    ts = [threading.Thread(target=rank, args=(r,)) for r in (1, 0)]
    for t in ts:
        t.start()
    for t in ts:
        t.join(20)
    assert out == {0: b"ping!", 1: b"ping"}


def test_latency_lower_bound_many_messages():
    w = World(2, CostModel(alpha=0.002), timeout=5)
    a, b = w.endpoint(0), w.endpoint(1)
    lat = []
    for i in range(10):
        t0 = time.perf_counter()
        a.isend(1, i, b"1234")
        b.wait(b.irecv(0, i))
        lat.append(time.perf_counter() - t0)
    assert min(lat) >= 0.002
    assert statistics.median(lat) < 0.05
