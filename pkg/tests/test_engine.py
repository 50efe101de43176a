import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from mdmp import NULL_RANK, Mode, ModeHint, OverlapConflict, RangeError, Runtime, World
from mdmp.engine import (ELEMENT_BIT, MAX_ORDINAL, ElemState, directive_tag, element_tag,
                         split_tag)
from mdmp.metrics import summarize

from conftest import run2


def test_tag_layout_roundtrip():
    t = directive_tag(5, 3)
    assert split_tag(t) == (5, 3, None)
    e = element_tag(t, 17)
    assert e & ELEMENT_BIT and split_tag(e) == (5, 3, 17)
    with pytest.raises(RangeError):
        directive_tag(0, MAX_ORDINAL + 1)


def exchange(ep, n, iters, *, chunk=1, hint=ModeHint.AUTO, extra_write_at=None, track=True):
    """Symmetric exchange: write send from recv, post send, post recv, end."""
    rt = Runtime(ep, chunk=chunk)
    send = rt.create_buffer("float64", n)
    recv = rt.create_buffer("float64", n)
    recv.load(np.arange(n) + 100.0 * ep.rank)
    peer = 1 - ep.rank
    region = rt.region_begin(hint)
    if track:
        rt.track(send, 0, n, region)
        rt.track(recv, 0, n, region)
    rd, wr = rt.accessors(recv).read, rt.accessors(send).write
    for it in range(1, iters + 1):
        rt.iteration_begin(region)
        for i in range(n):
            wr(i, rd(i) + 1.0)
        rt.post_send(region, send, 0, n, peer)
        if extra_write_at == it and ep.rank == 0:
            wr(0, -1.0)
        rt.post_recv(region, recv, 0, n, peer)
        rt.iteration_end(region)
    report = rt.region_end(region)
    return report, summarize(rt.log), recv.snapshot(), send.snapshot()


def test_profile_then_per_element_messages():
    out = run2(exchange, 6, 4)
    for report, summ, _, _ in out:
        assert report.mode_sequence == [Mode.PROFILING, Mode.MANAGED]
        peer = 1 - report.rank
        assert summ[1][("send", peer)].count == 1
        for it in (2, 3, 4):
            assert summ[it][("send", peer)].count == 6
            assert summ[it][("recv", peer)].count == 6
            assert summ[it][("send", peer)].nbytes == 48


def test_managed_matches_passthrough():
    managed = run2(exchange, 7, 5)
    bulk = run2(exchange, 7, 5, hint=ModeHint.PASSTHROUGH)
    for m, b in zip(managed, bulk):
        assert np.array_equal(m[2], b[2]) and np.array_equal(m[3], b[3])
    assert bulk[0][0].mode_sequence == [Mode.PASSTHROUGH]


def test_mixed_modes_interoperate():
    def body(ep):
        hint = ModeHint.AUTO if ep.rank == 0 else ModeHint.PASSTHROUGH
        return exchange(ep, 5, 4, hint=hint)

    mixed = World(2, timeout=20).run(body)
    bulk = run2(exchange, 5, 4, hint=ModeHint.PASSTHROUGH)
    for m, b in zip(mixed, bulk):
        assert np.array_equal(m[2], b[2])


def test_extra_write_demotes_and_reprofiles():
    out = run2(exchange, 4, 6, extra_write_at=3)
    bulk = run2(exchange, 4, 6, extra_write_at=3, hint=ModeHint.PASSTHROUGH)
    r0 = out[0][0]
    assert [m.value for m in r0.mode_sequence] == [
        "profiling", "managed", "passthrough", "profiling", "managed"]
    assert len(r0.demotions) == 1 and r0.demotions[0].iteration == 3
    assert "after its trigger" in r0.demotions[0].reasons[0]
    assert out[1][0].demotions == []
    for m, b in zip(out, bulk):
        assert np.array_equal(m[2], b[2]) and np.array_equal(m[3], b[3])


def test_late_attached_range_profiles_again():
    out = run2(exchange, 3, 3, track=False)
    report = out[0][0]
    # iteration 1 touched the buffers before the directives attached their ranges
    assert [s.mode for s in report.iterations] == [Mode.PROFILING, Mode.PROFILING, Mode.MANAGED]


@settings(max_examples=12, deadline=None)
@given(st.integers(1, 24), st.integers(1, 30))
def test_chunk_neutrality(n, chunk):
    base = run2(exchange, n, 3)
    out = run2(exchange, n, 3, chunk=chunk)
    for a, b in zip(base, out):
        assert np.array_equal(a[2], b[2]) and np.array_equal(a[3], b[3])
    peer = 1
    assert out[0][1][3][("send", peer)].count == -(-n // chunk)


def test_untouched_send_elements_go_at_iteration_begin():
    def body(ep):
        rt = Runtime(ep)
        buf = rt.create_buffer("int32", 4)
        buf.load([1, 2, 3, 4])
        region = rt.region_begin()
        rt.track(buf, 0, 4, region)
        for _ in range(3):
            rt.iteration_begin(region)
            if ep.rank == 0:
                sent = [d for d in region.directives if d.state.tolist() == [2] * 4]
                rt.post_send(region, buf, 0, 4, 1)
            else:
                d = rt.post_recv(region, buf, 0, 4, 0)
                rt.complete(region, d)
                sent = []
            rt.iteration_end(region)
        rt.region_end(region)
        return len(sent), buf.snapshot().tolist()

    out = run2(body)
    assert out[0][0] == 1  # managed instance already completed before its call site
    assert out[1][1] == [1, 2, 3, 4]


def test_receive_blocks_until_element_arrives():
    """Rank 1 reads each element as soon as the runtime delivers it."""

    def body(ep):
        rt = Runtime(ep)
        buf = rt.create_buffer("float32", 5)
        region = rt.region_begin()
        rt.track(buf, 0, 5, region)
        acc = rt.accessors(buf)
        seen = []
        for it in range(1, 4):
            rt.iteration_begin(region)
            if ep.rank == 0:
                for i in range(5):
                    acc.write(i, float(10 * it + i))
                rt.post_send(region, buf, 0, 5, 1)
            else:
                d = rt.post_recv(region, buf, 0, 5, 0)
                rt.complete(region, d)
                seen.append([acc.read(i) for i in range(5)])
            rt.iteration_end(region)
        rt.region_end(region)
        return seen

    seen = run2(body)[1]
    assert seen == [[float(10 * it + i) for i in range(5)] for it in (1, 2, 3)]


def test_null_peer_and_outside_iteration():
    rt = Runtime()
    buf = rt.create_buffer("float32", 4)
    region = rt.region_begin()
    rt.iteration_begin(region)
    d = rt.post_send(region, buf, 0, 4, NULL_RANK)
    assert d.done and (d.state == ElemState.COMPLETED).all()
    rt.iteration_end(region)
    assert len(rt.log) == 0
    rt.region_end(region)


def test_overlapping_send_and_recv_refused():
    rt = Runtime(World(2).endpoint(0))
    buf = rt.create_buffer("float32", 8)
    region = rt.region_begin()
    rt.iteration_begin(region)
    rt.post_send(region, buf, 0, 4, 1)
    with pytest.raises(OverlapConflict):
        rt.post_recv(region, buf, 2, 4, 1)
    with pytest.raises(RangeError):
        rt.post_send(region, buf, 6, 4, 1)
    with pytest.raises(RangeError):
        rt.post_send(region, buf, 0, 2, 5)


def test_unprofiled_directive_demotes():
    def body(ep):
        rt = Runtime(ep)
        buf = rt.create_buffer("float32", 8)
        if ep.rank == 0:
            buf.load(np.arange(8))
        region = rt.region_begin()
        rt.track(buf, 0, 4, region)
        for it in range(1, 5):
            rt.iteration_begin(region)
            if ep.rank == 0:
                rt.post_send(region, buf, 0, 4, 1)
                if it == 3:
                    rt.post_send(region, buf, 4, 4, 1)
            else:
                rt.post_recv(region, buf, 0, 4, 0)
                if it == 3:
                    rt.post_recv(region, buf, 4, 4, 0)
            rt.iteration_end(region)
        return rt.region_end(region), buf.snapshot().tolist()

    out = run2(body)
    assert out[1][1] == list(range(8))
    for r, _ in out:
        assert len(r.demotions) == 1
        assert "not in the profile" in r.demotions[0].reasons[0]


def test_profiles_are_deterministic():
    def body(ep):
        rt = Runtime(ep)
        s = rt.create_buffer("float64", 6)
        r = rt.create_buffer("float64", 6)
        region = rt.region_begin()
        rt.track(s, 0, 6, region)
        rt.track(r, 0, 6, region)
        rt.iteration_begin(region)
        for i in range(6):
            s.write(i, r.read(i) * 2)
        rt.post_send(region, s, 0, 6, 1 - ep.rank)
        rt.post_recv(region, r, 0, 6, 1 - ep.rank)
        rt.iteration_end(region)
        profiles = region.profiles
        rt.region_end(region)
        return profiles

    a, b = run2(body), run2(body)
    for pa, pb in zip(a, b):
        assert all(x.same_as(y) for x, y in zip(pa, pb))
    send = [p for p in a[0] if p.direction.value == "send"][0]
    recv = [p for p in a[0] if p.direction.value == "recv"][0]
    assert send.trigger_writes.tolist() == [1] * 6
    assert recv.trigger_reads.tolist() == [1] * 6
