import pytest

from mdmp import (InactiveRegion, Mode, ModeHint, NestedRegion, OpenIteration,
                  PendingCommunication, Runtime, Unbalanced, World)
from mdmp.runtime import REPORT_HEADER


def test_region_lifecycle_errors():
    rt = Runtime()
    region = rt.region_begin()
    with pytest.raises(NestedRegion):
        rt.region_begin()
    with pytest.raises(Unbalanced):
        rt.iteration_end(region)
    rt.iteration_begin(region)
    with pytest.raises(Unbalanced):
        rt.iteration_begin(region)
    with pytest.raises(OpenIteration):
        rt.region_end(region)
    rt.iteration_end(region)
    rt.region_end(region)
    buf = rt.create_buffer("float32", 2)
    with pytest.raises(InactiveRegion):
        rt.post_send(region, buf, 0, 2, 0)
    with pytest.raises(InactiveRegion):
        rt.iteration_begin(region)


def test_counting_flag_follows_mode():
    rt = Runtime()
    buf = rt.create_buffer("float32", 2)
    assert not buf.counting
    region = rt.region_begin()
    assert buf.counting and region.mode is Mode.PROFILING
    rt.region_end(region)
    assert not buf.counting
    forced = rt.region_begin(ModeHint.PASSTHROUGH)
    assert not buf.counting and forced.mode is Mode.PASSTHROUGH
    rt.region_end(forced)
    assert rt.region_begin("passthrough").forced


def test_forced_passthrough_never_profiles():
    rt = Runtime()
    region = rt.region_begin(ModeHint.PASSTHROUGH)
    for _ in range(3):
        rt.iteration_begin(region)
        rt.iteration_end(region)
    report = rt.region_end(region)
    assert report.mode_sequence == [Mode.PASSTHROUGH]
    assert [s.mode for s in report.iterations] == [Mode.PASSTHROUGH] * 3


def test_empty_profile_goes_managed():
    rt = Runtime()
    region = rt.region_begin()
    rt.iteration_begin(region)
    rt.iteration_end(region)
    assert region.mode is Mode.MANAGED and region.profiles == []


def test_outside_iteration_receive_must_complete():
    w = World(2, timeout=5)
    rt0, rt1 = Runtime(w.endpoint(0)), Runtime(w.endpoint(1))
    b0, b1 = rt0.create_buffer("int32", 3), rt1.create_buffer("int32", 3)
    b0.load([7, 8, 9])
    r0, r1 = rt0.region_begin(), rt1.region_begin()
    rt0.post_send(r0, b0, 0, 3, 1)
    d = rt1.post_recv(r1, b1, 0, 3, 0)
    with pytest.raises(PendingCommunication):
        rt1.region_end(r1)
    rt1.complete(r1, d)
    rt1.region_end(r1)
    rt0.region_end(r0)
    assert b1.snapshot().tolist() == [7, 8, 9]


def test_regions_detach_their_ranges():
    rt = Runtime()
    buf = rt.create_buffer("float64", 4)
    keep = rt.track(buf, 0, 1)
    region = rt.region_begin()
    rt.track(buf, 2, 2, region)
    assert len(buf.ranges) == 2
    rt.region_end(region)
    assert buf.ranges == [keep]


def test_report_csv():
    rt = Runtime()
    region = rt.region_begin()
    rt.iteration_begin(region)
    rt.iteration_end(region)
    text = rt.region_end(region).to_csv()
    lines = text.splitlines()
    assert lines[0] == REPORT_HEADER
    assert lines[1].split(",")[2:4] == ["1", "profiling"]
