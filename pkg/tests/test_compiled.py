import time

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from mdmp import ConfigError, CounterOverflow, ModeHint, Runtime
from mdmp.compiled import (KERNELS, SCALAR, _delay_loop, delay, kernel_source, run_kernel,
                           run_script)
from mdmp.tracking import COUNTER_MAX


def test_delay_sum_and_sink():
    assert _delay_loop(5) == 10.0
    assert _delay_loop(0) == 0.0
    delay(3)


def test_delay_cost_is_linear():
    delay(1)
    ns = [20_000, 80_000, 320_000]
    times = []
    for n in ns:
        best = float("inf")
        for _ in range(5):
            t0 = time.perf_counter()
            delay(n)
            best = min(best, time.perf_counter() - t0)
        times.append(best)
    slope, icpt = np.polyfit(ns, times, 1)
    fit = np.polyval([slope, icpt], ns)
    assert slope > 0
    assert np.max(np.abs(fit - times) / times) < 0.5


def make_arrays(rt, n):
    arrays = {"ia": rt.create_buffer("int32", n), "a": rt.create_buffer("float64", n),
              "b": rt.create_buffer("float64", n), "c": rt.create_buffer("float64", n)}
    arrays["a"].storage[:] = np.linspace(0, 1, n)
    arrays["b"].storage[:] = 2.0
    arrays["c"].storage[:] = np.arange(n)
    return arrays


@pytest.mark.parametrize("path", ["raw", "generic", "fast"])
def test_kernels_compute_stream_updates(path):
    rt = Runtime()
    arr = make_arrays(rt, 16)
    a0, b0, c0 = (arr[x].snapshot() for x in "abc")
    run_kernel("Db Triad", path, arr)
    assert np.array_equal(arr["a"].storage, b0 + SCALAR * c0)
    run_kernel("Db Copy", path, arr)
    assert np.array_equal(arr["c"].storage, arr["a"].storage)
    run_kernel("Int Assign", path, arr)
    assert (arr["ia"].storage == 7).all()


def test_tracked_kernel_counts_inside_region_only():
    rt = Runtime()
    arr = make_arrays(rt, 8)
    ranges = {x: rt.track(b, 0, 8) for x, b in arr.items()}
    run_kernel("Db Add", "fast", arr)
    assert sum(int(r.reads.sum() + r.writes.sum()) for r in ranges.values()) == 0
    region = rt.region_begin(ModeHint.AUTO)
    rt.iteration_begin(region)
    run_kernel("Db Add", "generic", arr)
    run_kernel("Db Add", "fast", arr)
    assert ranges["a"].reads.tolist() == [2] * 8
    assert ranges["c"].writes.tolist() == [2] * 8
    assert ranges["b"].writes.sum() == 0


def test_kernel_errors():
    rt = Runtime()
    arr = make_arrays(rt, 4)
    with pytest.raises(ConfigError):
        run_kernel("Db Copy", "turbo", arr)
    with pytest.raises(ConfigError):
        run_kernel("Db Copy", "fast", {"a": np.zeros(4), "c": np.zeros(4)})
    rng = rt.track(arr["a"], 0, 4)
    region = rt.region_begin()
    rt.iteration_begin(region)
    rng.reads[1] = COUNTER_MAX
    with pytest.raises(CounterOverflow):
        run_kernel("Db Copy", "fast", arr)


def test_generated_source_differs_by_path():
    assert "rd_a(" in kernel_source("Db Copy", "generic")
    assert "a_m[0]" in kernel_source("Db Copy", "fast")
    assert "_m" not in kernel_source("Db Copy", "raw")
    assert set(KERNELS) == {"Int Assign", "Db Assign", "Db Copy", "Db Scale", "Db Add",
                            "Db Triad"}


ops = st.lists(st.tuples(st.integers(0, 1), st.integers(0, 19)), max_size=80)
spans = st.lists(st.tuples(st.integers(0, 19), st.integers(1, 5)), max_size=3)


def _tracked(spans_, counting=True):
    rt = Runtime()
    buf = rt.create_buffer("float32", 20)
    buf.load(np.arange(20))
    for s, c in spans_:
        try:
            rt.track(buf, s, min(c, 20 - s))
        except ValueError:
            pass
    if counting:
        region = rt.region_begin()
        rt.iteration_begin(region)
    return rt, buf


@settings(max_examples=40, deadline=None)
@given(spans, ops)
def test_compiled_paths_match_python_accessors(spans_, ops_):
    """Both compiled paths and both Python paths count and store identically."""
    vals = np.arange(len(ops_), dtype=np.float32) + 0.5
    results = []
    for path in ("generic", "fast"):
        _, buf = _tracked(spans_)
        out = run_script(buf, np.array(ops_, dtype=np.int64).reshape(-1, 2), vals, path)
        results.append((out.tolist(), buf.snapshot().tolist(), buf.reads.tolist(),
                        buf.writes.tolist()))
    for fast in (False, True):
        rt, buf = _tracked(spans_)
        acc = rt.accessors(buf, fast=fast)
        out = []
        for t, (w, j) in enumerate(ops_):
            if w:
                acc.write(j, vals[t])
            else:
                out.append(acc.read(j))
        full = np.zeros(len(ops_), np.float32)
        full[[t for t, (w, _) in enumerate(ops_) if not w]] = out
        results.append((full.tolist(), buf.snapshot().tolist(), buf.reads.tolist(),
                        buf.writes.tolist()))
    assert all(r == results[0] for r in results)


@settings(max_examples=20, deadline=None)
@given(spans, ops)
def test_compiled_gate(spans_, ops_):
    _, buf = _tracked(spans_, counting=False)
    run_script(buf, np.array(ops_, dtype=np.int64).reshape(-1, 2),
               np.zeros(len(ops_), np.float32), "fast")
    assert buf.reads.sum() == 0 and buf.writes.sum() == 0
