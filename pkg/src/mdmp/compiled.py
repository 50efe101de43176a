"""Compiled (numba) kernels: the delay routine and the STREAM access paths.

STREAM at 2M elements is out of reach for interpreted accessors, so each
kernel is generated three times from one description:

raw
    plain array loop, the baseline.
generic
    every access calls a separately compiled tracking routine through a
    C function pointer, like a call into a runtime library.
fast
    the tracking logic is pasted into the loop body as text, the way a
    pre-processor macro would insert it.

Tracked variants share the per-buffer ``meta`` and counter arrays with the
Python accessors (layout in :mod:`mdmp.tracking`); overflow sets
``meta[2]`` instead of wrapping and is raised by :func:`run_kernel`.
"""
from __future__ import annotations

import numpy as np
from numba import cfunc, njit, types

from .errors import ConfigError, CounterOverflow
from .tracking import COUNTER_MAX, META_OVERFLOW, ManagedBuffer

# -- delay -----------------------------------------------------------------

_SINK = np.zeros(1)


@njit(nogil=True, cache=True)
def _delay_loop(n):
    acc = 0.0
    for i in range(n):
        acc += i
    return acc


def delay(n: int) -> None:
    """Add an integer to a double ``n`` times; the sum goes to a sink."""
    _SINK[0] = _delay_loop(n)


# -- STREAM kernel descriptions ------------------------------------------

SCALAR = 3.0
ARRAY_KINDS = {"ia": "int32", "a": "float64", "b": "float64", "c": "float64"}

# name -> (arrays in argument order, target, arrays read (in order), expression over t0, t1, ...)
KERNELS: dict[str, tuple[tuple[str, ...], str, tuple[str, ...], str]] = {
    "Int Assign": (("ia",), "ia", (), "7"),
    "Db Assign": (("a",), "a", (), "1.0"),
    "Db Copy": (("a", "c"), "c", ("a",), "t0"),
    "Db Scale": (("b", "c"), "b", ("c",), "scalar * t0"),
    "Db Add": (("a", "b", "c"), "c", ("a", "b"), "t0 + t1"),
    "Db Triad": (("a", "b", "c"), "a", ("b", "c"), "t0 + scalar * t1"),
}
PATHS = ("raw", "generic", "fast")

_NB = {"int32": types.int32, "float64": types.float64, "float32": types.float32}
_I64P = types.CPointer(types.int64)
_U32P = types.CPointer(types.uint32)


def _lookup_src(meta: str, idx: str, counters: str, indent: str) -> list[str]:
    """Source of the tracking step; the body of both the macro and the library routine."""
    lines = [
        f"if {meta}[0] != 0:",
        f"    for _r in range({meta}[1]):",
        f"        _s = {meta}[3 + 3 * _r]",
        f"        if {idx} >= _s and {idx} < _s + {meta}[4 + 3 * _r]:",
        f"            _k = {meta}[5 + 3 * _r] + {idx} - _s",
        f"            if {counters}[_k] == {COUNTER_MAX}:",
        f"                {meta}[2] = 1",
        "            else:",
        f"                {counters}[_k] += 1",
        "            break",
    ]
    return [indent + ln for ln in lines]


def _make_library(kind: str):
    """Compiled read/write routines for one element kind, as C callbacks."""
    T = _NB[kind]
    TP = types.CPointer(T)
    ns: dict = {}
    src = "\n".join(
        ["def lib_read(meta, data, reads, i):"] + _lookup_src("meta", "i", "reads", "    ")
        + ["    return data[i]", "",
           "def lib_write(meta, data, writes, i, v):"] + _lookup_src("meta", "i", "writes", "    ")
        + ["    data[i] = v", ""])
    exec(compile(src, f"<mdmp-lib-{kind}>", "exec"), ns)
    rd = cfunc(T(_I64P, TP, _U32P, types.int64))(ns["lib_read"])
    wr = cfunc(types.void(_I64P, TP, _U32P, types.int64, T))(ns["lib_write"])
    return rd, wr


_LIBRARY: dict[str, tuple] = {}
_COMPILED: dict[tuple[str, str], object] = {}


def _library(kind: str):
    if kind not in _LIBRARY:
        _LIBRARY[kind] = _make_library(kind)
    return _LIBRARY[kind]


def _kernel_source(name: str, path: str) -> tuple[str, dict]:
    arrays, target, reads, expr = KERNELS[name]
    g: dict = {}
    if path == "raw":
        params = list(arrays)
    else:
        params = [f"{x}{s}" for x in arrays for s in ("", "_m", "_r", "_w")]
    body = []
    if path == "generic":
        for x in arrays:
            rd, wr = _library(ARRAY_KINDS[x])
            g[f"rd_{x}"], g[f"wr_{x}"] = rd.ctypes, wr.ctypes
            body += [f"    p{x} = {x}.ctypes", f"    p{x}_m = {x}_m.ctypes",
                     f"    p{x}_r = {x}_r.ctypes", f"    p{x}_w = {x}_w.ctypes"]
    body.append("    for j in range(n):")
    ind = "        "
    for t, x in enumerate(reads):
        if path == "raw":
            body.append(f"{ind}t{t} = {x}[j]")
        elif path == "fast":
            body += _lookup_src(f"{x}_m", "j", f"{x}_r", ind)
            body.append(f"{ind}t{t} = {x}[j]")
        else:
            body.append(f"{ind}t{t} = rd_{x}(p{x}_m, p{x}, p{x}_r, j)")
    if path == "raw":
        body.append(f"{ind}{target}[j] = {expr}")
    elif path == "fast":
        body.append(f"{ind}{target}[j] = {expr}")
        body += _lookup_src(f"{target}_m", "j", f"{target}_w", ind)
    else:
        body.append(f"{ind}wr_{target}(p{target}_m, p{target}, p{target}_w, j, {expr})")
    fn = f"k_{path}"
    src = f"def {fn}(n, scalar, {', '.join(params)}):\n" + "\n".join(body) + "\n"
    return src, g


def kernel_source(name: str, path: str) -> str:
    """Generated Python source of one kernel (for inspection)."""
    return _kernel_source(name, path)[0]


def get_kernel(name: str, path: str):
    if name not in KERNELS:
        raise ConfigError(f"unknown STREAM kernel {name!r}")
    if path not in PATHS:
        raise ConfigError(f"unknown kernel path {path!r}")
    key = (name, path)
    if key not in _COMPILED:
        src, g = _kernel_source(name, path)
        exec(compile(src, f"<mdmp-{name}-{path}>", "exec"), g)
        _COMPILED[key] = njit(nogil=True)(g[f"k_{path}"])
    return _COMPILED[key]


def run_kernel(name: str, path: str, arrays: dict, n: int | None = None,
               scalar: float = SCALAR) -> None:
    """Run one STREAM kernel over ``arrays`` (name -> ndarray or ManagedBuffer)."""
    names = KERNELS[name][0]
    fn = get_kernel(name, path)
    if path == "raw":
        args = [a.storage if isinstance(a, ManagedBuffer) else a for a in (arrays[x] for x in names)]
        size = len(args[0]) if n is None else n
        fn(size, scalar, *args)
        return
    bufs = [arrays[x] for x in names]
    args = []
    for b in bufs:
        if not isinstance(b, ManagedBuffer):
            raise ConfigError("tracked kernel paths need ManagedBuffers")
        if any(r.hook is not None for r in b.ranges):
            raise ConfigError(f"buffer {b.buffer_id} has managed directives; compiled kernels "
                              "only support tracking-only ranges")
        args += [b.storage, b.meta, b.reads, b.writes]
    size = bufs[0].length if n is None else n
    fn(size, scalar, *args)
    for b in bufs:
        if b.meta[META_OVERFLOW]:
            b.meta[META_OVERFLOW] = 0
            raise CounterOverflow(f"a counter of buffer {b.buffer_id} reached {COUNTER_MAX}")


# -- access scripts (path-equivalence checks) ------------------------------

_SCRIPTS: dict[tuple[str, str], object] = {}


def _script_source(kind: str, path: str) -> tuple[str, dict]:
    g: dict = {}
    pre = []
    if path == "generic":
        rd, wr = _library(kind)
        g["rd_x"], g["wr_x"] = rd.ctypes, wr.ctypes
        pre = ["    px = x.ctypes", "    px_m = x_m.ctypes", "    px_r = x_r.ctypes",
               "    px_w = x_w.ctypes"]
    ind = "            "
    if path == "fast":
        rd_lines = _lookup_src("x_m", "j", "x_r", ind) + [f"{ind}out[t] = x[j]"]
        wr_lines = [f"{ind}x[j] = vals[t]"] + _lookup_src("x_m", "j", "x_w", ind)
    else:
        rd_lines = [f"{ind}out[t] = rd_x(px_m, px, px_r, j)"]
        wr_lines = [f"{ind}wr_x(px_m, px, px_w, j, vals[t])"]
    src = "\n".join(
        ["def script(ops, vals, out, x, x_m, x_r, x_w):"] + pre
        + ["    for t in range(ops.shape[0]):", "        j = ops[t, 1]", "        if ops[t, 0] == 0:"]
        + rd_lines + ["        else:"] + wr_lines) + "\n"
    return src, g


def run_script(buf: ManagedBuffer, ops: np.ndarray, vals: np.ndarray, path: str = "fast") -> np.ndarray:
    """Apply (is_write, index) ops to ``buf`` through a compiled path; returns values read."""
    if path not in ("generic", "fast"):
        raise ConfigError(f"scripts run on the generic or fast path, not {path!r}")
    key = (buf.kind.value, path)
    if key not in _SCRIPTS:
        src, g = _script_source(buf.kind.value, path)
        exec(compile(src, f"<mdmp-script-{key}>", "exec"), g)
        _SCRIPTS[key] = njit(g["script"])
    ops = np.ascontiguousarray(ops, dtype=np.int64).reshape(-1, 2)
    if len(ops) and (ops[:, 1].min() < 0 or ops[:, 1].max() >= buf.length):
        raise ConfigError("script index outside the buffer")
    vals = np.ascontiguousarray(vals, dtype=buf.kind.dtype)
    out = np.zeros(len(ops), dtype=buf.kind.dtype)
    _SCRIPTS[key](ops, vals, out, buf.storage, buf.meta, buf.reads, buf.writes)
    if buf.meta[META_OVERFLOW]:
        buf.meta[META_OVERFLOW] = 0
        raise CounterOverflow(f"a counter of buffer {buf.buffer_id} reached {COUNTER_MAX}")
    return out
