"""Command-line harness: every benchmark and the parameter sweep, CSV out.

Exit status is 0 on success, 2 for a bad configuration and 1 for a
failure while running.
"""
from __future__ import annotations

import argparse
import itertools
import logging
import sys
from typing import Sequence

from .benchmarks import (RUNNERS, BenchConfig, JacobiVariant, StreamConfig, run_jacobi,
                         run_stream)
from .compiled import KERNELS
from .errors import ConfigError
from .metrics import BenchResult, JacobiResult, MessageLog, result_rows, rows_to_csv
from .transport import SocketEndpoint, parse_peers

log = logging.getLogger("mdmp")


def _int_list(text: str) -> list[int]:
    try:
        vals = [int(x) for x in text.split(",") if x.strip()]
    except ValueError:
        raise ConfigError(f"expected comma-separated integers, got {text!r}") from None
    if not vals:
        raise ConfigError("empty value list")
    return vals


def _add_common(p: argparse.ArgumentParser, sweep: bool = False) -> None:
    p.add_argument("--elements", type=int, default=1024, help="array elements (default 1024)")
    if not sweep:
        p.add_argument("--selected", type=int, default=None,
                       help="communicated elements, first half and last half (default all)")
        p.add_argument("--delay", type=int, default=0, help="delay additions per element")
        p.add_argument("--mode", default="managed", help="bulk (passthrough) or managed")
    p.add_argument("--iters", type=int, default=100, help="iterations per repeat")
    p.add_argument("--repeats", type=int, default=1)
    p.add_argument("--chunk", type=int, default=1, help="elements per managed message")
    p.add_argument("--elem-kind", default="float32", help="int32, float32 or float64")
    p.add_argument("--alpha", type=float, default=0.0, help="per-message latency in seconds")
    p.add_argument("--beta", type=float, default=0.0, help="per-byte cost in seconds")
    p.add_argument("--seed", type=int, default=0)
    _add_io(p)


def _add_io(p: argparse.ArgumentParser) -> None:
    p.add_argument("-o", "--output", default=None, help="CSV file (default stdout)")
    p.add_argument("--log-csv", default=None, help="also write the message log here")
    p.add_argument("--transport", choices=("inproc", "socket"), default="inproc")
    p.add_argument("--rank", type=int, default=None, help="this process's rank (socket)")
    p.add_argument("--peers", default=None, help="host:port of every rank, in rank order (socket)")
    p.add_argument("--timeout", type=float, default=300.0, help="limit on any single wait (s)")
    p.add_argument("--fast-accessors", choices=("0", "1"), default=None,
                   help="accessor path; default from MDMP_FAST_ACCESSORS")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="mdmp", description=__doc__.splitlines()[0])
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)
    for name in RUNNERS:
        _add_common(sub.add_parser(name, help=f"{name} benchmark"))

    st = sub.add_parser("stream", help="tracking overhead on STREAM kernels")
    st.add_argument("--elements", type=int, default=2_000_000)
    st.add_argument("--repeats", type=int, default=10)
    st.add_argument("--kernels", default=None, help="subset, comma separated")
    st.add_argument("-o", "--output", default=None)

    jc = sub.add_parser("jacobi", help="2-D Jacobi stencil")
    jc.add_argument("--rows", type=int, default=64)
    jc.add_argument("--cols", type=int, default=64)
    jc.add_argument("--ranks", type=int, default=2)
    jc.add_argument("--maxiter", type=int, default=100)
    jc.add_argument("--variant", default="all", help="bulk, hand, managed or all")
    jc.add_argument("--mode", default="managed", help="mode of the managed variant")
    jc.add_argument("--repeats", type=int, default=1)
    jc.add_argument("--chunk", type=int, default=1)
    jc.add_argument("--alpha", type=float, default=0.0)
    jc.add_argument("--beta", type=float, default=0.0)
    jc.add_argument("--seed", type=int, default=0)
    _add_io(jc)

    sw = sub.add_parser("sweep", help="cartesian sweep over delay and/or selected")
    sw.add_argument("--benchmark", choices=tuple(RUNNERS), default="delay")
    sw.add_argument("--delay", default="0", help="comma-separated delay_elems values")
    sw.add_argument("--selected", default=None, help="comma-separated selected values")
    sw.add_argument("--modes", default="bulk,managed", help="comma-separated modes")
    _add_common(sw, sweep=True)
    return parser


def _fast(args) -> bool | None:
    return None if args.fast_accessors is None else args.fast_accessors == "1"


def _endpoint(args, cfg: BenchConfig, nranks: int):
    if args.transport == "inproc":
        if args.rank is not None or args.peers is not None:
            raise ConfigError("--rank/--peers only apply to --transport socket")
        return None
    if args.rank is None or args.peers is None:
        raise ConfigError("--transport socket needs --rank and --peers")
    try:
        peers = parse_peers(args.peers)
    except ValueError as exc:
        raise ConfigError(str(exc)) from None
    if len(peers) != nranks:
        raise ConfigError(f"this benchmark needs {nranks} peers, got {len(peers)}")
    return SocketEndpoint(args.rank, peers, cfg.cost, timeout=args.timeout)


def _bench_config(args, **over) -> BenchConfig:
    base = dict(nelems=args.elements, iterations=args.iters, repeats=args.repeats,
                chunk=args.chunk, elem_kind=args.elem_kind, alpha=args.alpha, beta=args.beta,
                seed=args.seed, fast_accessors=_fast(args), timeout=args.timeout)
    if hasattr(args, "mode"):  # single-point subcommands
        base.update(selected=args.selected, delay_elems=args.delay, mode=args.mode)
    base.update(over)
    return BenchConfig(**base)


def _emit(text: str, path: str | None, append: bool = False) -> None:
    if path is None:
        sys.stdout.write(text)
        sys.stdout.flush()
        return
    with open(path, "a" if append else "w", encoding="utf-8", newline="\n") as fh:
        fh.write(text)


def _run_family(args, cfgs: list[BenchConfig]) -> int:
    rows, logs = [], []
    for cfg in cfgs:
        ep = _endpoint(args, cfg, 2)
        try:
            res: BenchResult = RUNNERS[cfg.benchmark](cfg, ep)
        finally:
            if ep is not None:
                ep.close()
        log.info("%s %s: mean %.6f s, checksum %s", cfg.benchmark, cfg.mode_name, res.mean,
                 res.checksum[:12])
        rows += result_rows(res, args.transport)
        logs.append(res.log)
    if args.transport == "socket" and args.rank != 0:
        return 0
    _emit(rows_to_csv(rows), args.output)
    if args.log_csv:
        _emit(MessageLog.merge(logs).to_csv(), args.log_csv)
    return 0


def _jacobi_rows(res: JacobiResult, transport: str) -> list[dict]:
    cfg = res.config
    last = [e for e in res.log
            if e.rank == 0 and e.direction == "send" and e.iteration == cfg.maxiter]
    demotions = sum(len(r.demotions) for r in res.reports)
    return [dict(benchmark="jacobi", mode=res.variant, transport=transport,
                 elements=cfg.rows * cfg.cols, selected=cfg.cols, delay_elems=0, chunk=cfg.chunk,
                 iterations=cfg.maxiter, repeat=rep, alpha_s=repr(cfg.alpha),
                 beta_s_per_byte=repr(cfg.beta), wall_time_s=repr(t),
                 msgs_per_iter=len(last), bytes_per_iter=sum(e.nbytes for e in last),
                 demotions=demotions)
            for rep, t in enumerate(res.wall_times)]


def _cmd_jacobi(args) -> int:
    cfg = BenchConfig(benchmark="jacobi", rows=args.rows, cols=args.cols, ranks=args.ranks,
                      maxiter=args.maxiter, repeats=args.repeats, chunk=args.chunk,
                      alpha=args.alpha, beta=args.beta, seed=args.seed, mode=args.mode,
                      fast_accessors=_fast(args), timeout=args.timeout)
    variants = (list(JacobiVariant) if args.variant.strip().lower() == "all"
                else [JacobiVariant.parse(args.variant)])
    rows = []
    for v in variants:
        ep = _endpoint(args, cfg, cfg.ranks)
        try:
            res = run_jacobi(cfg, v, ep)
        finally:
            if ep is not None:
                ep.close()
        rows += _jacobi_rows(res, args.transport)
    if args.transport == "socket" and args.rank != 0:
        return 0
    _emit(rows_to_csv(rows), args.output)
    return 0


def _cmd_stream(args) -> int:
    kernels = tuple(KERNELS) if args.kernels is None else tuple(
        k.strip() for k in args.kernels.split(","))
    res = run_stream(StreamConfig(nelems=args.elements, repeats=args.repeats, kernels=kernels))
    _emit(res.to_csv(), args.output)
    return 0


def _cmd_sweep(args) -> int:
    delays = _int_list(args.delay)
    selected = [None] if args.selected is None else _int_list(args.selected)
    modes = [m.strip() for m in args.modes.split(",") if m.strip()]
    if not modes:
        raise ConfigError("--modes is empty")
    cfgs = [_bench_config(args, benchmark=args.benchmark, delay_elems=d, selected=s, mode=m)
            for d, s, m in itertools.product(delays, selected, modes)]
    return _run_family(args, cfgs)


def main(argv: Sequence[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:  # argparse reports usage errors with status 2
        return int(exc.code or 0)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(name)s: %(message)s", stream=sys.stderr)
    try:
        if args.command in RUNNERS:
            return _run_family(args, [_bench_config(args, benchmark=args.command)])
        if args.command == "jacobi":
            return _cmd_jacobi(args)
        if args.command == "stream":
            return _cmd_stream(args)
        return _cmd_sweep(args)
    except ConfigError as exc:
        print(f"mdmp: configuration error: {exc}", file=sys.stderr)
        return 2
    except Exception as exc:  # noqa: BLE001 - any runtime failure maps to status 1
        print(f"mdmp: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
