"""Benchmark harness: the PingPong family, STREAM overheads and Jacobi."""
from .config import (PINGPONG_FAMILY, BenchConfig, BenchMode, JacobiVariant, checksum,
                     selected_ranges)
from .jacobi import make_edge, run_jacobi, serial_jacobi
from .pingpong import (RUNNERS, run_delay_pingpong, run_family, run_pingpong,
                       run_selective_delay_pingpong, run_selective_pingpong)
from .probes import run_demotion_probe
from .stream import StreamConfig, run_stream

__all__ = [
    "PINGPONG_FAMILY", "RUNNERS", "BenchConfig", "BenchMode", "JacobiVariant", "StreamConfig",
    "checksum", "make_edge", "run_delay_pingpong", "run_demotion_probe", "run_family",
    "run_jacobi", "run_pingpong", "run_selective_delay_pingpong", "run_selective_pingpong",
    "run_stream", "selected_ranges", "serial_jacobi",
]
