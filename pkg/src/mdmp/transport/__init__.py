"""Point-to-point byte transports with MPI-style (peer, tag) matching."""
from .base import (CONTROL_BIT, FULL_MASK, NULL_RANK, CommHandle, CostModel, Endpoint,
                   HandleKind, HandleState, wait_all)
from .inproc import InProcEndpoint, World, run_ranks
from .socket import SocketEndpoint, decode_header, encode_frame, parse_peers

__all__ = [
    "CONTROL_BIT", "FULL_MASK", "NULL_RANK", "CommHandle", "CostModel", "Endpoint", "HandleKind",
    "HandleState", "InProcEndpoint", "SocketEndpoint", "World", "decode_header", "encode_frame",
    "parse_peers", "run_ranks", "wait_all",
]
