"""Managed data message passing.

Instrumented buffers count reads and writes inside communication regions;
a profiling iteration records when each communicated element is last
written (sends) or last accessed (receives), and later iterations send and
install elements one by one as those counts are reached.
"""
from .engine import ChunkPolicy, CommDirective, Direction, ElemState, ReadinessProfile
from .errors import (ConfigError, CounterOverflow, InactiveRegion, IndexOutOfBounds,
                     LengthMismatch, MDMPError, MismatchedKernels, NestedRegion, OpenIteration,
                     OverlapConflict, PeerUnreachable, PendingCommunication, RangeError,
                     TransportFailure, Unbalanced)
from .runtime import Mode, ModeHint, Region, RegionReport, Runtime
from .tracking import Accessors, ElemKind, ManagedBuffer, TrackedRange
from .transport import NULL_RANK, CostModel, World

__version__ = "0.1.0"

__all__ = [
    "NULL_RANK", "Accessors", "ChunkPolicy", "CommDirective", "ConfigError", "CostModel",
    "CounterOverflow", "Direction", "ElemKind", "ElemState", "InactiveRegion", "IndexOutOfBounds",
    "LengthMismatch", "MDMPError", "ManagedBuffer", "MismatchedKernels", "Mode", "ModeHint",
    "NestedRegion", "OpenIteration", "OverlapConflict", "PeerUnreachable", "PendingCommunication",
    "RangeError", "ReadinessProfile", "Region", "RegionReport", "Runtime", "TrackedRange",
    "TransportFailure", "Unbalanced", "World",
]
