"""Benchmark configuration shared by the PingPong family, Jacobi and STREAM."""
from __future__ import annotations

import hashlib
from dataclasses import dataclass, replace
from enum import Enum

import numpy as np

from ..errors import ConfigError
from ..tracking import ElemKind
from ..transport import CostModel

PINGPONG_FAMILY = ("pingpong", "selective", "delay", "selective-delay")


class BenchMode(Enum):
    PASSTHROUGH = "passthrough"
    MANAGED = "managed"

    @classmethod
    def parse(cls, name: "str | BenchMode") -> "BenchMode":
        if isinstance(name, BenchMode):
            return name
        key = str(name).strip().lower()
        if key in ("bulk", "passthrough", "mpi"):
            return cls.PASSTHROUGH
        if key in ("managed", "mdmp"):
            return cls.MANAGED
        raise ConfigError(f"unknown mode {name!r}; use bulk/passthrough or managed")


class JacobiVariant(Enum):
    BULK = "bulk"
    HAND = "hand"
    MANAGED = "managed"

    @classmethod
    def parse(cls, name: "str | JacobiVariant") -> "JacobiVariant":
        if isinstance(name, JacobiVariant):
            return name
        key = str(name).strip().lower().replace("-", "").replace("_", "")
        table = {"bulk": cls.BULK, "hand": cls.HAND, "handintermingled": cls.HAND,
                 "intermingled": cls.HAND, "managed": cls.MANAGED}
        if key not in table:
            raise ConfigError(f"unknown Jacobi variant {name!r}; use bulk, hand or managed")
        return table[key]


@dataclass(frozen=True)
class BenchConfig:
    benchmark: str = "pingpong"
    nelems: int = 1024
    selected: int | None = None  # None means all elements
    delay_elems: int = 0
    iterations: int = 100
    repeats: int = 1
    mode: BenchMode | str = BenchMode.MANAGED
    chunk: int = 1
    elem_kind: ElemKind | str = ElemKind.FLOAT32
    alpha: float = 0.0
    beta: float = 0.0
    seed: int = 0
    # Jacobi grid: rows x cols split by rows over `ranks`
    rows: int = 64
    cols: int = 64
    ranks: int = 2
    maxiter: int = 100
    fast_accessors: bool | None = None
    log_timestamps: bool = False
    timeout: float | None = 300.0  # guard on every blocking wait

    def __post_init__(self):
        object.__setattr__(self, "mode", BenchMode.parse(self.mode))
        object.__setattr__(self, "elem_kind", ElemKind.parse(self.elem_kind))
        if self.selected is None:
            object.__setattr__(self, "selected", self.nelems)
        for name in ("nelems", "selected", "delay_elems", "iterations", "rows", "cols", "maxiter"):
            if int(getattr(self, name)) < 0:
                raise ConfigError(f"{name} must be >= 0, got {getattr(self, name)}")
        if self.repeats < 1:
            raise ConfigError(f"repeats must be >= 1, got {self.repeats}")
        if self.chunk < 1:
            raise ConfigError(f"chunk must be >= 1, got {self.chunk}")
        if self.ranks < 1:
            raise ConfigError(f"ranks must be >= 1, got {self.ranks}")
        if self.selected > self.nelems:
            raise ConfigError(f"selected ({self.selected}) exceeds nelems ({self.nelems})")
        if not (self.alpha >= 0 and self.beta >= 0):
            raise ConfigError("alpha and beta must be >= 0")

    @property
    def mode_name(self) -> str:
        return self.mode.value

    @property
    def cost(self) -> CostModel:
        return CostModel(self.alpha, self.beta)

    def with_(self, **kw) -> "BenchConfig":
        return replace(self, **kw)


def selected_ranges(nelems: int, selected: int) -> list[tuple[int, int]]:
    """(start, count) of the communicated elements: first ceil(s/2) and last floor(s/2)."""
    if not 0 <= selected <= nelems:
        raise ConfigError(f"selected must lie in [0, {nelems}], got {selected}")
    head, tail = (selected + 1) // 2, selected // 2
    out = []
    if head:
        out.append((0, head))
    if tail:
        if out and head == nelems - tail:
            out[0] = (0, head + tail)
        else:
            out.append((nelems - tail, tail))
    return out


def checksum(arrays) -> str:
    h = hashlib.sha256()
    for a in arrays:
        a = np.ascontiguousarray(a)
        h.update(str(a.dtype).encode())
        h.update(a.tobytes())
    return h.hexdigest()
