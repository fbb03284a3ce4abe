"""Slot-granular memory layer with an LRU block-cache simulator.

All slot reads and writes of the data structures flow through one
:class:`MemorySim`.  Addresses are slot indices in a single flat address
space; :meth:`MemorySim.register_arena` hands out block-aligned address
ranges so distinct arrays never share a cache block.  When enabled, the
simulator counts block transfers under least-recently-used replacement for
a cache of ``cache_size_blocks`` blocks of ``block_size_slots`` slots; when
disabled every access is a no-op, so instrumentation can never change the
data the structures read or write.
"""

from dataclasses import dataclass

import numpy as np

from . import _kernels


@dataclass(frozen=True)
class BlockMemoryConfig:
    block_size_slots: int = 1
    cache_size_blocks: int = 1
    enabled: bool = True

    def __post_init__(self):
        if self.block_size_slots < 1:
            raise ValueError("block_size_slots must be >= 1")
        if self.cache_size_blocks < 1:
            raise ValueError("cache_size_blocks must be >= 1")


@dataclass(frozen=True)
class TransferStats:
    transfers: int = 0
    accesses: int = 0
    evictions: int = 0


class Arena:
    """A registered, block-aligned range of the simulated address space."""

    __slots__ = ("base", "length")

    def __init__(self, base: int, length: int):
        self.base = base
        self.length = length

    def addr(self, i: int) -> int:
        return self.base + i


class MemorySim:
    """LRU block-transfer counter over a growable slot address space."""

    def __init__(self, config: BlockMemoryConfig | None = None):
        self.config = config or BlockMemoryConfig(enabled=False)
        self.conf = np.array(
            [
                1 if self.config.enabled else 0,
                self.config.block_size_slots,
                self.config.cache_size_blocks,
            ],
            dtype=np.int64,
        )
        # [accesses, transfers, evictions, resident_count]
        self.stats = np.zeros(4, dtype=np.int64)
        self._top = 0
        self._nblocks = 0
        self.resident = np.zeros(0, dtype=np.uint8)
        self.prev = np.zeros(2, dtype=np.int64)
        self.nxt = np.zeros(2, dtype=np.int64)
        self.nxt[0] = 1
        self.prev[1] = 0

    @property
    def mem(self):
        """State tuple passed into kernels.  Fetch fresh after registering."""
        return (self.conf, self.stats, self.resident, self.prev, self.nxt)

    def register_arena(self, length: int) -> Arena:
        if length < 1:
            raise ValueError("arena length must be >= 1")
        bs = int(self.conf[1])
        base = ((self._top + bs - 1) // bs) * bs
        self._top = base + length
        need = (self._top + bs - 1) // bs
        if need > self._nblocks:
            grow = max(need, 2 * self._nblocks, 64)
            resident = np.zeros(grow, dtype=np.uint8)
            resident[: self._nblocks] = self.resident[: self._nblocks]
            prev = np.zeros(grow + 2, dtype=np.int64)
            nxt = np.zeros(grow + 2, dtype=np.int64)
            prev[: self._nblocks + 2] = self.prev
            nxt[: self._nblocks + 2] = self.nxt
            self.resident = resident
            self.prev = prev
            self.nxt = nxt
            self._nblocks = grow
        return Arena(base, length)

    def access(self, addr: int, kind: str = "read") -> None:
        if kind not in ("read", "write"):
            raise ValueError(f"bad access kind {kind!r}")
        if not 0 <= addr < self._top:
            raise IndexError(f"address {addr} outside every registered arena")
        _kernels.mem_access(self.mem, addr)

    def reset_stats(self) -> None:
        self.stats[0:3] = 0

    def snapshot_stats(self) -> TransferStats:
        return TransferStats(
            transfers=int(self.stats[1]),
            accesses=int(self.stats[0]),
            evictions=int(self.stats[2]),
        )

    def clear_cache(self) -> None:
        """Drop all residency without touching the counters."""
        self.resident[:] = 0
        self.stats[3] = 0
        self.nxt[0] = 1
        self.prev[1] = 0

    def csv_row(self, n, eps, a, b, operation) -> str:
        s = self.snapshot_stats()
        return (
            f"{n},{eps},{a},{b},{int(self.conf[1])},{int(self.conf[2])},"
            f"{operation},{s.transfers},{s.accesses}"
        )


CSV_HEADER = "n,eps,a,b,block_size,cache_blocks,operation,transfers,accesses"
