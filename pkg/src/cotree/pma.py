"""Gapped array with density-bounded batch updates.

Slots live in an array of capacity a power of two, conceptually split into
segments of size Theta(log capacity) whose count is also a power of two.
A batch of inserts/removes is applied in four phases: identify aligned
redistribution intervals, compute relocation targets, let the caller
recalculate child pointers into a change list, then move slots and apply
the change list.  Phases 1-3 never mutate slot contents other than the
reserved relocation field, so a failing pointer-recalculation callback
aborts with the array intact.
"""

from dataclasses import dataclass

import numpy as np

from . import _kernels
from ._kernels import BEFORE_ALL, INSERT, REMOVE
from .memory import MemorySim

MIN_CAPACITY = 2


def next_pow2(x: int) -> int:
    p = 1
    while p < x:
        p *= 2
    return p


def segment_size(capacity: int) -> int:
    """Smallest power of two >= log2(capacity + 1)."""
    m = 1
    while (1 << m) < capacity + 1:
        m *= 2
    return m


@dataclass(frozen=True)
class UpdateOp:
    kind: int  # INSERT or REMOVE
    a: int  # INSERT: anchor slot (BEFORE_ALL for the very front); REMOVE: first slot
    b: int  # INSERT: number of new slots; REMOVE: last slot

    @classmethod
    def insert(cls, after, count):
        return cls(INSERT, after, count)

    @classmethod
    def remove(cls, first, last):
        return cls(REMOVE, first, last)


@dataclass(frozen=True)
class IntervalPlan:
    intervals: np.ndarray  # rows (first, last, final_count)
    target_size: int

    def as_tuples(self):
        return [tuple(int(x) for x in row) for row in self.intervals]


class PmaStore:
    """The slot array plus density configuration and scratch arenas."""

    def __init__(self, sim: MemorySim | None = None, max_children: int = 3,
                 payload_words: int = 1, capacity: int = MIN_CAPACITY):
        if capacity < MIN_CAPACITY or capacity != next_pow2(capacity):
            raise ValueError("capacity must be a power of two >= 2")
        self.sim = sim or MemorySim()
        self.max_children = max_children
        self.payload_words = payload_words
        self.live_count = 0
        self.last_batch = {}
        self._alloc(capacity)

    def _alloc(self, capacity):
        self.capacity = capacity
        self.depth = np.full(capacity, -1, dtype=np.int64)
        self.children = np.full((capacity, self.max_children), -1, dtype=np.int64)
        self.reloc = np.full(capacity, -1, dtype=np.int64)
        self.payload = np.zeros((capacity, self.payload_words), dtype=np.int64)
        self.cells_arena = self.sim.register_arena(capacity)
        # preallocated change list, one potential entry per cell
        self.bbuf = np.zeros((capacity, 3), dtype=np.int64)
        self.b_arena = self.sim.register_arena(capacity)
        self.mflat = np.zeros(capacity, dtype=np.int64)
        self.m_arena = self.sim.register_arena(capacity)
        self._ibuf_rows = 64
        self.ibuf = np.zeros((self._ibuf_rows, 3), dtype=np.int64)
        self.i_arena = self.sim.register_arena(self._ibuf_rows)

    @property
    def segment(self) -> int:
        return segment_size(self.capacity)

    @property
    def levels(self) -> int:
        m = self.segment
        lv = 0
        c = self.capacity
        while c > m:
            c //= 2
            lv += 1
        return max(lv, 1)

    @property
    def slots(self):
        return (self.depth, self.children, self.reloc, self.payload)

    def occupied_positions(self) -> np.ndarray:
        return np.flatnonzero(self.depth >= 0)

    # -- batch validation ------------------------------------------------

    def _check_batch(self, batch):
        kinds = {op.kind for op in batch}
        if len(kinds) > 1:
            raise ValueError("a batch never mixes inserts with removals")
        prev_end = -1
        for idx, op in enumerate(batch):
            if op.kind == INSERT:
                if op.b < 1:
                    raise ValueError("insert count must be >= 1")
                if op.a == BEFORE_ALL:
                    if idx != 0:
                        raise ValueError("before-all insert must lead the batch")
                    prev_end = -1
                    continue
                if not (0 <= op.a < self.capacity and self.depth[op.a] >= 0):
                    raise ValueError(f"insert anchor {op.a} is not a live slot")
                if op.a <= prev_end:
                    raise ValueError("batch must be sorted and non-overlapping")
                prev_end = op.a
            elif op.kind == REMOVE:
                if not (0 <= op.a <= op.b < self.capacity):
                    raise ValueError("remove range out of bounds")
                if self.depth[op.a] < 0 or self.depth[op.b] < 0:
                    raise ValueError("remove bounds must be live slots")
                if op.a <= prev_end:
                    raise ValueError("batch must be sorted and non-overlapping")
                prev_end = op.b
            else:
                raise ValueError(f"unknown op kind {op.kind}")

    def _ops_array(self, batch):
        ops = np.zeros((len(batch), 3), dtype=np.int64)
        for i, op in enumerate(batch):
            ops[i, 0] = op.kind
            ops[i, 1] = op.a
            ops[i, 2] = op.b
        return ops

    def _ensure_ibuf(self, rows):
        if rows > self._ibuf_rows:
            self._ibuf_rows = next_pow2(rows)
            self.ibuf = np.zeros((self._ibuf_rows, 3), dtype=np.int64)
            self.i_arena = self.sim.register_arena(self._ibuf_rows)

    # -- phases ----------------------------------------------------------

    def get_intervals(self, batch) -> IntervalPlan:
        self._check_batch(batch)
        if not batch:
            return IntervalPlan(np.zeros((0, 3), dtype=np.int64), self.capacity)
        ops = self._ops_array(batch)
        self._ensure_ibuf(len(batch) + 1)
        ni, target, ins, rem, scanned = _kernels.pma_get_intervals(
            self.depth, self.capacity, self.segment, self.levels, ops,
            self.ibuf, self.cells_arena.base, self.i_arena.base, self.sim.mem,
        )
        self.last_batch = {
            "scanned_intervals": int(scanned),
            "inserted": int(ins),
            "removed": int(rem),
            "plan_len": int(ni),
        }
        return IntervalPlan(self.ibuf[:ni].copy(), max(int(target), MIN_CAPACITY))

    def calc_new_positions(self, batch, plan: IntervalPlan) -> list[np.ndarray]:
        """Set relocation fields per the plan; returns new-slot cells per insert.

        Exposed for differential tests; ``batch_update`` drives the full
        pipeline.  Pair with :meth:`clear_relocations` when used standalone.
        """
        ops = self._ops_array(batch)
        ni = len(plan.intervals)
        self.ibuf[:ni] = plan.intervals
        mcount, scanned = _kernels.pma_calc_new_positions(
            self.depth, self.reloc, plan.target_size, ops, self.ibuf, ni,
            self.mflat, self.cells_arena.base, self.m_arena.base, self.sim.mem,
        )
        self.last_batch["scanned_positions"] = int(scanned)
        rows = []
        at = 0
        for op in batch:
            if op.kind == INSERT:
                rows.append(self.mflat[at:at + op.b].copy())
                at += op.b
        assert at == mcount
        return rows

    def clear_relocations(self, plan: IntervalPlan) -> None:
        ni = len(plan.intervals)
        self.ibuf[:ni] = plan.intervals
        _kernels.pma_clear_relocations(self.reloc, self.ibuf, ni)

    def batch_update(self, batch, recalc=None, repair=None) -> list[np.ndarray]:
        """Run all four phases.  Returns the new-slot cells per INSERT op.

        ``recalc(first, last, change_count) -> change_count`` appends
        (parent, child_rank, new_child_cell) rows to the change list for one
        interval; a raised exception aborts with the array unmodified.
        ``repair(reloc, plan)`` runs after pointer recalculation, before any
        movement, so callers can remap registered positions.
        """
        plan = self.get_intervals(batch)
        if len(plan.intervals) == 0:
            return []
        resize = plan.target_size != self.capacity
        mrows = self.calc_new_positions(batch, plan)
        ni = len(plan.intervals)
        self.ibuf[:ni] = plan.intervals

        bcount = 0
        if recalc is not None:
            try:
                for t in range(ni):
                    bcount = recalc(int(self.ibuf[t, 0]), int(self.ibuf[t, 1]), bcount)
            except Exception:
                self.clear_relocations(plan)
                raise
        if repair is not None:
            repair(self.reloc, plan)

        if resize:
            old = self.slots
            old_base = self.cells_arena.base
            old_bbuf, old_barena = self.bbuf, self.b_arena
            old_mflat, old_marena = self.mflat, self.m_arena
            self._alloc(plan.target_size)
            self.bbuf, self.b_arena = old_bbuf, old_barena
            self.mflat, self.m_arena = old_mflat, old_marena
            moved = _kernels.pma_apply_moves(
                old, self.slots, False, self.ibuf, ni,
                old_base, self.cells_arena.base, self.sim.mem,
            )
        else:
            moved = _kernels.pma_apply_moves(
                self.slots, self.slots, True, self.ibuf, ni,
                self.cells_arena.base, self.cells_arena.base, self.sim.mem,
            )
        _kernels.pma_apply_changes(
            self.children, self.bbuf, bcount,
            self.cells_arena.base, self.b_arena.base, self.sim.mem,
        )
        total_new = sum(len(r) for r in mrows)
        if total_new:
            flat = np.concatenate(mrows) if len(mrows) > 1 else mrows[0]
            self.mflat[:total_new] = flat
            _kernels.pma_init_new_slots(
                self.slots, self.mflat, total_new,
                self.cells_arena.base, self.m_arena.base, self.sim.mem,
            )
        self.live_count += self.last_batch["inserted"] - self.last_batch["removed"]
        self.last_batch["moved"] = int(moved)
        self.last_batch["resized"] = resize
        self.last_batch["interval_cells"] = int(
            (plan.intervals[:, 1] - plan.intervals[:, 0] + 1).sum()
        )
        return mrows

    # -- diagnostics -----------------------------------------------------

    def density_report(self) -> list[str]:
        """Every virtual-tree node checked against its density ladder."""
        occ = (self.depth >= 0).astype(np.int64)
        m = self.segment
        levels = self.levels
        issues = []
        k = 0
        width = m
        while width <= self.capacity:
            counts = occ.reshape(-1, width).sum(axis=1)
            for node, n in enumerate(counts):
                if not _kernels.density_within(int(n), width, k, levels):
                    issues.append(
                        f"node level={k} index={node} count={int(n)}/{width}"
                    )
            width *= 2
            k += 1
        return issues

    def dump(self) -> str:
        lines = []
        for i in range(self.capacity):
            occ = 1 if self.depth[i] >= 0 else 0
            kids = ",".join(str(int(c)) for c in self.children[i])
            lines.append(f"{i},{occ},{int(self.depth[i])},{kids}")
        return "\n".join(lines)
