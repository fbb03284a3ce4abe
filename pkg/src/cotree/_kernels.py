"""Jitted kernels: block-memory accounting and the gapped-array batch machinery.

Every function here is written against flat int64 numpy state so the same
source runs under numba nopython mode and plain Python (see _backend).

The memory simulator state travels as a tuple ``mem``:

    mem = (conf, stats, resident, prev, nxt)

    conf     int64[3]   [enabled, block_size_slots, cache_size_blocks]
    stats    int64[4]   [accesses, transfers, evictions, resident_count]
    resident uint8[nb]  residency bit per block id
    prev/nxt int64[nb+2] doubly linked recency list; node = block_id + 2,
                         sentinel 0 = MRU end, sentinel 1 = LRU end

Slot arrays of one gapped array travel as ``slots = (depth, children,
reloc, payload)``; ``depth[i] < 0`` marks a blank cell.
"""

import numpy as np

from ._backend import kernel

INSERT = 0
REMOVE = 1
BEFORE_ALL = -1


@kernel
def mem_access(mem, addr):
    """Account one slot access; returns 1 on a block transfer, else 0."""
    conf = mem[0]
    if conf[0] == 0:
        return 0
    stats = mem[1]
    resident = mem[2]
    prev = mem[3]
    nxt = mem[4]
    stats[0] += 1
    blk = addr // conf[1]
    node = blk + 2
    if resident[blk]:
        # unlink, relink at MRU end
        p = prev[node]
        q = nxt[node]
        nxt[p] = q
        prev[q] = p
        first = nxt[0]
        nxt[0] = node
        prev[node] = 0
        nxt[node] = first
        prev[first] = node
        return 0
    stats[1] += 1
    if stats[3] == conf[2]:
        victim = prev[1]
        p = prev[victim]
        nxt[p] = 1
        prev[1] = p
        resident[victim - 2] = 0
        stats[2] += 1
        stats[3] -= 1
    resident[blk] = 1
    stats[3] += 1
    first = nxt[0]
    nxt[0] = node
    prev[node] = 0
    nxt[node] = first
    prev[first] = node
    return 1


@kernel
def density_within(n, m, k, levels):
    """Exact integer check of n/m against the level-k density ladder.

    Level 0 is a segment with bounds (1/8, 1]; each level up tightens both
    bounds by 1/(8*levels), reaching (2/8, 7/8) at the root level.
    """
    if 8 * levels * n < m * (levels + k):
        return False
    if 8 * levels * n > m * (8 * levels - k):
        return False
    return True


@kernel
def _grow_target(n):
    """Smallest power of two >= 4n/3, floored at the 2-cell minimum."""
    t = 2
    while 3 * t < 4 * n:
        t *= 2
    return t


@kernel
def pma_get_intervals(depth, size, m0, levels, ops, iout, p_base, i_base, mem):
    """Identify aligned redistribution intervals for a batch of updates.

    ``ops`` is int64[L,3] rows (kind, a, b): INSERT rows carry (anchor, count)
    with anchor -1 meaning before-all; REMOVE rows carry (first, last).
    ``iout`` receives (l, r, n) rows.  Returns (rows, target_size,
    inserted_total, removed_total, cells_scanned).

    The scan counts post-update densities (forward scans consume operations),
    climbs the virtual tree while a node is outside its ladder bounds, and
    absorbs previously finalized intervals instead of rescanning them.  If the
    whole array is out of bounds the single whole-array interval and a grown
    or shrunk capacity are returned.
    """
    n_ops = ops.shape[0]
    ni = 0
    o = 0
    ins_total = 0
    rem_total = 0
    scanned = 0
    while o < n_ops:
        m = m0
        k = 0
        if ops[o, 0] == INSERT and ops[o, 1] < 0:
            n = ops[o, 2]
            ins_total += ops[o, 2]
            o += 1
            b = 0
        else:
            b = ops[o, 1] // m
            n = 0
        l = b * m
        r = l + m - 1
        # forward scan of the starting segment
        i = l
        while i <= r:
            mem_access(mem, p_base + i)
            scanned += 1
            if depth[i] >= 0:
                n += 1
                if o < n_ops and ops[o, 0] == REMOVE and ops[o, 1] <= i <= ops[o, 2]:
                    n -= 1
                    rem_total += 1
                    if i == ops[o, 2]:
                        o += 1
                if o < n_ops and ops[o, 0] == INSERT and ops[o, 1] == i:
                    n += ops[o, 2]
                    ins_total += ops[o, 2]
                    o += 1
            i += 1
        while True:
            # a removal straddling the node edge forces further growth
            forced = (
                o < n_ops
                and ops[o, 0] == REMOVE
                and ops[o, 1] <= r < ops[o, 2]
            )
            if not forced and density_within(n, m, k, levels):
                iout[ni, 0] = l
                iout[ni, 1] = r
                iout[ni, 2] = n
                mem_access(mem, i_base + ni)
                ni += 1
                break
            if m == size:
                # whole array out of bounds: rebuild into a resized array
                iout[0, 0] = 0
                iout[0, 1] = size - 1
                iout[0, 2] = n
                mem_access(mem, i_base)
                return 1, _grow_target(n), ins_total, rem_total, scanned
            if b % 2 == 1:
                # grow left into the sibling, reusing finalized intervals
                lo2 = l - m
                edge = l
                while edge > lo2:
                    if ni > 0 and iout[ni - 1, 1] == edge - 1 and iout[ni - 1, 0] >= lo2:
                        n += iout[ni - 1, 2]
                        edge = iout[ni - 1, 0]
                        mem_access(mem, i_base + ni - 1)
                        ni -= 1
                    else:
                        stop = lo2
                        if ni > 0 and lo2 <= iout[ni - 1, 1] < edge:
                            stop = iout[ni - 1, 1] + 1
                        i = edge - 1
                        while i >= stop:
                            mem_access(mem, p_base + i)
                            scanned += 1
                            if depth[i] >= 0:
                                n += 1
                            i -= 1
                        edge = stop
                l = lo2
            else:
                # grow right with a consuming forward scan
                i = r + 1
                r = r + m
                while i <= r:
                    mem_access(mem, p_base + i)
                    scanned += 1
                    if depth[i] >= 0:
                        n += 1
                        if o < n_ops and ops[o, 0] == REMOVE and ops[o, 1] <= i <= ops[o, 2]:
                            n -= 1
                            rem_total += 1
                            if i == ops[o, 2]:
                                o += 1
                        if o < n_ops and ops[o, 0] == INSERT and ops[o, 1] == i:
                            n += ops[o, 2]
                            ins_total += ops[o, 2]
                            o += 1
                    i += 1
            b //= 2
            m *= 2
            k += 1
    return ni, size, ins_total, rem_total, scanned


@kernel
def pma_calc_new_positions(
    depth, reloc, size_new, ops, iout, ni, mflat, p_base, m_base, mem
):
    """Write relocation targets into surviving slots and collect new-slot cells.

    Survivor rank j of an interval (l, r, n) goes to cell l + floor(j*m/n)
    where m is the interval width (or the new capacity when resizing).
    ``mflat`` receives the cells of slots created by INSERT rows, in batch
    order.  Returns (new_slot_count, cells_scanned).
    """
    n_ops = ops.shape[0]
    o = 0
    mpos = 0
    scanned = 0
    size_old = depth.shape[0]
    for t in range(ni):
        l = iout[t, 0]
        r = iout[t, 1]
        n = iout[t, 2]
        m = r - l + 1
        if m == size_old and size_new != size_old:
            m = size_new
        j = 0
        if o < n_ops and ops[o, 0] == INSERT and ops[o, 1] < 0:
            for _ in range(ops[o, 2]):
                mflat[mpos] = l + j * m // n
                mem_access(mem, m_base + mpos)
                mpos += 1
                j += 1
            o += 1
        for i in range(l, r + 1):
            mem_access(mem, p_base + i)
            scanned += 1
            if depth[i] >= 0:
                if o < n_ops and ops[o, 0] == REMOVE and ops[o, 1] <= i <= ops[o, 2]:
                    if i == ops[o, 2]:
                        o += 1
                else:
                    reloc[i] = l + j * m // n
                    mem_access(mem, p_base + i)
                    j += 1
                if o < n_ops and ops[o, 0] == INSERT and ops[o, 1] == i:
                    for _ in range(ops[o, 2]):
                        mflat[mpos] = l + j * m // n
                        mem_access(mem, m_base + mpos)
                        mpos += 1
                        j += 1
                    o += 1
    return mpos, scanned


@kernel
def pma_clear_relocations(reloc, iout, ni):
    """Abort path: drop relocation targets so the array is left untouched."""
    for t in range(ni):
        for i in range(iout[t, 0], iout[t, 1] + 1):
            reloc[i] = -1


@kernel
def pma_apply_moves(
    slots, slots_new, same_array, iout, ni, p_base, p_base_new, mem
):
    """Move surviving slots to their targets, clearing removed slots.

    Per interval: a backward scan compacts survivors to the interval end
    (dropping slots without a relocation target), then a forward scan places
    each at the target stored inside it.  With ``same_array`` the target
    arrays alias the source.  Returns slots moved.
    """
    depth, children, reloc, payload = slots
    ndepth, nchildren, nreloc, npayload = slots_new
    b = children.shape[1]
    pw = payload.shape[1]
    moved = 0
    for t in range(ni):
        l = iout[t, 0]
        r = iout[t, 1]
        j = r
        i = r
        while i >= l:
            mem_access(mem, p_base + i)
            if depth[i] >= 0:
                if reloc[i] >= 0:
                    if i != j:
                        depth[j] = depth[i]
                        reloc[j] = reloc[i]
                        for c in range(b):
                            children[j, c] = children[i, c]
                        for c in range(pw):
                            payload[j, c] = payload[i, c]
                        depth[i] = -1
                        reloc[i] = -1
                        mem_access(mem, p_base + j)
                        moved += 1
                    j -= 1
                else:
                    depth[i] = -1
                    for c in range(b):
                        children[i, c] = -1
            i -= 1
        while j < r:
            j += 1
            mem_access(mem, p_base + j)
            tgt = reloc[j]
            ndepth[tgt] = depth[j]
            for c in range(b):
                nchildren[tgt, c] = children[j, c]
            for c in range(pw):
                npayload[tgt, c] = payload[j, c]
            nreloc[tgt] = -1
            if same_array and tgt != j:
                depth[j] = -1
                reloc[j] = -1
                for c in range(b):
                    children[j, c] = -1
            mem_access(mem, p_base_new + tgt)
            if tgt != j or not same_array:
                moved += 1
    return moved


@kernel
def pma_apply_changes(children_new, bbuf, bcount, p_base_new, b_base, mem):
    """Apply the recorded child-pointer updates after all movements."""
    for t in range(bcount):
        mem_access(mem, b_base + t)
        v = bbuf[t, 0]
        c = bbuf[t, 1]
        w = bbuf[t, 2]
        children_new[v, c] = w
        mem_access(mem, p_base_new + v)


@kernel
def pma_init_new_slots(slots_new, mflat, mcount, p_base_new, m_base, mem):
    """Zero-initialize freshly inserted slots (depth fixed up by the builder)."""
    depth, children, reloc, payload = slots_new
    b = children.shape[1]
    pw = payload.shape[1]
    for t in range(mcount):
        mem_access(mem, m_base + t)
        i = mflat[t]
        depth[i] = 0
        reloc[i] = -1
        for c in range(b):
            children[i, c] = -1
        for c in range(pw):
            payload[i, c] = 0
        mem_access(mem, p_base_new + i)
