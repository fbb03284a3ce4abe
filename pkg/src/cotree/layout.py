"""Recursive-layout arithmetic for uniform-depth trees.

The memory order cuts a height-h tree between levels max(floor(eps*h),1)-1
and max(floor(eps*h),1), stores the upper part, then the lower subtrees
left to right, recursively.  ``eps`` is an exact rational so the floor is
platform-identical.  ``build_height_table`` precomputes, per depth, the
height of the largest recursion block rooted there; everything else in the
package navigates with that table.

``veb_order`` is the brute-force reference permutation used by tests and
``TreeStore.validate``; it rebuilds the order from an explicit tree in
O(N log N) and is never used on the hot path.
"""

from dataclasses import dataclass
from fractions import Fraction

import numpy as np


@dataclass(frozen=True)
class LayoutParams:
    eps: Fraction
    height: int
    arity_min: int
    arity_max: int

    def __post_init__(self):
        if not 0 < self.eps <= Fraction(1, 2):
            raise ValueError("eps must be in (0, 1/2]")
        if not 2 <= self.arity_min < self.arity_max:
            raise ValueError("arities must satisfy 2 <= a < b")
        if self.height < 1:
            raise ValueError("height must be >= 1")


def cut_height(h: int, eps: Fraction) -> int:
    """Height of the upper part when cutting a height-h tree (h >= 2)."""
    if h < 2:
        raise ValueError("height-1 trees are never cut")
    t = max((eps.numerator * h) // eps.denominator, 1)
    assert t < h and t <= h - t
    return t


def build_height_table(height: int, eps: Fraction) -> np.ndarray:
    """Per-depth height of the largest layout block rooted at that depth."""
    if height < 1:
        raise ValueError("height must be >= 1")
    h = np.zeros(height, dtype=np.int64)
    h[0] = height
    for i in range(height):
        hp = int(h[i])
        while hp > 1:
            hpp = hp
            hp = cut_height(hp, eps)
            h[i + hp] = hpp - hp
    return h


def ary_subtree_size(a: int, height: int) -> int:
    """Vertex count of a complete a-ary tree: (a^h - 1) / (a - 1)."""
    if a < 2 or height < 1:
        raise ValueError("need a >= 2 and height >= 1")
    size = (a**height - 1) // (a - 1)
    if size >= 1 << 62:
        raise OverflowError("subtree size exceeds the slot index range")
    return size


def veb_order(children, root, eps: Fraction) -> list:
    """Reference permutation of an explicit tree (children[v] lists ids).

    Raises ValueError unless all leaves share one depth.
    """
    depth = {root: 0}
    order_bfs = [root]
    for v in order_bfs:
        for c in children[v]:
            depth[c] = depth[v] + 1
            order_bfs.append(c)
    leaf_depths = {depth[v] for v in depth if not children[v]}
    if len(leaf_depths) != 1:
        raise ValueError("all leaves must sit at the same depth")
    height = next(iter(leaf_depths)) + 1

    def rec(v, ht):
        # returns (layout of the height-ht block rooted at v, fringe below it)
        if ht == 1:
            return [v], list(children[v])
        t = cut_height(ht, eps)
        out, fringe = rec(v, t)
        deep_fringe = []
        for w in fringe:
            sub, sub_fringe = rec(w, ht - t)
            out.extend(sub)
            deep_fringe.extend(sub_fringe)
        return out, deep_fringe

    out, fringe = rec(root, height)
    assert not fringe
    return out
