"""The main blocktree: every mined block with its parent edge."""

import csv

import numpy as np

from .arrivals import HONEST, Block

TRACE_COLUMNS = ("id", "kind", "honest_index", "miner", "time", "parent", "height")


class BlocktreeError(ValueError):
    pass


class MainBlocktree:
    """Rooted tree of blocks, genesis at height 0.

    Snapshots ``MB(t)`` are not stored: queries take an optional ``upto``
    time and ignore blocks mined later.  Ancestry is reflexive.
    """

    def __init__(self):
        self._blocks = {}
        self._height = {}
        self._children = {}
        self._by_height = []
        self._root = None
        self._euler = None

    def __len__(self):
        return len(self._blocks)

    def __contains__(self, g):
        return g in self._blocks

    def insert(self, block):
        if block.id in self._blocks:
            raise BlocktreeError(f"duplicate block id {block.id}")
        if block.parent is None:
            if self._root is not None:
                raise BlocktreeError("tree already has a genesis block")
            h = 0
            self._root = block.id
        else:
            if block.parent not in self._blocks:
                raise BlocktreeError(f"unknown parent {block.parent} for block {block.id}")
            h = self._height[block.parent] + 1
            self._children[block.parent].append(block.id)
        self._blocks[block.id] = block
        self._height[block.id] = h
        self._children[block.id] = []
        if h == len(self._by_height):
            self._by_height.append([])
        self._by_height[h].append(block.id)
        self._euler = None
        return self

    # -- basic accessors -------------------------------------------------

    @property
    def genesis(self):
        return self._root

    def block(self, g):
        try:
            return self._blocks[g]
        except KeyError:
            raise BlocktreeError(f"unknown block id {g}") from None

    def height(self, g):
        self.block(g)
        return self._height[g]

    def parent(self, g):
        return self.block(g).parent

    def children(self, g):
        self.block(g)
        return list(self._children[g])

    @property
    def max_height(self):
        return len(self._by_height) - 1

    def at_height(self, h, upto=None):
        if not 0 <= h < len(self._by_height):
            raise BlocktreeError(f"height {h} out of range [0, {self.max_height}]")
        ids = self._by_height[h]
        if upto is not None:
            ids = [g for g in ids if self._blocks[g].time <= upto]
        return ids

    def chain(self, tip):
        """Block ids from genesis to ``tip``."""
        out = []
        g = tip
        while g is not None:
            out.append(g)
            g = self.block(g).parent
        return out[::-1]

    # -- queries ---------------------------------------------------------

    def tree_height(self, upto=None):
        if upto is None:
            return self.max_height
        for h in range(self.max_height, -1, -1):
            if self.at_height(h, upto):
                return h
        raise BlocktreeError("empty snapshot")

    def longest_chains(self, upto=None):
        if self._root is None:
            raise BlocktreeError("empty tree")
        h = self.tree_height(upto)
        return [self.chain(g) for g in sorted(self.at_height(h, upto))]

    def is_unique_at_height(self, h, upto=None):
        return len(self.at_height(h, upto)) == 1

    def unique_honest_at_height(self, h, upto=None):
        honest = [g for g in self.at_height(h, upto) if self._blocks[g].kind == HONEST]
        return len(honest) == 1

    def is_ancestor(self, a, b):
        """True iff ``a`` lies on the root path of ``b`` (``a == b`` included)."""
        ha, hb = self.height(a), self.height(b)
        if ha > hb:
            return False
        if self._euler is not None:
            tin, tout = self._euler
            return tin[a] <= tin[b] and tout[b] <= tout[a]
        g = b
        for _ in range(hb - ha):
            g = self._blocks[g].parent
        return g == a

    # -- bulk ancestry ---------------------------------------------------

    def euler(self):
        """Entry/exit counters ``(tin, tout)`` as dicts; cached until the next insert."""
        if self._euler is None:
            tin, tout = {}, {}
            clock = 0
            stack = [(self._root, False)]
            while stack:
                g, done = stack.pop()
                if done:
                    tout[g] = clock
                    clock += 1
                    continue
                tin[g] = clock
                clock += 1
                stack.append((g, True))
                for c in reversed(self._children[g]):
                    stack.append((c, False))
            self._euler = (tin, tout)
        return self._euler

    def euler_arrays(self, n):
        """``(tin, tout)`` as arrays indexed by block id for ids ``0..n-1``."""
        tin, tout = self.euler()
        a = np.full(n, -1, dtype=np.int64)
        b = np.full(n, -1, dtype=np.int64)
        for g, v in tin.items():
            a[g] = v
            b[g] = tout[g]
        return a, b

    # -- export ----------------------------------------------------------

    def rows(self):
        for g in sorted(self._blocks):
            b = self._blocks[g]
            yield (
                b.id,
                b.kind,
                "" if b.honest_index is None else b.honest_index,
                b.miner,
                repr(float(b.time)),
                "" if b.parent is None else b.parent,
                self._height[g],
            )

    def write_csv(self, path):
        with open(path, "w", newline="") as f:
            w = csv.writer(f, lineterminator="\n")
            w.writerow(TRACE_COLUMNS)
            w.writerows(self.rows())


def build_tree(blocks):
    """Tree from an iterable of :class:`Block` in insertion order."""
    tree = MainBlocktree()
    for b in blocks:
        tree.insert(b)
    return tree


def make_block(g, parent=None, kind=HONEST, time=None, honest_index=None):
    """Small constructor for hand-built trees in tests and demos."""
    return Block(
        id=g,
        kind=kind,
        honest_index=honest_index,
        miner=g,
        time=float(g if time is None else time),
        parent=parent,
    )
