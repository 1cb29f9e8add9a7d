"""Transmission graph over honest blocks and the special sequences built on it.

Vertices are honest indices ``0..n-1`` in mining order; ``i -> k`` (``i < k``)
is an edge iff the miner of ``b_k`` heard ``b_i``.  On top of it:

* FRSH sequence of ``j``: ``b_j`` then, repeatedly, the first block whose
  miner heard the previous member.
* BRSH sequence of ``j``: ``b_j`` then, repeatedly, the latest block heard by
  the miner of the previous member.  It always ends at genesis.
* FS/BS: members of those sequences inside an index range (inclusive).
* FU/BU and user-unheard: run lengths of unheard members, topped up with a
  geometric coin draw when the run exhausts the sequence.

The scalar functions below follow the definitions literally.
:func:`all_pairs` computes the same quantities for every anchor at once and
is what the run-level checks use.
"""

import csv
from dataclasses import dataclass

import numpy as np

from .delays import MINER, DelayOracle


class TransmissionGraph:
    """Dense hearing matrix of the miners of honest blocks.

    ``heard[i, k]`` says whether the miner of ``b_k`` heard ``b_i``; the
    graph edges are its strict upper triangle.  The lower triangle (miners
    hearing later blocks) is kept for user-unheard queries about miners.
    """

    def __init__(self, heard, oracle):
        heard = np.asarray(heard, dtype=bool)
        n = heard.shape[0]
        if heard.shape != (n, n):
            raise ValueError("hearing matrix must be square")
        heard = heard.copy()
        np.fill_diagonal(heard, True)
        heard[0, :] = True
        heard.flags.writeable = False
        self.heard = heard
        self.oracle = oracle
        self.n = n

    def has_edge(self, i, k):
        return i < k and bool(self.heard[i, k])

    def edges(self):
        i, k = np.nonzero(np.triu(self.heard, 1))
        return list(zip(i.tolist(), k.tolist()))

    def out_neighbors(self, i):
        return np.flatnonzero(self.heard[i, i + 1 :]) + i + 1

    def user_heard(self, members, h):
        """Whether user ``h`` heard each honest block in ``members``."""
        members = np.asarray(members, dtype=np.int64)
        if h.kind == MINER:
            return self.heard[members, h.index]
        return self.oracle.heard_observer(members, h.index)

    def write_csv(self, path):
        with open(path, "w", newline="") as f:
            w = csv.writer(f, lineterminator="\n")
            w.writerow(("src_honest_index", "dst_honest_index"))
            w.writerows(self.edges())


def build(timeline, oracle):
    return TransmissionGraph(oracle.heard_matrix(timeline.honest_count), oracle)


def from_edges(n, edges, d=0.0, seed=0):
    """Graph with exactly the given edges, for hand-built fixtures.

    Pairs not listed are non-edges, except that genesis is heard by all.
    The oracle only supplies coin extensions and observer delays.
    """
    heard = np.zeros((n, n), dtype=bool)
    for i, k in edges:
        if not 0 <= i < k < n:
            raise ValueError(f"bad edge ({i}, {k})")
        heard[i, k] = True
    return TransmissionGraph(heard, DelayOracle(d, seed))


@dataclass(frozen=True)
class FrshSequence:
    anchor: int
    members: tuple
    truncated: bool

    def __len__(self):
        return len(self.members)


@dataclass(frozen=True)
class BrshSequence:
    anchor: int
    members: tuple


def _check_index(graph, *idx):
    for x in idx:
        if not 0 <= x < graph.n:
            raise IndexError(f"honest index {x} out of range [0, {graph.n - 1}]")


def frsh_sequence(graph, j, limit=None):
    """FRSH members up to honest index ``limit`` (default: the horizon).

    ``truncated`` is set when the sequence was cut by ``limit`` rather than
    known to end; in a finite run that is always the case.
    """
    _check_index(graph, j)
    last = graph.n - 1 if limit is None else min(int(limit), graph.n - 1)
    members = [j]
    cur = j
    while cur < last:
        row = graph.heard[cur, cur + 1 : last + 1]
        if not row.any():
            break
        cur = cur + 1 + int(np.argmax(row))
        members.append(cur)
    return FrshSequence(j, tuple(members), True)


def brsh_sequence(graph, j):
    _check_index(graph, j)
    members = [j]
    cur = j
    while cur > 0:
        col = graph.heard[:cur, cur]
        cur = int(np.flatnonzero(col)[-1])
        members.append(cur)
    return BrshSequence(j, tuple(members))


def fs_count(graph, j, k):
    _check_index(graph, j, k)
    if k < j:
        raise IndexError(f"FS needs j <= k, got ({j}, {k})")
    return len(frsh_sequence(graph, j, limit=k).members)


def bs_count(graph, j, i):
    _check_index(graph, j, i)
    if i > j:
        raise IndexError(f"BS needs i <= j, got ({j}, {i})")
    return sum(1 for m in brsh_sequence(graph, j).members if m >= i)


def forward_unheard(graph, j, k):
    """FU(j, k): FRSH members before ``b_k`` its miner missed, counted backwards."""
    _check_index(graph, j, k)
    if k < j:
        raise IndexError(f"FU needs j <= k, got ({j}, {k})")
    before = [m for m in frsh_sequence(graph, j, limit=k - 1).members if m < k] if k > j else []
    count = 0
    for m in reversed(before):
        if graph.heard[m, k]:
            return count
        count += 1
    return count + graph.oracle.coin_extension(("FU", j, k))


def backward_unheard(graph, j, i):
    """BU(j, i): BRSH members after ``b_i`` whose miners missed ``b_i``, from the earliest."""
    _check_index(graph, j, i)
    if i > j:
        raise IndexError(f"BU needs i <= j, got ({j}, {i})")
    after = sorted(m for m in brsh_sequence(graph, j).members if m > i)
    count = 0
    for m in after:
        if graph.heard[i, m]:
            return count
        count += 1
    return count + graph.oracle.coin_extension(("BU", j, i))


def user_unheard(graph, h, j, k, heard=None):
    """Un_h(j, k), scanning back from the ``k``-th FRSH member.

    ``heard`` optionally overrides the oracle: a callable ``heard(block)``
    giving the user's recorded hearings.  Returns ``None`` when the ``k``-th
    member lies beyond the horizon.
    """
    _check_index(graph, j)
    seq = frsh_sequence(graph, j).members
    if k >= len(seq):
        return None
    members = seq[: k + 1]
    flags = [heard(m) for m in members] if heard is not None else graph.user_heard(members, h).tolist()
    count = 0
    for flag in reversed(flags):
        if flag:
            return count
        count += 1
    return count + graph.oracle.coin_extension(("UU", h.code, j, k))


def user_unheard_series(graph, h, j, members=None):
    """Un_h(j, k) for every in-horizon member index ``k`` of the FRSH sequence."""
    if members is None:
        members = frsh_sequence(graph, j).members
    members = np.asarray(members, dtype=np.int64)
    flags = graph.user_heard(members, h)
    r = np.arange(len(members))
    last = np.maximum.accumulate(np.where(flags, r, -1))
    out = r - last
    none = last < 0
    if none.any():
        ks = r[none]
        out[none] = ks + 1 + graph.oracle.coins("UU", h.code, j, ks)
    return out


# ---------------------------------------------------------------------------
# every anchor at once


@dataclass(frozen=True, eq=False)
class PairQuantities:
    """FS/FU/BS/BU for all anchor pairs of one graph.

    ``FS[j, k]`` and ``FU[j, k]`` are filled for ``k >= j``; ``BS[j, i]`` and
    ``BU[j, i]`` for ``i <= j``.  ``fmem[j, r]`` is the ``r``-th FRSH member of
    ``j`` (``-1`` past the horizon), ``bmem[j, r]`` the ``r``-th BRSH member.
    """

    FS: np.ndarray
    FU: np.ndarray
    BS: np.ndarray
    BU: np.ndarray
    fmem: np.ndarray
    bmem: np.ndarray


def all_pairs(graph):
    n = graph.n
    heard = graph.heard
    oracle = graph.oracle
    FS = np.zeros((n, n), dtype=np.int32)
    FU = np.zeros((n, n), dtype=np.int32)
    BS = np.zeros((n, n), dtype=np.int32)
    BU = np.zeros((n, n), dtype=np.int32)
    fmem = np.full((n, n), -1, dtype=np.int32)
    bmem = np.full((n, n), -1, dtype=np.int32)
    anchors = np.arange(n)
    fmem[anchors, 0] = anchors
    bmem[anchors, 0] = anchors
    FS[anchors, anchors] = 1
    BS[anchors, anchors] = 1
    FU[anchors, anchors] = oracle.coins("FU", anchors, anchors)
    BU[anchors, anchors] = oracle.coins("BU", anchors, anchors)

    fcount = np.ones(n, dtype=np.int64)
    fcur = anchors.copy()
    bcount = np.ones(n, dtype=np.int64)
    bcur = anchors.copy()
    for t in range(1, n):
        # forward: anchors j with k = j + t inside the horizon
        j = anchors[: n - t]
        k = j + t
        c = fcount[: n - t]
        count = np.zeros(len(j), dtype=np.int64)
        active = np.ones(len(j), dtype=bool)
        r = c - 1
        while True:
            idx = np.flatnonzero(active)
            if len(idx) == 0:
                break
            pos = fmem[j[idx], r[idx]]
            hit = heard[pos, k[idx]]
            active[idx[hit]] = False
            miss = idx[~hit]
            count[miss] += 1
            r[miss] -= 1
            done = miss[r[miss] < 0]
            active[done] = False
        ext = np.flatnonzero(r < 0)
        if len(ext):
            count[ext] += oracle.coins("FU", j[ext], k[ext])
        FU[j, k] = count
        new = heard[fcur[: n - t], k]
        nj = j[new]
        fmem[nj, fcount[nj]] = k[new]
        fcount[nj] += 1
        fcur[nj] = k[new]
        FS[j, k] = fcount[: n - t]

        # backward: anchors j with i = j - t >= 0
        jb = anchors[t:]
        i = jb - t
        c = bcount[t:]
        count = np.zeros(len(jb), dtype=np.int64)
        active = np.ones(len(jb), dtype=bool)
        r = c - 1
        while True:
            idx = np.flatnonzero(active)
            if len(idx) == 0:
                break
            pos = bmem[jb[idx], r[idx]]
            hit = heard[i[idx], pos]
            active[idx[hit]] = False
            miss = idx[~hit]
            count[miss] += 1
            r[miss] -= 1
            done = miss[r[miss] < 0]
            active[done] = False
        ext = np.flatnonzero(r < 0)
        if len(ext):
            count[ext] += oracle.coins("BU", jb[ext], i[ext])
        BU[jb, i] = count
        new = heard[i, bcur[t:]]
        nj = jb[new]
        bmem[nj, bcount[nj]] = i[new]
        bcount[nj] += 1
        bcur[nj] = i[new]
        BS[jb, i] = bcount[t:]
    return PairQuantities(FS, FU, BS, BU, fmem, bmem)


# ---------------------------------------------------------------------------
# disjoint segments of a long run, without a dense matrix


def segment_forward(oracle, anchors, gap):
    """FS(j, j+t) and FU(j, j+t) for ``t = 0..gap`` and many anchors.

    Returns two ``(len(anchors), gap + 1)`` arrays.  Hearing is taken from
    ``oracle`` directly, so segments can come from a run far too long for a
    dense matrix.  Membership of ``b_{j+t}`` is ``FS[:, t] > FS[:, t - 1]``.
    """
    j = np.asarray(anchors, dtype=np.int64)
    m = len(j)
    member = np.zeros((m, gap + 1), dtype=bool)
    member[:, 0] = True
    FU = np.zeros((m, gap + 1), dtype=np.int64)
    FU[:, 0] = oracle.coins("FU", j, j)
    cur = j.copy()
    for t in range(1, gap + 1):
        k = j + t
        count = np.zeros(m, dtype=np.int64)
        active = np.ones(m, dtype=bool)
        for s in range(t - 1, -1, -1):
            rows = np.flatnonzero(active & member[:, s])
            if len(rows) == 0:
                if not active.any():
                    break
                continue
            hit = oracle.heard_miners(j[rows] + s, k[rows])
            active[rows[hit]] = False
            count[rows[~hit]] += 1
        ext = np.flatnonzero(active)
        if len(ext):
            count[ext] += oracle.coins("FU", j[ext], k[ext])
        FU[:, t] = count
        new = oracle.heard_miners(cur, k)
        member[:, t] = new
        cur = np.where(new, k, cur)
    return np.cumsum(member, axis=1), FU


def segment_backward(oracle, anchors, gap):
    """BS(j, j-t) and BU(j, j-t) for ``t = 0..gap``; anchors must be ``>= gap``."""
    j = np.asarray(anchors, dtype=np.int64)
    if np.any(j < gap):
        raise IndexError("anchors must leave room for the backward gap")
    m = len(j)
    member = np.zeros((m, gap + 1), dtype=bool)
    member[:, 0] = True
    BU = np.zeros((m, gap + 1), dtype=np.int64)
    BU[:, 0] = oracle.coins("BU", j, j)
    cur = j.copy()
    for t in range(1, gap + 1):
        i = j - t
        count = np.zeros(m, dtype=np.int64)
        active = np.ones(m, dtype=bool)
        for s in range(t - 1, -1, -1):
            rows = np.flatnonzero(active & member[:, s])
            if len(rows) == 0:
                if not active.any():
                    break
                continue
            hit = oracle.heard_miners(i[rows], j[rows] - s)
            active[rows[hit]] = False
            count[rows[~hit]] += 1
        ext = np.flatnonzero(active)
        if len(ext):
            count[ext] += oracle.coins("BU", j[ext], i[ext])
        BU[:, t] = count
        new = oracle.heard_miners(i, cur)
        member[:, t] = new
        cur = np.where(new, i, cur)
    return np.cumsum(member, axis=1), BU


def segment_user_unheard(oracle, h, anchors, member, k):
    """Un_h(j, k) from forward membership masks (rows of ``member``).

    ``member[r, t]`` says whether ``b_{anchors[r] + t}`` is in the FRSH
    sequence of its anchor.  ``h`` is a :class:`Receiver`, or an integer
    array naming a different miner (by honest index) for every row.  Rows
    with fewer than ``k + 1`` members give -1.
    """
    j = np.asarray(anchors, dtype=np.int64)
    member = np.asarray(member, dtype=bool)
    m = len(j)
    out = np.full(m, -1, dtype=np.int64)
    rank = np.cumsum(member, axis=1) - 1
    ok = np.flatnonzero(rank[:, -1] >= k)
    if len(ok) == 0:
        return out
    # offsets of members 0..k for each usable row
    rows, cols = np.nonzero(member[ok] & (rank[ok] <= k))
    pos = (j[ok][rows] + cols).reshape(len(ok), k + 1)
    if isinstance(h, np.ndarray):
        miners = h[ok][:, None]
        flags = oracle.heard_miners(pos, miners)
        code = 2 * h[ok]
    elif h.kind == MINER:
        flags = oracle.heard_miners(pos, h.index)
        code = np.full(len(ok), h.code)
    else:
        flags = oracle.heard_observer(pos, h.index)
        code = np.full(len(ok), h.code)
    r = np.arange(k + 1)
    last = np.where(flags, r, -1).max(axis=1)
    un = k - last
    none = last < 0
    if none.any():
        un[none] = k + 1 + oracle.coins("UU", code[none], j[ok][none], k)
    out[ok] = un
    return out
