"""Catch-up events, ss-Nakamoto blocks, the user-unheard criterion, and the
deterministic oracles that check their consequences on a concrete run.

Catch-up comparisons are done in exact integer arithmetic: ``ss`` is turned
into a fraction ``p / q`` and ``A >= ss * S - U`` is tested as
``q * A >= p * S - q * U``.  Equality counts as a catch-up.

A run starts at genesis, so every backward event of a block is inside it.
Forward events are evaluated up to the last honest block; only blocks with
fewer than ``window`` honest successors are left undetermined, since for them
a catch-up beyond the horizon is not negligible.
"""

import math
from dataclasses import dataclass, field
from fractions import Fraction
from functools import cached_property

import numpy as np

from . import xgraph

OCCURRED = "occurred"
NOT_OCCURRED = "not-occurred"
UNDETERMINED = "undetermined"


class PreconditionError(ValueError):
    """An oracle was called on a block that does not meet its hypotheses."""


@dataclass(frozen=True)
class EventVerdict:
    value: str
    reason: str = ""

    @property
    def occurred(self):
        return self.value == OCCURRED


@dataclass(frozen=True)
class NakamotoReport:
    j: int
    ss: Fraction
    window: int
    verdict: EventVerdict
    failing: tuple = ()


@dataclass(frozen=True)
class OracleResult:
    passed: bool
    clause: str = ""
    witness: object = None


def as_fraction(ss):
    """Exact ratio for ``ss``; floats are read through their shortest repr."""
    if isinstance(ss, Fraction):
        return ss
    if isinstance(ss, int):
        return Fraction(ss)
    return Fraction(repr(float(ss))).limit_denominator(10**6)


def catchup_holds(adv, special, unheard, ss):
    """``adv >= ss * special - unheard``, elementwise and exact."""
    f = as_fraction(ss)
    p, q = f.numerator, f.denominator
    adv = np.asarray(adv, dtype=np.int64)
    special = np.asarray(special, dtype=np.int64)
    unheard = np.asarray(unheard, dtype=np.int64)
    return q * adv >= p * special - q * unheard


def default_k0(ss):
    f = as_fraction(ss)
    if not 0 < f < 1:
        raise ValueError("the user-unheard criterion needs 0 < ss < 1")
    return math.ceil(2 * f / (1 - f))


@dataclass(eq=False)
class RunAnalysis:
    """Timeline + transmission graph, with all pair quantities precomputed."""

    timeline: object
    graph: object
    pairs: object = field(default=None)

    def __post_init__(self):
        if self.pairs is None:
            self.pairs = xgraph.all_pairs(self.graph)

    @classmethod
    def from_trace(cls, trace):
        return cls(trace.timeline, trace.graph)

    @property
    def n(self):
        return self.graph.n

    @property
    def last(self):
        return self.graph.n - 1

    def adv(self, i, j):
        return int(self.timeline.adv_upto[j] - self.timeline.adv_upto[i])

    # -- catch-up matrices ---------------------------------------------

    def forward_matrix(self, ss):
        """``Bf[j, k]`` for ``j < k``; False elsewhere."""
        return self._matrices(as_fraction(ss))[0]

    def backward_matrix(self, ss):
        """``Bb[j, i]`` for ``i < j``; False elsewhere."""
        return self._matrices(as_fraction(ss))[1]

    def _matrices(self, f):
        cache = self.__dict__.setdefault("_mcache", {})
        if f not in cache:
            n = self.n
            adv = self.timeline.adv_upto.astype(np.int64)
            P = self.pairs
            A = adv[None, :] - adv[:, None]  # A[j, k] = A(b_j, b_k)
            fs_prev = np.zeros((n, n), dtype=np.int64)
            fs_prev[:, 1:] = P.FS[:, :-1]
            upper = np.triu(np.ones((n, n), dtype=bool), 1)
            Bf = catchup_holds(A, fs_prev, P.FU, f) & upper
            bs_next = np.zeros((n, n), dtype=np.int64)
            bs_next[:, :-1] = P.BS[:, 1:]
            Bb = catchup_holds(-A, bs_next, P.BU, f) & upper.T
            cache.clear()
            cache[f] = (Bf, Bb)
        return cache[f]

    # -- single events ---------------------------------------------------

    def catchup_forward(self, j, k, ss):
        if not 0 <= j < k <= self.last:
            raise IndexError(f"forward catch-up needs 0 <= j < k <= {self.last}, got ({j}, {k})")
        P = self.pairs
        hit = catchup_holds(self.adv(j, k), P.FS[j, k - 1], P.FU[j, k], ss)
        return EventVerdict(OCCURRED if hit else NOT_OCCURRED)

    def catchup_backward(self, i, j, ss):
        if not 0 <= i < j <= self.last:
            raise IndexError(f"backward catch-up needs 0 <= i < j <= {self.last}, got ({i}, {j})")
        P = self.pairs
        hit = catchup_holds(self.adv(i, j), P.BS[j, i + 1], P.BU[j, i], ss)
        return EventVerdict(OCCURRED if hit else NOT_OCCURRED)

    # -- Nakamoto blocks -------------------------------------------------

    def nakamoto_values(self, ss, window):
        """Verdict code per honest index: 1 occurred, 0 not, -1 undetermined."""
        Bf, Bb = self._matrices(as_fraction(ss))
        bad = Bf.any(axis=1) | Bb.any(axis=1)
        out = np.where(bad, 0, 1).astype(np.int64)
        out[max(self.n - window, 0) :] = np.where(bad[max(self.n - window, 0) :], 0, -1)
        out[0] = 0 if bad[0] else -1
        return out

    def is_nakamoto(self, j, ss, window):
        f = as_fraction(ss)
        if not 0 <= j <= self.last:
            raise IndexError(f"honest index {j} out of range")
        Bf, Bb = self._matrices(f)
        failing = tuple(("Bb", int(i)) for i in np.flatnonzero(Bb[j])) + tuple(
            ("Bf", int(k)) for k in np.flatnonzero(Bf[j])
        )
        if failing:
            in_window = any(abs(x - j) <= window for _, x in failing)
            reason = "catch-up" if in_window else "long-range-catch-up"
            return NakamotoReport(j, f, window, EventVerdict(NOT_OCCURRED, reason), failing)
        if j == 0:
            return NakamotoReport(j, f, window, EventVerdict(UNDETERMINED, "genesis"))
        if j + window > self.last:
            return NakamotoReport(j, f, window, EventVerdict(UNDETERMINED, "horizon-truncation"))
        return NakamotoReport(j, f, window, EventVerdict(OCCURRED))

    # -- user-unheard criterion ------------------------------------------

    def check_criterion(self, h, j, ss, k0=None, window=None):
        """``Un_h(j, k) < (1 - ss) / 2 * k`` for every in-horizon member index ``k >= k0``."""
        f = as_fraction(ss)
        if k0 is None:
            k0 = default_k0(f)
        if k0 < 1:
            raise ValueError("k0 must be >= 1")
        members = self.pairs.fmem[j]
        members = members[members >= 0]
        if window is not None:
            members = members[members <= j + window]
        if len(members) <= k0:
            return EventVerdict(UNDETERMINED, "horizon-truncation")
        un = xgraph.user_unheard_series(self.graph, h, j, members)
        p, q = f.numerator, f.denominator
        ks = np.arange(k0, len(members))
        # un < (1 - p/q) / 2 * k  <=>  2 q un < (q - p) k
        bad = ks[~(2 * q * un[k0:] < (q - p) * ks)]
        if len(bad):
            return EventVerdict(NOT_OCCURRED, f"k={int(bad[0])}")
        return EventVerdict(OCCURRED)


# ---------------------------------------------------------------------------
# deterministic oracles on a protocol run


@dataclass(eq=False)
class TreeIndex:
    """Ancestry and snapshot summaries of a finished run's blocktree."""

    trace: object

    @cached_property
    def euler(self):
        return self.trace.tree.euler_arrays(self.trace.timeline.n_blocks)

    @cached_property
    def heights(self):
        tree = self.trace.tree
        return np.array([tree.height(g) for g in range(self.trace.timeline.n_blocks)], dtype=np.int64)

    @cached_property
    def deepest_lca(self):
        """After block ``g`` arrives: common ancestor of all deepest blocks of MB(tau_g)."""
        tree = self.trace.tree
        n = self.trace.timeline.n_blocks
        h = self.heights
        out = np.zeros(n, dtype=np.int64)
        top, lca = 0, 0
        for g in range(n):
            if h[g] > top:
                top, lca = h[g], g
            elif h[g] == top and g != lca:
                a, b = lca, g
                while h[a] > h[b]:
                    a = tree.parent(a)
                while h[b] > h[a]:
                    b = tree.parent(b)
                while a != b:
                    a, b = tree.parent(a), tree.parent(b)
                lca = a
            out[g] = lca
        return out

    def is_ancestor(self, a, b):
        tin, tout = self.euler
        return (tin[a] <= tin[b]) & (tout[b] <= tout[a])


def verify_theorem2(trace, analysis, j, ss, window, index=None):
    """Check the four conclusions for an ss-Nakamoto block ``b_j``.

    (i) unique honest block at its height; (ii) on every longest chain of
    MB(t) for snapshots ``tau_j <= t < tau_last`` (the argument for time
    ``t`` uses the first honest block after ``t``); (iii) unique block at its
    height in MB(tau_j); (iv) ancestor of every later honest block.
    """
    rep = analysis.is_nakamoto(j, ss, window)
    if not rep.verdict.occurred:
        raise PreconditionError(f"b_{j} is not an ss-Nakamoto block ({rep.verdict.value})")
    index = index or TreeIndex(trace)
    tl = trace.timeline
    tree = trace.tree
    gj = int(tl.honest_ids[j])
    hj = tree.height(gj)

    honest_same = [g for g in tree.at_height(hj) if tl.honest[g]]
    if honest_same != [gj]:
        other = next(g for g in honest_same if g != gj)
        return OracleResult(False, "i", other)

    g_last = int(tl.honest_ids[-1])
    lcas = index.deepest_lca[gj:g_last]
    ok = index.is_ancestor(gj, lcas)
    if not ok.all():
        g = gj + int(np.flatnonzero(~ok)[0])
        return OracleResult(False, "ii", g)

    early = [g for g in tree.at_height(hj, upto=tl.time[gj]) if g != gj]
    if early:
        return OracleResult(False, "iii", early[0])

    later = tl.honest_ids[j + 1 :]
    ok = index.is_ancestor(gj, later)
    if not ok.all():
        return OracleResult(False, "iv", int(later[np.flatnonzero(~ok)[0]]))
    return OracleResult(True)


def verify_theorem3(trace, analysis, h, j, ss, window, index=None, k0=None):
    """``b_j`` stays in ``h``'s chain from the mining of the ``k0``-th FRSH member on."""
    f = as_fraction(ss)
    k0 = default_k0(f) if k0 is None else k0
    rep = analysis.is_nakamoto(j, f, window)
    if not rep.verdict.occurred:
        raise PreconditionError(f"b_{j} is not an ss-Nakamoto block")
    crit = analysis.check_criterion(h, j, f, k0)
    if not crit.occurred:
        raise PreconditionError(f"user-unheard criterion for ({h}, {j}) is {crit.value}")
    index = index or TreeIndex(trace)
    tl = trace.timeline
    gj = int(tl.honest_ids[j])
    member = int(analysis.pairs.fmem[j, k0])
    t0 = float(tl.time[tl.honest_ids[member]])
    t_end = float(tl.time[tl.honest_ids[-1]])
    hist = trace.user_history(h)
    samples = [(t0, trace.chain_tip(h, t0))] + [(t, g) for t, g, _ in hist if t0 < t <= t_end]
    tips = np.array([g for _, g in samples], dtype=np.int64)
    ok = index.is_ancestor(gj, tips)
    if not ok.all():
        t, g = samples[int(np.flatnonzero(~ok)[0])]
        return OracleResult(False, "membership", (t, g))
    return OracleResult(True)


# ---------------------------------------------------------------------------
# lemma oracles


def check_lemma1(trace, n_paths=1000, rng=None):
    """Height gain along transmission-graph paths is at least the path length.

    Every edge is checked, then ``n_paths`` random forward walks.
    Returns a list of violations ``(start, end, length, height_gain)``.
    """
    hh = trace.honest_height
    heard = trace.graph.heard
    n = len(hh)
    bad = []
    i, k = np.nonzero(np.triu(heard, 1))
    gain = hh[k] - hh[i]
    for x in np.flatnonzero(gain < 1):
        bad.append((int(i[x]), int(k[x]), 1, int(gain[x])))
    if rng is None or n < 2:
        return bad
    for _ in range(n_paths):
        start = int(rng.integers(0, n - 1))
        cur, length = start, 0
        steps = int(rng.integers(1, 50))
        for _ in range(steps):
            nxt = trace.graph.out_neighbors(cur)
            if len(nxt) == 0:
                break
            cur = int(nxt[rng.integers(0, min(len(nxt), 8))])
            length += 1
        if length and hh[cur] - hh[start] < length:
            bad.append((start, cur, length, int(hh[cur] - hh[start])))
    return bad


def check_sequence_paths(trace, analysis, anchors=None):
    """FRSH/BRSH members are graph paths with strictly increasing heights.

    Returns violations ``(kind, anchor, position)``.
    """
    hh = trace.honest_height
    heard = trace.graph.heard
    P = analysis.pairs
    anchors = range(analysis.n) if anchors is None else anchors
    bad = []
    for j in anchors:
        fm = P.fmem[j][P.fmem[j] >= 0]
        if len(fm) > 1:
            edge = heard[fm[:-1], fm[1:]]
            step = np.diff(hh[fm])
            for r in np.flatnonzero(~edge | (step < 1)):
                bad.append(("frsh", j, int(r)))
        bm = P.bmem[j][P.bmem[j] >= 0]
        if len(bm) > 1:
            edge = heard[bm[1:], bm[:-1]]
            step = hh[bm[:-1]] - hh[bm[1:]]
            for r in np.flatnonzero(~edge | (step < 1)):
                bad.append(("brsh", j, int(r)))
    return bad


def check_lemma4(trace, analysis, window):
    """Height-difference bounds from FS/FU and BS/BU for all in-window pairs.

    Returns violations ``(direction, j, other)``.
    """
    hh = trace.honest_height.astype(np.int64)
    P = analysis.pairs
    n = analysis.n
    bad = []
    for j in range(n):
        k = np.arange(j + 1, min(n, j + window + 1))
        if len(k):
            s = P.FS[j, k - 1].astype(np.int64) - P.FU[j, k]
            v = (s > 0) & (hh[k] - hh[j] < s)
            bad.extend(("forward", j, int(x)) for x in k[v])
        i = np.arange(max(0, j - window), j)
        if len(i):
            s = P.BS[j, i + 1].astype(np.int64) - P.BU[j, i]
            v = (s > 0) & (hh[j] - hh[i] < s)
            bad.extend(("backward", j, int(x)) for x in i[v])
    return bad
