"""Longest-chain protocol over a mining timeline.

Honest miners extend the best chain they have heard of at their mining
instant, where "best" means greatest height with ties going to the smaller
tip id.  A mined chain reaches each receiver with the single delay of the
(new block, receiver) pair, and a receiver that gets it learns the whole
chain.  Observers never mine; they only track chains.  The adversary sees
every block immediately and decides parents and reveals for its own blocks.
"""

import csv
import math
from dataclasses import dataclass, field

import numpy as np

from . import xgraph
from .arrivals import ADVERSARIAL, HONEST, Block
from .blocktree import MainBlocktree
from .delays import MINER, miner_of, observer

TRACE_EVENT_COLUMNS = ("time", "user", "event", "block_id", "chain_length")
ALL_MINERS = "miners"


class StrategyError(ValueError):
    """The adversary produced an invalid block."""


@dataclass(frozen=True)
class Transaction:
    time: float
    tag: str = "tx"


@dataclass(frozen=True)
class Reveal:
    """Adversarial chain ``tip`` handed to ``targets`` (receivers or ``ALL_MINERS``)."""

    tip: int
    targets: frozenset


@dataclass
class UserState:
    user: object
    tip: int = 0
    height: int = 0
    heard: set = field(default_factory=lambda: {0})
    history: list = field(default_factory=lambda: [(0.0, 0, 0)])

    def offer(self, tree, tip, time):
        """Learn the chain ending at ``tip``; adopt it if it is better."""
        for g in tree.chain(tip)[::-1]:
            if g in self.heard:
                break
            self.heard.add(g)
        h = tree.height(tip)
        if h > self.height or (h == self.height and tip < self.tip):
            self.tip, self.height = tip, h
            self.history.append((time, tip, h))
            return True
        return False

    def tip_at(self, t):
        """Tip held at time ``t`` (after all events at ``t``)."""
        tip = self.history[0][1]
        for when, g, _ in self.history:
            if when > t:
                break
            tip = g
        return tip


@dataclass(eq=False)
class RunTrace:
    timeline: object
    oracle: object
    graph: object
    tree: MainBlocktree
    honest_height: np.ndarray
    users: dict
    miner_reveals: list
    ledger: list
    events: list
    transactions: tuple

    @property
    def observers(self):
        return list(self.users)

    def block_height(self, g):
        return self.tree.height(g)

    def user_history(self, user):
        """``[(time, tip, height), ...]``: every chain change of ``user``.

        Observers are recorded during the run.  A miner's history is rebuilt
        from the hearing matrix and the reveals it received; it includes the
        miner's own block.
        """
        if user in self.users:
            return self.users[user].history
        if user.kind != MINER:
            raise KeyError(f"unknown user {user}")
        cache = self.__dict__.setdefault("_miner_hist", {})
        if user not in cache:
            tl = self.timeline
            gids = tl.honest_ids
            offers = [(float(tl.time[gids[i]]), int(gids[i])) for i in np.flatnonzero(self.graph.heard[:, user.index])]
            offers += [(t, tip) for t, tip, targets in self.miner_reveals if ALL_MINERS in targets or user in targets]
            offers.sort()
            hist = [(0.0, 0, 0)]
            best = (0, 0)
            for t, g in offers:
                key = (self.tree.height(g), -g)
                if key > best:
                    best = key
                    hist.append((t, g, key[0]))
            cache[user] = hist
        return cache[user]

    def chain_tip(self, user, t):
        """Tip of the chain held by ``user`` at time ``t`` (after events at ``t``)."""
        tip = 0
        for when, g, _ in self.user_history(user):
            if when > t:
                break
            tip = g
        return tip

    def position(self, tag, tip):
        """``(height, index)`` of transaction ``tag`` in the chain ending at ``tip``."""
        return self.ledger[tip].get(tag)

    def write_csv(self, path):
        with open(path, "w", newline="") as f:
            w = csv.writer(f, lineterminator="\n")
            w.writerow(TRACE_EVENT_COLUMNS)
            for t, user, ev, g, length in self.events:
                w.writerow((repr(float(t)), user, ev, g, length))


class Adversary:
    """Base strategy: mine on the best public block, never reveal."""

    name = "idle"

    def choose_parent(self, sim, g):
        return sim.public_tip

    def on_block(self, sim, g):
        return ()


class PrivateChainAttack(Adversary):
    """Withhold a private fork and release it once it is ahead.

    Before ``fork_time`` adversarial blocks are mined on the public tip and
    withheld.  From ``fork_time`` on, blocks extend a private chain rooted at
    the public tip as of ``fork_time`` (the parent of the block that will
    first carry a transaction made then).  Whenever the private chain is at
    least ``margin`` blocks longer than a target's chain it is revealed to
    that target; reveals bypass the loss oracle.  With ``restart_lag`` set,
    a private chain trailing the public one by more than that many blocks is
    abandoned and restarted on the public tip.
    """

    name = "private"

    def __init__(self, fork_time=0.0, margin=1, targets="all", restart_lag=None):
        self.fork_time = float(fork_time)
        self.margin = margin
        self.targets = targets
        self.restart_lag = restart_lag
        self.anchor = 0
        self.private_tip = None
        self._revealed = {}

    def choose_parent(self, sim, g):
        if sim.now <= self.fork_time:
            return sim.public_tip
        if self.private_tip is None:
            self.private_tip = self.anchor
        return self.private_tip

    def on_block(self, sim, g):
        if sim.now <= self.fork_time:
            self.anchor = sim.public_tip
            return ()
        if not sim.is_honest(g):
            self.private_tip = g
        if self.private_tip is None:
            return ()
        ph = sim.tree.height(self.private_tip)
        if self.restart_lag is not None and sim.public_height - ph > self.restart_lag:
            self.private_tip = sim.public_tip
            return ()
        if math.isinf(self.margin):
            return ()
        out = []
        if self.targets in ("all", "miners") and ph >= sim.public_height + self.margin:
            if self._revealed.get(ALL_MINERS) != self.private_tip:
                self._revealed[ALL_MINERS] = self.private_tip
                out.append(ALL_MINERS)
        if self.targets in ("all", "observers"):
            for u, st in sim.users.items():
                if ph >= st.height + self.margin and self._revealed.get(u) != self.private_tip:
                    self._revealed[u] = self.private_tip
                    out.append(u)
        if not out:
            return ()
        return (Reveal(self.private_tip, frozenset(out)),)


def private_chain_attack(fork_time=0.0, margin=1, targets="all", restart_lag=None):
    return PrivateChainAttack(fork_time, margin, targets, restart_lag)


STRATEGIES = {"idle": Adversary, "private": PrivateChainAttack}


def make_adversary(name, **params):
    try:
        cls = STRATEGIES[name]
    except KeyError:
        raise ValueError(f"unknown adversary strategy {name!r}; choose from {sorted(STRATEGIES)}") from None
    return cls(**params)


class _Sim:
    """Mutable state visible to the adversary during a run."""

    def __init__(self, timeline, tree, users):
        self.timeline = timeline
        self.tree = tree
        self.users = users
        self.now = 0.0
        self.public_tip = 0
        self.public_height = 0

    def is_honest(self, g):
        return bool(self.timeline.honest[g])

    def _publish(self, g):
        h = self.tree.height(g)
        if h > self.public_height or (h == self.public_height and g < self.public_tip):
            self.public_tip, self.public_height = g, h


def _honest_parent(k, heard_col, hh, gids, best_reveal):
    cand = np.flatnonzero(heard_col[:k])
    heights = hh[cand]
    top = heights.max()
    at_top = cand[heights == top]
    g = int(gids[at_top].min())
    if best_reveal is not None and (best_reveal[0], -best_reveal[1]) > (int(top), -g):
        return best_reveal[1]
    return g


def run(timeline, oracle, adversary=None, observers=(), transactions=(), graph=None):
    """Execute the protocol and return its :class:`RunTrace`."""
    if adversary is None:
        adversary = Adversary()
    if graph is None:
        graph = xgraph.build(timeline, oracle)
    observers = [observer(u) if isinstance(u, int) else u for u in observers]
    transactions = tuple(sorted(transactions, key=lambda tx: (tx.time, tx.tag)))

    tree = MainBlocktree()
    n = timeline.honest_count
    gids = timeline.honest_ids
    hh = np.zeros(n, dtype=np.int64)
    users = {u: UserState(u) for u in observers}
    sim = _Sim(timeline, tree, users)
    ledger = [dict() for _ in range(timeline.n_blocks)]
    events = []
    miner_reveals = []
    best_reveal = None  # (height, gid) of the best chain revealed to all miners

    tree.insert(Block(0, HONEST, 0, 0, 0.0, None))
    heard = graph.heard

    for g in range(1, timeline.n_blocks):
        t = float(timeline.time[g])
        sim.now = t
        if timeline.honest[g]:
            k = int(timeline.honest_index[g])
            parent = _honest_parent(k, heard[:, k], hh, gids, best_reveal)
            block = Block(g, HONEST, k, g, t, parent)
            tree.insert(block)
            hh[k] = tree.height(g)
            base = ledger[parent]
            new = [tx.tag for tx in transactions if tx.time < t and tx.tag not in base]
            if new:
                led = dict(base)
                for idx, tag in enumerate(new):
                    led[tag] = (int(hh[k]), idx)
                ledger[g] = led
            else:
                ledger[g] = base
            events.append((t, str(miner_of(k)), "mine", g, int(hh[k])))
            sim._publish(g)
            if users:
                for u in observers:
                    if oracle.heard(k, u):
                        st = users[u]
                        events.append((t, str(u), "hear", g, int(hh[k])))
                        if st.offer(tree, g, t):
                            events.append((t, str(u), "adopt", g, st.height))
        else:
            parent = adversary.choose_parent(sim, g)
            if parent is None or parent not in tree or parent >= g:
                raise StrategyError(f"adversary chose invalid parent {parent!r} for block {g}")
            tree.insert(Block(g, ADVERSARIAL, None, g, t, parent))
            ledger[g] = ledger[parent]
            events.append((t, "adversary", "mine", g, tree.height(g)))

        for rv in adversary.on_block(sim, g):
            if rv.tip not in tree or rv.tip > g:
                raise StrategyError(f"adversary revealed unknown block {rv.tip!r}")
            if ALL_MINERS in rv.targets or any(getattr(x, "kind", None) == MINER for x in rv.targets):
                miner_reveals.append((t, rv.tip, rv.targets))
            if ALL_MINERS in rv.targets:
                key = (tree.height(rv.tip), -rv.tip)
                if best_reveal is None or key > (best_reveal[0], -best_reveal[1]):
                    best_reveal = (key[0], rv.tip)
                sim._publish(rv.tip)
            for u in observers:
                if u in rv.targets:
                    st = users[u]
                    events.append((t, str(u), "hear", rv.tip, tree.height(rv.tip)))
                    if st.offer(tree, rv.tip, t):
                        events.append((t, str(u), "adopt", rv.tip, st.height))

    return RunTrace(
        timeline=timeline,
        oracle=oracle,
        graph=graph,
        tree=tree,
        honest_height=hh,
        users=users,
        miner_reveals=miner_reveals,
        ledger=ledger,
        events=events,
        transactions=transactions,
    )


@dataclass(frozen=True)
class SecurityResult:
    violated: bool
    witness: tuple = None


def _sample_positions(trace, tag, user, after):
    """Positions of ``tag`` in ``user``'s chain over ``(after, end]``."""
    st = trace.users[user]
    out = [(after, trace.position(tag, st.tip_at(after)))]
    for when, tip, _ in st.history:
        if when > after:
            out.append((when, trace.position(tag, tip)))
    return out


def check_security(trace, tx, tau, users=None):
    """Definition-of-security check for ``tx`` with confirmation time ``tau``.

    Chains are piecewise constant, so it suffices to look at each user's
    chain right after ``tx.time + tau`` and at every later change.  The
    witness is ``(h1, s1, h2, s2)``; for a missing transaction ``h1 == h2``.
    """
    if tau < 0:
        raise ValueError(f"tau must be non-negative, got {tau}")
    users = list(trace.users) if users is None else list(users)
    for u in users:
        if u not in trace.users:
            raise ValueError(f"user {u} is not an observer of this run")
    after = tx.time + tau
    ref = None
    for u in users:
        for when, pos in _sample_positions(trace, tx.tag, u, after):
            if pos is None:
                return SecurityResult(True, (u, when, u, when))
            if ref is None:
                ref = (u, when, pos)
            elif pos != ref[2]:
                return SecurityResult(True, (ref[0], ref[1], u, when))
    return SecurityResult(False, None)
