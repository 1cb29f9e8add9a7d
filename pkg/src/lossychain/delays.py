"""0-infinity message delays between honest blocks and receiving users.

Each ``(honest block, receiver)`` pair is delivered instantly with
probability ``1 - d`` or lost forever with probability ``d``.  The value of a
pair is a keyed hash of the pair itself, so it is fixed the first time it
could be asked for, independent of query order and safe to evaluate from
several places (protocol run, transmission graph, unheard counts).
"""

from dataclasses import dataclass

import numpy as np

from . import _rng

ZERO = 0
INFINITE = 1

MINER = "miner"
OBSERVER = "observer"


@dataclass(frozen=True, order=True)
class Receiver:
    """The miner of honest block ``index`` or the non-mining observer ``index``."""

    kind: str
    index: int

    @property
    def code(self):
        return 2 * self.index + (1 if self.kind == OBSERVER else 0)

    def __str__(self):
        return f"{'m' if self.kind == MINER else 'o'}{self.index}"


def miner_of(i):
    return Receiver(MINER, int(i))


def observer(u):
    return Receiver(OBSERVER, int(u))


class AdversarialSenderError(ValueError):
    """Adversarial delivery is decided by the adversary, not by the oracle."""


_COIN_KINDS = {"FU": 1, "BU": 2, "UU": 3}


class DelayOracle:
    """Seeded, memoized delay realization.

    Senders are honest indices.  ``timeline`` is optional and only used to
    translate global block ids in :meth:`delay_of_block`.
    """

    def __init__(self, d, seed, timeline=None):
        if not 0 <= d < 1:
            raise ValueError(f"d must be in [0, 1), got {d}")
        self.d = float(d)
        self.seed = int(seed)
        self.timeline = timeline
        self._key = _rng.stream_key(seed, "delays")
        self._coin_key = _rng.stream_key(seed, "coins")
        self._memo = {}
        self._coin_memo = {}

    # -- single queries -------------------------------------------------

    def delay(self, i, r):
        i = int(i)
        if i < 0:
            raise IndexError(f"negative honest index {i}")
        pair = (i, r)
        v = self._memo.get(pair)
        if v is None:
            v = INFINITE if bool(self.lost(np.array([i]), np.array([r.code]))[0]) else ZERO
            self._memo[pair] = v
        return v

    def heard(self, i, r):
        return self.delay(i, r) == ZERO

    def delay_of_block(self, g, r):
        if self.timeline is None:
            raise ValueError("oracle has no timeline to resolve global ids")
        if not self.timeline.honest[g]:
            raise AdversarialSenderError(f"block {g} is adversarial")
        return self.delay(int(self.timeline.honest_index[g]), r)

    # -- vectorized ----------------------------------------------------

    def lost(self, senders, codes):
        """Boolean array: message from honest ``senders`` to receiver ``codes`` lost.

        Genesis (sender 0) and a miner's own block are always delivered.
        """
        senders = np.asarray(senders, dtype=np.int64)
        codes = np.asarray(codes, dtype=np.int64)
        if self.d == 0.0:
            return np.zeros(np.broadcast(senders, codes).shape, dtype=bool)
        u = _rng.hash_uniform(self._key, senders, codes)
        out = u < self.d
        out &= senders != 0
        out &= codes != 2 * senders
        return out

    def heard_miners(self, senders, receivers):
        """Boolean array: miner of honest block ``receivers`` heard ``senders``."""
        return ~self.lost(senders, 2 * np.asarray(receivers, dtype=np.int64))

    def heard_observer(self, senders, u):
        return ~self.lost(senders, 2 * int(u) + 1)

    def heard_matrix(self, n):
        """``M[i, k]``: miner of honest block ``k`` heard honest block ``i``."""
        idx = np.arange(n, dtype=np.int64)
        return self.heard_miners(idx[:, None], idx[None, :])

    # -- coin extensions -----------------------------------------------

    def coins(self, kind, *context):
        """Vectorized Geom(1 - d) - 1 samples keyed by ``(kind, *context)``."""
        if self.d == 0.0:
            return np.zeros(np.broadcast(*context).shape if context else (), dtype=np.int64)
        u = _rng.hash_uniform(self._coin_key, _COIN_KINDS.get(kind, _rng.label_key(kind)), *context)
        return np.floor(np.log1p(-u) / np.log(self.d)).astype(np.int64)

    def coin_extension(self, context):
        """Failures before the first success of a Bernoulli(1 - d) coin.

        ``context`` is a tuple whose first element names the quantity being
        extended (``"FU"``, ``"BU"`` or ``"UU"``) and whose remaining elements
        are integers.  The same context always yields the same count.
        """
        context = tuple(context)
        v = self._coin_memo.get(context)
        if v is None:
            kind, *rest = context
            v = int(self.coins(kind, *[np.int64(x) for x in rest]))
            self._coin_memo[context] = v
        return v
