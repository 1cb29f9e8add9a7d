"""Honest and adversarial block arrivals.

Blocks are mined as a Poisson process of total rate ``lam``; a fraction
``beta`` of the hash power is adversarial, so honest and adversarial arrivals
are independent Poisson processes of rates ``(1 - beta) * lam`` and
``beta * lam``.  A run is truncated after ``horizon_blocks`` honest blocks,
genesis included.
"""

from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from . import _rng

HONEST = "H"
ADVERSARIAL = "A"


class ParameterError(ValueError):
    """A simulation parameter is outside its domain."""


@dataclass(frozen=True)
class SimParams:
    lam: float = 1.0
    beta: float = 0.15
    d: float = 0.3
    ss: float = 0.9
    horizon_blocks: int = 2000
    window: int = 200
    seed: int = 0

    def __post_init__(self):
        if not self.lam > 0:
            raise ParameterError(f"lam must be > 0, got {self.lam}")
        if not 0 <= self.beta < 1:
            raise ParameterError(f"beta must be in [0, 1), got {self.beta}")
        if not 0 <= self.d < 1:
            raise ParameterError(f"d must be in [0, 1), got {self.d}")
        if not 0 < self.ss <= 1:
            raise ParameterError(f"ss must be in (0, 1], got {self.ss}")
        if int(self.horizon_blocks) != self.horizon_blocks or self.horizon_blocks < 1:
            raise ParameterError(f"horizon_blocks must be a positive integer, got {self.horizon_blocks}")
        if int(self.window) != self.window or self.window < 1:
            raise ParameterError(f"window must be a positive integer, got {self.window}")
        if not 0 <= int(self.seed) < 2**64:
            raise ParameterError(f"seed must be a 64-bit unsigned integer, got {self.seed}")

    @property
    def lam_honest(self):
        return (1.0 - self.beta) * self.lam

    @property
    def lam_adversarial(self):
        return self.beta * self.lam

    def replace(self, **changes):
        values = {f: getattr(self, f) for f in self.__dataclass_fields__}
        values.update(changes)
        return SimParams(**values)


@dataclass(frozen=True)
class Block:
    id: int
    kind: str
    honest_index: Optional[int]
    miner: int
    time: float
    parent: Optional[int] = None

    @property
    def is_honest(self):
        return self.kind == HONEST


@dataclass(frozen=True, eq=False)
class MiningTimeline:
    """Arrival record of one run, stored column-wise.

    ``time[g]`` and ``honest[g]`` describe the block with global id ``g``.
    ``honest_ids[i]`` is the global id of the ``i``-th honest block and
    ``adv_upto[i]`` the number of adversarial blocks mined no later than it.
    Every block has its own miner, whose id is the block id.
    """

    time: np.ndarray
    honest: np.ndarray
    honest_index: np.ndarray
    honest_ids: np.ndarray
    adv_upto: np.ndarray
    params: Optional[SimParams] = field(default=None, compare=False)

    @property
    def n_blocks(self):
        return len(self.time)

    @property
    def honest_count(self):
        return len(self.honest_ids)

    @property
    def adversarial_count_total(self):
        return self.n_blocks - self.honest_count

    @property
    def honest_times(self):
        return self.time[self.honest_ids]

    @property
    def last_honest(self):
        return self.honest_count - 1

    def block(self, g):
        g = int(g)
        h = bool(self.honest[g])
        return Block(
            id=g,
            kind=HONEST if h else ADVERSARIAL,
            honest_index=int(self.honest_index[g]) if h else None,
            miner=g,
            time=float(self.time[g]),
        )

    @property
    def blocks(self):
        return [self.block(g) for g in range(self.n_blocks)]

    def gap_counts(self):
        """Adversarial blocks between consecutive honest blocks."""
        return np.diff(self.adv_upto)

    def fingerprint(self):
        """Bytes that identify the timeline exactly."""
        return self.time.tobytes() + self.honest.tobytes()


def _build(time, honest, params=None):
    time = np.asarray(time, dtype=np.float64)
    honest = np.asarray(honest, dtype=bool)
    if len(time) == 0 or not honest[0] or time[0] != 0.0:
        raise ParameterError("timeline must start with the genesis block at time 0")
    if np.any(np.diff(time) <= 0):
        raise ParameterError("block times must be strictly increasing")
    honest_ids = np.flatnonzero(honest)
    honest_index = np.full(len(time), -1, dtype=np.int64)
    honest_index[honest_ids] = np.arange(len(honest_ids))
    adv_cum = np.cumsum(~honest)
    adv_upto = adv_cum[honest_ids]
    for a in (time, honest, honest_index, honest_ids, adv_upto):
        a.flags.writeable = False
    return MiningTimeline(time, honest, honest_index, honest_ids, adv_upto, params)


def timeline_from_kinds(kinds, times=None):
    """Hand-built timeline from a string such as ``"HAAHAH"``.

    The first character must be ``H`` (genesis).  Times default to the
    block positions 0, 1, 2, ...
    """
    honest = np.array([c == HONEST for c in kinds])
    if any(c not in (HONEST, ADVERSARIAL) for c in kinds):
        raise ParameterError(f"unknown block kind in {kinds!r}")
    if times is None:
        times = np.arange(len(kinds), dtype=np.float64)
    return _build(times, honest)


def _poisson_times(rng, rate, until):
    if rate <= 0 or until <= 0:
        return np.empty(0)
    chunks, t = [], 0.0
    expected = rate * until
    size = int(expected + 6 * np.sqrt(expected) + 16)
    while True:
        gaps = rng.standard_exponential(size) / rate
        times = t + np.cumsum(gaps)
        chunks.append(times)
        t = times[-1]
        if t > until:
            break
    times = np.concatenate(chunks)
    return times[times <= until]


def generate_timeline(params):
    """Sample the arrival record for ``params``.

    Honest gaps come from the ``honest-arrivals`` stream and adversarial ones
    from ``adversarial-arrivals``, so the honest part of a timeline depends
    only on ``(seed, lam_honest, horizon_blocks)``.  Adversarial arrivals
    after the last honest block are not generated.
    """
    if not isinstance(params, SimParams):
        raise ParameterError("params must be a SimParams")
    n = params.horizon_blocks
    attempt = 0
    while True:
        rng_h = _rng.generator(params.seed, "honest-arrivals", attempt)
        gaps = rng_h.standard_exponential(n - 1) / params.lam_honest
        honest_times = np.concatenate([[0.0], np.cumsum(gaps)])
        rng_a = _rng.generator(params.seed, "adversarial-arrivals", attempt)
        adv_times = _poisson_times(rng_a, params.lam_adversarial, honest_times[-1])
        time = np.concatenate([honest_times, adv_times])
        honest = np.concatenate([np.ones(n, bool), np.zeros(len(adv_times), bool)])
        order = np.argsort(time, kind="stable")
        time, honest = time[order], honest[order]
        # exact ties have probability zero; resample rather than break them
        if np.all(np.diff(time) > 0) and honest[0]:
            return _build(time, honest, params)
        attempt += 1


def adversarial_count(timeline, i, j):
    """Adversarial blocks mined in ``(tau_i, tau_j]``."""
    n = timeline.honest_count
    if not (0 <= i < n and 0 <= j < n):
        raise IndexError(f"honest index out of range: ({i}, {j}) with {n} honest blocks")
    if i > j:
        raise IndexError(f"need i <= j, got ({i}, {j})")
    return int(timeline.adv_upto[j] - timeline.adv_upto[i])


def index_domain_counts(beta, n, seed):
    """Adversarial counts between successive honest blocks, i.i.d. Geom(1 - beta) - 1."""
    if not 0 <= beta < 1:
        raise ParameterError(f"beta must be in [0, 1), got {beta}")
    rng = _rng.generator(seed, "index-domain")
    return rng.geometric(1.0 - beta, size=int(n)) - 1
