"""Seed derivation and counter-based hashing.

Every consumer of randomness draws from its own stream, derived from
``(root seed, stream label)``.  Adding a new consumer therefore never shifts
the values seen by existing ones.  Per-pair quantities (message losses, coin
extensions) are not drawn sequentially at all: they are a keyed hash of the
pair, so they are identical whatever order they are first queried in.
"""

import zlib

import numpy as np

_MASK = (1 << 64) - 1
_GOLDEN = np.uint64(0x9E3779B97F4A7C15)
_M1 = np.uint64(0xBF58476D1CE4E5B9)
_M2 = np.uint64(0x94D049BB133111EB)
_S30 = np.uint64(30)
_S27 = np.uint64(27)
_S31 = np.uint64(31)
_S11 = np.uint64(11)
_INV53 = 1.0 / 9007199254740992.0  # 2**-53


def label_key(label):
    """Stable 32-bit integer for a stream label."""
    return zlib.crc32(label.encode("utf-8"))


def seed_sequence(seed, label, *extra):
    return np.random.SeedSequence(int(seed) & _MASK, spawn_key=(label_key(label),) + tuple(int(e) for e in extra))


def generator(seed, label, *extra):
    """Independent ``numpy.random.Generator`` for one purpose."""
    return np.random.Generator(np.random.PCG64(seed_sequence(seed, label, *extra)))


def stream_key(seed, label, *extra):
    """64-bit key for a hash-based stream."""
    return int(seed_sequence(seed, label, *extra).generate_state(1, np.uint64)[0])


def derive_seed(root, index):
    """Seed of trial ``index`` under ``root``; independent of scheduling."""
    return stream_key(root, "trial", index)


def mix64(x):
    """splitmix64 finalizer on a uint64 array (wrapping arithmetic)."""
    x = np.asarray(x, dtype=np.uint64)
    with np.errstate(over="ignore"):
        x = x + _GOLDEN
        x = (x ^ (x >> _S30)) * _M1
        x = (x ^ (x >> _S27)) * _M2
        x = x ^ (x >> _S31)
    return x


def hash_uniform(key, *words):
    """Uniform in [0, 1) as a deterministic function of ``key`` and ``words``.

    ``words`` are broadcast together; each is folded in with one mixing
    round, so changing any single word gives an unrelated output.
    """
    h = mix64(np.uint64(key & _MASK))
    for w in words:
        w = np.asarray(w).astype(np.uint64)
        h = mix64(h ^ mix64(w))
    return (h >> _S11).astype(np.float64) * _INV53
