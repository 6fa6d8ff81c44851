"""Reproducible random number generation.

Two generators, both counter-based so that any draw is a pure function of
its key and never depends on construction order or parallel scheduling:

* Network construction uses numpy's Philox4x64-10 bit generator keyed by
  ``(seed, source neuron id)`` -- one independent stream per source neuron,
  so a network can be built source-by-source in any order (or in parallel)
  and come out bit-identical.

* The per-step external stimulus uses a splitmix64-style keyed hash over
  ``(seed, neuron id, step, draw index)``.  This admits an O(1) scalar
  query for a single (neuron, step) pair and vectorizes over neurons, and
  it is what makes the Poisson stimulus independent of how the network is
  partitioned over ranks.

The hash chain is fixed for reproducibility: starting from the seed, each
key word w is absorbed as ``x = mix64(x + GOLDEN + w * WORD_MULT)`` where
``mix64`` is the splitmix64 finalizer.  Draw k of a keyed stream is
``mix64(base + (k+1) * GOLDEN)``.
"""

import math

import numpy as np

_MASK = (1 << 64) - 1
_GOLDEN = 0x9E3779B97F4A7C15
_WORD_MULT = 0xD1342543DE82EF95
_M1 = 0xBF58476D1CE4E5B9
_M2 = 0x94D049BB133111EB

# 1/2^53, for mapping the top 53 bits of a u64 to [0, 1)
_U53 = 1.0 / 9007199254740992.0


def mix64(x: int) -> int:
    """Splitmix64 finalizer over a Python int (mod 2^64)."""
    x &= _MASK
    x = ((x ^ (x >> 30)) * _M1) & _MASK
    x = ((x ^ (x >> 27)) * _M2) & _MASK
    return x ^ (x >> 31)


def hash_words(seed: int, *words: int) -> int:
    """Hash a key tuple to a 64-bit base value."""
    x = seed & _MASK
    for w in words:
        x = mix64((x + _GOLDEN + (w & _MASK) * _WORD_MULT) & _MASK)
    return x


def stream_u64(base: int, k: int) -> int:
    """Draw k (0-based) of the keyed stream rooted at ``base``."""
    return mix64((base + ((k + 1) * _GOLDEN & _MASK)) & _MASK)


def unit_from_u64(x: int) -> float:
    """Map a u64 to a float64 uniform in [0, 1)."""
    return (x >> 11) * _U53


def _mix64_arr(x: np.ndarray) -> np.ndarray:
    x = x ^ (x >> np.uint64(30))
    x *= np.uint64(_M1)
    x ^= x >> np.uint64(27)
    x *= np.uint64(_M2)
    return x ^ (x >> np.uint64(31))


def hash_words_arr(seed: int, words: list) -> np.ndarray:
    """Vector form of :func:`hash_words`; each element of ``words`` may be
    a scalar or an array, broadcast together."""
    shape = np.broadcast_shapes(*(np.shape(w) for w in words))
    x = np.full(shape, seed & _MASK, dtype=np.uint64)
    for w in words:
        x = _mix64_arr(x + np.uint64(_GOLDEN) + np.asarray(w, dtype=np.uint64) * np.uint64(_WORD_MULT))
    return x


def _stream_u64_arr(base: np.ndarray, k: int) -> np.ndarray:
    return _mix64_arr(base + np.uint64((k + 1) * _GOLDEN & _MASK))


def _unit_arr(x: np.ndarray) -> np.ndarray:
    return (x >> np.uint64(11)) * _U53


def poisson_keyed(lam: float, seed: int, stream: int, step: int) -> int:
    """One Poisson(lam) draw keyed by (seed, stream, step).

    Knuth multiplication method over the keyed uniform stream; the scalar
    and vector paths perform identical float64 operations, so they match
    bit-for-bit.
    """
    if lam <= 0.0:
        return 0
    base = hash_words(seed, stream, step)
    limit = math.exp(-lam)
    p = 1.0
    k = 0
    while True:
        p = p * unit_from_u64(stream_u64(base, k))
        k += 1
        if not p > limit:
            return k - 1


def poisson_keyed_batch(lam: float, seed: int, streams: np.ndarray, step: int) -> np.ndarray:
    """Vector of Poisson(lam) draws, one per entry of ``streams``.

    Bit-identical to calling :func:`poisson_keyed` per element.
    """
    streams = np.asarray(streams)
    if lam <= 0.0 or streams.size == 0:
        return np.zeros(streams.shape, dtype=np.int64)
    base = hash_words_arr(seed, [streams, step])
    limit = math.exp(-lam)
    p = np.ones(streams.shape, dtype=np.float64)
    counts = np.zeros(streams.shape, dtype=np.int64)
    active = np.ones(streams.shape, dtype=bool)
    k = 0
    while True:
        u = _unit_arr(_stream_u64_arr(base[active], k))
        p_act = p[active] * u
        p[active] = p_act
        k += 1
        still = p_act > limit
        counts[active] += still
        if not still.all():
            idx = np.flatnonzero(active)
            active[idx[~still]] = False
            if not active.any():
                return counts


def philox_generator(seed: int, stream: int) -> np.random.Generator:
    """Philox4x64-10 generator keyed by (seed, stream)."""
    key = np.array([seed & _MASK, stream & _MASK], dtype=np.uint64)
    return np.random.Generator(np.random.Philox(key=key))
