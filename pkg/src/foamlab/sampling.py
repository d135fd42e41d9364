"""Deterministic randomness plumbing.

Everything random in this package derives from counter-based Philox streams
keyed by (seed, purpose tag, structural index).  Counter mode means a stream
is regenerated identically on every call and in every process, so results
depend only on the seed and the logical structure of the computation, never
on chunk sizes, worker counts, or call order.
"""

import numpy as np

MASK64 = (1 << 64) - 1

# Purpose tags keep independent substreams from colliding.  Values are
# arbitrary but frozen: changing them changes every seeded result.
TAG_CENTER = 0x11
TAG_MC = 0x22
TAG_PROBE = 0x33
TAG_BOX = 0x44
TAG_CALIBRATION = 0x55
TAG_CHALLENGE = 0x66


def philox_generator(seed, tag, index=0):
    """A fresh Generator for substream (seed, tag, index)."""
    key = np.array([int(seed) & MASK64, ((tag & 0xFFFF) << 48) ^ (int(index) & MASK64)],
                   dtype=np.uint64)
    return np.random.Generator(np.random.Philox(key=key))


def fold_key(values):
    """Fold a tuple of ints into one uint64 (FNV-1a).  Stable across runs."""
    h = 0xCBF29CE484222325
    for v in values:
        v = int(v) & MASK64
        for shift in range(0, 64, 8):
            h ^= (v >> shift) & 0xFF
            h = (h * 0x100000001B3) & MASK64
    return h


def stream_uniforms(seed, count):
    """First `count` uniforms of the shared selection stream for `seed`.

    Prefixes are stable: stream_uniforms(s, a) == stream_uniforms(s, b)[:a]
    for a <= b, so callers may re-draw with a larger count to extend.
    """
    return philox_generator(seed, TAG_CENTER).random(int(count))


def chunk_generator(seed, chunk_index):
    """Generator for one fixed-size Monte Carlo chunk.

    Chunks are the unit of reproducibility: an estimator always cuts its
    sample budget into the same chunks no matter how many workers run them,
    and each chunk re-derives its own stream from (seed, chunk_index).
    """
    return philox_generator(seed, TAG_MC, chunk_index)
