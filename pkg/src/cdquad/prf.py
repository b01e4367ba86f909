"""Counter-based pseudorandom primitives shared by the randomized modules.

Everything here is a pure function of its integer inputs, so any pipeline
built on top is replayable bit-exactly on any platform.  The 64-bit mixer is
a splitmix64-style finalizer; seeds for named subcomponents are derived
through blake2b so callers never have to do seed bookkeeping.
"""

from __future__ import annotations

import hashlib

import numpy as np

_MASK = (1 << 64) - 1
_GAMMA = 0x9E3779B97F4A7C15
_M1 = 0xBF58476D1CE4E5B9
_M2 = 0x94D049BB133111EB


def mix64(x: int) -> int:
    """Scramble a 64-bit integer (splitmix64 finalizer)."""
    z = (x + _GAMMA) & _MASK
    z = ((z ^ (z >> 30)) * _M1) & _MASK
    z = ((z ^ (z >> 27)) * _M2) & _MASK
    return z ^ (z >> 31)


def mix64_array(x: np.ndarray) -> np.ndarray:
    """Vectorized mix64 over a uint64 array (wraparound arithmetic)."""
    with np.errstate(over="ignore"):
        z = (np.asarray(x, dtype=np.uint64) + np.uint64(_GAMMA)).astype(np.uint64)
        z = (z ^ (z >> np.uint64(30))) * np.uint64(_M1)
        z = (z ^ (z >> np.uint64(27))) * np.uint64(_M2)
        return z ^ (z >> np.uint64(31))


def derive_seed(master: int, *tokens) -> int:
    """Derive an independent 64-bit stream key from a master seed and tokens.

    Tokens may be ints, strings, or iterables of ints (coordinate sets).
    Distinct token tuples give statistically independent keys.
    """
    h = hashlib.blake2b(digest_size=8)
    h.update(int(master).to_bytes(8, "little", signed=False))
    for t in tokens:
        if isinstance(t, str):
            h.update(b"s" + t.encode())
        elif isinstance(t, (int, np.integer)):
            h.update(b"i" + int(t).to_bytes(16, "little", signed=True))
        else:
            items = sorted(int(v) for v in t)
            h.update(b"f" + len(items).to_bytes(4, "little"))
            for v in items:
                h.update(int(v).to_bytes(8, "little", signed=True))
    return int.from_bytes(h.digest(), "little")


def counters_uniform(key: int, n: int, offset: int = 0) -> np.ndarray:
    """n iid uniforms in [0, 1) from counter values offset..offset+n-1."""
    ctr = np.arange(offset, offset + n, dtype=np.uint64)
    bits = mix64_array(ctr ^ np.uint64(key & _MASK))
    # keep 53 bits so the conversion to float64 is exact
    return (bits >> np.uint64(11)).astype(np.float64) * (2.0 ** -53)
