"""Reproducible randomness: seed derivation and a portable Gaussian stream.

Every random quantity in this package traces back to a 64-bit master seed
through the SplitMix64 mixing function, and disorder matrices are drawn
from an explicit Box-Muller transform over SplitMix64 uniforms.  Both
streams are pure integer/float arithmetic, so regenerating with the same
(seed, n) is bit-exact across platforms.
"""

from __future__ import annotations

import numpy as np

_MASK64 = (1 << 64) - 1
_GOLDEN = 0x9E3779B97F4A7C15
_MIX1 = 0xBF58476D1CE4E5B9
_MIX2 = 0x94D049BB133111EB

#: Identifier of the Gaussian generator, recorded on every DisorderSample.
GAUSSIAN_RNG_ID = "splitmix64-boxmuller-v1"

#: Identifier of the seed-derivation function, recorded in run manifests.
SEED_FN_ID = "splitmix64-v1"


def splitmix64(state: int) -> int:
    """One SplitMix64 output for the given (pre-increment) state."""
    z = (state + _GOLDEN) & _MASK64
    z = ((z ^ (z >> 30)) * _MIX1) & _MASK64
    z = ((z ^ (z >> 27)) * _MIX2) & _MASK64
    return z ^ (z >> 31)


def derive_seed(master: int, index: int) -> int:
    """Per-sample seed from a master seed and a sample index.

    The map index -> master + (index+1)*GOLDEN is injective mod 2^64 and the
    SplitMix64 finalizer is a bijection, so distinct indices always yield
    distinct seeds for a fixed master.
    """
    if index < 0:
        raise ValueError(f"index must be nonnegative, got {index}")
    state = (master + index * _GOLDEN) & _MASK64
    return splitmix64(state)


def _splitmix64_block(seed: int, count: int) -> np.ndarray:
    """First `count` outputs of the SplitMix64 stream seeded at `seed`."""
    idx = np.arange(1, count + 1, dtype=np.uint64)
    z = (np.uint64(seed & _MASK64) + idx * np.uint64(_GOLDEN)).astype(np.uint64)
    z = (z ^ (z >> np.uint64(30))) * np.uint64(_MIX1)
    z = (z ^ (z >> np.uint64(27))) * np.uint64(_MIX2)
    return z ^ (z >> np.uint64(31))


def gaussian_stream(seed: int, count: int) -> np.ndarray:
    """`count` i.i.d. standard normals via Box-Muller over SplitMix64.

    Consecutive pairs of 64-bit outputs are mapped to 53-bit uniforms; the
    first uniform is shifted into (0, 1] so the logarithm is always finite.
    The stream has the prefix property: the first k draws do not depend on
    `count`.
    """
    if count < 0:
        raise ValueError(f"count must be nonnegative, got {count}")
    if count == 0:
        return np.empty(0)
    pairs = (count + 1) // 2
    z = _splitmix64_block(seed, 2 * pairs)
    scale = 2.0 ** -53
    u1 = ((z[0::2] >> np.uint64(11)).astype(np.float64) + 1.0) * scale
    u2 = (z[1::2] >> np.uint64(11)).astype(np.float64) * scale
    radius = np.sqrt(-2.0 * np.log(u1))
    angle = 2.0 * np.pi * u2
    out = np.empty(2 * pairs)
    out[0::2] = radius * np.cos(angle)
    out[1::2] = radius * np.sin(angle)
    return out[:count]
