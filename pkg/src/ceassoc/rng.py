"""Counter-based random streams shared by every backend.

Candidate sampling must be reproducible regardless of batch size, thread
schedule, or whether the compiled kernel is active. Instead of a stateful
generator, every uniform is derived by hashing its coordinates
(seed, domain, iteration, sample, attempt, user, bit) with a SplitMix64-style
finalizer; the compiled kernel re-implements the same arithmetic in C.

Scalar helpers use Python ints (explicit 64-bit masking); the vectorized
variants operate on uint64 arrays, where NumPy wraps silently.
"""

import numpy as np

MASK64 = (1 << 64) - 1
GOLDEN = 0x9E3779B97F4A7C15
_MUL1 = 0xBF58476D1CE4E5B9
_MUL2 = 0x94D049BB133111EB

# Domain separators so unrelated streams never collide.
DOMAIN_SAMPLE = 1
DOMAIN_DROP = 2
DOMAIN_CE = 3
DOMAIN_SHADOWING = 4

U01_SCALE = 1.0 / 9007199254740992.0  # 2**-53


def mix64(z: int) -> int:
    """SplitMix64 output finalizer on a masked 64-bit integer."""
    z &= MASK64
    z = ((z ^ (z >> 30)) * _MUL1) & MASK64
    z = ((z ^ (z >> 27)) * _MUL2) & MASK64
    return z ^ (z >> 31)


def fold(z: int, word: int) -> int:
    """Absorb one coordinate word into the running key."""
    return mix64((z + GOLDEN * ((word + 1) & MASK64)) & MASK64)


def fold_chain(seed: int, *words: int) -> int:
    z = seed & MASK64
    for w in words:
        z = fold(z, w)
    return z


def u01(key: int) -> float:
    """Map a 64-bit key to a uniform double in [0, 1)."""
    return (key >> 11) * U01_SCALE


def fold_array(z, words) -> np.ndarray:
    """Vectorized fold; `z` and `words` broadcast against each other
    (either may be a scalar). Matches fold() bit-for-bit."""
    z = np.asarray(z, dtype=np.uint64)
    w = np.asarray(words, dtype=np.uint64)
    with np.errstate(over="ignore"):
        out = z + np.uint64(GOLDEN) * (w + np.uint64(1))
        out = (out ^ (out >> np.uint64(30))) * np.uint64(_MUL1)
        out = (out ^ (out >> np.uint64(27))) * np.uint64(_MUL2)
        return out ^ (out >> np.uint64(31))


def u01_array(keys: np.ndarray) -> np.ndarray:
    return (keys >> np.uint64(11)).astype(np.float64) * U01_SCALE


def derive_drop_seed(base_seed: int, drop_index: int) -> int:
    """Seed for the deployment of one Monte-Carlo drop."""
    return fold_chain(base_seed, DOMAIN_DROP, drop_index)


def derive_ce_seed(drop_seed: int) -> int:
    """Seed for the optimizer run on a given drop (kept distinct from the
    geometry stream so method sets can be extended without moving drops)."""
    return fold_chain(drop_seed, DOMAIN_CE)
