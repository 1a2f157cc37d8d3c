"""Counter-based hashing RNG.

Every random number is a pure function of a tuple of integer keys (seed, stream
tag, coordinates, counters), so values do not depend on query order or on how
work is split between workers.  Mixing is the splitmix64 finalizer applied to a
running combination of the keys.
"""
import numpy as np

_GOLDEN = np.uint64(0x9E3779B97F4A7C15)
_M1 = np.uint64(0xBF58476D1CE4E5B9)
_M2 = np.uint64(0x94D049BB133111EB)
_MASK64 = (1 << 64) - 1

# stream tags
STREAM_EDGE = 1
STREAM_COUNT = 2
STREAM_TIME = 3
STREAM_VALUE = 4
STREAM_INIT = 5
STREAM_WALK = 6
STREAM_NOISE = 7
STREAM_PATH = 8
STREAM_JITTER = 9
STREAM_SAMPLE = 10


def _as_u64(k):
    if isinstance(k, (int, np.integer)) and not isinstance(k, bool):
        return np.uint64(int(k) & _MASK64)
    a = np.asarray(k)
    if a.dtype == np.uint64:
        return a
    if a.dtype.kind not in "iu":
        raise TypeError("hash keys must be integers")
    return a.astype(np.int64).astype(np.uint64)


def mix64(z):
    with np.errstate(over="ignore"):
        z = np.asarray(z, dtype=np.uint64)
        z = z ^ (z >> np.uint64(30))
        z = z * _M1
        z = z ^ (z >> np.uint64(27))
        z = z * _M2
        z = z ^ (z >> np.uint64(31))
    return z


def hash_keys(*keys):
    """Hash a sequence of broadcastable integer keys to uint64."""
    h = np.uint64(0x243F6A8885A308D3)
    with np.errstate(over="ignore"):
        for k in keys:
            h = mix64(np.asarray(h, dtype=np.uint64) + _GOLDEN + _as_u64(k))
    return np.asarray(h, dtype=np.uint64)


def uniform(*keys):
    """Uniform double in the open interval (0, 1)."""
    h = hash_keys(*keys)
    return ((h >> np.uint64(11)).astype(np.float64) + 0.5) * (1.0 / 9007199254740992.0)


def normal(*keys):
    """Standard normal via Box-Muller on two hashed uniforms."""
    u1 = uniform(*keys, 0x51)
    u2 = uniform(*keys, 0x52)
    return np.sqrt(-2.0 * np.log(u1)) * np.cos(2.0 * np.pi * u2)


def exponential(*keys):
    return -np.log(uniform(*keys))


def child_seed(seed, *keys):
    """Derive a 63-bit seed for a sub-stream."""
    return int(hash_keys(seed, *keys) >> np.uint64(1))


_POISSON1_CDF = None


def poisson_mean_one(u):
    """Inverse-cdf Poisson(1) sample from uniforms; exact to double precision."""
    global _POISSON1_CDF
    if _POISSON1_CDF is None:
        from scipy.stats import poisson

        _POISSON1_CDF = poisson.cdf(np.arange(40), 1.0)
    return np.searchsorted(_POISSON1_CDF, u, side="left").astype(np.int64)
