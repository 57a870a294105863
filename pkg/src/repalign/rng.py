"""Deterministic xoshiro256** generator with Box-Muller normals.

The state is seeded by expanding the integer seed with splitmix64, as
recommended by the xoshiro authors. All state updates are integer-only, so a
given seed yields the same 64-bit stream on every platform. Uniform doubles
use the top 53 bits, ``(x >> 11) * 2**-53``. Normals consume two uniforms
``u1, u2`` and emit ``sqrt(-2 ln(1 - u1)) * cos(2 pi u2)`` followed by the
matching ``sin`` term.
"""
from __future__ import annotations

import numpy as np
from numba import njit

_MASK64 = (1 << 64) - 1


def splitmix64_state(seed: int) -> np.ndarray:
    """Expand an integer seed into the four 64-bit words of xoshiro state."""
    x = seed & _MASK64
    out = []
    for _ in range(4):
        x = (x + 0x9E3779B97F4A7C15) & _MASK64
        z = x
        z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & _MASK64
        z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & _MASK64
        out.append(z ^ (z >> 31))
    return np.array(out, dtype=np.uint64)


@njit(cache=True)
def _rotl(x, k):
    return (x << np.uint64(k)) | (x >> np.uint64(64 - k))


@njit(cache=True)
def _next(s):
    result = _rotl(s[1] * np.uint64(5), 7) * np.uint64(9)
    t = s[1] << np.uint64(17)
    s[2] ^= s[0]
    s[3] ^= s[1]
    s[1] ^= s[2]
    s[0] ^= s[3]
    s[2] ^= t
    s[3] = _rotl(s[3], 45)
    return result


@njit(cache=True)
def _fill_u64(s, out):
    for i in range(out.shape[0]):
        out[i] = _next(s)


@njit(cache=True)
def _fill_uniform(s, out):
    scale = 1.0 / 9007199254740992.0
    for i in range(out.shape[0]):
        out[i] = (_next(s) >> np.uint64(11)) * scale


@njit(cache=True)
def _fill_normal(s, out):
    scale = 1.0 / 9007199254740992.0
    two_pi = 2.0 * np.pi
    n = out.shape[0]
    i = 0
    while i < n:
        u1 = 1.0 - (_next(s) >> np.uint64(11)) * scale
        u2 = (_next(s) >> np.uint64(11)) * scale
        r = np.sqrt(-2.0 * np.log(u1))
        out[i] = r * np.cos(two_pi * u2)
        if i + 1 < n:
            out[i + 1] = r * np.sin(two_pi * u2)
        i += 2


@njit(cache=True)
def _bounded(s, bound):
    # rejection sampling keeps the draw exactly uniform on [0, bound)
    threshold = (np.uint64(0) - bound) % bound
    while True:
        x = _next(s)
        if x >= threshold:
            return x % bound


@njit(cache=True)
def _partial_shuffle(s, idx, n):
    total = idx.shape[0]
    for i in range(n):
        j = i + np.int64(_bounded(s, np.uint64(total - i)))
        tmp = idx[i]
        idx[i] = idx[j]
        idx[j] = tmp


class Xoshiro256:
    """Stateful xoshiro256** stream.

    >>> g = Xoshiro256(0)
    >>> g.normal((2, 3)).shape
    (2, 3)
    """

    def __init__(self, seed: int):
        self.seed = int(seed)
        self.state = splitmix64_state(self.seed)

    def next_u64(self, n: int) -> np.ndarray:
        out = np.empty(n, dtype=np.uint64)
        _fill_u64(self.state, out)
        return out

    def uniform(self, shape) -> np.ndarray:
        out = np.empty(int(np.prod(shape)), dtype=np.float64)
        _fill_uniform(self.state, out)
        return out.reshape(shape)

    def normal(self, shape) -> np.ndarray:
        out = np.empty(int(np.prod(shape)), dtype=np.float64)
        _fill_normal(self.state, out)
        return out.reshape(shape)

    def choice(self, total: int, n: int) -> np.ndarray:
        """``n`` distinct indices from ``range(total)`` via partial Fisher-Yates."""
        if not 0 <= n <= total:
            raise ValueError(f"cannot draw {n} of {total} without replacement")
        idx = np.arange(total, dtype=np.int64)
        _partial_shuffle(self.state, idx, n)
        return idx[:n].copy()
