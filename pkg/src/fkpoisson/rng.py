"""Counter-based Gaussian streams.

Every Gaussian used by the simulators is a pure function of
``(key, path_index, draw_index)``: the key is derived from the user seed and a
namespace, the counter block is Philox4x32-10 over
``(draw_index // 2, path_index)``, and the two 53-bit uniforms of each block are
mapped through Wichura's AS241 inverse normal CDF.  No state is shared between
paths, so any partition of paths across workers reproduces the same numbers.
"""

from __future__ import annotations

import math

import numba as nb
import numpy as np

_MASK64 = (1 << 64) - 1


def splitmix64(value: int) -> int:
    z = (value + 0x9E3779B97F4A7C15) & _MASK64
    z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & _MASK64
    z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & _MASK64
    return z ^ (z >> 31)


def derive_key(seed: int, namespace: int = 0) -> tuple:
    """Split ``(seed, namespace)`` into the two 32-bit Philox key words."""
    k = splitmix64((seed & _MASK64) ^ splitmix64(namespace & _MASK64))
    return k & 0xFFFFFFFF, k >> 32


def namespace_id(*parts: int) -> int:
    h = 0x5EED
    for p in parts:
        h = splitmix64(h ^ (int(p) & _MASK64))
    return h


@nb.njit(inline="always", nogil=True)
def philox4x32(c0, c1, c2, c3, k0, k1):
    for _ in range(10):
        p0 = c0 * np.uint64(0xD2511F53)
        p1 = c2 * np.uint64(0xCD9E8D57)
        n0 = ((p1 >> np.uint64(32)) ^ c1 ^ k0) & np.uint64(0xFFFFFFFF)
        n1 = p1 & np.uint64(0xFFFFFFFF)
        n2 = ((p0 >> np.uint64(32)) ^ c3 ^ k1) & np.uint64(0xFFFFFFFF)
        n3 = p0 & np.uint64(0xFFFFFFFF)
        c0, c1, c2, c3 = n0, n1, n2, n3
        k0 = (k0 + np.uint64(0x9E3779B9)) & np.uint64(0xFFFFFFFF)
        k1 = (k1 + np.uint64(0xBB67AE85)) & np.uint64(0xFFFFFFFF)
    return c0, c1, c2, c3


@nb.njit(inline="always", nogil=True)
def ndtri(p):
    """Inverse standard normal CDF (AS241, relative accuracy ~1e-16)."""
    q = p - 0.5
    if abs(q) <= 0.425:
        r = 0.180625 - q * q
        num = (((((((r * 2509.0809287301226727 + 33430.575583588128105) * r + 67265.770927008700853) * r
                   + 45921.953931549871457) * r + 13731.693765509461125) * r + 1971.5909503065514427) * r
                + 133.14166789178437745) * r + 3.387132872796366608)
        den = (((((((r * 5226.495278852545925 + 28729.085735721942674) * r + 39307.89580009271061) * r
                   + 21213.794301586595867) * r + 5394.1960214247511077) * r + 687.1870074920579083) * r
                + 42.313330701600911252) * r + 1.0)
        return q * num / den
    r = p if q < 0 else 1.0 - p
    r = math.sqrt(-math.log(r))
    if r <= 5.0:
        r -= 1.6
        num = (((((((r * 7.7454501427834140764e-4 + 0.0227238449892691845833) * r + 0.24178072517745061177) * r
                   + 1.27045825245236838258) * r + 3.64784832476320460504) * r + 5.7694972214606914055) * r
                + 4.6303378461565452959) * r + 1.42343711074968357734)
        den = (((((((r * 1.05075007164441684324e-9 + 5.475938084995344946e-4) * r + 0.0151986665636164571966) * r
                   + 0.14810397642748007459) * r + 0.68976733498510000455) * r + 1.6763848301838038494) * r
                + 2.05319162663775882187) * r + 1.0)
    else:
        r -= 5.0
        num = (((((((r * 2.01033439929228813265e-7 + 2.71155556874348757815e-5) * r + 0.0012426609473880784386) * r
                   + 0.026532189526576123093) * r + 0.29656057182850489123) * r + 1.7848265399172913358) * r
                + 5.4637849111641143699) * r + 6.6579046435011037772)
        den = (((((((r * 2.04426310338993978564e-15 + 1.4215117583164458887e-7) * r + 1.8463183175100546818e-5) * r
                   + 7.868691311456132591e-4) * r + 0.0148753612908506148525) * r + 0.13692988092273580531) * r
                + 0.59983220655588793769) * r + 1.0)
    val = num / den
    return -val if q < 0 else val


@nb.njit(inline="always", nogil=True)
def normal_pair(k0, k1, path, block):
    """Two standard normals for counter block ``block`` of path ``path``."""
    r0, r1, r2, r3 = philox4x32(
        np.uint64(block) & np.uint64(0xFFFFFFFF),
        np.uint64(block) >> np.uint64(32),
        np.uint64(path) & np.uint64(0xFFFFFFFF),
        np.uint64(path) >> np.uint64(32),
        np.uint64(k0),
        np.uint64(k1),
    )
    # 53-bit uniforms strictly inside (0, 1)
    u = ((r0 >> np.uint64(5)) * 67108864.0 + (r1 >> np.uint64(6)) + 0.5) * 1.1102230246251565e-16
    v = ((r2 >> np.uint64(5)) * 67108864.0 + (r3 >> np.uint64(6)) + 0.5) * 1.1102230246251565e-16
    return ndtri(u), ndtri(v)


@nb.njit(nogil=True)
def normals_block(k0, k1, path, start, count):
    out = np.empty(count)
    for j in range(count):
        idx = start + j
        a, b = normal_pair(k0, k1, path, idx >> 1)
        out[j] = a if (idx & 1) == 0 else b
    return out


class RandomStream:
    """Gaussian stream of one path: ``normal(counter)`` is a pure function."""

    def __init__(self, seed: int, path_index: int = 0, namespace: int = 0, counter: int = 0):
        self.seed = int(seed)
        self.path_index = int(path_index)
        self.namespace = int(namespace)
        self.counter = int(counter)
        self.key = derive_key(self.seed, self.namespace)

    def __repr__(self):
        return f"RandomStream(seed={self.seed}, path_index={self.path_index}, counter={self.counter})"

    def normals_at(self, counter: int, count: int) -> np.ndarray:
        return normals_block(self.key[0], self.key[1], self.path_index, counter, count)

    def draw(self, count: int) -> np.ndarray:
        out = self.normals_at(self.counter, count)
        self.counter += count
        return out
