"""Counter-based random numbers for the path kernels.

Philox4x32-10 maps a 128-bit counter and a 64-bit key to four 32-bit words.
The key is the user seed; the counter is (draw index lo, draw index hi,
path index, stream id), so every path owns an independent stream that does
not depend on how paths are distributed over worker threads.

Per-path generator state lives in two small arrays so it can be threaded
through numba functions:

    st  = [key0, key1, draw index, path id, stream id, buffer position]
    buf = four buffered 32-bit words
    nst = [has cached normal, cached normal]
"""

import math

import numba as nb
import numpy as np

MASK32 = np.uint64(0xFFFFFFFF)
_M0 = np.uint64(0xD2511F53)
_M1 = np.uint64(0xCD9E8D57)
_W0 = np.uint64(0x9E3779B9)
_W1 = np.uint64(0xBB67AE85)
_TWO_M32 = 2.0**-32


@nb.njit(cache=True, inline="always")
def philox4x32(c0, c1, c2, c3, k0, k1):
    for _ in range(10):
        p0 = _M0 * c0
        p1 = _M1 * c2
        hi0 = p0 >> np.uint64(32)
        lo0 = p0 & MASK32
        hi1 = p1 >> np.uint64(32)
        lo1 = p1 & MASK32
        c0, c1, c2, c3 = hi1 ^ c1 ^ k0, lo1, hi0 ^ c3 ^ k1, lo0
        k0 = (k0 + _W0) & MASK32
        k1 = (k1 + _W1) & MASK32
    return c0, c1, c2, c3


@nb.njit(cache=True)
def new_state(seed, path_id, stream):
    st = np.zeros(6, np.uint64)
    s = np.uint64(seed)
    st[0] = s & MASK32
    st[1] = s >> np.uint64(32)
    st[2] = np.uint64(0)
    st[3] = np.uint64(path_id)
    st[4] = np.uint64(stream)
    st[5] = np.uint64(4)
    return st


@nb.njit(cache=True, inline="always")
def next_u32(st, buf):
    if st[5] >= 4:
        n = st[2]
        w0, w1, w2, w3 = philox4x32(n & MASK32, n >> np.uint64(32), st[3] & MASK32, st[4] & MASK32, st[0], st[1])
        buf[0] = w0
        buf[1] = w1
        buf[2] = w2
        buf[3] = w3
        st[2] = n + np.uint64(1)
        st[5] = 0
    w = buf[st[5]]
    st[5] += np.uint64(1)
    return w


@nb.njit(cache=True, inline="always")
def uniform(st, buf):
    """Uniform on the open interval (0, 1) with 2^-32 resolution."""
    return (float(next_u32(st, buf)) + 0.5) * _TWO_M32


@nb.njit(cache=True, inline="always")
def normal(st, buf, nst):
    """Standard normal by the Box-Muller transform, caching the second value."""
    if nst[0] != 0.0:
        nst[0] = 0.0
        return nst[1]
    u1 = uniform(st, buf)
    u2 = uniform(st, buf)
    r = math.sqrt(-2.0 * math.log(u1))
    th = 2.0 * math.pi * u2
    nst[0] = 1.0
    nst[1] = r * math.sin(th)
    return r * math.cos(th)


@nb.njit(cache=True)
def _fill_uniform(seed, stream, path_id, n):
    st = new_state(seed, path_id, stream)
    buf = np.zeros(4, np.uint64)
    out = np.empty(n)
    for i in range(n):
        out[i] = uniform(st, buf)
    return out


@nb.njit(cache=True)
def _fill_normal(seed, stream, path_id, n):
    st = new_state(seed, path_id, stream)
    buf = np.zeros(4, np.uint64)
    nst = np.zeros(2)
    out = np.empty(n)
    for i in range(n):
        out[i] = normal(st, buf, nst)
    return out


def uniforms(seed, n, stream=0, path_id=0):
    return _fill_uniform(np.uint64(seed), np.uint64(stream), np.uint64(path_id), int(n))


def normals(seed, n, stream=0, path_id=0):
    return _fill_normal(np.uint64(seed), np.uint64(stream), np.uint64(path_id), int(n))


def philox_block(counter, key):
    """Python entry point: four output words for a 4-word counter and 2-word key."""
    c = [np.uint64(x) for x in counter]
    k = [np.uint64(x) for x in key]
    return tuple(int(w) for w in philox4x32(c[0], c[1], c[2], c[3], k[0], k[1]))
