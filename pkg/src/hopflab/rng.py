"""Philox4x32-10 counter-based generator compiled with numba.

Every random number is a pure function of (seed, stream, tag, index), so a
path's draws do not depend on how paths are batched or scheduled.
"""
from __future__ import annotations

import numba as nb
import numpy as np

_M0 = np.uint64(0xD2511F53)
_M1 = np.uint64(0xCD9E8D57)
_W0 = np.uint32(0x9E3779B9)
_W1 = np.uint32(0xBB67AE85)
_MASK = np.uint64(0xFFFFFFFF)

TAG_GAUSS = 0
TAG_COUNT = 1
TAG_JUMP = 2
MAX_JUMPS = 8


@nb.njit(cache=True, inline="always")
def philox4x32(c0, c1, c2, c3, k0, k1):
    """Ten rounds of Philox4x32; inputs and outputs are uint32 words."""
    for _ in range(10):
        p0 = nb.uint64(c0) * _M0
        p1 = nb.uint64(c2) * _M1
        hi0 = nb.uint32(p0 >> nb.uint64(32))
        lo0 = nb.uint32(p0 & _MASK)
        hi1 = nb.uint32(p1 >> nb.uint64(32))
        lo1 = nb.uint32(p1 & _MASK)
        c0, c1, c2, c3 = hi1 ^ c1 ^ k0, lo1, hi0 ^ c3 ^ k1, lo0
        k0 = nb.uint32(k0 + _W0)
        k1 = nb.uint32(k1 + _W1)
    return c0, c1, c2, c3


@nb.njit(cache=True, inline="always")
def _to_unit(w):
    # open interval (0, 1)
    return (np.float64(w) + 0.5) * 2.3283064365386963e-10


@nb.njit(cache=True, inline="always")
def uniforms4(seed, stream, tag, index):
    """Four uniforms in (0,1) for the given stream, purpose tag and index."""
    k0 = nb.uint32(nb.uint64(seed) & _MASK)
    k1 = nb.uint32(nb.uint64(seed) >> nb.uint64(32))
    s = nb.uint64(stream)
    i = nb.uint64(index)
    c0 = nb.uint32(s & _MASK)
    c1 = nb.uint32(((s >> nb.uint64(32)) & nb.uint64(0x0FFFFFFF)) | (nb.uint64(tag) << nb.uint64(28)))
    c2 = nb.uint32(i & _MASK)
    c3 = nb.uint32(i >> nb.uint64(32))
    r0, r1, r2, r3 = philox4x32(c0, c1, c2, c3, k0, k1)
    return _to_unit(r0), _to_unit(r1), _to_unit(r2), _to_unit(r3)


@nb.njit(cache=True, inline="always")
def normals4(seed, stream, index):
    """Four standard normals by Box-Muller from one Philox block."""
    u0, u1, u2, u3 = uniforms4(seed, stream, TAG_GAUSS, index)
    r0 = np.sqrt(-2.0 * np.log(u0))
    r1 = np.sqrt(-2.0 * np.log(u2))
    t0 = 2.0 * np.pi * u1
    t1 = 2.0 * np.pi * u3
    return r0 * np.cos(t0), r0 * np.sin(t0), r1 * np.cos(t1), r1 * np.sin(t1)


@nb.njit(cache=True, inline="always")
def normal_at(seed, stream, j):
    """The j-th normal of a stream."""
    z0, z1, z2, z3 = normals4(seed, stream, j // 4)
    k = j % 4
    if k == 0:
        return z0
    if k == 1:
        return z1
    if k == 2:
        return z2
    return z3


@nb.njit(cache=True)
def philox_block(ctr, key):
    out = np.empty(4, dtype=np.uint32)
    r = philox4x32(nb.uint32(ctr[0]), nb.uint32(ctr[1]), nb.uint32(ctr[2]), nb.uint32(ctr[3]),
                   nb.uint32(key[0]), nb.uint32(key[1]))
    out[0], out[1], out[2], out[3] = r
    return out


@nb.njit(cache=True)
def normals_for(seed, streams, j0, count):
    """Normals j0 .. j0+count-1 for each stream; shape (len(streams), count)."""
    out = np.empty((streams.size, count))
    for p in range(streams.size):
        for k in range(count):
            out[p, k] = normal_at(seed, streams[p], j0 + k)
    return out


@nb.njit(cache=True)
def uniforms_for(seed, streams, tag, index):
    out = np.empty((streams.size, 4))
    for p in range(streams.size):
        a, b, c, d = uniforms4(seed, streams[p], tag, index)
        out[p, 0], out[p, 1], out[p, 2], out[p, 3] = a, b, c, d
    return out
