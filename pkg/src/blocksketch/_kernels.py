"""Numba kernels. Each output tile ``(g, j)`` is owned by one call and written once."""
import numpy as np
from numba import njit

from .hashing import fill_blockrow_row, fill_pattern, lane_u64, base_u64


@njit(nogil=True, cache=True)
def flash_tiles(A, out, nbr, tiles, key, Bc, Br, Tk, Tn, s, mode, scale, u_lo, u_hi):
    """Scatter rows ``[u_lo, u_hi)`` of every neighbor block into private tiles.

    Accumulation order is wiring order, then row tile, then row, then the
    ``s`` destinations; ``out`` receives ``scale * tile`` in one write.
    """
    n = A.shape[1]
    kappa = nbr.shape[1]
    dest = np.empty(s, np.int64)
    sgn = np.empty(s, A.dtype)
    acc = np.empty((Br, Tn), A.dtype)
    for t in range(tiles.shape[0]):
        g = tiles[t, 0]
        c0 = tiles[t, 1] * Tn
        w = min(Tn, n - c0)
        acc[:, :] = 0
        for l in range(kappa):
            h = nbr[g, l]
            for u0 in range(u_lo, u_hi, Tk):
                for u in range(u0, u0 + Tk):
                    fill_pattern(key, g, h, u, Br, s, mode, dest, sgn)
                    src = A[h * Bc + u, c0:c0 + w]
                    for i in range(s):
                        dst = acc[dest[i], :w]
                        if sgn[i] > 0:
                            dst += src
                        else:
                            dst -= src
        for r in range(Br):
            for c in range(w):
                out[g * Br + r, c0 + c] = acc[r, c] * scale


@njit(nogil=True, cache=True)
def blockrow_tiles(A, out, nbr, tiles, key, Bc, Br, Tn, s, scale):
    n = A.shape[1]
    kappa = nbr.shape[1]
    idx = np.empty(s, np.int64)
    sgn = np.empty(s, A.dtype)
    acc = np.empty((Br, Tn), A.dtype)
    for t in range(tiles.shape[0]):
        g = tiles[t, 0]
        c0 = tiles[t, 1] * Tn
        w = min(Tn, n - c0)
        acc[:, :] = 0
        for l in range(kappa):
            h = nbr[g, l]
            for r in range(Br):
                fill_blockrow_row(key, g, h, r, Bc, s, idx, sgn)
                dst = acc[r, :w]
                for i in range(s):
                    src = A[h * Bc + idx[i], c0:c0 + w]
                    if sgn[i] > 0:
                        dst += src
                    else:
                        dst -= src
        for r in range(Br):
            for c in range(w):
                out[g * Br + r, c0 + c] = acc[r, c] * scale


@njit(cache=True)
def materialize_blockperm(S, nbr, key, Bc, Br, s, mode, scale):
    M, kappa = nbr.shape
    dest = np.empty(s, np.int64)
    sgn = np.empty(s, np.float64)
    for g in range(M):
        for l in range(kappa):
            h = nbr[g, l]
            for u in range(Bc):
                fill_pattern(key, g, h, u, Br, s, mode, dest, sgn)
                for i in range(s):
                    S[g * Br + dest[i], h * Bc + u] += sgn[i] * scale


@njit(cache=True)
def materialize_blockrow(S, nbr, key, Bc, Br, s, scale):
    M, kappa = nbr.shape
    idx = np.empty(s, np.int64)
    sgn = np.empty(s, np.float64)
    for g in range(M):
        for l in range(kappa):
            h = nbr[g, l]
            for r in range(Br):
                fill_blockrow_row(key, g, h, r, Bc, s, idx, sgn)
                for i in range(s):
                    S[g * Br + r, h * Bc + idx[i]] += sgn[i] * scale


@njit(cache=True)
def blockrow_neighborhoods(key, M, kappa):
    """``kappa`` distinct blocks per output block by a hashed partial shuffle."""
    out = np.empty((M, kappa), np.int64)
    perm = np.empty(M, np.int64)
    for g in range(M):
        for i in range(M):
            perm[i] = i
        base = base_u64(key, 5, g, 0, 0)
        for l in range(kappa):
            j = l + np.int64(lane_u64(base, l + 1) % np.uint64(M - l))
            tmp = perm[l]
            perm[l] = perm[j]
            perm[j] = tmp
            out[g, l] = perm[l]
    return out
