"""Counter-based, stateless randomness.

Every random quantity is a pure function of ``(seed, stream, g, h, u)``:

* ``seed_key(seed) = mix64(seed ^ GOLDEN)``
* ``pack_counter(stream, g, h, u) = stream << 60 | g << 40 | h << 20 | u``
* ``context_base = mix64(seed_key ^ packed)``
* ``lane_word(base, lane) = mix64(base ^ (lane * LANE_MUL mod 2**64))``

``mix64`` is the MurmurHash3 ``fmix64`` finalizer. The lane layout used by
the intra-block pattern is documented on :func:`intra_block_pattern`.
"""
from __future__ import annotations

import enum
from dataclasses import dataclass

import numpy as np
from numba import njit

from .layout import MAX_INDEX, IntraMode

MASK64 = (1 << 64) - 1
FMIX_C1 = 0xFF51AFD7ED558CCD
FMIX_C2 = 0xC4CEB9FE1A85EC53
GOLDEN = 0x9E3779B97F4A7C15
LANE_MUL = 0xBF58476D1CE4E5B9

LANE_A = 1
LANE_B = 2
LANE_SIGN = 1 << 20
LANE_OFFSET = 1 << 40


class Stream(enum.IntEnum):
    WIRING = 1
    DESTINATIONS = 2
    SIGNS = 3
    BLOCKROW = 4
    BLOCKROW_NBR = 5
    DATA = 6
    TRIAL = 7
    GAUSSIAN = 8
    UNIFORM_WIRING = 9


MODE_AFFINE = 0
MODE_ROW = 1


def mode_code(mode: IntraMode) -> int:
    return MODE_AFFINE if IntraMode(mode) is IntraMode.AFFINE_UNIQUE else MODE_ROW


# ---------------------------------------------------------------------------
# Pure-Python reference (exact integers)
# ---------------------------------------------------------------------------

def mix64(x: int) -> int:
    """MurmurHash3 fmix64 finalizer on a 64-bit word."""
    x &= MASK64
    x ^= x >> 33
    x = (x * FMIX_C1) & MASK64
    x ^= x >> 33
    x = (x * FMIX_C2) & MASK64
    x ^= x >> 33
    return x


def seed_key(seed: int) -> int:
    return mix64((seed & MASK64) ^ GOLDEN)


def pack_counter(stream: int, g: int, h: int, u: int) -> int:
    if not (0 <= stream < 16):
        raise ValueError("stream tag must fit in 4 bits")
    for name, v in (("g", g), ("h", h), ("u", u)):
        if not (0 <= v < MAX_INDEX):
            raise ValueError(f"{name}={v} outside the 20-bit counter lane")
    return (stream << 60) | (g << 40) | (h << 20) | u


def context_base(seed: int, stream: int, g: int, h: int, u: int) -> int:
    return mix64(seed_key(seed) ^ pack_counter(stream, g, h, u))


def lane_word(base: int, lane: int) -> int:
    return mix64(base ^ ((lane * LANE_MUL) & MASK64))


def derive_seed(seed: int, stream: int, index: int = 0, sub: int = 0) -> int:
    """Labelled 64-bit sub-seed, e.g. one per trial."""
    return lane_word(context_base(seed, stream, index & (MAX_INDEX - 1),
                                  (index >> 20) & (MAX_INDEX - 1), sub), 0)


def uniform_int(word: int, m: int) -> int:
    return word % m


# ---------------------------------------------------------------------------
# Numba versions used inside the kernels (uint64 wrap-around arithmetic)
# ---------------------------------------------------------------------------

@njit(cache=True, inline="always")
def mix64_u64(x):
    x ^= x >> np.uint64(33)
    x *= np.uint64(FMIX_C1)
    x ^= x >> np.uint64(33)
    x *= np.uint64(FMIX_C2)
    x ^= x >> np.uint64(33)
    return x


@njit(cache=True, inline="always")
def base_u64(key, stream, g, h, u):
    packed = ((np.uint64(stream) << np.uint64(60)) | (np.uint64(g) << np.uint64(40))
              | (np.uint64(h) << np.uint64(20)) | np.uint64(u))
    return mix64_u64(key ^ packed)


@njit(cache=True, inline="always")
def lane_u64(base, lane):
    return mix64_u64(base ^ (np.uint64(lane) * np.uint64(LANE_MUL)))


@njit(cache=True)
def fill_pattern(key, g, h, u, Br, s, mode, dest, sgn):
    """Write the ``s`` destinations and signs of row ``u`` of block ``(g, h)``."""
    base = base_u64(key, 2, g, h, u)
    br = np.uint64(Br)
    if mode == 0:
        a = (lane_u64(base, LANE_A) % br) | np.uint64(1)
        b = lane_u64(base, LANE_B) % br
        for i in range(s):
            dest[i] = np.int64((a * np.uint64(i) + b) % br)
    else:
        c = Br // s
        cu = np.uint64(c)
        for i in range(s):
            dest[i] = i * c + np.int64(lane_u64(base, LANE_OFFSET + i) % cu)
    sbase = base_u64(key, 3, g, h, u)
    word = np.uint64(0)
    for i in range(s):
        if (i & 63) == 0:
            word = lane_u64(sbase, LANE_SIGN + (i >> 6))
        if (word >> np.uint64(i & 63)) & np.uint64(1):
            sgn[i] = 1.0
        else:
            sgn[i] = -1.0


@njit(cache=True)
def fill_blockrow_row(key, g, h, r, Bc, s, idx, sgn):
    """Uniform (with replacement) input rows and signs for output row ``r``."""
    base = base_u64(key, 4, g, h, r)
    bc = np.uint64(Bc)
    for t in range(s):
        idx[t] = np.int64(lane_u64(base, LANE_OFFSET + t) % bc)
    word = np.uint64(0)
    for t in range(s):
        if (t & 63) == 0:
            word = lane_u64(base, LANE_SIGN + (t >> 6))
        if (word >> np.uint64(t & 63)) & np.uint64(1):
            sgn[t] = 1.0
        else:
            sgn[t] = -1.0


@dataclass(frozen=True)
class HashContext:
    seed: int
    g: int
    h: int
    u: int
    stream: Stream = Stream.DESTINATIONS


def resolve_intra_mode(Br: int, s: int, mode: IntraMode) -> IntraMode:
    """Mode actually used for a block of ``Br`` output rows.

    Affine-unique patterns need a power-of-two ``Br``; otherwise fall back
    to row-partitioned chunking when ``s | Br``.
    """
    mode = IntraMode(mode)
    if s < 1 or s > Br:
        raise ValueError(f"need 1 <= s <= Br (s={s}, Br={Br})")
    if mode is IntraMode.AFFINE_UNIQUE and Br & (Br - 1) == 0:
        return mode
    if Br % s:
        raise ValueError(f"s={s} must divide Br={Br} (row-partitioned patterns)")
    return IntraMode.ROW_PARTITIONED


def intra_block_pattern(ctx: HashContext, Br: int, s: int,
                        mode: IntraMode = IntraMode.AFFINE_UNIQUE):
    """Destinations (distinct, in ``[0, Br)``) and ``+-1`` signs for one input row.

    Affine-unique: ``a`` uniform odd and ``b`` uniform in ``[0, Br)`` from lanes
    1 and 2 of the destinations stream; destination ``i`` is ``(a*i + b) mod Br``.
    Row-partitioned: destination ``i`` is ``i*(Br/s) + lane(2**40 + i) mod (Br/s)``.
    Sign ``i`` is bit ``i mod 64`` of lane ``2**20 + i//64`` of the signs stream.
    """
    mode = resolve_intra_mode(Br, s, mode)
    pack_counter(0, ctx.g, ctx.h, ctx.u)
    dest = np.empty(s, dtype=np.int64)
    sgn = np.empty(s, dtype=np.float64)
    fill_pattern(np.uint64(seed_key(ctx.seed)), ctx.g, ctx.h, ctx.u, Br, s,
                 mode_code(mode), dest, sgn)
    return dest, sgn.astype(np.int8)
