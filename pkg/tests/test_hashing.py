import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy import stats

from blocksketch.hashing import (HashContext, Stream, context_base, derive_seed,
                                 intra_block_pattern, lane_word, mix64, mix64_u64, pack_counter,
                                 resolve_intra_mode)
from blocksketch.layout import IntraMode
from blocksketch.operator import build_operator, materialize

MASK = (1 << 64) - 1


def fmix64_reference(k):
    # published MurmurHash3 finalizer, written out independently
    k ^= k >> 33
    k = (k * 0xFF51AFD7ED558CCD) & MASK
    k ^= k >> 33
    k = (k * 0xC4CEB9FE1A85EC53) & MASK
    k ^= k >> 33
    return k


def fmix64_inverse(k):
    def unshift(x):
        return x ^ (x >> 33)  # shift >= 32, so one round inverts it
    k = unshift(k)
    k = (k * pow(0xC4CEB9FE1A85EC53, -1, 1 << 64)) & MASK
    k = unshift(k)
    k = (k * pow(0xFF51AFD7ED558CCD, -1, 1 << 64)) & MASK
    return unshift(k)


def test_mix64_fixed_points():
    assert mix64(0) == 0
    assert mix64(1) == 0xB456BCFC34C2CB2C == fmix64_reference(1)


@settings(max_examples=300)
@given(st.integers(0, MASK))
def test_mix64_matches_reference_and_inverts(x):
    assert mix64(x) == fmix64_reference(x)
    assert fmix64_inverse(mix64(x)) == x
    assert int(mix64_u64(np.uint64(x))) == mix64(x)


def test_avalanche():
    rng = np.random.default_rng(3)
    xs = rng.integers(0, 2**63, size=100_000, dtype=np.int64).astype(np.uint64)
    a = np.array([mix64(int(x)) for x in xs], dtype=np.uint64)
    b = np.array([mix64(int(x) + 1) for x in xs], dtype=np.uint64)
    flips = np.unpackbits((a ^ b).view(np.uint8)).reshape(len(xs), 64).sum(axis=1)
    assert abs(flips.mean() - 32) < 0.1


def test_counter_packing_is_injective_on_lanes():
    seen = {pack_counter(st_, g, h, u) for st_ in (1, 2) for g in (0, 1, 2**20 - 1)
            for h in (0, 5, 2**20 - 1) for u in (0, 7, 2**20 - 1)}
    assert len(seen) == 2 * 27
    with pytest.raises(ValueError):
        pack_counter(1, 2**20, 0, 0)


def test_derive_seed_labels_streams():
    vals = {derive_seed(5, s, i) for s in Stream for i in range(4)}
    assert len(vals) == len(Stream) * 4
    assert derive_seed(5, Stream.TRIAL, 3) == derive_seed(5, Stream.TRIAL, 3)


def test_full_permutation_when_s_equals_br():
    dest, sgn = intra_block_pattern(HashContext(1, 2, 3, 4), 8, 8)
    assert sorted(dest) == list(range(8))
    assert set(np.abs(sgn)) == {1}


def test_single_destination_is_offset():
    ctx = HashContext(9, 1, 1, 0)
    dest, _ = intra_block_pattern(ctx, 8, 1)
    base = context_base(9, Stream.DESTINATIONS, 1, 1, 0)
    assert dest[0] == lane_word(base, 2) % 8


def test_row_partitioned_chunks():
    for u in range(50):
        dest, _ = intra_block_pattern(HashContext(0, 3, 1, u), 64, 4, IntraMode.ROW_PARTITIONED)
        assert [int(x) // 16 for x in dest] == [0, 1, 2, 3]


def test_affine_marginal_uniform():
    counts = np.zeros(8, dtype=np.int64)
    for u in range(100_000):
        dest, _ = intra_block_pattern(HashContext(2, u >> 12, 0, u & 4095), 8, 3)
        assert len(set(dest.tolist())) == 3
        counts[dest] += 1
    assert stats.chisquare(counts).pvalue > 1e-4


@settings(max_examples=200, deadline=None)
@given(seed=st.integers(0, MASK), g=st.integers(0, 2**20 - 1), u=st.integers(0, 2**20 - 1),
       logbr=st.integers(0, 8), data=st.data())
def test_destinations_distinct(seed, g, u, logbr, data):
    Br = 1 << logbr
    s = data.draw(st.integers(1, Br))
    dest, sgn = intra_block_pattern(HashContext(seed, g, 0, u), Br, s)
    assert len(set(dest.tolist())) == s and dest.min() >= 0 and dest.max() < Br
    again = intra_block_pattern(HashContext(seed, g, 0, u), Br, s)
    assert np.array_equal(dest, again[0]) and np.array_equal(sgn, again[1])


def test_sign_balance_over_a_million_contexts():
    op = build_operator(1_000_000, 1, 1, 1, 1, seed=4)
    signs = np.sign(materialize(op)[0])
    assert abs(signs.mean()) < 4 / np.sqrt(signs.size)


def test_mode_resolution():
    assert resolve_intra_mode(12, 3, IntraMode.AFFINE_UNIQUE) is IntraMode.ROW_PARTITIONED
    assert resolve_intra_mode(16, 3, IntraMode.AFFINE_UNIQUE) is IntraMode.AFFINE_UNIQUE
    with pytest.raises(ValueError):
        resolve_intra_mode(12, 5, IntraMode.AFFINE_UNIQUE)
    with pytest.raises(ValueError):
        resolve_intra_mode(8, 9, IntraMode.AFFINE_UNIQUE)
