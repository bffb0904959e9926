import itertools
import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy import stats

from blocksketch.wiring import (AffineMap, Wiring, check_edge_disjoint, derive_affine,
                                iterated_wiring, neighborhood, sample_uniform_wiring,
                                validate_full_cycle)


def orbit_period(a, b, M, x0=0):
    x, seen = x0, set()
    while x not in seen:
        seen.add(x)
        x = (a * x + b) % M
    return len(seen) if x == x0 else -1


def test_validator_examples():
    assert validate_full_cycle(AffineMap(5, 3, 8))
    assert orbit_period(5, 3, 8) == 8
    assert not validate_full_cycle(AffineMap(2, 1, 8))
    assert validate_full_cycle(AffineMap(1, 1, 5))


@pytest.mark.parametrize("M", range(1, 25))
def test_validator_matches_orbits_small(M):
    for a in range(M):
        for b in range(M):
            assert validate_full_cycle(AffineMap(a, b, M)) == (orbit_period(a, b, M) == M)


def test_derive_affine_power_of_two():
    for seed in range(50):
        f = derive_affine(seed, 8)
        assert f.a % 4 == 1 and f.b % 2 == 1


def test_derive_affine_twelve():
    for seed in range(50):
        f = derive_affine(seed, 12)
        assert (f.a - 1) % 6 == 0 and (f.a - 1) % 4 == 0 and math.gcd(f.b, 12) == 1
        assert validate_full_cycle(f)


def test_derive_affine_single_block():
    f = derive_affine(7, 1)
    assert f.M == 1 and f(0) == 0


@settings(max_examples=200, deadline=None)
@given(seed=st.integers(0, 2**64 - 1), M=st.integers(1, 5000))
def test_derive_affine_always_full_cycle(seed, M):
    f = derive_affine(seed, M)
    assert validate_full_cycle(f) and derive_affine(seed, M) == f


def test_neighborhood_examples():
    assert neighborhood(Wiring(8, 3, affine=AffineMap(5, 3, 8)), 0) == [3, 2, 5]
    assert neighborhood(Wiring(5, 1, affine=AffineMap(1, 1, 5)), 4) == [0]
    w = iterated_wiring(3, 9, 9)
    assert sorted(neighborhood(w, 4)) == list(range(9))
    with pytest.raises(IndexError):
        neighborhood(w, 9)


def test_table_matches_neighborhood():
    w = iterated_wiring(11, 20, 6)
    tab = w.table()
    for g in range(20):
        assert tab[g].tolist() == neighborhood(w, g)


@settings(max_examples=100, deadline=None)
@given(seed=st.integers(0, 2**64 - 1), M=st.integers(1, 200), data=st.data())
def test_iterated_wirings_edge_disjoint_and_biregular(seed, M, data):
    kappa = data.draw(st.integers(1, M))
    w = iterated_wiring(seed, M, kappa)
    assert check_edge_disjoint(w)
    counts = np.bincount(w.table().ravel(), minlength=M)
    assert np.all(counts == kappa)


def test_edge_disjoint_counterexamples():
    ident = tuple(range(4))
    assert not check_edge_disjoint(Wiring(4, 2, tables=(ident, ident)))
    assert not check_edge_disjoint(Wiring(4, 2, tables=(ident, (1, 0, 2, 3))))
    assert check_edge_disjoint(Wiring(4, 2, tables=(ident, (1, 2, 3, 0))))


def test_wiring_rejects_bad_tables():
    with pytest.raises(ValueError):
        Wiring(4, 1, tables=((0, 0, 1, 2),))
    with pytest.raises(ValueError):
        Wiring(4, 2, affine=AffineMap(2, 1, 4))


def test_json_round_trip():
    for w in (iterated_wiring(1, 12, 5), sample_uniform_wiring(1, 6, 3)):
        assert Wiring.from_json(w.to_json()) == w


def test_uniform_wiring_single_block():
    w = sample_uniform_wiring(0, 1, 3)
    assert w.table().tolist() == [[0, 0, 0]]


def test_uniform_wiring_position_marginal():
    first = np.array([sample_uniform_wiring(s, 52, 1).tables[0][0] for s in range(10_000)])
    counts = np.bincount(first, minlength=52)
    assert stats.chisquare(counts).pvalue > 1e-4


def test_uniform_wiring_collision_rate():
    perms = list(itertools.permutations(range(4)))
    exact = np.mean([p[g] == q[g] for p in perms for q in perms for g in range(4)])
    tabs = [sample_uniform_wiring(s, 4, 2).table() for s in range(5000)]
    emp = np.mean([np.mean(t[:, 0] == t[:, 1]) for t in tabs])
    assert exact == pytest.approx(0.25)
    assert abs(emp - exact) < 4 * math.sqrt(exact * (1 - exact) / 5000)
