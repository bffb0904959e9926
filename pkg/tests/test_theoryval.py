import numpy as np
import pytest

from blocksketch.coherence import (mu_blk_matrix, mu_nbr_matrix, neighborhood_energy,
                                   planted_coherent_basis)
from blocksketch.theoryval import (energy_identity_check, kappa_comparison_check, loglog_slope,
                                   ose_scaling_check, sandwich_bound_check)
from blocksketch.wiring import iterated_wiring


def test_slope_fit():
    k = np.array([256, 512, 1024])
    assert loglog_slope(k, 3 / np.sqrt(k)) == pytest.approx(-0.5)


def test_exact_isometry_is_skipped():
    U = np.linalg.qr(np.random.default_rng(0).standard_normal((64, 4)))[0]
    rep = ose_scaling_check(U, [16, 32, 64], trials=30, factory=lambda k, s: (lambda A: A))
    assert rep.passed and rep.slope is None and "skipped" in rep.note


def test_too_few_trials():
    with pytest.raises(ValueError):
        ose_scaling_check(np.eye(8)[:, :2], [4, 8], trials=29)


def test_gaussian_subspace_slope():
    U = np.linalg.qr(np.random.default_rng(1).standard_normal((4096, 16)))[0]
    rep = ose_scaling_check(U, [256, 512, 1024, 2048, 4096], trials=50)
    assert rep.passed and -0.65 <= rep.slope <= -0.35 and rep.trials == 50


def test_energy_identity_edge_cases():
    x = np.random.default_rng(2).standard_normal(48)
    assert neighborhood_energy(x, 12, iterated_wiring(0, 12, 1)) == pytest.approx(x @ x, rel=1e-15)
    assert neighborhood_energy(x, 12, iterated_wiring(0, 12, 12)) == pytest.approx(12 * x @ x,
                                                                                   rel=1e-13)
    rep = energy_identity_check(trials=200, seed=4)
    assert rep.passed and rep.max_error <= 1e-12 and rep.seed == 4


def test_sandwich_lower_bound_is_attained():
    M = 16
    U = planted_coherent_basis(256, 4, M)
    assert mu_blk_matrix(U, M) == pytest.approx(M)
    assert mu_nbr_matrix(U, M, iterated_wiring(1, M, M)) == pytest.approx(1.0)
    rep = sandwich_bound_check(trials=200, seed=5)
    assert rep.passed and rep.details["violations"] == 0


def test_kappa_comparison_on_coherent_subspace():
    U = planted_coherent_basis(4096, 16, 16)
    rep = kappa_comparison_check(U, k=512, M=16, repeats=10, trials=30)
    assert rep.passed and rep.details["fraction_large_not_worse"] >= 0.8
