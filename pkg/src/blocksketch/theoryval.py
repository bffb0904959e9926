"""Executable checks tying measured quantities to the theory.

Identity checks (energy, sandwich) are exact up to floating point; rate
checks (OSE scaling, coherence smoothing) are statistical with fixed bands.
"""
from __future__ import annotations

import logging
from dataclasses import asdict, dataclass, field
from typing import Callable

import numpy as np

from .coherence import (block_sq_norms, neighborhood_energy, neighborhood_gram_sum,
                        neighborhood_sq_norms)
from .hashing import Stream, derive_seed
from .operator import build_operator, apply_tiled
from .tasks import embedding_error
from .wiring import iterated_wiring, sample_uniform_wiring

log = logging.getLogger(__name__)

IDENTITY_TOL = 1e-12
ZERO_MEDIAN = 1e-12  # medians at rounding level count as an exact isometry
SLOPE_BAND = (-0.65, -0.35)


@dataclass
class CheckReport:
    name: str
    passed: bool
    trials: int
    max_error: float
    seed: int
    details: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        return asdict(self)


@dataclass
class ScalingReport:
    variable: str
    values: list
    medians: list
    slope: float | None
    band: tuple
    trials: int
    passed: bool
    seed: int
    note: str = ""

    def to_dict(self) -> dict:
        return asdict(self)


def loglog_slope(x, y) -> float:
    return float(np.polyfit(np.log(np.asarray(x, float)), np.log(np.asarray(y, float)), 1)[0])


def _random_basis(rng: np.random.Generator, d: int, r: int, M: int) -> np.ndarray:
    """Orthonormal ``d x r`` basis with block energies ranging from flat to spiky."""
    G = rng.standard_normal((d, r))
    weights = np.exp(rng.uniform(0, rng.uniform(0, 6)) * rng.standard_normal(M))
    G *= np.repeat(weights, d // M)[:, None]
    return np.linalg.qr(G)[0]


def _random_wiring(rng: np.random.Generator, M: int, kappa: int):
    seed = int(rng.integers(0, 2**63))
    if rng.random() < 0.5:
        return iterated_wiring(seed, M, kappa)
    return sample_uniform_wiring(seed, M, kappa)


def _random_shape(rng: np.random.Generator):
    M = int(rng.choice([1, 2, 3, 4, 5, 8, 12, 16, 32]))
    Bc = int(rng.integers(1, 9))
    r = int(rng.integers(1, min(8, M * Bc) + 1))
    kappa = int(rng.integers(1, M + 1))
    return M, Bc, r, kappa


def energy_identity_check(trials: int = 1000, seed: int = 0, tol: float = IDENTITY_TOL) -> CheckReport:
    """Vector and matrix neighborhood energy identities on random wirings."""
    rng = np.random.Generator(np.random.Philox(derive_seed(seed, Stream.TRIAL, 1)))
    worst_vec = worst_mat = 0.0
    for _ in range(trials):
        M, Bc, r, kappa = _random_shape(rng)
        w = _random_wiring(rng, M, kappa)
        x = rng.standard_normal(M * Bc)
        lhs = neighborhood_energy(x, M, w)
        worst_vec = max(worst_vec, abs(lhs - kappa * (x @ x)) / (kappa * (x @ x)))
        U = rng.standard_normal((M * Bc, r))
        ref = kappa * (U.T @ U)
        err = np.abs(neighborhood_gram_sum(U, M, w) - ref).max() / np.abs(ref).max()
        worst_mat = max(worst_mat, float(err))
    worst = max(worst_vec, worst_mat)
    return CheckReport("energy_identity", worst <= tol, trials, worst, seed,
                       {"vector_max_rel_error": worst_vec, "matrix_max_rel_error": worst_mat,
                        "tol": tol})


def sandwich_bound_check(trials: int = 1000, seed: int = 0, tol: float = IDENTITY_TOL) -> CheckReport:
    """``mu_blk/kappa <= mu_nbr <= mu_blk`` and equality at ``kappa = 1``."""
    rng = np.random.Generator(np.random.Philox(derive_seed(seed, Stream.TRIAL, 2)))
    violations = 0
    worst = 0.0
    equality_gap = 0.0
    for _ in range(trials):
        M, Bc, r, kappa = _random_shape(rng)
        r = min(r, M * Bc)
        U = _random_basis(rng, M * Bc, r, M)
        w = _random_wiring(rng, M, kappa)
        blk = M * block_sq_norms(U, M).max()
        nbr = M / kappa * neighborhood_sq_norms(U, M, w).max()
        lo = blk / kappa * (1 - tol) - nbr
        hi = nbr - blk * (1 + tol)
        if lo > 0 or hi > 0:
            violations += 1
        worst = max(worst, lo, hi, 0.0)
        w1 = _random_wiring(rng, M, 1)
        nbr1 = M * neighborhood_sq_norms(U, M, w1).max()
        equality_gap = max(equality_gap, abs(nbr1 - blk) / blk)
    passed = violations == 0 and equality_gap <= tol
    return CheckReport("sandwich_bound", passed, trials, max(worst, equality_gap), seed,
                       {"violations": violations, "kappa1_max_rel_gap": equality_gap, "tol": tol})


SketchFactory = Callable[[int, int], Callable]


def blockperm_factory(d: int, M: int, kappa: int, s: int, **kw) -> SketchFactory:
    def make(k: int, seed: int):
        op = build_operator(d, k, M, kappa, s, seed, **kw)
        return lambda A: apply_tiled(op, A)
    return make


def ose_scaling_check(U, k_list, trials: int = 50, seed: int = 0, M: int = 16, kappa: int = 4,
                      s: int = 2, factory: SketchFactory | None = None,
                      band: tuple = SLOPE_BAND) -> ScalingReport:
    """Median ``||U^T S^T S U - I||_2`` per ``k`` and its log-log slope.

    The theoretical slope is ``-1/2``; a median curve at rounding level (an
    exact isometry) skips the fit.
    """
    if trials < 30:
        raise ValueError("ose_scaling_check needs at least 30 trials")
    U = np.asarray(U, dtype=np.float64)
    if factory is None:
        factory = blockperm_factory(U.shape[0], M, kappa, s)
    medians = []
    for k in k_list:
        errs = [embedding_error(factory(k, derive_seed(seed, Stream.TRIAL, t, k)), U)
                for t in range(trials)]
        medians.append(float(np.median(errs)))
        log.debug("k=%d median OSE error %.4g", k, medians[-1])
    if all(m <= ZERO_MEDIAN for m in medians):
        return ScalingReport("k", list(k_list), medians, None, band, trials, True, seed,
                             note="exact isometry: all medians are zero, slope fit skipped")
    if any(m <= 0 for m in medians):
        return ScalingReport("k", list(k_list), medians, None, band, trials, False, seed,
                             note="some medians are zero, slope undefined")
    slope = loglog_slope(k_list, medians)
    return ScalingReport("k", list(k_list), medians, slope, band, trials,
                         band[0] <= slope <= band[1], seed)


def kappa_comparison_check(U, k: int, M: int, s: int = 2, kappa_small: int = 1,
                           kappa_large: int = 8, repeats: int = 10, trials: int = 30,
                           seed: int = 0, min_fraction: float = 0.8) -> CheckReport:
    """At fixed ``k``, the larger block degree should not embed a coherent ``U`` worse.

    Each repeat compares median OSE errors over ``trials`` seeds; the check
    passes when the larger degree wins (or ties) in ``min_fraction`` of repeats.
    """
    U = np.asarray(U, dtype=np.float64)
    d = U.shape[0]
    wins = 0
    pairs = []
    for rep in range(repeats):
        meds = []
        for kappa in (kappa_small, kappa_large):
            make = blockperm_factory(d, M, kappa, s)
            errs = [embedding_error(make(k, derive_seed(seed, Stream.TRIAL, rep * trials + t,
                                                        kappa)), U)
                    for t in range(trials)]
            meds.append(float(np.median(errs)))
        pairs.append(meds)
        wins += meds[1] <= meds[0]
    frac = wins / repeats
    return CheckReport("kappa_comparison", frac >= min_fraction, repeats * trials, 0.0, seed,
                       {"fraction_large_not_worse": frac, "medians": pairs,
                        "kappa": [kappa_small, kappa_large]})
