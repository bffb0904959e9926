"""Block and neighborhood coherence of subspaces and vectors.

Both coherences are computed exactly: the squared spectral norm of each row
block (or stacked neighborhood) comes from a small batched SVD.
"""
from __future__ import annotations

import logging
import warnings
from dataclasses import asdict, dataclass

import numpy as np

from .hashing import Stream, derive_seed
from .wiring import Wiring, sample_uniform_wiring

log = logging.getLogger(__name__)

ORTHO_TOL = 1e-8


@dataclass(frozen=True)
class CoherenceReport:
    mu_blk: float
    mu_nbr: float
    argmax_block: int
    argmax_neighborhood: int
    M: int
    kappa: int
    r: int

    def to_dict(self) -> dict:
        return asdict(self)


def check_orthonormal(U, tol: float = ORTHO_TOL, on_fail: str = "raise") -> np.ndarray:
    """Return ``U`` if ``U^T U = I`` within ``tol``.

    ``on_fail`` is ``"raise"``, ``"warn"`` (measure anyway) or ``"qr"``
    (re-orthonormalize with a reduced QR first).
    """
    U = np.asarray(U, dtype=np.float64)
    if U.ndim != 2:
        raise ValueError("U must be a 2-D array")
    err = np.abs(U.T @ U - np.eye(U.shape[1])).max()
    if err <= tol:
        return U
    if on_fail == "qr":
        return np.linalg.qr(U)[0]
    msg = f"U is not orthonormal (max |U^T U - I| = {err:.3g})"
    if on_fail == "warn":
        warnings.warn(msg, stacklevel=2)
        return U
    raise ValueError(msg)


def _blocks(X: np.ndarray, M: int) -> np.ndarray:
    if M < 1 or X.shape[0] % M:
        raise ValueError(f"row count {X.shape[0]} is not divisible by M={M}")
    return X.reshape(M, X.shape[0] // M, X.shape[1])


def _check_wiring(wiring: Wiring, M: int) -> np.ndarray:
    if wiring.M != M:
        raise ValueError(f"wiring is over {wiring.M} blocks, expected M={M}")
    return wiring.table()


def block_sq_norms(U, M: int) -> np.ndarray:
    """Squared spectral norm of each of the ``M`` row blocks."""
    B = _blocks(np.asarray(U, dtype=np.float64), M)
    return np.linalg.svd(B, compute_uv=False)[:, 0] ** 2


def neighborhood_sq_norms(U, M: int, wiring: Wiring) -> np.ndarray:
    """Squared spectral norm of each stacked neighborhood ``U_N(g)``."""
    tab = _check_wiring(wiring, M)
    B = _blocks(np.asarray(U, dtype=np.float64), M)
    stacked = B[tab].reshape(M, -1, B.shape[2])
    return np.linalg.svd(stacked, compute_uv=False)[:, 0] ** 2


def mu_blk_matrix(U, M: int, on_fail: str = "raise") -> float:
    U = check_orthonormal(U, on_fail=on_fail)
    return float(M * block_sq_norms(U, M).max())


def mu_nbr_matrix(U, M: int, wiring: Wiring, on_fail: str = "raise") -> float:
    U = check_orthonormal(U, on_fail=on_fail)
    return float(M / wiring.kappa * neighborhood_sq_norms(U, M, wiring).max())


def coherence_report(U, M: int, wiring: Wiring, on_fail: str = "raise") -> CoherenceReport:
    U = check_orthonormal(U, on_fail=on_fail)
    blk = block_sq_norms(U, M)
    nbr = neighborhood_sq_norms(U, M, wiring)
    return CoherenceReport(mu_blk=float(M * blk.max()),
                           mu_nbr=float(M / wiring.kappa * nbr.max()),
                           argmax_block=int(blk.argmax()), argmax_neighborhood=int(nbr.argmax()),
                           M=M, kappa=wiring.kappa, r=U.shape[1])


def _vector_block_energy(x, M: int) -> tuple[np.ndarray, float]:
    x = np.asarray(x, dtype=np.float64).reshape(-1)
    total = float(x @ x)
    if total == 0.0:
        raise ValueError("coherence of the zero vector is undefined")
    if x.size % M:
        raise ValueError(f"length {x.size} is not divisible by M={M}")
    return (x.reshape(M, -1) ** 2).sum(axis=1), total


def mu_vector(x, M: int, wiring: Wiring) -> tuple[float, float]:
    """``(mu_blk(x), mu_nbr(x; pi))`` for a nonzero vector."""
    energy, total = _vector_block_energy(x, M)
    tab = _check_wiring(wiring, M)
    nbr = energy[tab].sum(axis=1)
    return float(M * energy.max() / total), float(M * nbr.max() / (wiring.kappa * total))


def neighborhood_energy(x, M: int, wiring: Wiring) -> float:
    """``sum_g ||x_N(g)||^2``; equals ``kappa ||x||^2`` for any wiring of bijections."""
    x = np.asarray(x, dtype=np.float64).reshape(-1)
    tab = _check_wiring(wiring, M)
    blocks = x.reshape(M, -1)
    return float(sum(np.sum(blocks[tab[g]] ** 2) for g in range(M)))


def neighborhood_gram_sum(U, M: int, wiring: Wiring) -> np.ndarray:
    """``sum_g U_N(g)^T U_N(g)``; equals ``kappa U^T U``."""
    tab = _check_wiring(wiring, M)
    B = _blocks(np.asarray(U, dtype=np.float64), M)
    out = np.zeros((B.shape[2], B.shape[2]))
    for g in range(M):
        stacked = B[tab[g]].reshape(-1, B.shape[2])
        out += stacked.T @ stacked
    return out


def planted_coherent_basis(d: int, r: int, M: int, block: int = 0) -> np.ndarray:
    """Orthonormal ``d x r`` frame supported on one row block (``mu_blk = M``)."""
    if d % M or d // M < r:
        raise ValueError("need M | d and block size >= r")
    U = np.zeros((d, r))
    start = block * (d // M)
    U[start:start + r] = np.eye(r)
    return U


@dataclass(frozen=True)
class SmoothingRow:
    kappa: int
    trial: int
    mu_nbr: float
    mu_blk: float
    seed: int


@dataclass(frozen=True)
class SmoothingSummary:
    kappa: int
    trials: int
    mu_blk: float
    min: float
    median: float
    max: float


def smoothing_experiment(U, M: int, kappa_list, trials: int, seed: int = 0,
                         on_fail: str = "raise"):
    """Neighborhood coherence under independent uniform wirings.

    Returns ``(rows, summaries)``: one row per (kappa, trial) with the trial's
    wiring seed, and min/median/max per kappa. Wirings here follow the
    independent model and may repeat a block inside a neighborhood.
    """
    if trials < 1:
        raise ValueError("trials must be >= 1")
    kappa_list = list(kappa_list)
    if not kappa_list or min(kappa_list) < 1:
        raise ValueError("kappa_list must be non-empty with positive entries")
    U = check_orthonormal(U, on_fail=on_fail)
    mu_blk = float(M * block_sq_norms(U, M).max())
    rows, summaries = [], []
    for kappa in kappa_list:
        vals = []
        for t in range(trials):
            tseed = derive_seed(seed, Stream.TRIAL, t, kappa)
            w = sample_uniform_wiring(tseed, M, kappa)
            mu = float(M / kappa * neighborhood_sq_norms(U, M, w).max())
            vals.append(mu)
            rows.append(SmoothingRow(kappa, t, mu, mu_blk, tseed))
        v = np.array(vals)
        summaries.append(SmoothingSummary(kappa, trials, mu_blk, float(v.min()),
                                          float(np.median(v)), float(v.max())))
        log.debug("kappa=%d median mu_nbr=%.4g", kappa, np.median(v))
    return rows, summaries
