"""Quality metrics, RandNLA tasks and baselines.

A "sketch" here is any callable mapping a ``d x m`` array (or a length-``d``
vector) to its ``k``-row image; :func:`make_sketch` builds one per method.
"""
from __future__ import annotations

import csv
import enum
import json
import math
import time
import warnings
from dataclasses import asdict, dataclass, fields
from typing import Callable, NamedTuple

import numpy as np
import scipy.linalg as sla

from .hashing import Stream, derive_seed
from .layout import IntraMode, Precision, SketchParams, make_layout
from .operator import apply_blockrow, apply_sliced, apply_tiled, build_operator

Sketch = Callable[[np.ndarray], np.ndarray]

MAX_OSE_RANK = 512
DEFAULT_PROBES = 32
COND_WARN = 1e12


class Task(str, enum.Enum):
    GRAM = "gram"
    OSE = "ose"
    RIDGE = "ridge"
    LSQ = "lsq"
    TAIL = "tail"


class Method(str, enum.Enum):
    BLOCKPERM_TILED = "blockperm_tiled"
    BLOCKPERM_SLICED = "blockperm_sliced"
    BLOCKROW = "blockrow"
    DENSE_GAUSSIAN = "dense_gaussian"
    PLAIN_SJLT = "plain_sjlt"


# ---------------------------------------------------------------------------
# Metrics
# ---------------------------------------------------------------------------

def gram_error(A, Y) -> tuple[float, float]:
    """``(||Y^T Y - A^T A||_F, relative)``; relative falls back to absolute if ``A^T A = 0``."""
    A = np.asarray(A, dtype=np.float64)
    Y = np.asarray(Y, dtype=np.float64)
    if A.shape[1] != Y.shape[1]:
        raise ValueError(f"column mismatch: A has {A.shape[1]}, Y has {Y.shape[1]}")
    G = A.T @ A
    err = float(np.linalg.norm(Y.T @ Y - G))
    gn = float(np.linalg.norm(G))
    return err, (err / gn if gn > 0 else err)


def residual(A, x, b) -> float:
    """``||Ax - b|| / ||b||`` (plain ``||Ax - b||`` when ``b = 0``)."""
    r = float(np.linalg.norm(np.asarray(A) @ x - b))
    bn = float(np.linalg.norm(b))
    return r / bn if bn > 0 else r


def orthonormal_basis(A, r: int | None = None, rtol: float = 1e-12) -> np.ndarray:
    """Orthonormal basis of ``range(A)`` via pivoted QR, truncated to ``r`` columns.

    Rank-deficient inputs return only the numerically independent directions.
    """
    A = np.asarray(A, dtype=np.float64)
    Q, R, _ = sla.qr(A, mode="economic", pivoting=True)
    diag = np.abs(np.diag(R))
    rank = int(np.sum(diag > rtol * diag[0])) if diag.size and diag[0] > 0 else 0
    keep = rank if r is None else min(r, rank)
    if r is not None and keep < min(r, *A.shape):
        warnings.warn(f"A is rank deficient: effective r = {keep}", stacklevel=2)
    return Q[:, :keep]


def embedding_error(sketch: Sketch, Q) -> float:
    """``||(SQ)^T (SQ) - I||_2`` by a symmetric eigensolve."""
    Qh = np.asarray(sketch(Q), dtype=np.float64)
    E = Qh.T @ Qh - np.eye(Q.shape[1])
    if E.size == 0:
        return 0.0
    return float(np.abs(np.linalg.eigvalsh(E)).max())


def ose_spectral_error(sketch: Sketch, A=None, r: int | None = None, probes: int | None = None,
                       d: int | None = None, seed: int = 0) -> float:
    """OSE spectral error on the column space of ``A`` or on Gaussian probes.

    Column-space mode uses ``Q = qr(A)`` with ``r = min(r, d, n)``; probe mode
    draws a ``d x probes`` Gaussian and orthonormalizes it.
    """
    if probes is not None:
        if d is None:
            d = np.asarray(A).shape[0]
        if probes > MAX_OSE_RANK:
            raise ValueError(f"r must be <= {MAX_OSE_RANK}")
        rng = np.random.Generator(np.random.Philox(derive_seed(seed, Stream.GAUSSIAN, 1)))
        Q = np.linalg.qr(rng.standard_normal((d, probes)))[0]
    else:
        if A is None:
            raise ValueError("column-space mode needs A")
        A = np.asarray(A, dtype=np.float64)
        r = min(A.shape) if r is None else min(r, *A.shape)
        if r > MAX_OSE_RANK:
            raise ValueError(f"r must be <= {MAX_OSE_RANK}")
        Q = orthonormal_basis(A, r)
    return embedding_error(sketch, Q)


class SolveResult(NamedTuple):
    x: np.ndarray
    residual: float
    rank_deficient: bool = False


def ridge_solve(A, b, lam: float, sketch: Sketch) -> SolveResult:
    """Sketched ridge regression via the normal equations.

    Solves ``((SA)^T SA + lam I) x = (SA)^T Sb`` with a Cholesky factorization;
    ``lam = 0`` with a singular sketched system falls back to a least-norm
    solve and sets ``rank_deficient``.
    """
    if lam < 0:
        raise ValueError("lambda must be >= 0")
    A = np.asarray(A, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64).reshape(-1)
    if b.shape[0] != A.shape[0]:
        raise ValueError("b must have one entry per row of A")
    SA = np.asarray(sketch(A), dtype=np.float64)
    Sb = np.asarray(sketch(b), dtype=np.float64).reshape(-1)
    n = SA.shape[1]
    G = SA.T @ SA + lam * np.eye(n)
    rhs = SA.T @ Sb
    try:
        cond = np.linalg.cond(G)
        if not np.isfinite(cond) or (lam == 0 and cond > 1 / np.finfo(float).eps):
            raise np.linalg.LinAlgError("singular sketched system")
        if cond > COND_WARN:
            warnings.warn(f"ill-conditioned ridge system (cond = {cond:.3g})", stacklevel=2)
        x = sla.cho_solve(sla.cho_factor(G), rhs)
        flagged = False
    except np.linalg.LinAlgError:
        x = sla.lstsq(SA, Sb)[0] if lam == 0 else sla.lstsq(G, rhs)[0]
        flagged = True
    return SolveResult(x, residual(A, x, b), flagged)


def sketch_solve_lsq(A, b, sketch: Sketch) -> SolveResult:
    """Least squares on the sketched system ``min ||SAx - Sb||`` by pivoted QR."""
    A = np.asarray(A, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64).reshape(-1)
    SA = np.asarray(sketch(A), dtype=np.float64)
    Sb = np.asarray(sketch(b), dtype=np.float64).reshape(-1)
    k, n = SA.shape
    if k < n:
        warnings.warn(f"sketch dimension k={k} is below n={n}", stacklevel=2)
    Q, R, piv = sla.qr(SA, mode="economic", pivoting=True)
    diag = np.abs(np.diag(R))
    rank = int(np.sum(diag > n * np.finfo(float).eps * diag[0])) if diag[0] > 0 else 0
    if rank < n:
        x = sla.lstsq(SA, Sb)[0]
        return SolveResult(x, residual(A, x, b), True)
    x = np.empty(n)
    x[piv] = sla.solve_triangular(R, Q.T @ Sb)
    return SolveResult(x, residual(A, x, b), False)


@dataclass(frozen=True)
class TailSummary:
    trials: int
    mean: float
    q50: float
    q90: float
    q99: float
    mean_ratio: float

    def to_dict(self) -> dict:
        return asdict(self)


def distortion_samples(factory: Callable[[int], Sketch], x, trials: int, seed: int = 0):
    """Ratios ``||S_t x||^2 / ||x||^2`` for ``trials`` independently seeded sketches."""
    x = np.asarray(x, dtype=np.float64).reshape(-1)
    xx = float(x @ x)
    if xx == 0:
        raise ValueError("x must be nonzero")
    out = np.empty(trials)
    for t in range(trials):
        y = np.asarray(factory(derive_seed(seed, Stream.TRIAL, t)), dtype=np.float64)
        out[t] = float(y @ y) / xx
    return out


def distortion_tail(factory: Callable[[int], Sketch], x, trials: int = 1000,
                    seed: int = 0) -> TailSummary:
    """Empirical distribution of ``| ||Sx||^2 - ||x||^2 | / ||x||^2``.

    ``factory(seed)`` must return ``S_seed x`` for the fixed ``x`` (a closure
    over x), so each trial draws a fresh operator.
    """
    if trials < 100:
        raise ValueError("distortion_tail needs at least 100 trials")
    ratios = distortion_samples(factory, x, trials, seed)
    dev = np.abs(ratios - 1.0)
    q50, q90, q99 = np.quantile(dev, [0.5, 0.9, 0.99])
    return TailSummary(trials, float(dev.mean()), float(q50), float(q90), float(q99),
                       float(ratios.mean()))


# ---------------------------------------------------------------------------
# Sketch construction per method
# ---------------------------------------------------------------------------

def dense_gaussian_matrix(k: int, d: int, seed: int, dtype=np.float64) -> np.ndarray:
    rng = np.random.Generator(np.random.Philox(derive_seed(seed, Stream.GAUSSIAN, 0)))
    return (rng.standard_normal((k, d)) / math.sqrt(k)).astype(dtype, copy=False)


def baseline_apply(kind, k: int, d: int, seed: int, A, s: int = 1, workers: int = 1,
                   precision=Precision.F64) -> np.ndarray:
    """Dense Gaussian (entries N(0, 1/k)) or plain SJLT (one global block, kappa=1)."""
    kind = Method(kind)
    if kind is Method.DENSE_GAUSSIAN:
        A = np.asarray(A)
        if A.shape[0] != d:
            raise ValueError(f"input has {A.shape[0]} rows, expected {d}")
        dt = Precision(precision).dtype
        return dense_gaussian_matrix(k, d, seed, dt) @ A.astype(dt, copy=False)
    if kind is Method.PLAIN_SJLT:
        op = plain_sjlt_operator(k, d, s, seed, precision)
        return apply_tiled(op, A, workers=workers)
    raise ValueError(f"{kind.value} is not a baseline")


def plain_sjlt_operator(k: int, d: int, s: int, seed: int, precision=Precision.F64,
                        intra_mode=IntraMode.AFFINE_UNIQUE):
    return build_operator(d, k, M=1, kappa=1, s=s, seed=seed, intra_mode=intra_mode,
                          precision=precision)


def make_sketch(method, d: int, k: int, M: int = 1, kappa: int = 1, s: int = 1, seed: int = 0,
                workers: int = 1, slices: int = 2, intra_mode=IntraMode.AFFINE_UNIQUE,
                precision=Precision.F64, Tk: int | None = None,
                Tn: int | None = None) -> Sketch:
    """Callable ``A -> SA`` for one method; the operator is built once."""
    method = Method(method)
    tiles = {k_: v for k_, v in (("Tk", Tk), ("Tn", Tn)) if v is not None}
    if method in (Method.BLOCKPERM_TILED, Method.BLOCKPERM_SLICED):
        op = build_operator(d, k, M, kappa, s, seed, intra_mode, precision, **tiles)
        if method is Method.BLOCKPERM_TILED:
            return lambda A: apply_tiled(op, A, workers=workers)
        return lambda A: apply_sliced(op, A, slices=slices, workers=workers)
    if method is Method.BLOCKROW:
        layout = make_layout(d, k, M, **tiles)
        params = SketchParams(kappa, s, seed, intra_mode, precision)
        params.check_layout(layout)
        return lambda A: apply_blockrow(layout, params, A, workers=workers)
    if method is Method.DENSE_GAUSSIAN:
        G = dense_gaussian_matrix(k, d, seed, Precision(precision).dtype)
        return lambda A: G @ np.asarray(A, dtype=G.dtype)
    op = plain_sjlt_operator(k, d, s, seed, precision, intra_mode)
    return lambda A: apply_tiled(op, A, workers=workers)


def time_apply(sketch: Sketch, A, warmup: int = 2, repeats: int = 10):
    """Mean wall time (ns, monotonic clock) of ``repeats`` post-warmup applications."""
    Y = None
    for _ in range(warmup):
        Y = sketch(A)
    total = 0
    for _ in range(max(1, repeats)):
        t0 = time.perf_counter_ns()
        Y = sketch(A)
        total += time.perf_counter_ns() - t0
    return Y, total // max(1, repeats)


# ---------------------------------------------------------------------------
# Reports
# ---------------------------------------------------------------------------

@dataclass
class TaskReport:
    task: str
    method: str
    d: int
    n: int
    k: int
    M: int
    kappa: int
    s: int
    seed: int
    lam: float | None
    r: int | None
    trial: int
    metric: float
    wall_time_ns: int
    config_hash: str = ""

    def __post_init__(self):
        if not (self.metric >= 0):
            raise ValueError(f"metric must be non-negative, got {self.metric}")

    def to_dict(self) -> dict:
        return asdict(self)


REPORT_COLUMNS = [f.name for f in fields(TaskReport)]


def write_reports_csv(path, reports) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.DictWriter(fh, fieldnames=REPORT_COLUMNS)
        w.writeheader()
        for rep in reports:
            w.writerow({k: ("" if v is None else v) for k, v in rep.to_dict().items()})


def write_reports_jsonl(path, reports) -> None:
    with open(path, "w") as fh:
        for rep in reports:
            fh.write(json.dumps(rep.to_dict()) + "\n")


def read_reports_csv(path) -> list[dict]:
    with open(path, newline="") as fh:
        return list(csv.DictReader(fh))
