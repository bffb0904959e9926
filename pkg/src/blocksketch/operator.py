"""The BlockPerm-SJLT sketch operator and its application strategies.

``apply_tiled`` is the CPU analogue of the one-tile-per-thread-block kernel:
every output tile ``(g, j)`` of ``Br x Tn`` entries is accumulated in a
private buffer by exactly one worker and written once, so results are
bitwise independent of the worker count.
"""
from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

from . import _kernels
from .hashing import mode_code, resolve_intra_mode, seed_key
from .layout import (DEFAULT_TK, DEFAULT_TN, BlockLayout, IntraMode, Precision, SketchParams,
                     make_layout)
from .wiring import Wiring, check_edge_disjoint, iterated_wiring

MATERIALIZE_LIMIT = 1 << 28


@dataclass(frozen=True)
class SketchOperator:
    """A deterministic function of (layout, params, wiring) representing S."""

    layout: BlockLayout
    params: SketchParams
    wiring: Wiring

    def __post_init__(self):
        self.params.check_layout(self.layout)
        if self.wiring.M != self.layout.M or self.wiring.kappa != self.params.kappa:
            raise ValueError("wiring does not match layout/params (M, kappa)")
        if not check_edge_disjoint(self.wiring):
            raise ValueError("sketch wiring must be edge-disjoint")
        resolve_intra_mode(self.layout.Br, self.params.s, self.params.intra_mode)

    @property
    def intra_mode(self) -> IntraMode:
        """Intra-block mode after the non-power-of-two fallback."""
        return resolve_intra_mode(self.layout.Br, self.params.s, self.params.intra_mode)

    @property
    def dtype(self) -> np.dtype:
        return self.params.precision.dtype

    @property
    def shape(self) -> tuple[int, int]:
        return self.layout.k_orig, self.layout.d_orig

    def scale(self, dtype=None) -> np.floating:
        dt = np.dtype(dtype or self.dtype)
        return dt.type(1.0 / math.sqrt(self.params.kappa * self.params.s))

    def materialize(self, padded: bool = False, limit: int = MATERIALIZE_LIMIT) -> np.ndarray:
        return materialize(self, padded=padded, limit=limit)

    def apply(self, A, workers: int = 1) -> np.ndarray:
        return apply_tiled(self, A, workers=workers)

    __call__ = apply

    def to_dict(self) -> dict:
        return {"layout": self.layout.to_dict(), "params": self.params.to_dict(),
                "wiring": self.wiring.to_dict()}


def build_operator(d: int, k: int, M: int, kappa: int, s: int, seed: int = 0,
                   intra_mode=IntraMode.AFFINE_UNIQUE, precision=Precision.F64,
                   Tk: int = DEFAULT_TK, Tn: int = DEFAULT_TN, wiring: Wiring | None = None) -> SketchOperator:
    layout = make_layout(d, k, M, Tk, Tn)
    params = SketchParams(kappa=kappa, s=s, seed=seed, intra_mode=intra_mode,
                          precision=precision)
    if wiring is None:
        wiring = iterated_wiring(seed, M, kappa)
    return SketchOperator(layout, params, wiring)


def materialize(op: SketchOperator, padded: bool = False,
                limit: int = MATERIALIZE_LIMIT) -> np.ndarray:
    """Explicit ``k x d`` matrix (test oracle only).

    By default the padded rows/columns are cut so the result is
    ``k_orig x d_orig`` and ``materialize(op) @ A == apply_tiled(op, A)``.
    """
    L = op.layout
    if L.k * L.d > limit:
        raise MemoryError(f"materializing {L.k}x{L.d} exceeds the {limit}-entry guard")
    S = np.zeros((L.k, L.d), dtype=op.dtype)
    _kernels.materialize_blockperm(S, op.wiring.table(), np.uint64(seed_key(op.params.seed)),
                                   L.Bc, L.Br, op.params.s, mode_code(op.intra_mode),
                                   float(op.scale()))
    if padded:
        return S
    return S[:L.k_orig, :L.d_orig].copy()


def _prepare_input(layout: BlockLayout, A, dtype, check_finite: bool):
    A = np.asarray(A)
    vector = A.ndim == 1
    if vector:
        A = A[:, None]
    if A.ndim != 2:
        raise ValueError("input must be a vector or a 2-D matrix")
    if A.shape[0] != layout.d_orig:
        raise ValueError(f"input has {A.shape[0]} rows, operator expects {layout.d_orig}")
    if A.shape[1] < 1:
        raise ValueError("input must have at least one column")
    if check_finite and not np.all(np.isfinite(A)):
        raise ValueError("input contains non-finite entries")
    if layout.d == layout.d_orig:
        Ap = np.ascontiguousarray(A, dtype=dtype)
    else:
        Ap = np.zeros((layout.d, A.shape[1]), dtype=dtype)
        Ap[:layout.d_orig] = A
    return Ap, vector


def _finish(layout: BlockLayout, Y: np.ndarray, vector: bool) -> np.ndarray:
    if layout.k != layout.k_orig:
        Y = Y[:layout.k_orig]
    return Y[:, 0].copy() if vector else Y


def _tile_list(M: int, nj: int, slices: int = 1) -> np.ndarray:
    sl, g, j = np.meshgrid(np.arange(slices), np.arange(M), np.arange(nj), indexing="ij")
    return np.stack([g.ravel(), j.ravel(), sl.ravel()], axis=1).astype(np.int64)


def _run_parallel(jobs, workers: int) -> None:
    """Run zero-argument jobs; each job owns a disjoint set of output tiles."""
    if workers < 1:
        raise ValueError("workers must be >= 1")
    if workers == 1 or len(jobs) == 1:
        for job in jobs:
            job()
        return
    with ThreadPoolExecutor(max_workers=workers) as pool:
        for fut in [pool.submit(job) for job in jobs]:
            fut.result()


def _chunks(tiles: np.ndarray, workers: int) -> list[np.ndarray]:
    n = min(len(tiles), max(1, workers * 4))
    return [c for c in np.array_split(tiles, n) if len(c)]


def apply_tiled(op: SketchOperator, A, workers: int = 1, check_finite: bool = __debug__) -> np.ndarray:
    """``Y = S A`` for ``A`` of shape ``(d_orig, n)`` (or a length-``d_orig`` vector)."""
    L = op.layout
    Ap, vector = _prepare_input(L, A, op.dtype, check_finite)
    n = Ap.shape[1]
    Y = np.empty((L.k, n), dtype=op.dtype)
    nbr = op.wiring.table()
    key = np.uint64(seed_key(op.params.seed))
    mode = mode_code(op.intra_mode)
    scale = op.scale()
    tiles = _tile_list(L.M, L.n_col_tiles(n))[:, :2].copy()

    def job(chunk):
        return lambda: _kernels.flash_tiles(Ap, Y, nbr, chunk, key, L.Bc, L.Br, L.Tk, L.Tn,
                                            op.params.s, mode, scale, 0, L.Bc)

    _run_parallel([job(c) for c in _chunks(tiles, workers)], workers)
    return _finish(L, Y, vector)


def apply_sliced(op: SketchOperator, A, slices: int = 2, workers: int = 1,
                 check_finite: bool = __debug__) -> np.ndarray:
    """Split-``Bc`` variant: each input block is cut into ``slices`` row slices.

    Partial tiles for every (slice, g, j) are computed independently and then
    reduced in ascending slice order before the final scaling.
    """
    L = op.layout
    if slices < 1 or L.Bc % slices or (L.Bc // slices) % L.Tk:
        raise ValueError(f"slices={slices} must divide Bc={L.Bc} into multiples of Tk={L.Tk}")
    Ap, vector = _prepare_input(L, A, op.dtype, check_finite)
    n = Ap.shape[1]
    part = np.empty((slices, L.k, n), dtype=op.dtype)
    nbr = op.wiring.table()
    key = np.uint64(seed_key(op.params.seed))
    mode = mode_code(op.intra_mode)
    one = op.dtype.type(1.0)
    span = L.Bc // slices
    tiles = _tile_list(L.M, L.n_col_tiles(n), slices)

    def job(sl, chunk):
        return lambda: _kernels.flash_tiles(Ap, part[sl], nbr, chunk, key, L.Bc, L.Br, L.Tk,
                                            L.Tn, op.params.s, mode, one, sl * span,
                                            (sl + 1) * span)

    jobs = []
    for sl in range(slices):
        mine = tiles[tiles[:, 2] == sl][:, :2].copy()
        jobs.extend(job(sl, c) for c in _chunks(mine, workers))
    _run_parallel(jobs, workers)
    Y = part[0].copy()
    for sl in range(1, slices):
        Y += part[sl]
    Y *= op.scale()
    return _finish(L, Y, vector)


def blockrow_table(layout: BlockLayout, params: SketchParams) -> np.ndarray:
    """Independently sampled ``(M, kappa)`` neighborhoods for the block-row sketch."""
    params.check_layout(layout)
    return _kernels.blockrow_neighborhoods(np.uint64(seed_key(params.seed)), layout.M,
                                           params.kappa)


def blockrow_scale(layout: BlockLayout, params: SketchParams, dtype) -> np.floating:
    return np.dtype(dtype).type(math.sqrt(layout.d / layout.k)
                                / math.sqrt(params.kappa * params.s))


def apply_blockrow(layout: BlockLayout, params: SketchParams, A, workers: int = 1,
                   check_finite: bool = __debug__) -> np.ndarray:
    """Gather-only block-row sampling sketch.

    Each output row draws ``s`` input rows uniformly (with replacement) from
    each of its block's ``kappa`` sampled input blocks, rescaled by
    ``sqrt(d/k) / sqrt(kappa*s)``. Columns of S may be empty.
    """
    dtype = params.precision.dtype
    Ap, vector = _prepare_input(layout, A, dtype, check_finite)
    n = Ap.shape[1]
    Y = np.empty((layout.k, n), dtype=dtype)
    nbr = blockrow_table(layout, params)
    key = np.uint64(seed_key(params.seed))
    scale = blockrow_scale(layout, params, dtype)
    tiles = _tile_list(layout.M, layout.n_col_tiles(n))[:, :2].copy()

    def job(chunk):
        return lambda: _kernels.blockrow_tiles(Ap, Y, nbr, chunk, key, layout.Bc, layout.Br,
                                               layout.Tn, params.s, scale)

    _run_parallel([job(c) for c in _chunks(tiles, workers)], workers)
    return _finish(layout, Y, vector)


def materialize_blockrow(layout: BlockLayout, params: SketchParams, padded: bool = False,
                         limit: int = MATERIALIZE_LIMIT) -> np.ndarray:
    if layout.k * layout.d > limit:
        raise MemoryError(f"materializing {layout.k}x{layout.d} exceeds the {limit}-entry guard")
    dtype = params.precision.dtype
    S = np.zeros((layout.k, layout.d), dtype=dtype)
    _kernels.materialize_blockrow(S, blockrow_table(layout, params),
                                  np.uint64(seed_key(params.seed)), layout.Bc, layout.Br,
                                  params.s, float(blockrow_scale(layout, params, dtype)))
    return S if padded else S[:layout.k_orig, :layout.d_orig].copy()
