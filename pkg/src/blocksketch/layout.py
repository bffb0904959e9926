"""Block partition geometry and sketch parameters.

Input coordinates are split into ``M`` contiguous blocks of ``Bc`` rows and
output coordinates into ``M`` blocks of ``Br`` rows, so the sketch is always
square at the block level. Shapes that do not divide evenly are padded with
zero input rows / dropped output rows.
"""
from __future__ import annotations

import enum
from dataclasses import dataclass

import numpy as np

# Counter fields are packed into 20-bit lanes (see hashing.pack_counter).
MAX_INDEX = 1 << 20
DEFAULT_TK = 32
DEFAULT_TN = 512


class IntraMode(str, enum.Enum):
    ROW_PARTITIONED = "row"
    AFFINE_UNIQUE = "affine"


class Precision(str, enum.Enum):
    F32 = "f32"
    F64 = "f64"

    @property
    def dtype(self) -> np.dtype:
        return np.dtype(np.float32 if self is Precision.F32 else np.float64)

    @property
    def code(self) -> int:
        return 4 if self is Precision.F32 else 8


def _ceil_div(a: int, b: int) -> int:
    return -(-a // b)


@dataclass(frozen=True)
class BlockLayout:
    d: int
    k: int
    M: int
    Bc: int
    Br: int
    Tk: int
    Tn: int
    d_orig: int
    k_orig: int

    def __post_init__(self):
        if self.d != self.M * self.Bc or self.k != self.M * self.Br:
            raise ValueError("layout requires d = M*Bc and k = M*Br")
        if not (1 <= self.Tk <= self.Bc) or self.Bc % self.Tk:
            raise ValueError(f"row tile Tk={self.Tk} must divide Bc={self.Bc}")
        if self.Tn < 1:
            raise ValueError("column tile Tn must be >= 1")
        if self.d < self.d_orig or self.k < self.k_orig:
            raise ValueError("padded dimensions cannot shrink the originals")
        if max(self.M, self.Bc, self.Br) >= MAX_INDEX:
            raise ValueError("M, Bc and Br must each be below 2**20")

    @property
    def padded(self) -> bool:
        return self.d != self.d_orig or self.k != self.k_orig

    def n_col_tiles(self, n: int) -> int:
        return _ceil_div(n, self.Tn)

    def to_dict(self) -> dict:
        return {f: getattr(self, f) for f in self.__dataclass_fields__}


def make_layout(d_orig: int, k_orig: int, M: int, Tk: int = DEFAULT_TK,
                Tn: int = DEFAULT_TN) -> BlockLayout:
    """Build a padded layout for a ``k_orig x d_orig`` sketch with ``M`` blocks.

    ``Bc`` is ``ceil(d_orig / M)`` rounded up to a multiple of the row tile;
    ``Br`` is ``ceil(k_orig / M)``. A row tile taller than the unpadded block
    is clamped to the block height first, so tiny shapes are not over-padded.
    """
    if M < 1:
        raise ValueError("block count M must be >= 1")
    if Tk < 1 or Tn < 1:
        raise ValueError("tile sizes Tk and Tn must be >= 1")
    if d_orig < 1 or k_orig < 1:
        raise ValueError("dimensions must be >= 1")
    bc = _ceil_div(d_orig, M)
    tk = min(Tk, bc)
    bc = _ceil_div(bc, tk) * tk
    br = _ceil_div(k_orig, M)
    return BlockLayout(d=M * bc, k=M * br, M=M, Bc=bc, Br=br, Tk=tk, Tn=Tn,
                       d_orig=d_orig, k_orig=k_orig)


@dataclass(frozen=True)
class SketchParams:
    kappa: int
    s: int
    seed: int = 0
    intra_mode: IntraMode = IntraMode.AFFINE_UNIQUE
    precision: Precision = Precision.F64

    def __post_init__(self):
        object.__setattr__(self, "intra_mode", IntraMode(self.intra_mode))
        object.__setattr__(self, "precision", Precision(self.precision))
        if self.kappa < 1:
            raise ValueError("kappa must be >= 1")
        if self.s < 1:
            raise ValueError("s must be >= 1")
        if not (0 <= self.seed < 1 << 64):
            raise ValueError("seed must be an unsigned 64-bit integer")

    def check_layout(self, layout: BlockLayout) -> None:
        if self.kappa > layout.M:
            raise ValueError(f"kappa={self.kappa} exceeds block count M={layout.M}")
        if self.s > layout.Br:
            raise ValueError(f"s={self.s} exceeds output block size Br={layout.Br}")
        if self.intra_mode is IntraMode.ROW_PARTITIONED and layout.Br % self.s:
            raise ValueError(f"row-partitioned mode needs s | Br (s={self.s}, Br={layout.Br})")

    def to_dict(self) -> dict:
        return {"kappa": self.kappa, "s": self.s, "seed": self.seed,
                "intra_mode": self.intra_mode.value, "precision": self.precision.value}
