"""Dataset generation and file formats (Matrix Market text, dense binary dump)."""
from __future__ import annotations

import enum
import math
import struct
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .hashing import Stream, derive_seed


class DatasetKind(str, enum.Enum):
    GAUSSIAN = "gaussian"
    LOWRANK_NOISE = "lowrank"
    MATRIX_MARKET = "mtx"


@dataclass(frozen=True)
class DatasetSpec:
    kind: DatasetKind
    d: int
    n: int
    rank: int | None = None
    noise_sigma: float = 0.0
    path: str | None = None
    seed: int = 0

    def __post_init__(self):
        object.__setattr__(self, "kind", DatasetKind(self.kind))
        if self.noise_sigma < 0:
            raise ValueError("noise_sigma must be >= 0")
        if self.kind is DatasetKind.LOWRANK_NOISE:
            if self.rank is None or not (1 <= self.rank <= min(self.d, self.n)):
                raise ValueError("low-rank data needs 1 <= rank <= min(d, n)")
        if self.kind is DatasetKind.MATRIX_MARKET and not self.path:
            raise ValueError("Matrix Market datasets need a path")


def _rng(seed: int, index: int) -> np.random.Generator:
    return np.random.Generator(np.random.Philox(derive_seed(seed, Stream.DATA, index)))


def gen_gaussian(d: int, n: int, seed: int = 0, dtype=np.float64) -> np.ndarray:
    if d < 1 or n < 1:
        raise ValueError("d and n must be >= 1")
    return _rng(seed, 0).standard_normal((d, n)).astype(dtype, copy=False)


def gen_lowrank_noise(d: int, n: int, rank: int, noise_sigma: float = 0.1, seed: int = 0,
                      dtype=np.float64) -> np.ndarray:
    """``G1 G2^T / sqrt(rank) + sigma N`` with i.i.d. standard normal factors."""
    if not (1 <= rank <= min(d, n)):
        raise ValueError(f"rank must lie in [1, min(d, n)] = [1, {min(d, n)}]")
    if noise_sigma < 0:
        raise ValueError("noise_sigma must be >= 0")
    G1 = _rng(seed, 1).standard_normal((d, rank))
    G2 = _rng(seed, 2).standard_normal((n, rank))
    A = G1 @ G2.T / math.sqrt(rank)
    if noise_sigma > 0:
        A += noise_sigma * _rng(seed, 3).standard_normal((d, n))
    return A.astype(dtype, copy=False)


def load_dataset(spec: DatasetSpec, dtype=np.float64) -> np.ndarray:
    if spec.kind is DatasetKind.GAUSSIAN:
        return gen_gaussian(spec.d, spec.n, spec.seed, dtype)
    if spec.kind is DatasetKind.LOWRANK_NOISE:
        return gen_lowrank_noise(spec.d, spec.n, spec.rank, spec.noise_sigma, spec.seed, dtype)
    A = read_matrix_market(spec.path, rows=spec.d, cols=spec.n)
    if A.shape != (spec.d, spec.n):
        raise ValueError(f"{spec.path} is {A.shape}, smaller than the requested "
                         f"{spec.d}x{spec.n} window")
    return A.astype(dtype, copy=False)


# ---------------------------------------------------------------------------
# Matrix Market
# ---------------------------------------------------------------------------

class MatrixMarketError(ValueError):
    def __init__(self, path, line: int, msg: str):
        self.path = str(path)
        self.line = line
        super().__init__(f"{path}:{line}: {msg}")


@dataclass
class CoordinateData:
    shape: tuple[int, int]
    rows: np.ndarray
    cols: np.ndarray
    vals: np.ndarray
    field: str
    symmetry: str

    def to_dense(self, rows: int | None = None, cols: int | None = None) -> np.ndarray:
        m = self.shape[0] if rows is None else min(rows, self.shape[0])
        n = self.shape[1] if cols is None else min(cols, self.shape[1])
        keep = (self.rows < m) & (self.cols < n)
        A = np.zeros((m, n))
        np.add.at(A, (self.rows[keep], self.cols[keep]), self.vals[keep])
        return A


_FIELDS = {"real", "integer", "pattern", "double"}
_SYMMETRIES = {"general", "symmetric", "skew-symmetric"}


def read_coordinate(path) -> CoordinateData:
    """Parse a coordinate Matrix Market file into 0-based triplets.

    Symmetric and skew-symmetric storage is expanded to both triangles;
    duplicates are kept (they are summed on densification).
    """
    path = Path(path)
    with open(path) as fh:
        lines = fh.read().splitlines()
    if not lines:
        raise MatrixMarketError(path, 1, "empty file")
    head = lines[0].split()
    if len(head) != 5 or head[0] != "%%MatrixMarket":
        raise MatrixMarketError(path, 1, "expected '%%MatrixMarket matrix coordinate <field> <symmetry>'")
    obj, fmt, field, sym = (t.lower() for t in head[1:])
    if obj != "matrix":
        raise MatrixMarketError(path, 1, f"unsupported object {obj!r}")
    if fmt != "coordinate":
        raise MatrixMarketError(path, 1, f"unsupported format {fmt!r} (only coordinate)")
    if field not in _FIELDS:
        raise MatrixMarketError(path, 1, f"non-real field {field!r}")
    if sym not in _SYMMETRIES:
        raise MatrixMarketError(path, 1, f"unsupported symmetry {sym!r}")

    it = ((no, ln.strip()) for no, ln in enumerate(lines[1:], start=2))
    body = [(no, ln) for no, ln in it if ln and not ln.startswith("%")]
    if not body:
        raise MatrixMarketError(path, len(lines), "missing size line")
    no, size = body[0]
    try:
        m, n, nnz = (int(t) for t in size.split())
    except ValueError:
        raise MatrixMarketError(path, no, f"bad size line {size!r}") from None
    if m < 0 or n < 0 or nnz < 0:
        raise MatrixMarketError(path, no, "negative size")
    if sym != "general" and m != n:
        raise MatrixMarketError(path, no, f"{sym} matrix must be square")

    entries = body[1:]
    if len(entries) != nnz:
        where = entries[nnz][0] if len(entries) > nnz else (entries[-1][0] + 1 if entries else no + 1)
        raise MatrixMarketError(path, where, f"expected {nnz} entries, found {len(entries)}")
    width = 2 if field == "pattern" else 3
    rows = np.empty(nnz, dtype=np.int64)
    cols = np.empty(nnz, dtype=np.int64)
    vals = np.empty(nnz)
    for t, (no, ln) in enumerate(entries):
        tok = ln.split()
        if len(tok) != width:
            raise MatrixMarketError(path, no, f"expected {width} fields, got {len(tok)}")
        try:
            i, j = int(tok[0]), int(tok[1])
            v = 1.0 if field == "pattern" else float(tok[2])
        except ValueError:
            raise MatrixMarketError(path, no, f"cannot parse entry {ln!r}") from None
        if not (1 <= i <= m and 1 <= j <= n):
            raise MatrixMarketError(path, no, f"index ({i}, {j}) outside {m}x{n}")
        if not math.isfinite(v):
            raise MatrixMarketError(path, no, "non-finite value")
        if sym == "skew-symmetric" and i == j:
            raise MatrixMarketError(path, no, "skew-symmetric matrix with a diagonal entry")
        rows[t], cols[t], vals[t] = i - 1, j - 1, v

    if sym != "general":
        off = rows != cols
        sign = -1.0 if sym == "skew-symmetric" else 1.0
        rows, cols, vals = (np.concatenate([rows, cols[off]]), np.concatenate([cols, rows[off]]),
                            np.concatenate([vals, sign * vals[off]]))
    return CoordinateData((m, n), rows, cols, vals, field, sym)


def read_matrix_market(path, rows: int | None = None, cols: int | None = None) -> np.ndarray:
    """Dense matrix from a coordinate file, optionally cropped to the top-left window."""
    return read_coordinate(path).to_dense(rows, cols)


def nnz_density(path, rows: int | None = None, cols: int | None = None) -> float:
    """Fraction of nonzero positions in the (cropped) window, before densification."""
    c = read_coordinate(path)
    m = c.shape[0] if rows is None else min(rows, c.shape[0])
    n = c.shape[1] if cols is None else min(cols, c.shape[1])
    keep = (c.rows < m) & (c.cols < n)
    distinct = np.unique(c.rows[keep] * n + c.cols[keep]).size
    return distinct / (m * n)


def write_matrix_market(path, A, symmetric: bool = False, comment: str | None = None) -> None:
    """Write the nonzeros of a dense matrix as coordinate real (17 significant digits)."""
    A = np.asarray(A, dtype=np.float64)
    if symmetric and (A.shape[0] != A.shape[1] or not np.array_equal(A, A.T)):
        raise ValueError("symmetric output needs a symmetric matrix")
    i, j = np.nonzero(np.tril(A) if symmetric else A)
    with open(path, "w") as fh:
        fh.write(f"%%MatrixMarket matrix coordinate real {'symmetric' if symmetric else 'general'}\n")
        if comment:
            for ln in comment.splitlines():
                fh.write(f"% {ln}\n")
        fh.write(f"{A.shape[0]} {A.shape[1]} {len(i)}\n")
        for a, b in zip(i, j):
            fh.write(f"{a + 1} {b + 1} {A[a, b]:.17g}\n")


# ---------------------------------------------------------------------------
# Dense binary dump: 16-byte little-endian header then row-major values
# ---------------------------------------------------------------------------

DENSE_MAGIC = b"BSKY"
_HEADER = struct.Struct("<4sIII")


def write_dense(path, Y) -> None:
    """``magic, rows, cols, bytes-per-value`` header (uint32 each), then row-major data."""
    Y = np.asarray(Y)
    if Y.ndim == 1:
        Y = Y[:, None]
    if Y.dtype not in (np.float32, np.float64):
        raise ValueError("only float32/float64 dumps are supported")
    with open(path, "wb") as fh:
        fh.write(_HEADER.pack(DENSE_MAGIC, Y.shape[0], Y.shape[1], Y.dtype.itemsize))
        fh.write(np.ascontiguousarray(Y, dtype=Y.dtype.newbyteorder("<")).tobytes())


def read_dense(path) -> np.ndarray:
    with open(path, "rb") as fh:
        raw = fh.read()
    if len(raw) < _HEADER.size:
        raise ValueError(f"{path}: truncated header")
    magic, rows, cols, prec = _HEADER.unpack_from(raw)
    if magic != DENSE_MAGIC:
        raise ValueError(f"{path}: bad magic {magic!r}")
    if prec not in (4, 8):
        raise ValueError(f"{path}: unknown precision code {prec}")
    dt = np.dtype("<f4" if prec == 4 else "<f8")
    expected = _HEADER.size + rows * cols * prec
    if len(raw) != expected:
        raise ValueError(f"{path}: expected {expected} bytes, found {len(raw)}")
    return np.frombuffer(raw, dtype=dt, offset=_HEADER.size).reshape(rows, cols).astype(dt.newbyteorder("="))
