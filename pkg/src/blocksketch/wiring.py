"""Block-level wiring: kappa permutations of ``[M]`` defining neighborhoods.

The production wiring iterates one full-cycle affine map ``f(x) = (a x + b)
mod M``; neighbor ``l`` of output block ``g`` is ``f^l(g)`` for
``l = 1..kappa``. Explicit tables are kept for the independent-uniform model
used by the smoothing experiment.
"""
from __future__ import annotations

import json
import math
from dataclasses import dataclass, field

import numpy as np

from .hashing import Stream, context_base, derive_seed, lane_word


def prime_factors(n: int) -> list[int]:
    out = []
    p = 2
    while p * p <= n:
        if n % p == 0:
            out.append(p)
            while n % p == 0:
                n //= p
        p += 1
    if n > 1:
        out.append(n)
    return out


@dataclass(frozen=True)
class AffineMap:
    a: int
    b: int
    M: int

    def __post_init__(self):
        if self.M < 1:
            raise ValueError("modulus M must be >= 1")
        if not (0 <= self.a < self.M and 0 <= self.b < self.M):
            raise ValueError("a and b must lie in [0, M)")

    def __call__(self, x):
        return (self.a * x + self.b) % self.M


def validate_full_cycle(f: AffineMap) -> bool:
    """Hull-Dobell test: ``x -> (a x + b) mod M`` has period exactly ``M``."""
    M = f.M
    if M == 1:
        return True
    if math.gcd(f.b, M) != 1:
        return False
    if any((f.a - 1) % p for p in prime_factors(M)):
        return False
    if M % 4 == 0 and (f.a - 1) % 4:
        return False
    return True


def _full_period_step(M: int) -> int:
    q = math.prod(prime_factors(M))
    if M % 4 == 0:
        q = math.lcm(q, 4)
    return q


def derive_affine(seed: int, M: int) -> AffineMap:
    """Deterministic full-cycle affine map for ``(seed, M)``.

    ``a`` is drawn from the admissible class ``1 + q*t`` (``q`` the product of
    M's primes, lifted to a multiple of 4 when ``4 | M``); ``b`` is redrawn
    with a retry counter until ``gcd(b, M) = 1``.
    """
    if M < 1:
        raise ValueError("M must be >= 1")
    if M == 1:
        return AffineMap(0, 0, 1)
    q = _full_period_step(M)
    base = context_base(seed, Stream.WIRING, M, 0, 0)
    a = (1 + q * (lane_word(base, 1) % (M // q))) % M
    retry = 0
    while True:
        b = lane_word(base, 2 + retry) % M
        if math.gcd(b, M) == 1:
            return AffineMap(a, b, M)
        retry += 1


@dataclass(frozen=True)
class Wiring:
    """``kappa`` permutations of ``[M]``; ``table()[g, l]`` is ``pi_{l+1}(g)``."""

    M: int
    kappa: int
    affine: AffineMap | None = None
    tables: tuple | None = field(default=None, repr=False)

    def __post_init__(self):
        if self.kappa < 1:
            raise ValueError("kappa must be >= 1")
        if (self.affine is None) == (self.tables is None):
            raise ValueError("wiring needs exactly one of affine map or explicit tables")
        if self.affine is not None:
            if self.affine.M != self.M:
                raise ValueError("affine modulus differs from M")
            if not validate_full_cycle(self.affine):
                raise ValueError(f"{self.affine} is not a full-cycle map")
            if self.kappa > self.M:
                raise ValueError("iterated wiring needs kappa <= M")
        else:
            tabs = tuple(tuple(int(v) for v in t) for t in self.tables)
            if len(tabs) != self.kappa:
                raise ValueError("need exactly kappa permutation tables")
            for t in tabs:
                if sorted(t) != list(range(self.M)):
                    raise ValueError("every table must be a permutation of [M]")
            object.__setattr__(self, "tables", tabs)

    @property
    def kind(self) -> str:
        return "iterated_affine" if self.affine is not None else "explicit_tables"

    def table(self) -> np.ndarray:
        """``(M, kappa)`` int64 array of neighborhoods in wiring order."""
        if self.tables is not None:
            return np.array(self.tables, dtype=np.int64).T.copy()
        f = self.affine
        out = np.empty((self.M, self.kappa), dtype=np.int64)
        x = np.arange(self.M, dtype=np.int64)
        for l in range(self.kappa):
            x = (f.a * x + f.b) % self.M
            out[:, l] = x
        return out

    def to_dict(self) -> dict:
        d = {"kind": self.kind, "M": self.M, "kappa": self.kappa}
        if self.affine is not None:
            d.update(a=self.affine.a, b=self.affine.b)
        else:
            d["tables"] = [list(t) for t in self.tables]
        return d

    def to_json(self) -> str:
        return json.dumps(self.to_dict())

    @classmethod
    def from_dict(cls, d: dict) -> "Wiring":
        if d["kind"] == "iterated_affine":
            return cls(d["M"], d["kappa"], affine=AffineMap(d["a"], d["b"], d["M"]))
        if d["kind"] == "explicit_tables":
            return cls(d["M"], d["kappa"], tables=tuple(tuple(t) for t in d["tables"]))
        raise ValueError(f"unknown wiring kind {d['kind']!r}")

    @classmethod
    def from_json(cls, s: str) -> "Wiring":
        return cls.from_dict(json.loads(s))


def iterated_wiring(seed: int, M: int, kappa: int) -> Wiring:
    return Wiring(M, kappa, affine=derive_affine(seed, M))


def neighborhood(w: Wiring, g: int) -> list[int]:
    if not (0 <= g < w.M):
        raise IndexError(f"block index {g} outside [0, {w.M})")
    if w.tables is not None:
        return [t[g] for t in w.tables]
    out, x = [], g
    for _ in range(w.kappa):
        x = w.affine(x)
        out.append(x)
    return out


def check_edge_disjoint(w: Wiring) -> bool:
    tab = w.table()
    srt = np.sort(tab, axis=1)
    return bool(np.all(srt[:, 1:] != srt[:, :-1]))


def sample_uniform_wiring(seed: int, M: int, kappa: int) -> Wiring:
    """``kappa`` independent uniform permutations (not necessarily edge-disjoint)."""
    if M < 1 or kappa < 1:
        raise ValueError("need M >= 1 and kappa >= 1")
    rng = np.random.Generator(np.random.Philox(derive_seed(seed, Stream.UNIFORM_WIRING, M, kappa)))
    tabs = tuple(tuple(int(v) for v in rng.permutation(M)) for _ in range(kappa))
    return Wiring(M, kappa, tables=tabs)
