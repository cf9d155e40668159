"""Frequency vectors, resonance lattices and small-denominator bounds.

All lattice work in exact mode is done on Python integers.  The core routine
is an integer row echelon reduction with a unimodular transform, from which
kernels, lattice bases and membership tests follow.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Sequence

import numpy as np

from .exact import exact_real

__all__ = [
    "FrequencyVector",
    "ResonanceModule",
    "DiophantineEstimate",
    "resonance_module",
    "detect_resonances_approx",
    "diophantine_constants",
    "diophantine_fit",
    "is_resonant",
    "integer_kernel",
    "lattice_basis",
    "torus_generators",
]


# ---------------------------------------------------------------------------
# integer linear algebra
# ---------------------------------------------------------------------------

def _row_echelon(rows: Sequence[Sequence[int]]):
    """Integer row echelon form with unimodular transform.

    Returns ``(E, U)`` with ``U @ M == E``, ``U`` unimodular and ``E`` in row
    echelon form with positive pivots.  Only Euclidean row operations are used.
    """
    m = len(rows)
    n = len(rows[0]) if m else 0
    E = [list(map(int, r)) for r in rows]
    U = [[int(i == j) for j in range(m)] for i in range(m)]
    r = 0
    for c in range(n):
        if r >= m:
            break
        while True:
            nz = [i for i in range(r, m) if E[i][c] != 0]
            if not nz:
                break
            p = min(nz, key=lambda i: abs(E[i][c]))
            E[r], E[p] = E[p], E[r]
            U[r], U[p] = U[p], U[r]
            done = True
            for i in range(r + 1, m):
                if E[i][c]:
                    q = E[i][c] // E[r][c]
                    E[i] = [a - q * b for a, b in zip(E[i], E[r])]
                    U[i] = [a - q * b for a, b in zip(U[i], U[r])]
                    if E[i][c]:
                        done = False
            if done:
                break
        if r < m and E[r][c] != 0:
            if E[r][c] < 0:
                E[r] = [-a for a in E[r]]
                U[r] = [-a for a in U[r]]
            # reduce entries above the pivot
            for i in range(r):
                q = E[i][c] // E[r][c]
                if q:
                    E[i] = [a - q * b for a, b in zip(E[i], E[r])]
                    U[i] = [a - q * b for a, b in zip(U[i], U[r])]
            r += 1
    return E, U


def _normalize_sign(v: list[int]) -> list[int]:
    for a in v:
        if a:
            return v if a > 0 else [-b for b in v]
    return v


def _size_reduce(basis: list[list[int]]) -> list[list[int]]:
    """Pairwise reduction to shorten basis vectors.  Keeps the lattice."""
    basis = [list(v) for v in basis]
    n2 = lambda v: sum(a * a for a in v)
    changed = True
    while changed:
        changed = False
        basis.sort(key=n2)
        for i in range(len(basis)):
            for j in range(len(basis)):
                if i == j:
                    continue
                bi, bj = basis[i], basis[j]
                den = n2(bj)
                if den == 0:
                    continue
                q = round(Fraction(sum(a * b for a, b in zip(bi, bj)), den))
                if q:
                    cand = [a - q * b for a, b in zip(bi, bj)]
                    if n2(cand) < n2(bi):
                        basis[i] = cand
                        changed = True
    basis = [_normalize_sign(v) for v in basis]
    basis.sort(key=lambda v: (n2(v), [-a for a in v]))
    return basis


def lattice_basis(vectors: Sequence[Sequence[int]], dim: int) -> list[list[int]]:
    """Basis of the integer lattice generated by ``vectors``."""
    vecs = [list(map(int, v)) for v in vectors if any(v)]
    if not vecs:
        return []
    for v in vecs:
        if len(v) != dim:
            raise ValueError("vector dimension mismatch")
    E, _ = _row_echelon(vecs)
    return _size_reduce([row for row in E if any(row)])


def integer_kernel(B: Sequence[Sequence[int]], dim: int) -> list[list[int]]:
    """Basis of ``{k in Z^dim : B k = 0}`` for an integer matrix ``B``."""
    B = [list(map(int, r)) for r in B]
    if not B:
        return [[int(i == j) for j in range(dim)] for i in range(dim)]
    BT = [[B[i][j] for i in range(len(B))] for j in range(dim)]
    E, U = _row_echelon(BT)
    ker = [U[i] for i in range(dim) if not any(E[i])]
    return _size_reduce(ker)


def _in_span(echelon: list[list[int]], k: Sequence[int]) -> bool:
    k = list(map(int, k))
    for row in echelon:
        c = next(i for i, a in enumerate(row) if a)
        if k[c] % row[c]:
            return False
        q = k[c] // row[c]
        if q:
            k = [a - q * b for a, b in zip(k, row)]
    return not any(k)


# ---------------------------------------------------------------------------
# types
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class FrequencyVector:
    """Positive frequency vector, exact (rationals) or approximate (floats).

    Use :meth:`exact`, :meth:`approximate` or :meth:`parse` to construct.
    """

    entries: tuple
    mode: str = "exact"

    def __post_init__(self):
        if self.mode not in ("exact", "approximate"):
            raise ValueError(f"unknown mode {self.mode!r}")
        if len(self.entries) < 1:
            raise ValueError("frequency vector must have d >= 1")
        for w in self.entries:
            if not w > 0:
                raise ValueError(f"frequencies must be strictly positive, got {w}")
        if self.mode == "exact":
            if not all(isinstance(w, Fraction) for w in self.entries):
                raise TypeError("exact mode needs Fraction entries")
        else:
            if not all(isinstance(w, float) and math.isfinite(w) for w in self.entries):
                raise TypeError("approximate mode needs finite float entries")

    @classmethod
    def exact(cls, values) -> "FrequencyVector":
        return cls(tuple(exact_real(v) for v in values), "exact")

    @classmethod
    def approximate(cls, values) -> "FrequencyVector":
        return cls(tuple(float(v) for v in values), "approximate")

    @classmethod
    def parse(cls, values) -> "FrequencyVector":
        """Parse a scenario literal: ints and ``"p/q"`` strings are exact, floats are not."""
        if any(isinstance(v, float) for v in values):
            return cls.approximate(values)
        return cls.exact(values)

    @property
    def d(self) -> int:
        return len(self.entries)

    @property
    def is_exact(self) -> bool:
        return self.mode == "exact"

    def as_array(self) -> np.ndarray:
        return np.array([float(w) for w in self.entries])

    def dot(self, k):
        """``omega . k``; exact Fraction in exact mode, float otherwise."""
        if len(k) != self.d:
            raise ValueError(f"expected a {self.d}-vector, got length {len(k)}")
        if self.is_exact:
            return sum((w * int(kj) for w, kj in zip(self.entries, k)), Fraction(0))
        return float(sum(w * kj for w, kj in zip(self.entries, k)))

    def common_denominator(self) -> int:
        if not self.is_exact:
            raise ValueError("common denominator only defined in exact mode")
        return math.lcm(*(w.denominator for w in self.entries))

    def integer_row(self) -> list[int]:
        """``Q * omega`` as integers, with ``Q`` the common denominator."""
        Q = self.common_denominator()
        return [int(w * Q) for w in self.entries]

    def to_literal(self) -> list:
        if self.is_exact:
            return [str(w) for w in self.entries]
        return list(self.entries)


@dataclass(frozen=True)
class ResonanceModule:
    """Integer lattice ``{k : omega . k = 0}`` given by a basis."""

    omega: FrequencyVector
    basis: tuple
    approximate: bool = False
    _echelon: tuple = field(default=(), repr=False, compare=False)

    def __post_init__(self):
        d = self.omega.d
        for row in self.basis:
            if len(row) != d:
                raise ValueError("basis row has wrong dimension")
        if not self._echelon and self.basis:
            E, _ = _row_echelon([list(r) for r in self.basis])
            nz = tuple(tuple(r) for r in E if any(r))
            if len(nz) != len(self.basis):
                raise ValueError("basis rows are linearly dependent")
            object.__setattr__(self, "_echelon", nz)
        if self.omega.is_exact and not self.approximate:
            for row in self.basis:
                if self.omega.dot(row) != 0:
                    raise ValueError(f"basis row {row} is not resonant")

    @property
    def d(self) -> int:
        return self.omega.d

    @property
    def rank(self) -> int:
        return len(self.basis)

    @property
    def d_omega(self) -> int:
        return self.d - self.rank

    def contains(self, k) -> bool:
        return is_resonant(self, k)


@dataclass(frozen=True)
class DiophantineEstimate:
    """Bound ``|omega . k|^{-1} <= C |k|^nu`` off the resonance lattice."""

    C: float
    nu: float
    exact: bool
    search_radius: int
    observed_min: float = float("nan")


# ---------------------------------------------------------------------------
# operations
# ---------------------------------------------------------------------------

def resonance_module(omega: FrequencyVector) -> ResonanceModule:
    """Exact resonance lattice of a rational frequency vector.

    Examples
    --------
    >>> resonance_module(FrequencyVector.exact([1, 1])).basis
    ((1, -1),)
    """
    if not omega.is_exact:
        raise ValueError(
            "resonance_module needs exact frequencies; use detect_resonances_approx"
        )
    ker = integer_kernel([omega.integer_row()], omega.d)
    return ResonanceModule(omega, tuple(tuple(v) for v in ker))


def _half_space_grid(d: int, K: int) -> np.ndarray:
    """Nonzero integer vectors with |k|_inf <= K whose first nonzero entry is positive."""
    rng = np.arange(-K, K + 1)
    grid = np.array(np.meshgrid(*([rng] * d), indexing="ij")).reshape(d, -1).T
    nz = grid != 0
    first = np.argmax(nz, axis=1)
    lead = grid[np.arange(len(grid)), first]
    return grid[lead > 0]


def detect_resonances_approx(omega: FrequencyVector, K: int, tol: float) -> ResonanceModule:
    """Resonance lattice generated by near-resonant ``k`` with ``|k|_inf <= K``.

    Every ``k`` with ``|omega . k| <= tol`` is collected and the lattice they
    generate is returned, flagged approximate.
    """
    if K < 1 or not tol > 0:
        raise ValueError("need K >= 1 and tol > 0")
    w = omega.as_array()
    d = omega.d
    if d == 1:
        return ResonanceModule(omega, (), approximate=True)
    grid = _half_space_grid(d, K)
    hits = grid[np.abs(grid @ w) <= tol]
    for k in hits:
        if np.all(k >= 0) or np.all(k <= 0):
            raise ValueError(
                f"tolerance too coarse: k={tuple(int(a) for a in k)} cannot annihilate positive frequencies"
            )
    basis = lattice_basis(hits.tolist(), d)
    if len(basis) >= d:
        raise ValueError("tolerance too coarse: resonance rank would reach d")
    return ResonanceModule(omega, tuple(tuple(v) for v in basis), approximate=True)


def is_resonant(module: ResonanceModule, k) -> bool:
    """Whether the integer vector ``k`` lies in the lattice."""
    k = [int(a) for a in k]
    if len(k) != module.d:
        raise ValueError(f"expected a {module.d}-vector, got length {len(k)}")
    if not any(k):
        return True
    if not module.basis:
        return False
    return _in_span([list(r) for r in module._echelon], k)


def _min_nonresonant(omega: FrequencyVector, module: ResonanceModule, K: int):
    grid = _half_space_grid(omega.d, K)
    best = None
    for k in grid:
        if is_resonant(module, k):
            continue
        v = abs(omega.dot(k))
        if best is None or v < best:
            best = v
    return best


def diophantine_constants(omega: FrequencyVector, K: int = 10) -> DiophantineEstimate:
    """Exact small-denominator constants for rational frequencies.

    With ``Q`` the common denominator, ``Q * omega . k`` is a nonzero integer
    off the lattice, so ``(C, nu) = (Q, 0)``.  The bound is also confirmed by
    enumeration over ``|k|_inf <= K``.
    """
    if not omega.is_exact:
        raise ValueError("diophantine_constants needs exact frequencies; see diophantine_fit")
    Q = omega.common_denominator()
    module = resonance_module(omega)
    m = _min_nonresonant(omega, module, K) if omega.d > 0 else None
    if m is not None and m * Q < 1:
        raise AssertionError("lcm bound violated; lattice computation is inconsistent")
    return DiophantineEstimate(
        C=float(Q), nu=0.0, exact=True, search_radius=K,
        observed_min=float(m) if m is not None else float("nan"),
    )


def diophantine_fit(omega: FrequencyVector, K: int = 20, tol: float = 1e-9) -> DiophantineEstimate:
    """Empirical ``(C, nu)`` for float frequencies; never labelled exact.

    The running minimum ``m(R)`` of ``|omega . k|`` over nonresonant
    ``|k|_inf <= R`` is enveloped by ``1/m(R) <= C R^nu`` with ``nu`` from a
    least squares fit of ``log(1/m)`` against ``log R``, and ``C`` raised so
    the envelope holds at every sampled ``R``.
    """
    module = detect_resonances_approx(omega, K, tol) if omega.d > 1 else ResonanceModule(omega, (), True)
    w = omega.as_array()
    grid = _half_space_grid(omega.d, K)
    keep = np.array([not is_resonant(module, k) for k in grid], dtype=bool)
    grid = grid[keep]
    vals = np.abs(grid @ w)
    norms = np.abs(grid).max(axis=1)
    Rs = np.arange(1, K + 1)
    mins = np.array([vals[norms <= R].min() for R in Rs])
    y = np.log(1.0 / mins)
    x = np.log(Rs.astype(float))
    nu = max(0.0, float(np.polyfit(x, y, 1)[0])) if K > 1 else 0.0
    C = float(np.max(np.exp(y - nu * x)))
    return DiophantineEstimate(C=C, nu=nu, exact=False, search_radius=K, observed_min=float(mins[-1]))


def torus_generators(module: ResonanceModule) -> np.ndarray:
    """Integer ``d x d_omega`` matrix ``M`` with ``tau = M theta`` covering the minimal torus.

    The columns form a basis of the integer vectors orthogonal to the
    resonance lattice, so ``theta in [0, 2 pi)^{d_omega}`` maps onto the
    closure of the flow direction with Haar measure pushed forward to Haar.
    """
    d = module.d
    cols = integer_kernel([list(r) for r in module.basis], d)
    return np.array(cols, dtype=np.int64).T.reshape(d, len(cols))


def brute_force_resonances(omega: FrequencyVector, K: int) -> list[tuple]:
    """All nonzero ``k`` with ``|k|_inf <= K`` and ``omega . k = 0`` (exact)."""
    out = []
    for k in itertools.product(range(-K, K + 1), repeat=omega.d):
        if any(k) and omega.dot(k) == 0:
            out.append(k)
    return out
