"""Finite sums of plane waves ``a(z) = sum_j c_j exp(i w_j . z)``.

The Fourier measure of such a symbol is a finite sum of point masses, so the
analytic norm ``||a||_s = sum_j |c_j| exp(s |w_j|)`` is computed exactly.
The Moyal product acts on plane waves by a pure phase,

    e_w # e_v = exp((i hbar / 2) S(w, v)) e_{w+v},
    S((x, xi), (y, eta)) = xi . y - x . eta,

consistent with the bracket ``{e_w, e_v} = -S(w, v) e_{w+v}`` of the Wick module.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from ..exact import GaussianRational


_KEY_DIGITS = 12


def _key(w) -> tuple:
    # frequencies equal to 12 decimals share a term; + 0.0 folds -0.0 into 0.0
    return tuple(round(float(x), _KEY_DIGITS) + 0.0 for x in w)


class PlaneWaveSymbol:
    """Plane-wave sum with distinct frequencies ``w`` in ``R^{2d}``."""

    __slots__ = ("d", "terms")

    def __init__(self, d: int, terms=None):
        if d < 1:
            raise ValueError("dimension must be >= 1")
        self.d = int(d)
        out: dict = {}
        items = terms.items() if isinstance(terms, dict) else (terms or [])
        for w, c in items:
            w = _key(w)
            if len(w) != 2 * d:
                raise ValueError(f"frequency must have length {2 * d}")
            if not all(math.isfinite(x) for x in w):
                raise ValueError("non-finite frequency")
            out[w] = out.get(w, 0j) + complex(c)
        self.terms = {w: c for w, c in out.items() if c != 0}

    @classmethod
    def _raw(cls, d, terms):
        obj = object.__new__(cls)
        obj.d = d
        obj.terms = terms
        return obj

    @classmethod
    def wave(cls, w, c=1.0):
        w = _key(w)
        return cls(len(w) // 2, {w: c})

    @classmethod
    def constant(cls, d, c=1.0):
        return cls(d, {(0.0,) * (2 * d): c})

    @classmethod
    def from_literal(cls, d, terms):
        return cls(d, [(t["w"], complex(float(t.get("re", 0)), float(t.get("im", 0)))) for t in terms])

    def __repr__(self):
        body = " + ".join(f"{c:.4g}*e{list(w)}" for w, c in sorted(self.terms.items()))
        return f"PlaneWaveSymbol(d={self.d}, {body or '0'})"

    def __len__(self):
        return len(self.terms)

    def _check(self, other):
        if not isinstance(other, PlaneWaveSymbol):
            raise TypeError(f"expected PlaneWaveSymbol, got {type(other).__name__}")
        if other.d != self.d:
            raise ValueError("dimension mismatch")

    def __eq__(self, other):
        if not isinstance(other, PlaneWaveSymbol):
            return NotImplemented
        return self.d == other.d and self.terms == other.terms

    def __add__(self, other):
        self._check(other)
        out = dict(self.terms)
        for w, c in other.terms.items():
            out[w] = out.get(w, 0j) + c
        return PlaneWaveSymbol._raw(self.d, {w: c for w, c in out.items() if c != 0})

    def __neg__(self):
        return PlaneWaveSymbol._raw(self.d, {w: -c for w, c in self.terms.items()})

    def __sub__(self, other):
        return self + (-other)

    def scale(self, s):
        s = complex(s)
        if s == 0:
            return PlaneWaveSymbol._raw(self.d, {})
        return PlaneWaveSymbol._raw(self.d, {w: c * s for w, c in self.terms.items()})

    def __mul__(self, other):
        if isinstance(other, PlaneWaveSymbol):
            return mul(self, other)
        return self.scale(other)

    def __rmul__(self, other):
        return self.scale(other)

    def conj(self):
        return PlaneWaveSymbol._raw(
            self.d, {_key(-np.asarray(w)): c.conjugate() for w, c in self.terms.items()}
        )

    def is_real(self, tol: float = 0.0) -> bool:
        if tol == 0.0:
            return self.conj() == self
        return self.distance(self.conj()) <= tol * max(1.0, norm_As(self, 0.0))

    def distance(self, other, wtol: float = 1e-12) -> float:
        """l1 distance between coefficients after matching frequencies within ``wtol``."""
        self._check(other)
        left = list(self.terms.items())
        right = dict(other.terms)
        total = 0.0
        for w, c in left:
            match = None
            if w in right:
                match = w
            else:
                for v in right:
                    if max(abs(a - b) for a, b in zip(w, v)) <= wtol:
                        match = v
                        break
            if match is None:
                total += abs(c)
            else:
                total += abs(c - right.pop(match))
        total += sum(abs(c) for c in right.values())
        return total

    def frequencies(self) -> np.ndarray:
        return np.array(list(self.terms.keys()), dtype=float).reshape(-1, 2 * self.d)

    def coefficients(self) -> np.ndarray:
        return np.array(list(self.terms.values()), dtype=complex)

    def __call__(self, z):
        return evaluate(self, z)


def evaluate(a: PlaneWaveSymbol, z):
    z = np.asarray(z, dtype=float)
    single = z.ndim == 1
    z = np.atleast_2d(z)
    if z.shape[-1] != 2 * a.d:
        raise ValueError(f"phase point must have length {2 * a.d}, got {z.shape[-1]}")
    if not a.terms:
        out = np.zeros(z.shape[0], dtype=complex)
    else:
        out = np.exp(1j * z @ a.frequencies().T) @ a.coefficients()
    return out[0] if single else out


def symplectic(w, v, d: int) -> float:
    """``S((x, xi), (y, eta)) = xi . y - x . eta``."""
    w = np.asarray(w, dtype=float)
    v = np.asarray(v, dtype=float)
    return float(w[d:] @ v[:d] - w[:d] @ v[d:])


def mul(a: PlaneWaveSymbol, b: PlaneWaveSymbol) -> PlaneWaveSymbol:
    a._check(b)
    out: dict = {}
    for w, c in a.terms.items():
        for v, e in b.terms.items():
            k = _key(np.add(w, v))
            out[k] = out.get(k, 0j) + c * e
    return PlaneWaveSymbol._raw(a.d, {w: c for w, c in out.items() if c != 0})


def moyal(a: PlaneWaveSymbol, b: PlaneWaveSymbol, hbar) -> PlaneWaveSymbol:
    a._check(b)
    h = float(hbar)
    if h < 0:
        raise ValueError("hbar must be nonnegative")
    d = a.d
    out: dict = {}
    for w, c in a.terms.items():
        for v, e in b.terms.items():
            k = _key(np.add(w, v))
            ph = 0.5 * h * symplectic(w, v, d)
            out[k] = out.get(k, 0j) + c * e * complex(math.cos(ph), math.sin(ph))
    return PlaneWaveSymbol._raw(d, {w: c for w, c in out.items() if c != 0})


def commutator_h(a, b, hbar):
    return moyal(a, b, hbar) - moyal(b, a, hbar)


def poisson(a: PlaneWaveSymbol, b: PlaneWaveSymbol) -> PlaneWaveSymbol:
    """``{e_w, e_v} = -S(w, v) e_{w+v}``."""
    a._check(b)
    d = a.d
    out: dict = {}
    for w, c in a.terms.items():
        for v, e in b.terms.items():
            k = _key(np.add(w, v))
            out[k] = out.get(k, 0j) - symplectic(w, v, d) * c * e
    return PlaneWaveSymbol._raw(d, {w: c for w, c in out.items() if c != 0})


def rotate(w, tau, d: int) -> tuple:
    """Frequency of ``e_w o Phi_tau``."""
    w = np.asarray(w, dtype=float)
    tau = np.asarray(tau, dtype=float)
    c, s = np.cos(tau), np.sin(tau)
    wx, wxi = w[:d], w[d:]
    return _key(np.concatenate([c * wx - s * wxi, s * wx + c * wxi]))


def flow_pullback(a: PlaneWaveSymbol, tau) -> PlaneWaveSymbol:
    tau = np.asarray(tau, dtype=float)
    if tau.shape != (a.d,):
        raise ValueError("tau has wrong length")
    out: dict = {}
    for w, c in a.terms.items():
        k = rotate(w, tau, a.d)
        out[k] = out.get(k, 0j) + c
    return PlaneWaveSymbol._raw(a.d, {w: c for w, c in out.items() if c != 0})


def norm_As(a, s: float) -> float:
    """``sum_j |c_j| exp(s |w_j|)``."""
    if not isinstance(a, PlaneWaveSymbol):
        raise TypeError("polynomial symbols have no finite A_s norm")
    if s < 0:
        raise ValueError("s must be nonnegative")
    if not a.terms:
        return 0.0
    return float(np.abs(a.coefficients()) @ np.exp(s * np.linalg.norm(a.frequencies(), axis=1)))


# ---------------------------------------------------------------------------
# averaging over the minimal torus
# ---------------------------------------------------------------------------

def _torus_grid(M: np.ndarray, N: int) -> np.ndarray:
    """Points ``tau = M theta`` on an equal-weight ``N^{d_omega}`` grid."""
    d, r = M.shape
    th = 2 * np.pi * np.arange(N) / N
    if r == 0:
        return np.zeros((1, d))
    grids = np.array(np.meshgrid(*([th] * r), indexing="ij")).reshape(r, -1).T
    return grids @ M.T


def _quadrature_symbol(a: PlaneWaveSymbol, M: np.ndarray, N: int) -> PlaneWaveSymbol:
    taus = _torus_grid(M, N)
    wgt = 1.0 / len(taus)
    out: dict = {}
    for w, c in a.terms.items():
        if not any(w):
            out[w] = out.get(w, 0j) + c
            continue
        for tau in taus:
            k = rotate(w, tau, a.d)
            out[k] = out.get(k, 0j) + c * wgt
    return PlaneWaveSymbol._raw(a.d, {w: c for w, c in out.items() if c != 0})


@dataclass
class QuadratureAverage:
    """Quadrature approximant of the flow average of a plane-wave symbol.

    ``fine`` uses ``2N`` nodes per torus direction and ``coarse`` uses ``N``;
    their pointwise difference is the reported error estimate.
    """

    symbol: PlaneWaveSymbol
    coarse: PlaneWaveSymbol
    N: int
    d_omega: int
    approximate: bool

    def __call__(self, z):
        return evaluate(self.symbol, z)

    def error_estimate(self, z) -> float:
        return float(np.max(np.abs(evaluate(self.symbol, z) - evaluate(self.coarse, z))))

    def norm_As(self, s: float) -> float:
        return norm_As(self.symbol, s)


def average_planewave_quadrature(a: PlaneWaveSymbol, omega, N: int = 16, module=None) -> QuadratureAverage:
    """Average ``a o Phi_tau`` over the minimal torus with an equal-weight grid.

    Parameters
    ----------
    a : PlaneWaveSymbol
    omega : FrequencyVector
    N : int
        Nodes per torus direction (at least 8); the estimate compares ``N`` and ``2N``.
    module : ResonanceModule, optional
        Required for float frequencies; the result is then flagged approximate.
    """
    from ..frequencies import resonance_module, torus_generators

    if N < 8:
        raise ValueError("quadrature order must be >= 8")
    if omega.d != a.d:
        raise ValueError("dimension mismatch")
    approx = not omega.is_exact
    if module is None:
        if approx:
            raise ValueError("float frequencies need an explicit resonance module")
        module = resonance_module(omega)
    approx = approx or module.approximate
    M = torus_generators(module)
    fine = _quadrature_symbol(a, M, 2 * N)
    coarse = _quadrature_symbol(a, M, N)
    return QuadratureAverage(fine, coarse, N, M.shape[1], approx)


@dataclass
class ArhoNorm:
    value: float
    tail: float
    Kmax: int
    partial: list


def norm_Arho_s(a: PlaneWaveSymbol, omega, rho: float, s: float, Kmax: int = 4,
                tail_tol: float = 1e-8, N: int | None = None) -> ArhoNorm:
    """``(2 pi)^{-d} sum_{|k|_inf <= Kmax} ||a_k||_s e^{rho |k|}`` with a tail check.

    The torus Fourier coefficients ``a_k`` are plane-wave sums obtained by
    equal-weight quadrature over ``T^d``.  The contribution of the outermost
    shell ``|k|_inf = Kmax`` is the tail indicator; when it exceeds
    ``tail_tol`` times the partial sum the series is declared unresolved.

    Any term with ``w != 0`` has ``||a_k||_s = (2 pi)^d e^{s|w|}`` for every
    ``k`` it excites, so only symbols made of flow-invariant constants pass
    the tail check.
    """
    if not (rho > 0 and s > 0):
        raise ValueError("rho and s must be positive")
    if not omega.is_exact:
        raise ValueError("norm_Arho_s needs exact frequencies")
    d = a.d
    if N is None:
        N = 4 * Kmax + 8
    th = 2 * np.pi * np.arange(N) / N
    taus = np.array(np.meshgrid(*([th] * d), indexing="ij")).reshape(d, -1).T
    vol = (2 * np.pi) ** d
    wgt = vol / len(taus)
    # rotated copies of every term, shared across k
    rot = []
    for w, c in a.terms.items():
        if not any(w):
            rot.append((w, c, None))
        else:
            rot.append((w, c, [rotate(w, t, d) for t in taus]))
    ks = np.array(np.meshgrid(*([np.arange(-Kmax, Kmax + 1)] * d), indexing="ij")).reshape(d, -1).T
    shells = np.zeros(Kmax + 1)
    for k in ks:
        phase = np.exp(-1j * taus @ k)
        out: dict = {}
        for w, c, copies in rot:
            if copies is None:
                if not any(k):
                    out[w] = out.get(w, 0j) + c * vol
                continue
            for ph, v in zip(phase, copies):
                out[v] = out.get(v, 0j) + c * ph * wgt
        ak = PlaneWaveSymbol._raw(d, {w: c for w, c in out.items() if abs(c) > 1e-14})
        kn = float(np.linalg.norm(k))
        shells[int(np.max(np.abs(k)))] += norm_As(ak, s) * math.exp(rho * kn) / vol
    partial = list(np.cumsum(shells))
    total = partial[-1]
    tail = shells[-1]
    if tail > tail_tol * max(total, 1e-300) and Kmax > 0:
        raise ValueError(
            f"Kmax too small: outer shell contributes {tail:.3e} of {total:.3e}"
        )
    return ArhoNorm(float(total), float(tail), Kmax, partial)
