"""Polynomial symbols in the complex coordinates zeta, zetabar.

A symbol ``a(z) = sum c_ab zeta^a zetabar^b`` with ``zeta_j = (x_j + i xi_j)/sqrt 2``
is stored as a dict ``{(alpha, beta): c}``.  Phase points are laid out as
``z = (x_1, ..., x_d, xi_1, ..., xi_d)``.

Conventions
-----------
Poisson bracket ``{a, b} = d_xi a . d_x b - d_x a . d_xi b``, so that
``{H, f} = d/dt (f o phi_t)`` at ``t = 0``.  In complex coordinates this is
``i sum_j (d_zeta_j a d_zetabar_j b - d_zetabar_j a d_zeta_j b)`` and
``{zeta_j, zetabar_j} = i``.

Moyal product ``a # b = exp[(hbar/2) sum_j (<d_zeta_j d_zetabar_j> - <d_zetabar_j d_zeta_j>)] a b``
(left arrow on ``a``, right arrow on ``b``), so ``zeta # zetabar - zetabar # zeta = hbar``
and ``(i/hbar)[a, b] -> {a, b}``.
"""

from __future__ import annotations

import itertools
import math
from fractions import Fraction
from typing import Iterable, Mapping

import numpy as np

from ..exact import GaussianRational, exact_real, to_coeff

Key = tuple  # (alpha, beta)


def _is_zero(c) -> bool:
    return not c


def _add_into(dst: dict, key, c):
    if key in dst:
        v = dst[key] + c
        if _is_zero(v):
            del dst[key]
        else:
            dst[key] = v
    elif not _is_zero(c):
        dst[key] = c


def _hbar(h):
    """hbar as an exact Fraction when possible."""
    if isinstance(h, (int, float, Fraction, str)):
        return exact_real(h)
    return h


class WickSymbol:
    """Finite polynomial in ``zeta, zetabar`` with exact or complex coefficients."""

    __slots__ = ("d", "coeffs", "_hash")

    def __init__(self, d: int, coeffs: Mapping | None = None):
        if d < 1:
            raise ValueError("dimension must be >= 1")
        self.d = int(d)
        out: dict = {}
        for (a, b), c in (coeffs or {}).items():
            a = tuple(int(x) for x in a)
            b = tuple(int(x) for x in b)
            if len(a) != d or len(b) != d:
                raise ValueError("multi-index has wrong length")
            if min(a + b) < 0:
                raise ValueError("negative exponent")
            _add_into(out, (a, b), to_coeff(c))
        self.coeffs = out
        self._hash = None

    @classmethod
    def _raw(cls, d, coeffs):
        obj = object.__new__(cls)
        obj.d = d
        obj.coeffs = coeffs
        obj._hash = None
        return obj

    # constructors ------------------------------------------------------
    @classmethod
    def zero(cls, d):
        return cls._raw(d, {})

    @classmethod
    def constant(cls, d, c=1):
        return cls(d, {((0,) * d, (0,) * d): c})

    @classmethod
    def monomial(cls, alpha, beta, c=1):
        return cls(len(alpha), {(tuple(alpha), tuple(beta)): c})

    @classmethod
    def zeta(cls, d, j):
        e = tuple(int(i == j) for i in range(d))
        return cls(d, {(e, (0,) * d): 1})

    @classmethod
    def zetabar(cls, d, j):
        e = tuple(int(i == j) for i in range(d))
        return cls(d, {((0,) * d, e): 1})

    @classmethod
    def action(cls, d, j):
        """``H_j = |zeta_j|^2 = (x_j^2 + xi_j^2)/2``."""
        e = tuple(int(i == j) for i in range(d))
        return cls(d, {(e, e): 1})

    @classmethod
    def harmonic(cls, omega):
        """``H = sum_j omega_j |zeta_j|^2``; accepts a FrequencyVector or a sequence."""
        entries = getattr(omega, "entries", omega)
        d = len(entries)
        out = cls.zero(d)
        for j, w in enumerate(entries):
            out = out + cls.action(d, j) * (exact_real(w) if not isinstance(w, complex) else w)
        return out

    @classmethod
    def from_literal(cls, d, terms: Iterable[Mapping]):
        """Build from ``[{alpha, beta, re, im}, ...]`` records."""
        coeffs: dict = {}
        for t in terms:
            c = GaussianRational(exact_real(t.get("re", 0)), exact_real(t.get("im", 0)))
            _add_into(coeffs, (tuple(t["alpha"]), tuple(t["beta"])), c)
        return cls(d, coeffs)

    def to_literal(self) -> list[dict]:
        out = []
        for (a, b), c in sorted(self.coeffs.items()):
            if isinstance(c, GaussianRational):
                re, im = str(c.re), str(c.im)
            else:
                re, im = float(c.real), float(c.imag)
            out.append({"alpha": list(a), "beta": list(b), "re": re, "im": im})
        return out

    # basic protocol ----------------------------------------------------
    def __repr__(self):
        if not self.coeffs:
            return f"WickSymbol(d={self.d}, 0)"
        parts = []
        for (a, b), c in sorted(self.coeffs.items()):
            mono = "".join(
                (f"z{j+1}" + (f"^{a[j]}" if a[j] > 1 else "")) * bool(a[j]) for j in range(self.d)
            ) + "".join(
                (f"zb{j+1}" + (f"^{b[j]}" if b[j] > 1 else "")) * bool(b[j]) for j in range(self.d)
            )
            parts.append(f"{c}*{mono or '1'}")
        return f"WickSymbol(d={self.d}, " + " + ".join(parts) + ")"

    def __eq__(self, other):
        if isinstance(other, WickSymbol):
            return self.d == other.d and self.coeffs == other.coeffs
        if isinstance(other, (int, Fraction, GaussianRational)) and not other:
            return not self.coeffs
        return NotImplemented

    def __hash__(self):
        if self._hash is None:
            self._hash = hash((self.d, frozenset(self.coeffs.items())))
        return self._hash

    def __bool__(self):
        return bool(self.coeffs)

    def __len__(self):
        return len(self.coeffs)

    def items(self):
        return self.coeffs.items()

    def _check(self, other):
        if not isinstance(other, WickSymbol):
            raise TypeError(f"expected WickSymbol, got {type(other).__name__}")
        if other.d != self.d:
            raise ValueError(f"dimension mismatch: {self.d} vs {other.d}")

    # linear structure --------------------------------------------------
    def __add__(self, other):
        if not isinstance(other, WickSymbol):
            other = WickSymbol.constant(self.d, other)
        self._check(other)
        out = dict(self.coeffs)
        for k, c in other.coeffs.items():
            _add_into(out, k, c)
        return WickSymbol._raw(self.d, out)

    __radd__ = __add__

    def __neg__(self):
        return WickSymbol._raw(self.d, {k: -c for k, c in self.coeffs.items()})

    def __sub__(self, other):
        return self + (-other)

    def __rsub__(self, other):
        return (-self) + other

    def scale(self, s):
        s = to_coeff(s)
        if _is_zero(s):
            return WickSymbol.zero(self.d)
        out = {}
        for k, c in self.coeffs.items():
            v = c * s
            if not _is_zero(v):
                out[k] = v
        return WickSymbol._raw(self.d, out)

    def __mul__(self, other):
        if isinstance(other, WickSymbol):
            return mul(self, other)
        return self.scale(other)

    def __rmul__(self, other):
        return self.scale(other)

    def __truediv__(self, s):
        s = to_coeff(s)
        return self.scale(1 / s if not isinstance(s, GaussianRational) else GaussianRational(1) / s)

    # structure ---------------------------------------------------------
    @property
    def degree(self) -> int:
        return max((sum(a) + sum(b) for a, b in self.coeffs), default=0)

    @property
    def is_exact(self) -> bool:
        return all(isinstance(c, GaussianRational) for c in self.coeffs.values())

    def conj(self) -> "WickSymbol":
        """Complex conjugate function: swaps the roles of zeta and zetabar."""
        return WickSymbol._raw(self.d, {(b, a): c.conjugate() for (a, b), c in self.coeffs.items()})

    def is_real(self, tol: float = 0.0) -> bool:
        if tol == 0.0:
            return self.conj() == self
        diff = self - self.conj()
        return diff.l1_norm() <= tol * max(1.0, self.l1_norm())

    def real_part(self) -> "WickSymbol":
        return (self + self.conj()).scale(Fraction(1, 2))

    def l1_norm(self) -> float:
        """Coefficient l1 norm."""
        return float(sum(abs(complex(c)) for c in self.coeffs.values()))

    def numeric(self) -> "WickSymbol":
        return WickSymbol._raw(self.d, {k: complex(c) for k, c in self.coeffs.items()})

    def mode(self, key) -> tuple:
        a, b = key
        return tuple(bj - aj for aj, bj in zip(a, b))

    def modes(self) -> set:
        return {self.mode(k) for k in self.coeffs}

    def filter(self, pred) -> "WickSymbol":
        return WickSymbol._raw(self.d, {k: c for k, c in self.coeffs.items() if pred(k)})

    def diff_zeta(self, j) -> "WickSymbol":
        out: dict = {}
        for (a, b), c in self.coeffs.items():
            if a[j]:
                a2 = a[:j] + (a[j] - 1,) + a[j + 1:]
                _add_into(out, (a2, b), c * a[j])
        return WickSymbol._raw(self.d, out)

    def diff_zetabar(self, j) -> "WickSymbol":
        out: dict = {}
        for (a, b), c in self.coeffs.items():
            if b[j]:
                b2 = b[:j] + (b[j] - 1,) + b[j + 1:]
                _add_into(out, (a, b2), c * b[j])
        return WickSymbol._raw(self.d, out)

    # evaluation --------------------------------------------------------
    def _powers(self, z):
        z = np.asarray(z, dtype=float)
        single = z.ndim == 1
        z = np.atleast_2d(z)
        if z.shape[-1] != 2 * self.d:
            raise ValueError(f"phase point must have length {2 * self.d}, got {z.shape[-1]}")
        if not np.all(np.isfinite(z)):
            raise ValueError("phase point has non-finite entries")
        zeta = (z[:, : self.d] + 1j * z[:, self.d:]) / math.sqrt(2.0)
        return single, zeta

    def __call__(self, z):
        return evaluate(self, z)


def evaluate(a: WickSymbol, z):
    """Pointwise value at one point ``(2d,)`` or many points ``(n, 2d)``."""
    single, zeta = a._powers(z)
    zb = zeta.conj()
    out = np.zeros(zeta.shape[0], dtype=complex)
    cache: dict = {}

    def pw(arr, j, p, tag):
        key = (tag, j, p)
        if key not in cache:
            cache[key] = arr[:, j] ** p
        return cache[key]

    for (al, be), c in a.coeffs.items():
        term = np.full(zeta.shape[0], complex(c))
        for j in range(a.d):
            if al[j]:
                term = term * pw(zeta, j, al[j], 0)
            if be[j]:
                term = term * pw(zb, j, be[j], 1)
        out += term
    return out[0] if single else out


def grad(a: WickSymbol, z, check_real: bool = True):
    """Gradient ``(d_x a, d_xi a)`` of a real symbol at ``z``.

    Uses ``d_x = (d_zeta + d_zetabar)/sqrt 2`` and ``d_xi = i (d_zeta - d_zetabar)/sqrt 2``.
    """
    if check_real and not a.is_real(tol=1e-12):
        raise ValueError("grad needs a real-valued symbol")
    d = a.d
    gx, gxi = [], []
    for j in range(d):
        dz = evaluate(a.diff_zeta(j), z)
        dzb = evaluate(a.diff_zetabar(j), z)
        gx.append(np.real((dz + dzb) / math.sqrt(2.0)))
        gxi.append(np.real(1j * (dz - dzb) / math.sqrt(2.0)))
    return np.stack(gx, axis=-1), np.stack(gxi, axis=-1)


def mul(a: WickSymbol, b: WickSymbol) -> WickSymbol:
    a._check(b)
    out: dict = {}
    for (a1, b1), c1 in a.coeffs.items():
        for (a2, b2), c2 in b.coeffs.items():
            key = (
                tuple(x + y for x, y in zip(a1, a2)),
                tuple(x + y for x, y in zip(b1, b2)),
            )
            _add_into(out, key, c1 * c2)
    return WickSymbol._raw(a.d, out)


_I = GaussianRational(0, 1)


def poisson(a: WickSymbol, b: WickSymbol) -> WickSymbol:
    """``{a, b} = i sum_j (d_zeta_j a d_zetabar_j b - d_zetabar_j a d_zeta_j b)``."""
    a._check(b)
    out = WickSymbol.zero(a.d)
    for j in range(a.d):
        out = out + mul(a.diff_zeta(j), b.diff_zetabar(j)) - mul(a.diff_zetabar(j), b.diff_zeta(j))
    return out.scale(_I)


def _comb(n, k):
    return math.comb(n, k)


def moyal(a: WickSymbol, b: WickSymbol, hbar) -> WickSymbol:
    """Exact Moyal product of two polynomials.

    For ``a = zeta^al zetabar^be`` and ``b = zeta^ga zetabar^de`` the product is the
    finite sum over ``p <= min(al, de)``, ``q <= min(be, ga)`` of
    ``(hbar/2)^{|p|+|q|} (-1)^{|q|} prod_j C(al,p) C(de,p) p! C(be,q) C(ga,q) q!``
    times ``zeta^{al+ga-p-q} zetabar^{be+de-p-q}``.
    """
    a._check(b)
    h = _hbar(hbar)
    if h < 0:
        raise ValueError("hbar must be nonnegative")
    half = h / 2
    d = a.d
    out: dict = {}
    for (al, be), c1 in a.coeffs.items():
        for (ga, de), c2 in b.coeffs.items():
            c12 = c1 * c2
            ranges_p = [range(min(al[j], de[j]) + 1) for j in range(d)]
            ranges_q = [range(min(be[j], ga[j]) + 1) for j in range(d)]
            for p in itertools.product(*ranges_p):
                wp = 1
                for j in range(d):
                    wp *= _comb(al[j], p[j]) * _comb(de[j], p[j]) * math.factorial(p[j])
                for q in itertools.product(*ranges_q):
                    n = sum(p) + sum(q)
                    if n and h == 0:
                        continue
                    w = wp
                    for j in range(d):
                        w *= _comb(be[j], q[j]) * _comb(ga[j], q[j]) * math.factorial(q[j])
                    if sum(q) % 2:
                        w = -w
                    key = (
                        tuple(al[j] + ga[j] - p[j] - q[j] for j in range(d)),
                        tuple(be[j] + de[j] - p[j] - q[j] for j in range(d)),
                    )
                    _add_into(out, key, c12 * (w * half**n))
    return WickSymbol._raw(d, out)


def commutator_h(a: WickSymbol, b: WickSymbol, hbar) -> WickSymbol:
    """``[a, b]_hbar = a # b - b # a``."""
    return moyal(a, b, hbar) - moyal(b, a, hbar)


def flow_pullback(a: WickSymbol, tau) -> WickSymbol:
    """``a o Phi_tau``: multiplies ``c_ab`` by ``exp(i (beta - alpha) . tau)``."""
    tau = [float(t) for t in tau]
    if len(tau) != a.d:
        raise ValueError("tau has wrong length")
    out: dict = {}
    for (al, be), c in a.coeffs.items():
        ph = sum((b - x) * t for x, b, t in zip(al, be, tau))
        if ph == 0:
            _add_into(out, (al, be), c)
        else:
            _add_into(out, (al, be), complex(c) * complex(math.cos(ph), math.sin(ph)))
    return WickSymbol._raw(a.d, out)


def fourier_mode(a: WickSymbol, k) -> WickSymbol:
    """Torus Fourier coefficient ``a_k = int a o Phi_tau e^{-ik.tau} dtau``.

    Equal to ``(2 pi)^d`` times the monomials with ``beta - alpha = k``.
    """
    k = tuple(int(x) for x in k)
    if len(k) != a.d:
        raise ValueError("k has wrong length")
    part = a.filter(lambda key: a.mode(key) == k)
    return part.scale((2 * math.pi) ** a.d)


def average(a: WickSymbol, module) -> WickSymbol:
    """Flow average: keep monomials whose mode ``beta - alpha`` is resonant."""
    if module.d != a.d:
        raise ValueError("module dimension does not match the symbol")
    from ..frequencies import is_resonant

    memo: dict = {}

    def keep(key):
        m = a.mode(key)
        if m not in memo:
            memo[m] = is_resonant(module, m)
        return memo[m]

    return a.filter(keep)
