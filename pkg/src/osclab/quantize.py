"""Weyl quantization on truncated Fock bases.

Ladder convention: ``a_j |n> = sqrt(hbar n_j) |n - e_j>`` so that
``Op(zeta_j) = a_j``, ``Op(zetabar_j) = a_j^dagger`` and ``[a_j, a_j^dagger] = hbar``.
Monomials are quantized one mode at a time by the recursion

    Op(zeta s)    = Op(zeta) Op(s)    - (hbar/2) Op(d_zetabar s)
    Op(zetabar s) = Op(zetabar) Op(s) + (hbar/2) Op(d_zeta s)

which is the Moyal product with a linear symbol.  Per-mode matrices are
computed on a single-mode space large enough that every retained entry is
exact, so each operator is the exact compression of the true one onto the
basis.
"""

from __future__ import annotations

import itertools
import math
import warnings
from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np
from scipy.linalg import expm
from scipy.special import eval_genlaguerre, gammaln

from .exact import exact_real
from .frequencies import FrequencyVector
from .symbols.planewave import PlaneWaveSymbol
from .symbols.wick import WickSymbol

__all__ = [
    "FockBasis",
    "FockOperator",
    "harmonic_matrix",
    "op_weyl",
    "op_weyl_planewave",
    "build_P",
    "operator_norm",
    "ladder",
    "convention_oracle",
]


# ---------------------------------------------------------------------------
# bases and operators
# ---------------------------------------------------------------------------

@dataclass(frozen=True, eq=False)
class FockBasis:
    """Ordered set of occupation vectors with the semiclassical parameter."""

    d: int
    hbar: float
    states: np.ndarray
    truncation: dict
    omega: FrequencyVector | None = None
    _codes: np.ndarray = field(default=None, repr=False)
    _order: np.ndarray = field(default=None, repr=False)

    def __post_init__(self):
        st = np.asarray(self.states, dtype=np.int64).reshape(-1, self.d)
        if len(st) == 0:
            raise ValueError("empty Fock basis")
        if np.any(st < 0):
            raise ValueError("negative occupation")
        st = np.unique(st, axis=0)  # sorted lexicographically, deduplicated
        object.__setattr__(self, "states", st)
        st.setflags(write=False)
        if not self.hbar > 0:
            raise ValueError("hbar must be positive")
        codes = self._encode(st)
        order = np.argsort(codes)
        object.__setattr__(self, "_codes", codes[order])
        object.__setattr__(self, "_order", order)

    # construction ----------------------------------------------------
    @classmethod
    def degree_cap(cls, d: int, hbar: float, N: int) -> "FockBasis":
        """All ``n`` with ``|n|_1 <= N``."""
        st = [n for n in itertools.product(range(N + 1), repeat=d) if sum(n) <= N]
        return cls(d, float(hbar), np.array(st), {"kind": "degree_cap", "N": int(N)})

    @classmethod
    def window(cls, omega: FrequencyVector, hbar: float, E: float = 1.0, W: float = 0.25) -> "FockBasis":
        """All ``n`` with ``|hbar omega.(n + 1/2) - E| <= W``."""
        w = omega.as_array()
        d = len(w)
        hbar = float(hbar)
        zero = hbar * w.sum() / 2
        nmax = [int(math.floor((E + W - zero) / (hbar * wj))) + 1 for wj in w]
        st = []
        for n in itertools.product(*[range(m + 1) for m in nmax]):
            e = hbar * float(w @ n) + zero
            if abs(e - E) <= W + 1e-12:
                st.append(n)
        if not st:
            raise ValueError("energy window contains no Fock states")
        return cls(d, hbar, np.array(st), {"kind": "window", "E": float(E), "W": float(W)}, omega)

    def _encode(self, st):
        base = np.int64(1 << 16)
        code = np.zeros(len(st), dtype=np.int64)
        for j in range(self.d):
            code = code * base + st[:, j]
        return code

    # queries ---------------------------------------------------------
    def __len__(self):
        return len(self.states)

    @property
    def size(self) -> int:
        return len(self.states)

    @property
    def max_occupation(self) -> np.ndarray:
        return self.states.max(axis=0)

    def lookup(self, st: np.ndarray) -> np.ndarray:
        """Index of each row of ``st`` in the basis, or -1."""
        st = np.asarray(st, dtype=np.int64).reshape(-1, self.d)
        out = np.full(len(st), -1, dtype=np.int64)
        ok = np.all(st >= 0, axis=1) & np.all(st < (1 << 16), axis=1)
        if not np.any(ok):
            return out
        codes = self._encode(st[ok])
        pos = np.searchsorted(self._codes, codes)
        pos = np.clip(pos, 0, len(self._codes) - 1)
        hit = self._codes[pos] == codes
        idx = np.where(hit, self._order[pos], -1)
        out[ok] = idx
        return out

    def index(self, n) -> int:
        i = int(self.lookup(np.array([n]))[0])
        if i < 0:
            raise KeyError(f"state {tuple(n)} not in basis")
        return i

    def interior(self, g: int) -> np.ndarray:
        """Indices of states whose whole l1-ball of radius ``g`` lies in the basis."""
        keep = np.ones(self.size, dtype=bool)
        shifts = [s for s in itertools.product(range(-g, g + 1), repeat=self.d) if sum(map(abs, s)) <= g]
        for s in shifts:
            tgt = self.states + np.array(s, dtype=np.int64)
            valid = np.all(tgt >= 0, axis=1)
            found = self.lookup(tgt) >= 0
            keep &= found | ~valid
        return np.nonzero(keep)[0]

    def energies(self, omega=None) -> np.ndarray:
        w = (omega or self.omega)
        w = np.ones(self.d) if w is None else w.as_array()
        return self.hbar * (self.states @ w + w.sum() / 2)

    def descriptor(self) -> dict:
        out = {"d": self.d, "hbar": self.hbar, "size": self.size}
        out.update(self.truncation)
        return out


@dataclass(eq=False)
class FockOperator:
    basis: FockBasis
    matrix: np.ndarray
    hermitian: bool | None = None

    def __post_init__(self):
        self.matrix = np.asarray(self.matrix, dtype=complex)
        n = self.basis.size
        if self.matrix.shape != (n, n):
            raise ValueError(f"matrix shape {self.matrix.shape} does not match basis size {n}")
        if self.hermitian:
            dev = np.max(np.abs(self.matrix - self.matrix.conj().T), initial=0.0)
            if dev > 1e-10 * max(1.0, np.max(np.abs(self.matrix), initial=0.0)):
                raise ValueError("matrix flagged Hermitian but is not")

    def _wrap(self, M, herm=None):
        return FockOperator(self.basis, M, herm)

    def __add__(self, other):
        return self._wrap(self.matrix + other.matrix)

    def __sub__(self, other):
        return self._wrap(self.matrix - other.matrix)

    def __mul__(self, s):
        return self._wrap(self.matrix * s)

    __rmul__ = __mul__

    def __matmul__(self, other):
        return self._wrap(self.matrix @ other.matrix)

    @property
    def H(self):
        return self._wrap(self.matrix.conj().T, self.hermitian)

    def hermitian_part(self):
        return self._wrap((self.matrix + self.matrix.conj().T) / 2, True)

    def antihermitian_part(self):
        return self._wrap((self.matrix - self.matrix.conj().T) / 2)

    def block(self, idx):
        idx = np.asarray(idx)
        return self.matrix[np.ix_(idx, idx)]


# ---------------------------------------------------------------------------
# single-mode building blocks
# ---------------------------------------------------------------------------

def ladder(L: int, hbar: float) -> np.ndarray:
    """Annihilation matrix ``a |n> = sqrt(hbar n) |n-1>`` on ``n = 0..L-1``."""
    return np.diag(np.sqrt(hbar * np.arange(1, L)), k=1)


@lru_cache(maxsize=4096)
def _mode_weyl(p: int, q: int, L: int, hbar: float) -> np.ndarray:
    """``Op(zeta^p zetabar^q)`` for one mode on ``n = 0..L-1`` (exact for n <= L-1-p-q)."""
    if p == 0 and q == 0:
        return np.eye(L)
    a = ladder(L, hbar)
    if p > 0:
        out = a @ _mode_weyl(p - 1, q, L, hbar)
        if q > 0:
            out = out - (hbar / 2) * q * _mode_weyl(p - 1, q - 1, L, hbar)
        return out
    return a.T @ _mode_weyl(0, q - 1, L, hbar)


def _mode_weyl_normal(p: int, q: int, L: int, hbar: float) -> np.ndarray:
    """Closed form ``sum_k k! C(p,k) C(q,k) (hbar/2)^k (a^dag)^{q-k} a^{p-k}``."""
    a = ladder(L, hbar)
    ad = a.T
    out = np.zeros((L, L))
    for k in range(min(p, q) + 1):
        c = math.factorial(k) * math.comb(p, k) * math.comb(q, k) * (hbar / 2) ** k
        out += c * np.linalg.matrix_power(ad, q - k) @ np.linalg.matrix_power(a, p - k)
    return out


def op_weyl(a: WickSymbol, basis: FockBasis, symmetrize: bool | None = None) -> FockOperator:
    """Weyl quantization of a polynomial symbol, compressed onto ``basis``.

    Parameters
    ----------
    a : WickSymbol
    basis : FockBasis
    symmetrize : bool, optional
        Replace ``M`` by ``(M + M^H)/2``; defaults to ``a.is_real()``.
    """
    if a.d != basis.d:
        raise ValueError("dimension mismatch")
    hbar = basis.hbar
    deg = a.degree
    nmax = basis.max_occupation
    L = [int(nmax[j]) + deg + 2 for j in range(basis.d)]
    st = basis.states
    n = basis.size
    M = np.zeros((n, n), dtype=complex)
    for (al, be), c in a.coeffs.items():
        shift = np.array(be, dtype=np.int64) - np.array(al, dtype=np.int64)
        tgt = st + shift
        rows = basis.lookup(tgt)
        cols = np.nonzero(rows >= 0)[0]
        if len(cols) == 0:
            continue
        rows = rows[cols]
        val = np.full(len(cols), complex(c))
        for j in range(basis.d):
            Mj = _mode_weyl(al[j], be[j], L[j], hbar)
            val = val * Mj[tgt[cols, j], st[cols, j]]
        np.add.at(M, (rows, cols), val)
    real = a.is_real() if symmetrize is None else symmetrize
    if real:
        M = (M + M.conj().T) / 2
    return FockOperator(basis, M, True if real else None)


def harmonic_matrix(omega: FrequencyVector, basis: FockBasis) -> FockOperator:
    """Diagonal ``hbar sum_j omega_j (n_j + 1/2)``."""
    if omega.d != basis.d:
        raise ValueError("dimension mismatch")
    return FockOperator(basis, np.diag(basis.energies(omega)).astype(complex), True)


def _position_momentum(L: int, hbar: float):
    a = ladder(L, hbar)
    ad = a.T
    xh = (a + ad) / math.sqrt(2.0)
    ph = (a - ad) / (1j * math.sqrt(2.0))
    return xh, ph


def _mode_displacement(wx: float, wxi: float, nmax: int, hbar: float) -> np.ndarray:
    """``exp(i (wx x + wxi xi))`` on one mode in closed form.

    The operator is the displacement ``D(al) = exp(al b* - conj(al) b)`` with
    ``al = sqrt(hbar/2) (i wx - wxi)``, whose entries for ``m >= n`` are
    ``sqrt(n!/m!) al^(m-n) e^(-|al|^2/2) L_n^(m-n)(|al|^2)``; the upper
    triangle follows from ``<m|D(al)|n> = conj(<n|D(-al)|m>)``.
    """
    if wx == 0 and wxi == 0:
        return np.eye(nmax + 1)
    al = math.sqrt(hbar / 2) * complex(-wxi, wx)
    x = abs(al) ** 2
    m, n = np.meshgrid(np.arange(nmax + 1), np.arange(nmax + 1), indexing="ij")
    hi, lo = np.maximum(m, n), np.minimum(m, n)
    k = hi - lo
    lag = eval_genlaguerre(lo, k, x)
    mag = np.exp(0.5 * (gammaln(lo + 1) - gammaln(hi + 1)) + k * math.log(abs(al)) - x / 2)
    phase = np.where(m >= n, (al / abs(al)) ** k, (-np.conj(al) / abs(al)) ** k)
    return mag * phase * lag


def _mode_displacement_expm(wx: float, wxi: float, nmax: int, hbar: float, tol: float = 1e-12):
    """Reference ``exp(i (wx x + wxi xi))`` by a padded matrix exponential."""
    if wx == 0 and wxi == 0:
        return np.eye(nmax + 1)
    amp = math.hypot(wx, wxi) * math.sqrt(hbar / 2)
    pad = 24 + int(8 * amp * math.sqrt(nmax + 1) + 8 * amp * amp)
    prev = None
    for _ in range(8):
        L = nmax + 1 + pad
        xh, ph = _position_momentum(L, hbar)
        D = expm(1j * (wx * xh + wxi * ph))[: nmax + 1, : nmax + 1]
        if prev is not None and np.max(np.abs(D - prev)) <= tol:
            return D
        prev = D
        pad *= 2
    raise RuntimeError("displacement operator did not converge in the padding size")


def op_weyl_planewave(a: PlaneWaveSymbol, basis: FockBasis, leak_tol: float = 0.01) -> FockOperator:
    """``sum_j c_j exp(i w_j . (x, xi))`` compressed onto ``basis``.

    A warning is issued when the median basis column keeps less than
    ``1 - leak_tol`` of its squared norm, i.e. the displacements push mass
    outside the truncation.  The leak is averaged over terms with weights
    ``|c_j|``.
    """
    if a.d != basis.d:
        raise ValueError("dimension mismatch")
    d = basis.d
    st = basis.states
    nmax = basis.max_occupation
    M = np.zeros((basis.size, basis.size), dtype=complex)
    leak = 0.0
    total = sum(abs(c) for c in a.terms.values()) or 1.0
    for w, c in a.terms.items():
        T = np.ones((basis.size, basis.size), dtype=complex)
        for j in range(d):
            D = _mode_displacement(w[j], w[d + j], int(nmax[j]), basis.hbar)
            T = T * D[np.ix_(st[:, j], st[:, j])]
        kept = np.sum(np.abs(T) ** 2, axis=0)
        leak += abs(c) / total * (1.0 - float(np.median(kept)))
        M += c * T
    if leak > leak_tol:
        warnings.warn(
            f"truncation too small for plane-wave frequencies: median column leaks {leak:.2%}",
            RuntimeWarning, stacklevel=2,
        )
    return FockOperator(basis, M)


def build_P(H_sym: WickSymbol, V_sym: WickSymbol, A_sym: WickSymbol, delta, hbar, basis: FockBasis) -> FockOperator:
    """``P = Op(H) + delta Op(V) + i hbar Op(A)``."""
    if abs(float(hbar) - basis.hbar) > 1e-15 * max(1.0, basis.hbar):
        raise ValueError("hbar does not match the basis")
    if delta < 0:
        raise ValueError("delta must be nonnegative")
    for name, s in (("V", V_sym), ("A", A_sym)):
        if not s.is_real():
            raise ValueError(f"{name} must be real-valued")
    H = op_weyl(H_sym, basis).matrix
    V = op_weyl(V_sym, basis).matrix
    A = op_weyl(A_sym, basis).matrix
    return FockOperator(basis, H + float(delta) * V + 1j * float(hbar) * A)


def operator_norm(Mop, tol: float = 1e-8, max_iter: int = 20000, seed: int = 0) -> float:
    """Largest singular value by power iteration on ``M^H M``."""
    M = Mop.matrix if isinstance(Mop, FockOperator) else np.asarray(Mop, dtype=complex)
    if M.size == 0 or not np.any(M):
        return 0.0
    rng = np.random.default_rng(seed)
    v = rng.standard_normal(M.shape[1]) + 1j * rng.standard_normal(M.shape[1])
    v /= np.linalg.norm(v)
    mu = 0.0
    for _ in range(max_iter):
        u = M.conj().T @ (M @ v)
        mu = float(np.real(np.vdot(v, u)))
        r = np.linalg.norm(u - mu * v)
        nu = np.linalg.norm(u)
        if nu == 0:
            return 0.0
        if r <= tol * tol * mu:
            return math.sqrt(mu)
        v = u / nu
    if r <= tol * mu:
        return math.sqrt(mu)
    raise RuntimeError(f"power iteration did not converge (residual {r / mu:.2e})")


def convention_oracle(n_pairs: int = 30, size: int = 40, hbar: float = 0.1, max_degree: int = 3,
                      seed: int = 12345):
    """Check ``Op(a # b) = Op(a) Op(b)`` on interior blocks for random pairs in ``d = 1``.

    Returns the largest relative error over all pairs.  The Moyal sign
    convention of the symbol module is correct exactly when this is at
    rounding level.
    """
    from .symbols.wick import moyal
    from .exact import GaussianRational

    rng = np.random.default_rng(seed)
    basis = FockBasis.degree_cap(1, hbar, size - 1)
    h = exact_real(hbar)

    def rand_sym():
        coeffs = {}
        for p in range(max_degree + 1):
            for q in range(max_degree + 1 - p):
                if rng.random() < 0.7:
                    re, im = rng.integers(-9, 10, size=2)
                    coeffs[((p,), (q,))] = GaussianRational(int(re), int(im))
        if not coeffs:
            coeffs[((1,), (0,))] = GaussianRational(1)
        return WickSymbol(1, coeffs)

    worst = 0.0
    for _ in range(n_pairs):
        a, b = rand_sym(), rand_sym()
        ab = moyal(a, b, h)
        g = a.degree + b.degree
        idx = np.arange(size - g) if size > g else np.arange(0)
        lhs = op_weyl(ab, basis).matrix[np.ix_(idx, idx)]
        rhs = (op_weyl(a, basis).matrix @ op_weyl(b, basis).matrix)[np.ix_(idx, idx)]
        scale = max(np.max(np.abs(rhs)), 1e-300)
        worst = max(worst, float(np.max(np.abs(lhs - rhs)) / scale))
    return worst
