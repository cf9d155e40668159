"""Averaging by conjugation, the Egorov series and the effective damping.

``Q = e^{iF} P e^{-iF}`` with ``F = Op(F1 + i F2)`` removes the nonresonant
parts of ``V`` and ``A`` up to ``O(hbar^2)``.  The exact symbol of the
conjugation by ``e^{itG/hbar}`` is the series
``Psi_t a = sum_j (it/hbar)^j / j! Ad_G^j a`` with ``Ad_G a = [G, a]_hbar``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.linalg import expm

from .cohomology import build_F12
from .exact import GaussianRational, exact_real
from .frequencies import FrequencyVector, resonance_module
from .quantize import FockBasis, FockOperator, op_weyl, op_weyl_planewave, operator_norm
from .spectral import blocks
from .symbols import planewave as pw
from .symbols import wick as wk
from .symbols.planewave import PlaneWaveSymbol, norm_As
from .symbols.wick import WickSymbol, average, evaluate, poisson

__all__ = [
    "ConjugationReport",
    "PsiSeriesResult",
    "EgorovReport",
    "SlopeResult",
    "DampingResult",
    "conjugate_operator",
    "conjugation_residual",
    "psi_series",
    "egorov_check",
    "lemma_norm_ratios",
    "commutator_vs_poisson_slope",
    "effective_damping",
    "damping_sweep",
    "fit_power",
]


def fit_power(hs, values) -> float:
    """Least-squares slope of ``log values`` against ``log hs``."""
    hs = np.asarray(hs, dtype=float)
    v = np.asarray(values, dtype=float)
    return float(np.polyfit(np.log(hs), np.log(v), 1)[0])


# ---------------------------------------------------------------------------
# conjugation
# ---------------------------------------------------------------------------

def conjugate_operator(P: FockOperator, F1: WickSymbol, F2: WickSymbol, check: bool = True) -> FockOperator:
    """``e^{iF} P e^{-iF}`` with ``F = Op(F1 + i F2)`` on the basis of ``P``."""
    for name, s in (("F1", F1), ("F2", F2)):
        if not s.is_real():
            raise ValueError(f"{name} must be real-valued")
    basis = P.basis
    O1 = op_weyl(F1, basis).matrix
    O2 = op_weyl(F2, basis).matrix
    G = 1j * (O1 + 1j * O2)
    U = _block_expm(G)
    Uinv = _block_expm(-G)
    if not (np.all(np.isfinite(U)) and np.all(np.isfinite(Uinv))):
        raise RuntimeError("matrix exponential failed to converge")
    if check:
        nU = operator_norm(U)
        bound = math.exp(operator_norm(O2)) if np.any(O2) else 1.0
        if nU > bound * (1 + 1e-8):
            raise AssertionError(f"|e^(iF)| = {nU:.6e} exceeds e^|Op(F2)| = {bound:.6e}")
    return FockOperator(basis, U @ P.matrix @ Uinv)


def _block_expm(G: np.ndarray) -> np.ndarray:
    """Matrix exponential computed on the diagonal blocks of ``G``."""
    out = np.zeros_like(G, dtype=complex)
    for idx in blocks(G):
        out[np.ix_(idx, idx)] = expm(G[np.ix_(idx, idx)])
    return out


@dataclass
class ConjugationReport:
    hbar: float
    residual_norm: float
    fitted_power: float | None = None
    basis_size: int = 0


def _window_indices(big: FockBasis, omega: FrequencyVector, hbar: float, E: float, W: float):
    win = FockBasis.window(omega, hbar, E, W)
    idx = big.lookup(win.states)
    if np.any(idx < 0):
        raise ValueError("working basis does not cover the energy window")
    return idx


def conjugation_residual(A: WickSymbol, V: WickSymbol, omega: FrequencyVector, hbar_list,
                         delta_rule: str = "hbar", eps: float = 1.0, E: float = 1.0, W: float = 0.1,
                         margin: int = 6, module=None):
    """Norm of ``Q - [Op(H) + delta Op(<V>) + i hbar Op(<A>)]`` near energy ``E``.

    ``F1`` is scaled by ``delta / hbar`` so that its commutator with ``Op(H)``
    cancels ``delta (V - <V>)``.  Operators live on a degree-capped basis that
    covers the window with ``margin`` extra layers; the residual is
    compressed onto the states with ``|hbar omega.(n + 1/2) - E| <= W``
    (by default the alpha window used by the spectral statistics) and
    measured in the 2-norm.  Returns ``(reports, power)``; ``power`` is
    ``None`` when every residual vanishes.
    """
    from .spectral import delta_from_rule

    hs = [float(h) for h in hbar_list]
    if len(hs) < 3:
        raise ValueError("need at least 3 hbar values for the power fit")
    module = module or resonance_module(omega)
    H = WickSymbol.harmonic(omega)
    F1, F2 = build_F12(A, V, omega, module)
    avgV, avgA = average(V, module), average(A, module)
    reports = []
    for h in hs:
        delta = delta_from_rule(delta_rule, h, eps)
        win = FockBasis.window(omega, h, E, W)
        N = int(win.states.sum(axis=1).max()) + margin
        big = FockBasis.degree_cap(omega.d, h, N)
        idx = _window_indices(big, omega, h, E, W)
        OH = op_weyl(H, big).matrix
        P = FockOperator(big, OH + delta * op_weyl(V, big).matrix + 1j * h * op_weyl(A, big).matrix)
        if F1 or F2:
            scale = exact_real(delta) / exact_real(h)
            Q = conjugate_operator(P, F1.scale(scale), F2, check=False).matrix
        else:
            Q = P.matrix
        target = OH + delta * op_weyl(avgV, big).matrix + 1j * h * op_weyl(avgA, big).matrix
        R = (Q - target)[np.ix_(idx, idx)]
        reports.append(ConjugationReport(h, float(np.linalg.norm(R, 2)), None, big.size))
    res = [r.residual_norm for r in reports]
    if max(res) == 0.0:
        return reports, None
    p = fit_power(hs, np.maximum(res, 1e-300))
    for r in reports:
        r.fitted_power = p
    return reports, p


# ---------------------------------------------------------------------------
# Egorov series
# ---------------------------------------------------------------------------

@dataclass
class PsiSeriesResult:
    symbol: object
    J: int
    tail: float
    terms: list = field(repr=False, default_factory=list)


def _sym_norm(a, s=None):
    if isinstance(a, PlaneWaveSymbol):
        return norm_As(a, 0.0 if s is None else s)
    return a.l1_norm()


def _comm(G, a, hbar):
    if isinstance(G, WickSymbol):
        return wk.commutator_h(G, a, hbar)
    return pw.commutator_h(G, a, hbar)


def _scale(a, c):
    return a.scale(c)


def admissible_time(G: PlaneWaveSymbol, s: float, sigma: float) -> float:
    """``sigma^2 / (2 |G|_s)``, the largest admissible ``|t|``."""
    nG = norm_As(G, s)
    return math.inf if nG == 0 else sigma * sigma / (2 * nG)


def psi_series(G, a, t, hbar, J: int = 12, s: float | None = None, sigma: float | None = None) -> PsiSeriesResult:
    """``sum_{j<=J} (it/hbar)^j / j! Ad_G^j a`` with ``Ad_G a = [G, a]_hbar``.

    For plane waves with ``s`` and ``sigma`` given, ``|t| < sigma^2 / (2|G|_s)``
    is required.  ``tail`` is the norm of the last retained term.
    """
    if J < 1:
        raise ValueError("J must be >= 1")
    if type(G) is not type(a):
        raise TypeError("G and a must be the same symbol class")
    if isinstance(G, PlaneWaveSymbol) and s is not None and sigma is not None:
        tmax = admissible_time(G, s, sigma)
        if not abs(float(t)) < tmax:
            raise ValueError(
                f"|t| = {abs(float(t)):.4g} violates the smallness bound sigma^2/(2|G|_s) = {tmax:.4g}"
            )
    if isinstance(G, WickSymbol):
        t_, h_ = exact_real(t), exact_real(hbar)
        factor = GaussianRational(0, t_ / h_)
    else:
        factor = 1j * float(t) / float(hbar)
    term = a
    total = a
    terms = [a]
    for j in range(1, J + 1):
        term = _scale(_comm(G, term, hbar), factor / j if isinstance(factor, complex) else factor / j)
        terms.append(term)
        total = total + term
    norm_s = None if s is None or sigma is None else s - sigma
    return PsiSeriesResult(total, J, _sym_norm(terms[-1], norm_s), terms)


@dataclass
class EgorovReport:
    discrepancy: float
    J: int
    t: float
    hbar: float
    tail: float
    interior_size: int


def _op(sym, basis):
    if isinstance(sym, WickSymbol):
        return op_weyl(sym, basis, symmetrize=False).matrix
    return op_weyl_planewave(sym, basis).matrix


def egorov_check(G, a, t, hbar, basis: FockBasis, J: int = 12, interior: int | None = None,
                 s: float | None = None, sigma: float | None = None) -> EgorovReport:
    """Compare ``e^{itOp(G)/hbar} Op(a) e^{-itOp(G)/hbar}`` with ``Op(Psi_t a)``.

    The discrepancy is the 2-norm of the difference restricted to basis
    states ``|n| <= interior`` (default: a third of the largest occupation).
    """
    if abs(basis.hbar - float(hbar)) > 1e-15:
        raise ValueError("hbar does not match the basis")
    res = psi_series(G, a, t, hbar, J, s, sigma)
    OG = _op(G, basis)
    U = expm(1j * float(t) / float(hbar) * OG)
    Uinv = expm(-1j * float(t) / float(hbar) * OG)
    lhs = U @ _op(a, basis) @ Uinv
    rhs = _op(res.symbol, basis)
    cut = int(basis.states.sum(axis=1).max()) // 3 if interior is None else interior
    idx = np.nonzero(basis.states.sum(axis=1) <= cut)[0]
    D = (lhs - rhs)[np.ix_(idx, idx)]
    return EgorovReport(float(np.linalg.norm(D, 2)), J, float(t), float(hbar), res.tail, len(idx))


@dataclass
class NormRatios:
    t: np.ndarray
    item2: np.ndarray
    item3: np.ndarray
    C_sigma: float
    bounded: bool


def lemma_norm_ratios(G: PlaneWaveSymbol, a: PlaneWaveSymbol, ts, hbar: float, s: float, sigma: float,
                      J: int = 12, spread: float = 10.0) -> NormRatios:
    """Ratios of the two short-time bounds for ``Psi_t`` on plane waves.

    ``item2 = |Psi_t a - a|_{s-sigma} / (|t| |G|_s |a|_s)`` and
    ``item3 = |Psi_t a - a - t {G, a}|_{s-sigma} / (t^2 |G|_s |a|_s)``.
    ``C_sigma`` is the largest ratio; ``bounded`` requires every ratio to be
    finite and the spread ``max/min`` of each to stay below ``spread``.
    """
    nG, na = norm_As(G, s), norm_As(a, s)
    br = pw.poisson(G, a)
    r2, r3 = [], []
    for t in ts:
        psi = psi_series(G, a, t, hbar, J, s, sigma).symbol
        d2 = psi - a
        d3 = d2 - br.scale(t)
        r2.append(norm_As(d2, s - sigma) / (abs(t) * nG * na))
        r3.append(norm_As(d3, s - sigma) / (t * t * nG * na))
    r2, r3 = np.array(r2), np.array(r3)
    ok = True
    for r in (r2, r3):
        ok &= bool(np.all(np.isfinite(r)) and np.all(r > 0) and r.max() / r.min() <= spread)
    return NormRatios(np.asarray(ts, dtype=float), r2, r3, float(max(r2.max(), r3.max())), ok)


# ---------------------------------------------------------------------------
# semiclassical limit of the commutator
# ---------------------------------------------------------------------------

@dataclass
class SlopeResult:
    slope: float | None
    errors: list
    hbars: list
    exact: bool


def commutator_vs_poisson_slope(a, b, hbar_list, s: float | None = None) -> SlopeResult:
    """Fit ``log e(hbar)`` against ``log hbar`` with ``e = |(i/hbar)[a,b]_hbar - {a,b}|``.

    Coefficient l1 norm for polynomials, ``A_s`` norm for plane waves.
    """
    hs = [float(h) for h in hbar_list]
    if len(hs) < 3:
        raise ValueError("need at least 3 hbar values")
    errs = []
    for h in hs:
        if isinstance(a, WickSymbol):
            hq = exact_real(h)
            dev = wk.commutator_h(a, b, hq).scale(GaussianRational(0, 1 / hq)) - poisson(a, b)
            errs.append(dev.l1_norm())
        else:
            dev = pw.commutator_h(a, b, h).scale(1j / h) - pw.poisson(a, b)
            errs.append(norm_As(dev, s or 0.0))
    if max(errs) == 0.0:
        return SlopeResult(None, errs, hs, True)
    return SlopeResult(fit_power(hs, errs), errs, hs, False)


# ---------------------------------------------------------------------------
# effective damping
# ---------------------------------------------------------------------------

@dataclass
class DampingResult:
    D: WickSymbol
    eps: float
    minimum: float
    argmin: np.ndarray
    certificate: float


def effective_damping(avgA: WickSymbol, avgV: WickSymbol, F3: WickSymbol, eps: float, sample) -> DampingResult:
    """``D = <A> + eps {<V>, F3}`` and its minimum over the shell sample.

    A positive minimum ``c0`` certifies a symbol-level gap; ``certificate``
    records it.
    """
    if not eps > 0:
        raise ValueError("eps must be positive")
    D = avgA + poisson(avgV, F3).scale(exact_real(eps))
    pts = sample.points if hasattr(sample, "points") else np.asarray(sample)
    vals = np.real(evaluate(D.numeric(), pts))
    k = int(np.argmin(vals))
    m = float(vals[k])
    return DampingResult(D, float(eps), m, pts[k], m if m > 0 else 0.0)


def damping_sweep(avgA, avgV, F3, eps_list, sample):
    """Minima of ``D_eps`` over ``eps_list``; returns ``(results, eps_best)``."""
    res = [effective_damping(avgA, avgV, F3, e, sample) for e in eps_list]
    best = max(res, key=lambda r: r.minimum)
    return res, best.eps
