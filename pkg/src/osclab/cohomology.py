"""Cohomological equation ``{H, f} = g - <g>`` on polynomial symbols.

Each monomial ``zeta^a zetabar^b`` is an eigenfunction of ``{H, .}`` with
eigenvalue ``i omega . (b - a)``, so nonresonant parts are solved by division
and resonant parts are left to the average.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field
from fractions import Fraction

from .exact import GaussianRational, exact_real
from .frequencies import FrequencyVector, is_resonant, resonance_module
from .symbols.wick import WickSymbol, average, poisson

__all__ = [
    "CohomologySolution",
    "F3Result",
    "solve_cohomological",
    "periodic_solution",
    "build_F12",
    "build_F3",
]


@dataclass
class CohomologySolution:
    f: WickSymbol
    residual: WickSymbol
    smallest_denominator: float


@dataclass
class F3Result:
    """Truncated bracket series for the double time integral of ``<A>`` along ``<V>``."""

    F3: WickSymbol
    tail: float
    J: int
    t0: Fraction
    terms: list = field(repr=False, default_factory=list)
    invariant: bool | None = None
    warning: str | None = None


def _module_for(omega, module):
    if not omega.is_exact:
        raise ValueError("cohomological solver needs exact frequencies (denominators uncertifiable)")
    return module if module is not None else resonance_module(omega)


def solve_cohomological(g: WickSymbol, omega: FrequencyVector, module=None) -> CohomologySolution:
    """Solve ``{H, f} = g - <g>`` with the gauge ``<f> = 0``.

    Examples
    --------
    With ``omega = (1, 2)`` and ``g = zeta1 zetabar2 + zetabar1 zeta2`` the
    solution is ``f = -i zeta1 zetabar2 + i zetabar1 zeta2``.
    """
    module = _module_for(omega, module)
    if g.d != omega.d:
        raise ValueError("dimension mismatch")
    out = {}
    smallest = math.inf
    for key, c in g.coeffs.items():
        k = g.mode(key)
        if is_resonant(module, k):
            continue
        lam = omega.dot(k)
        smallest = min(smallest, abs(float(lam)))
        den = GaussianRational(0, lam)
        out[key] = c / den if isinstance(c, GaussianRational) else c / complex(den)
    f = WickSymbol(g.d, out)
    H = WickSymbol.harmonic(omega)
    residual = poisson(H, f) + average(g, module) - g
    return CohomologySolution(f, residual, smallest)


def periodic_solution(g: WickSymbol, omega: FrequencyVector, gauge_project: bool = True) -> WickSymbol:
    """Solution by the period integral ``f = -(1/T) int_0^T int_0^t g~ o phi_s ds dt``.

    Here ``omega = c (1, ..., 1)``, ``T = 2 pi / c`` and ``g~ = g - <g>``.
    On a monomial with ``lam = omega . k = c m`` the inner integral is
    ``(e^{i lam t} - 1)/(i lam)``; since ``lam T = 2 pi m`` the outer average
    of ``e^{i lam t}`` vanishes, leaving ``-(1/T)(-T/(i lam)) = 1/(i lam)``.
    The resonant part carries ``-(T/2) <g~> = 0``.
    """
    if not omega.is_exact:
        raise ValueError("periodic_solution needs exact frequencies")
    c = omega.entries[0]
    if any(w != c for w in omega.entries):
        raise ValueError("periodic_solution needs omega proportional to (1, ..., 1)")
    module = resonance_module(omega)
    gt = g - average(g, module)
    out = {}
    for key, coef in gt.coeffs.items():
        k = gt.mode(key)
        lam = omega.dot(k)
        m = lam / c
        if m.denominator != 1:
            raise AssertionError("mode frequency is not a multiple of the base frequency")
        # (1/T) int_0^T (e^{i lam t} - 1)/(i lam) dt with e^{i lam T} = 1
        inner_avg = -1 / GaussianRational(0, lam)
        val = -inner_avg
        out[key] = coef * val if isinstance(coef, GaussianRational) else coef * complex(val)
    f = WickSymbol(g.d, out)
    if gauge_project:
        f = f - average(f, module)
    return f


def build_F12(A: WickSymbol, V: WickSymbol, omega: FrequencyVector, module=None):
    """Real ``F1, F2`` with ``{F1, H} + V = <V>`` and ``{F2, H} + A = <A>``."""
    for name, s in (("A", A), ("V", V)):
        if not s.is_real():
            raise ValueError(f"{name} must be real-valued")
    module = _module_for(omega, module)
    F1 = solve_cohomological(V, omega, module).f
    F2 = solve_cohomological(A, omega, module).f
    return F1, F2


def build_F3(avgA: WickSymbol, avgV: WickSymbol, t0, J: int = 8, module=None,
             tail_threshold: float = 1e-6) -> F3Result:
    """``F3 = sum_{j<=J} t0^{j+2}/(j+2)! Ad^j(<A>)`` with ``Ad(a) = {<V>, a}``.

    This is the Taylor form of ``int_0^t0 int_0^t <A> o phi_s^{<V>} ds dt``.
    ``tail`` is the coefficient l1 norm of the last retained term.  When a
    resonance module is given, the output is checked to be flow-invariant.
    """
    if J < 2:
        raise ValueError("J must be >= 2")
    t0 = exact_real(t0)
    if t0 <= 0:
        raise ValueError("t0 must be positive")
    term = avgA
    F3 = WickSymbol.zero(avgA.d)
    terms = []
    for j in range(J + 1):
        scaled = term.scale(t0 ** (j + 2) / math.factorial(j + 2))
        terms.append(scaled)
        F3 = F3 + scaled
        term = poisson(avgV, term)
    tail = terms[-1].l1_norm()
    res = F3Result(F3, tail, J, t0, terms)
    if module is not None:
        res.invariant = average(F3, module) == F3
        if not res.invariant:
            res.warning = "F3 is not flow-invariant"
    if tail > tail_threshold * max(F3.l1_norm(), 1e-300):
        msg = f"F3 series tail {tail:.3e} above threshold"
        res.warning = msg if res.warning is None else res.warning + "; " + msg
        warnings.warn(msg, RuntimeWarning, stacklevel=2)
    return res
