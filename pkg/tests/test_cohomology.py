import warnings
from fractions import Fraction

import pytest
from hypothesis import given, settings, strategies as st

from osclab.cohomology import build_F12, build_F3, periodic_solution, solve_cohomological
from osclab.exact import I
from osclab.frequencies import FrequencyVector, resonance_module
from osclab.symbols import WickSymbol, average, poisson

from strategies import real_wick_symbols, wick_symbols

W = WickSymbol
OMEGAS = [(1, 1), (1, 2), (2, 3)]


def test_exchange_term_solution():
    om = FrequencyVector.exact([1, 2])
    g = W.monomial((1, 0), (0, 1)) + W.monomial((0, 1), (1, 0))
    sol = solve_cohomological(g, om)
    expect = W.monomial((1, 0), (0, 1), -I) + W.monomial((0, 1), (1, 0), I)
    assert sol.f == expect
    assert sol.residual == W.zero(2)
    assert sol.smallest_denominator == 1


def test_approximate_frequencies_rejected():
    with pytest.raises(ValueError, match="exact"):
        solve_cohomological(W.action(2, 0), FrequencyVector.approximate([1.0, 2.0]))


def test_F12_requires_real_symbols():
    om = FrequencyVector.exact([1, 2])
    with pytest.raises(ValueError, match="real"):
        build_F12(W.zeta(2, 0).scale(I), W.action(2, 0), om)


def test_F12_signs():
    om = FrequencyVector.exact([1, 2])
    H = W.harmonic(om)
    m = resonance_module(om)
    V = W.monomial((1, 0), (0, 1)) + W.monomial((0, 1), (1, 0))
    A = W.action(2, 0) + W.monomial((2, 0), (0, 1)) + W.monomial((0, 1), (2, 0))
    F1, F2 = build_F12(A, V, om)
    assert poisson(F1, H) + V == average(V, m)
    assert poisson(F2, H) + A == average(A, m)
    assert F1.is_real() and F2.is_real()


def test_F3_series_on_exchange_flow():
    om = FrequencyVector.exact([1, 1])
    m = resonance_module(om)
    A = W.action(2, 0)
    V = W.monomial((1, 0), (0, 1)) + W.monomial((0, 1), (1, 0))
    r8 = build_F3(A, V, Fraction(3, 10), J=8, module=m)
    with pytest.warns(RuntimeWarning, match="tail"):
        r6 = build_F3(A, V, Fraction(3, 10), J=6, module=m)
    assert r8.invariant
    assert r8.tail < 1e-9
    assert (r8.F3 - r6.F3).l1_norm() < 1e-7
    # leading term t0^2/2 <A>
    assert r8.terms[0] == A.scale(Fraction(9, 200))


def test_F3_warns_on_large_tail():
    A = W.action(2, 0)
    V = W.monomial((1, 0), (0, 1)) + W.monomial((0, 1), (1, 0))
    with warnings.catch_warnings(record=True) as rec:
        warnings.simplefilter("always")
        r = build_F3(A, V, 3, J=2)
    assert r.warning and any("tail" in str(w.message) for w in rec)
    with pytest.raises(ValueError):
        build_F3(A, V, 0.3, J=1)


@settings(max_examples=100, deadline=None)
@given(wick_symbols(d=2, max_deg=4, max_terms=6), st.sampled_from(OMEGAS))
def test_cohomological_equation_exact(g, w):
    om = FrequencyVector.exact(w)
    H = W.harmonic(om)
    sol = solve_cohomological(g, om)
    m = resonance_module(om)
    assert poisson(H, sol.f) == g - average(g, m)
    assert average(sol.f, m) == W.zero(2)


@settings(max_examples=100, deadline=None)
@given(wick_symbols(d=2, max_deg=4, max_terms=6), st.sampled_from([1, 2, Fraction(1, 3)]))
def test_period_integral_matches_division(g, c):
    om = FrequencyVector.exact([c, c])
    assert periodic_solution(g, om) == solve_cohomological(g, om).f


@settings(max_examples=50, deadline=None)
@given(real_wick_symbols(d=2, max_deg=3))
def test_solution_of_real_symbol_is_real(g):
    sol = solve_cohomological(g, FrequencyVector.exact([2, 3]))
    assert sol.f.is_real()
