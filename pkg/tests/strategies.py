"""Shared hypothesis strategies."""

from hypothesis import strategies as st

from osclab.exact import GaussianRational
from osclab.symbols import PlaneWaveSymbol, WickSymbol


def multi_index(d, max_deg):
    return st.lists(st.integers(0, max_deg), min_size=d, max_size=d).map(tuple)


@st.composite
def wick_symbols(draw, d=1, max_deg=3, max_terms=4):
    n = draw(st.integers(1, max_terms))
    coeffs = {}
    for _ in range(n):
        a = draw(multi_index(d, max_deg))
        b = draw(multi_index(d, max_deg))
        if sum(a) + sum(b) > max_deg:
            continue
        re, im = draw(st.integers(-5, 5)), draw(st.integers(-5, 5))
        coeffs[(a, b)] = GaussianRational(re, im)
    return WickSymbol(d, coeffs)


@st.composite
def real_wick_symbols(draw, d=2, max_deg=4, max_terms=5):
    a = draw(wick_symbols(d, max_deg, max_terms))
    return a + a.conj()


@st.composite
def planewave_symbols(draw, d=1, max_terms=4, wmax=2.0):
    n = draw(st.integers(1, max_terms))
    terms = {}
    coord = st.floats(-wmax, wmax, allow_nan=False).map(lambda x: round(x, 3))
    for _ in range(n):
        w = tuple(draw(coord) for _ in range(2 * d))
        terms[w] = complex(draw(st.floats(-1, 1)), draw(st.floats(-1, 1)))
    return PlaneWaveSymbol(d, terms)
