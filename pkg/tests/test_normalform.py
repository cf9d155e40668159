import numpy as np
import pytest

from osclab.cohomology import build_F12, build_F3
from osclab.control import sample_shell
from osclab.frequencies import FrequencyVector
from osclab.normalform import (
    admissible_time,
    commutator_vs_poisson_slope,
    conjugate_operator,
    conjugation_residual,
    damping_sweep,
    effective_damping,
    egorov_check,
    fit_power,
    lemma_norm_ratios,
    psi_series,
)
from osclab.quantize import FockBasis, build_P
from osclab.symbols import PlaneWaveSymbol, WickSymbol, poisson

W = WickSymbol
EXCH = W.monomial((1, 0), (0, 1)) + W.monomial((0, 1), (1, 0))
COS_X = PlaneWaveSymbol(1, {(1.0, 0.0): 0.5, (-1.0, 0.0): 0.5})
COS_XI = PlaneWaveSymbol(1, {(0.0, 1.0): 0.5, (0.0, -1.0): 0.5})


def test_fit_power_recovers_exponent():
    hs = [0.1, 0.05, 0.025]
    assert fit_power(hs, [3 * h ** 2 for h in hs]) == pytest.approx(2.0)


def test_commutator_slope_is_two_for_cubic_pair():
    a = W.monomial((2,), (1,))
    b = W.monomial((1,), (2,))
    r = commutator_vs_poisson_slope(a, b, [0.1, 0.05, 0.025])
    assert r.slope == pytest.approx(2.0, abs=1e-9)


def test_commutator_slope_exact_for_quadratics():
    r = commutator_vs_poisson_slope(W.action(1, 0), W.monomial((2,), (0,)), [0.1, 0.05, 0.025])
    assert r.exact and r.slope is None


def test_conjugation_residual_quadratic_in_hbar():
    om = FrequencyVector.exact([1, 2])
    reps, p = conjugation_residual(W.action(2, 0), EXCH, om, [0.2, 0.1, 0.05])
    assert p == pytest.approx(2.0, abs=0.2)
    assert all(r.residual_norm > 0 for r in reps)


def test_conjugation_residual_vanishes_for_resonant_symbols():
    reps, p = conjugation_residual(W.action(2, 0), EXCH, FrequencyVector.exact([1, 1]), [0.2, 0.1, 0.05])
    assert p is None
    assert all(r.residual_norm < 1e-12 for r in reps)


def test_conjugation_norm_bound():
    om = FrequencyVector.exact([1, 2])
    A = W.action(2, 0) + W.monomial((1, 0), (0, 1)) + W.monomial((0, 1), (1, 0))
    F1, F2 = build_F12(A, EXCH, om)
    b = FockBasis.degree_cap(2, 0.1, 12)
    P = build_P(W.harmonic(om), EXCH, A, 0.1, 0.1, b)
    Q = conjugate_operator(P, F1.scale(1), F2)
    assert np.all(np.isfinite(Q.matrix))
    with pytest.raises(ValueError):
        conjugate_operator(P, F1.scale(1j), F2)


def test_egorov_discrepancy_drops_with_order():
    h = 0.1
    G = W.action(1, 0) + W.monomial((2,), (0,), "1/4") + W.monomial((0,), (2,), "1/4")
    a = W.monomial((2,), (1,)) + W.monomial((1,), (2,))
    b = FockBasis.degree_cap(1, h, 60)
    d6 = egorov_check(G, a, 0.5, h, b, J=6, interior=15).discrepancy
    d12 = egorov_check(G, a, 0.5, h, b, J=12, interior=15).discrepancy
    assert d12 < d6 / 100


def test_egorov_plane_waves():
    h = 0.1
    b = FockBasis.degree_cap(1, h, 60)
    reps = [egorov_check(COS_X, COS_XI, 0.1, h, b, J=J, s=1.0, sigma=0.9) for J in (6, 12)]
    assert reps[1].discrepancy <= reps[0].discrepancy
    assert reps[1].discrepancy < 1e-12


def test_admissible_time_enforced():
    tmax = admissible_time(COS_X, 1.0, 0.9)
    assert tmax == pytest.approx(0.81 / (2 * np.e))
    with pytest.raises(ValueError, match="smallness"):
        psi_series(COS_X, COS_XI, 2 * tmax, 0.1, s=1.0, sigma=0.9)


def test_psi_first_order_is_bracket():
    h = 1e-3
    t = 1e-3
    psi = psi_series(COS_X, COS_XI, t, h, J=1).symbol
    lin = COS_XI + poisson(COS_X, COS_XI).scale(t)
    assert psi.distance(lin) < 1e-8


def test_norm_ratios_bounded():
    r = lemma_norm_ratios(COS_X, COS_XI, [0.01, 0.02, 0.05, 0.1], 0.01, 3.0, 2.9)
    assert r.bounded and r.C_sigma < 1


def test_effective_damping_positive_on_exchange():
    om = FrequencyVector.exact([1, 1])
    A = W.action(2, 0)
    F3 = build_F3(A, EXCH, 0.3, 8).F3
    sample = sample_shell(om, 1.0, 12, 32)
    res, best = damping_sweep(A, EXCH, F3, [0.02, 0.1, 0.3], sample)
    assert all(r.minimum > 0 for r in res)
    assert best == 0.3
    with pytest.raises(ValueError):
        effective_damping(A, EXCH, F3, 0.0, sample)


def test_effective_damping_without_coupling_has_no_certificate():
    om = FrequencyVector.exact([1, 1])
    A = W.action(2, 0)
    F3 = build_F3(A, W.zero(2), 0.3, 8).F3
    r = effective_damping(A, W.zero(2), F3, 0.1, sample_shell(om, 1.0))
    assert r.certificate == 0.0
