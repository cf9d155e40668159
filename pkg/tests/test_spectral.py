import math

import numpy as np
import pytest

from osclab.control import sample_shell
from osclab.frequencies import FrequencyVector
from osclab.normalform import fit_power
from osclab.quantize import FockBasis, build_P, op_weyl
from osclab.spectral import (
    blocks,
    coherent_state,
    compute_spectrum,
    delta_from_rule,
    distance_to_sublevel,
    eigenpairs,
    fit_resolvent_eps,
    gap_statistics,
    husimi,
    quasimode_residual,
    resolvent_scan,
    strip_check,
)
from osclab.symbols import WickSymbol

W = WickSymbol
OM = FrequencyVector.exact([1, 1])
H = W.harmonic(OM)
A = W.action(2, 0)
V = W.monomial((1, 0), (0, 1)) + W.monomial((0, 1), (1, 0))


def canon(lam):
    lam = np.asarray(lam)
    return lam[np.lexsort((lam.imag, np.round(lam.real, 8)))]


def closed_form(basis):
    n = basis.states
    h = basis.hbar
    return h * (n.sum(axis=1) + 1) + 1j * h * h * (n[:, 0] + 0.5)


@pytest.mark.parametrize("hbar", [0.1, 0.05])
def test_uncoupled_spectrum_closed_form(hbar):
    rec = compute_spectrum(H, W.zero(2), A, hbar, hbar, OM)
    basis = FockBasis.window(OM, hbar)
    assert np.max(np.abs(canon(rec.lam) - canon(closed_form(basis)))) < 1e-10
    idx = rec.window(0.1)
    assert np.min(rec.beta[idx]) / rec.delta == pytest.approx(0.5, abs=1e-10)


def test_blocks_follow_total_occupation():
    b = FockBasis.window(OM, 0.1)
    P = build_P(H, V, A, 0.1, 0.1, b)
    parts = blocks(P.matrix)
    for idx in parts:
        assert len(set(b.states[idx].sum(axis=1))) == 1


def test_blockwise_and_dense_eigenvalues_agree():
    b = FockBasis.window(OM, 0.1)
    P = build_P(H, V, A, 0.1, 0.1, b)
    e1 = canon(eigenpairs(P).values)
    e2 = canon(eigenpairs(P, blockwise=False).values)
    assert np.allclose(e1, e2, atol=1e-10)
    es = eigenpairs(P)
    lam, v = es[5]
    assert np.linalg.norm(P.matrix @ v - lam * v) < 1e-10


def test_strip_and_gap_for_exchange_damping():
    recs = [compute_spectrum(H, V, A, h, h, OM) for h in (0.1, 0.05, 0.025)]
    for r in recs[:2]:
        rep = strip_check(r, 0.0, 1.0)
        assert rep.ok and rep.n_window > 0
    table = gap_statistics(recs)
    assert table.verdict == "nondecreasing"
    assert table.rows[-1][2] >= 3 * 0.025 / 2


def test_gap_table_flags_decay_without_coupling():
    recs = [compute_spectrum(H, W.zero(2), A, h, h, OM) for h in (0.1, 0.05)]
    table = gap_statistics(recs)
    assert table.verdict == "not monotone"
    assert gap_statistics(recs[:1]).verdict == "insufficient sweep"


def test_delta_rules():
    assert delta_from_rule("hbar_3_2", 0.04) == pytest.approx(0.008)
    assert delta_from_rule("eps_hbar2", 0.1, 2.0) == pytest.approx(0.02)
    with pytest.raises(ValueError):
        delta_from_rule("nope", 0.1)


def test_resolvent_scan_finite_off_spectrum():
    h = 0.05
    b = FockBasis.window(OM, h)
    P = build_P(H, V, A, h, h, b)
    grid = np.linspace(0, h, 11)
    scan = resolvent_scan(P, h, 1.0, grid)
    assert math.isfinite(scan.sup_bound)
    eps = fit_resolvent_eps(scan, h)
    assert eps > 0
    # sigma_min is the distance to the spectrum for a normal block
    P0 = build_P(H, W.zero(2), W.zero(2), h, h, b)
    s0 = resolvent_scan(P0, h, 1.0 + 0.01, [0.0])
    ev = np.diag(P0.matrix).real
    assert s0.sigma_min[0] == pytest.approx(np.min(np.abs(ev - 1.01)), abs=1e-12)


def test_resolvent_is_infinite_on_an_eigenvalue():
    h = 0.1
    b = FockBasis.window(OM, h)
    P0 = build_P(H, W.zero(2), W.zero(2), h, h, b)
    s0 = resolvent_scan(P0, h, 1.0, [0.0])
    assert math.isinf(s0.sup_bound) and fit_resolvent_eps(s0, h) == 0.0


def test_coherent_state_is_eigenvector_of_annihilation():
    b = FockBasis.degree_cap(2, 0.1, 60)
    z = np.array([0.3, 1.0, -0.2, 0.4])
    c, mass = coherent_state(b, z)
    assert mass == pytest.approx(1.0, abs=1e-10)
    a1 = op_weyl(W.zeta(2, 0), b).matrix
    zeta1 = (z[0] + 1j * z[2]) / np.sqrt(2)
    inner = b.interior(1)
    assert np.allclose((a1 @ c)[inner], zeta1 * c[inner], atol=1e-10)


def test_husimi_concentrates_near_coherent_point():
    b = FockBasis.degree_cap(1, 0.05, 120)
    z0 = np.array([1.0, 0.5])
    c, _ = coherent_state(b, z0)
    pts = np.array([z0, z0 + [0.5, 0.0], z0 + [2.0, 0.0]])
    q = husimi(c, b, pts, normalize=False)
    assert q[0] == pytest.approx(1.0)
    assert q[0] > q[1] > q[2]


def test_coherent_quasimode_residual_scales_like_root_hbar():
    # coherent states on the zero torus of <A> are quasimodes of width sqrt(hbar)
    hs = [0.1, 0.05, 0.025]
    res = []
    for h in hs:
        N = int(1 / h + 12 * math.sqrt(1 / h) + 12)
        # mode 1 stays in its vacuum, so a thin product basis suffices
        st = [(n1, n2) for n1 in range(3) for n2 in range(N + 1)]
        b = FockBasis(2, h, np.array(st), {"kind": "product"})
        P = build_P(H, W.zero(2), A, h, h, b)
        c, _ = coherent_state(b, np.array([0.0, math.sqrt(2), 0.0, 0.0]))
        lam = np.vdot(c, P.matrix @ c)
        res.append(quasimode_residual(P, lam, c).residual)
    assert fit_power(hs, res) == pytest.approx(0.5, abs=0.05)


def test_distance_to_sublevel_radial_reduction():
    s = sample_shell(OM, 1.0, 5, 4)
    dist = distance_to_sublevel(s.points, A, OM, 0.05)
    vals = np.real(A(s.points)) if callable(A) else None
    inside = vals <= 0.05
    assert np.all(dist[inside] < 1e-2)
    assert np.all(dist[~inside] > 0)
