"""Spectra, strip and gap statistics, resolvent scans and Husimi densities.

Matrices built from polynomial symbols couple only a few Fock states, so
``P`` usually splits into many small diagonal blocks (connected components
of its sparsity graph).  Eigenvalues and singular values are computed block
by block, which is both faster and much better conditioned than one dense
solve.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field

import numpy as np
import scipy.linalg as sla
from scipy.sparse import csr_matrix
from scipy.sparse.csgraph import connected_components
from scipy.special import gammaln

from .quantize import FockBasis, FockOperator, build_P
from .symbols.wick import WickSymbol, evaluate

__all__ = [
    "Eigensystem",
    "SpectrumRecord",
    "ResolventScan",
    "QuasimodeReport",
    "StripReport",
    "GapTable",
    "eigenpairs",
    "blocks",
    "compute_spectrum",
    "strip_check",
    "gap_statistics",
    "delta_from_rule",
    "resolvent_scan",
    "fit_resolvent_eps",
    "quasimode_residual",
    "coherent_state",
    "husimi",
    "distance_to_sublevel",
]


# ---------------------------------------------------------------------------
# eigenproblems
# ---------------------------------------------------------------------------

def blocks(M: np.ndarray) -> list[np.ndarray]:
    """Index sets of the connected components of the sparsity graph of ``M``."""
    pattern = csr_matrix((np.abs(M) > 0) | (np.abs(M.T) > 0))
    n, labels = connected_components(pattern, directed=False)
    order = np.argsort(labels, kind="stable")
    cuts = np.cumsum(np.bincount(labels, minlength=n))[:-1]
    return np.split(order, cuts)


@dataclass
class Eigensystem:
    """Eigenvalues of a block-diagonal operator with blockwise eigenvectors."""

    values: np.ndarray
    size: int
    _blocks: list = field(repr=False, default_factory=list)  # (indices, vecs)
    _owner: np.ndarray = field(repr=False, default=None)     # eigen index -> (block, col)
    residual: float = 0.0

    def __len__(self):
        return len(self.values)

    def vector(self, i: int) -> np.ndarray:
        b, c = self._owner[i]
        idx, vecs = self._blocks[b]
        v = np.zeros(self.size, dtype=complex)
        v[idx] = vecs[:, c]
        return v

    def __iter__(self):
        for i in range(len(self.values)):
            yield self.values[i], self.vector(i)

    def __getitem__(self, i):
        return self.values[i], self.vector(i)


def eigenpairs(P, tol: float = 1e-8, blockwise: bool = True) -> Eigensystem:
    """Full nonselfadjoint eigendecomposition with a per-pair residual check.

    Each block is shifted by its mean diagonal before the solve.  Every pair
    must satisfy ``|P v - lam v| <= tol |P|`` with ``|P|`` the exact 2-norm
    (the largest block norm).
    """
    M = P.matrix if isinstance(P, FockOperator) else np.asarray(P, dtype=complex)
    n = M.shape[0]
    if M.shape != (n, n):
        raise ValueError("square matrix required")
    parts = blocks(M) if blockwise else [np.arange(n)]
    vals = np.empty(n, dtype=complex)
    owner = np.empty((n, 2), dtype=np.int64)
    store = []
    norm = 0.0
    worst = 0.0
    pos = 0
    for b, idx in enumerate(parts):
        B = M[np.ix_(idx, idx)]
        shift = np.trace(B) / len(idx)
        try:
            w, V = sla.eig(B - shift * np.eye(len(idx)))
        except (np.linalg.LinAlgError, ValueError) as exc:
            raise RuntimeError(
                f"eigensolver failed on block of size {len(idx)} "
                f"(norm {np.linalg.norm(B):.3e}, finite={np.all(np.isfinite(B))})"
            ) from exc
        w = w + shift
        V = V / np.linalg.norm(V, axis=0)
        norm = max(norm, float(np.linalg.norm(B, 2)))
        worst = max(worst, float(np.max(np.linalg.norm(B @ V - V * w, axis=0), initial=0.0)))
        k = len(idx)
        vals[pos:pos + k] = w
        owner[pos:pos + k, 0] = b
        owner[pos:pos + k, 1] = np.arange(k)
        store.append((idx, V))
        pos += k
    rel = worst / norm if norm > 0 else worst
    if rel > tol:
        raise RuntimeError(f"eigenpair residual {rel:.3e} exceeds {tol:.1e} (|P| = {norm:.3e})")
    return Eigensystem(vals, n, store, owner, rel)


@dataclass
class SpectrumRecord:
    hbar: float
    delta: float
    lam: np.ndarray
    alpha: np.ndarray
    beta: np.ndarray
    edge_flag: np.ndarray
    basis: dict
    scenario_hash: str = ""
    eigensystem: Eigensystem | None = field(repr=False, default=None)
    order: np.ndarray | None = field(repr=False, default=None)

    @classmethod
    def from_eigs(cls, eigs: Eigensystem, hbar, delta, edge_flag=None, basis=None, scenario_hash=""):
        lam = np.asarray(eigs.values)
        order = np.argsort(np.abs(lam.real - 1.0), kind="stable")
        lam = lam[order]
        flags = np.zeros(len(lam), dtype=bool) if edge_flag is None else np.asarray(edge_flag)[order]
        return cls(float(hbar), float(delta), lam, lam.real.copy(), lam.imag / hbar, flags,
                   dict(basis or {}), scenario_hash, eigs, order)

    def __len__(self):
        return len(self.lam)

    def window(self, win: float = 0.1, include_edge: bool = False) -> np.ndarray:
        sel = np.abs(self.alpha - 1.0) <= win
        if not include_edge:
            sel &= ~self.edge_flag
        return np.nonzero(sel)[0]

    def vector(self, i: int) -> np.ndarray:
        """Eigenvector of the ``i``-th (sorted) eigenvalue."""
        return self.eigensystem.vector(int(self.order[i]))


def _edge_flags(lam, lam_big, tol):
    if len(lam_big) == 0:
        return np.ones(len(lam), dtype=bool)
    d = np.min(np.abs(lam[:, None] - lam_big[None, :]), axis=1)
    return d > tol


def compute_spectrum(H: WickSymbol, V: WickSymbol, A: WickSymbol, delta: float, hbar: float, omega,
                     E: float = 1.0, W: float = 0.25, edge_factor: float = 1.5, report_tol: float = 1e-6,
                     scenario_hash: str = "") -> SpectrumRecord:
    """Spectrum on the energy window ``(E, W)`` with edge flags from a ``edge_factor * W`` rerun."""
    basis = FockBasis.window(omega, hbar, E, W)
    eigs = eigenpairs(build_P(H, V, A, delta, hbar, basis))
    flags = None
    if edge_factor and edge_factor > 1:
        big = FockBasis.window(omega, hbar, E, edge_factor * W)
        eig_big = eigenpairs(build_P(H, V, A, delta, hbar, big))
        flags = _edge_flags(eigs.values, eig_big.values, report_tol)
    desc = basis.descriptor()
    return SpectrumRecord.from_eigs(eigs, hbar, delta, flags, desc, scenario_hash)


# ---------------------------------------------------------------------------
# strip and gap
# ---------------------------------------------------------------------------

@dataclass
class StripReport:
    A_minus: float
    A_plus: float
    tol: float
    n_window: int
    violations: list
    ok: bool


def strip_check(rec: SpectrumRecord, A_minus: float, A_plus: float, win: float = 0.1,
                tol: float | None = None, C: float = 0.5) -> StripReport:
    """Check ``beta`` in ``[A_- - tol, A_+ + tol]`` for unflagged eigenvalues with ``|alpha - 1| <= win``.

    ``tol`` defaults to ``C * hbar``.
    """
    idx = rec.window(win)
    if len(idx) == 0:
        raise ValueError(f"empty alpha window at hbar={rec.hbar}")
    t = C * rec.hbar if tol is None else float(tol)
    b = rec.beta[idx]
    bad = (b < A_minus - t) | (b > A_plus + t)
    viol = [(complex(rec.lam[i]), float(rec.beta[i])) for i in idx[bad]]
    return StripReport(float(A_minus), float(A_plus), t, int(len(idx)), viol, not viol)


def delta_from_rule(rule: str, hbar: float, eps: float = 1.0) -> float:
    if rule == "hbar":
        return float(hbar)
    if rule == "hbar_3_2":
        return float(hbar) ** 1.5
    if rule == "eps_hbar2":
        return float(eps) * float(hbar) ** 2
    raise ValueError(f"unknown delta rule {rule!r}")


@dataclass
class GapTable:
    rows: list  # (hbar, delta, min_beta, min_beta_over_delta)
    verdict: str
    monotone: bool | None
    growth_factor: float | None


def gap_statistics(records, delta_rule: str = "hbar", win: float = 0.1, mono_tol: float = 1e-6) -> GapTable:
    """Minimum of ``beta`` over the alpha window per ``hbar``, ordered by decreasing ``hbar``.

    The verdict compares consecutive minima with tolerance ``mono_tol``.
    """
    recs = sorted(records, key=lambda r: -r.hbar)
    rows = []
    for r in recs:
        idx = r.window(win)
        if len(idx) == 0:
            raise ValueError(f"empty alpha window at hbar={r.hbar}")
        mb = float(np.min(r.beta[idx]))
        rows.append((r.hbar, r.delta, mb, mb / r.delta if r.delta > 0 else math.inf))
    if len(rows) < 2:
        return GapTable(rows, "insufficient sweep", None, None)
    mins = [row[2] for row in rows]
    mono = all(b >= a - mono_tol for a, b in zip(mins, mins[1:]))
    growth = mins[-1] / mins[0] if mins[0] != 0 else math.inf
    verdict = "nondecreasing" if mono else "not monotone"
    return GapTable(rows, verdict, mono, growth)


# ---------------------------------------------------------------------------
# resolvent and quasimodes
# ---------------------------------------------------------------------------

@dataclass
class ResolventScan:
    hbar: float
    alpha0: float
    b: np.ndarray
    lam: np.ndarray
    sigma_min: np.ndarray
    bound: np.ndarray  # 1/sigma_min, inf at the spectrum
    dist: np.ndarray | None = None

    @property
    def sup_bound(self) -> float:
        return float(np.max(self.bound))


def resolvent_scan(P, hbar: float, alpha0: float, beta_grid, eigenvalues=None,
                   sing_tol: float = 1e-8) -> ResolventScan:
    """``sigma_min(P - (alpha0 + i hbar b))`` over the grid ``b`` by blockwise SVD."""
    M = P.matrix if isinstance(P, FockOperator) else np.asarray(P, dtype=complex)
    b = np.asarray(beta_grid, dtype=float)
    lam = alpha0 + 1j * hbar * b
    parts = blocks(M)
    Bs = [M[np.ix_(idx, idx)] for idx in parts]
    normP = max(float(np.linalg.norm(B, 2)) for B in Bs)
    sig = np.full(len(b), np.inf)
    for B in Bs:
        I = np.eye(len(B))
        for i, z in enumerate(lam):
            s = sla.svdvals(B - z * I)[-1]
            if s < sig[i]:
                sig[i] = s
    bound = np.where(sig <= sing_tol * normP, np.inf, 1.0 / np.maximum(sig, 1e-300))
    sig = np.where(sig <= sing_tol * normP, 0.0, sig)
    dist = None
    if eigenvalues is not None:
        ev = np.asarray(eigenvalues)
        dist = np.min(np.abs(lam[:, None] - ev[None, :]), axis=1)
    return ResolventScan(float(hbar), float(alpha0), b, lam, sig, bound, dist)


def fit_resolvent_eps(scan: ResolventScan, delta: float) -> float:
    """Largest ``eps`` with ``1/sigma_min <= 1/(eps hbar delta)`` over the scan."""
    sup = scan.sup_bound
    if not math.isfinite(sup):
        return 0.0
    return 1.0 / (scan.hbar * delta * sup)


@dataclass
class QuasimodeReport:
    lam: complex
    residual: float
    norm_v: float


def quasimode_residual(P, lam: complex, v) -> QuasimodeReport:
    M = P.matrix if isinstance(P, FockOperator) else np.asarray(P, dtype=complex)
    v = np.asarray(v, dtype=complex)
    nv = float(np.linalg.norm(v))
    if nv == 0:
        raise ValueError("zero vector")
    u = v / nv
    return QuasimodeReport(complex(lam), float(np.linalg.norm(M @ u - lam * u)), nv)


# ---------------------------------------------------------------------------
# coherent states and Husimi densities
# ---------------------------------------------------------------------------

def _coherent_rows(basis: FockBasis, pts: np.ndarray) -> np.ndarray:
    """Coherent-state coefficients, one row per phase point."""
    d = basis.d
    h = basis.hbar
    n = basis.states.astype(float)
    zeta = (pts[:, :d] + 1j * pts[:, d:]) / math.sqrt(2.0)
    r = np.abs(zeta)
    with np.errstate(divide="ignore", invalid="ignore"):
        logr = np.log(r)
        # 0 * log 0 = 0: the vacuum component of a zero amplitude
        lr = np.where(n[None, :, :] == 0, 0.0, logr[:, None, :] * n[None, :, :])
    logmag = (-np.sum(r * r, axis=1)[:, None] / (2 * h) + lr.sum(axis=2)
              - 0.5 * math.log(h) * n.sum(axis=1)[None, :] - 0.5 * gammaln(n + 1).sum(axis=1)[None, :])
    phase = np.angle(zeta) @ n.T
    return np.exp(logmag + 1j * phase)


def coherent_state(basis: FockBasis, z) -> tuple[np.ndarray, float]:
    """Coefficients of the coherent state at ``z`` on ``basis`` and the captured mass.

    Per mode ``c_n = exp(-|zeta|^2 / 2 hbar) zeta^n / sqrt(hbar^n n!)`` so that
    ``Op(zeta) |z> = zeta |z>``.
    """
    z = np.asarray(z, dtype=float).reshape(1, -1)
    if z.shape[1] != 2 * basis.d:
        raise ValueError("phase point has the wrong length")
    c = _coherent_rows(basis, z)[0]
    return c, float(np.sum(np.abs(c) ** 2))


def husimi(v, basis: FockBasis, points, normalize: bool = True, leak_tol: float = 0.01,
           chunk: int = 512) -> np.ndarray:
    """``|<z|v>|^2`` at each point, renormalized over the point set.

    A warning reports the share of points whose coherent state has more than
    ``leak_tol`` of its mass outside the basis.
    """
    v = np.asarray(v, dtype=complex)
    pts = np.atleast_2d(np.asarray(points, dtype=float))
    out = np.empty(len(pts))
    leaky = 0
    for i0 in range(0, len(pts), chunk):
        C = _coherent_rows(basis, pts[i0:i0 + chunk])
        leaky += int(np.sum(np.sum(np.abs(C) ** 2, axis=1) < 1 - leak_tol))
        out[i0:i0 + chunk] = np.abs(C.conj() @ v) ** 2
    if leaky:
        warnings.warn(
            f"basis too small for {leaky}/{len(pts)} coherent states (mass outside > {leak_tol:.0%})",
            RuntimeWarning, stacklevel=2,
        )
    if normalize:
        s = out.sum()
        if s > 0:
            out = out / s
    return out


def distance_to_sublevel(points, avgA: WickSymbol, omega, level: float, E: float = 1.0,
                         n_fine: int = 2001) -> np.ndarray:
    """Euclidean distance from each point to ``{H = E, <A> <= level}``.

    When ``<A>`` depends on the actions only, the set is invariant under
    every mode rotation, so the nearest point has the same angles and the
    distance reduces to the radii: ``|z - y|^2 = 2 sum_j (r_j - s_j)^2`` with
    ``r_j = |zeta_j|``.  The target radii are sampled on the action simplex.
    Other symbols use a KD-tree over a fine shell sample.
    """
    from .control import sample_shell

    pts = np.atleast_2d(np.asarray(points, dtype=float))
    d = avgA.d
    w = omega.as_array()
    if all(not any(m) for m in avgA.modes()):
        from .control import _simplex

        m = n_fine - 1 if d <= 2 else max(2, int(round(n_fine ** (1.0 / (d - 1)))))
        comps = np.array(list(_simplex(d, m)), dtype=float) / m
        I = E * comps / w
        # evaluate <A> at a representative point with zero angles
        rep = np.hstack([np.sqrt(2 * I), np.zeros_like(I)])
        keep = np.real(evaluate(avgA, rep)) <= level
        S = np.sqrt(I[keep])  # target radii |zeta_j|
        if len(S) == 0:
            return np.full(len(pts), np.inf)
        zeta = (pts[:, :d] + 1j * pts[:, d:]) / math.sqrt(2.0)
        R = np.abs(zeta)
        out = np.empty(len(pts))
        for i0 in range(0, len(pts), 256):
            r = R[i0:i0 + 256]
            d2 = 2 * np.sum((r[:, None, :] - S[None, :, :]) ** 2, axis=2)
            out[i0:i0 + 256] = np.sqrt(np.min(d2, axis=1))
        return out
    from scipy.spatial import cKDTree

    sample = sample_shell(omega, E, 41, 128)
    vals = np.real(evaluate(avgA, sample.points))
    target = sample.points[vals <= level]
    if len(target) == 0:
        return np.full(len(pts), np.inf)
    dist, _ = cKDTree(target).query(pts)
    return dist
