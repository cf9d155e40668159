"""Energy-shell sampling and geometric control checks.

The zero set of the averaged damping on ``H = E`` is pushed along the
Hamiltonian flow of the averaged perturbation; control holds when every zero
point reaches a region where the damping is positive.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field

import numpy as np
from scipy.integrate import cumulative_simpson

from .frequencies import FrequencyVector
from .symbols.wick import WickSymbol, evaluate, poisson

__all__ = [
    "ShellSample",
    "ControlReport",
    "StrongReport",
    "Trajectory",
    "sample_shell",
    "zero_set",
    "integrate_flow",
    "check_control",
    "check_strong",
    "shell_extrema",
]


@dataclass
class ShellSample:
    points: np.ndarray
    omega: FrequencyVector
    E: float
    n_action: int
    n_angle: int
    actions: np.ndarray = field(repr=False, default=None)

    def __len__(self):
        return len(self.points)

    @property
    def descriptor(self) -> dict:
        return {"E": self.E, "n_action": self.n_action, "n_angle": self.n_angle, "count": len(self)}


def _simplex(d: int, m: int):
    """Compositions of ``m`` into ``d`` nonnegative parts."""
    if d == 1:
        yield (m,)
        return
    for i in range(m + 1):
        for rest in _simplex(d - 1, m - i):
            yield (i,) + rest


def sample_shell(omega: FrequencyVector, E: float = 1.0, n_action: int = 11, n_angle: int = 16) -> ShellSample:
    """Points on ``H = E`` from an action simplex grid times angle lattices.

    Actions are ``I_j = E b_j / omega_j`` with ``b`` on the grid of the
    simplex ``sum b_j = 1`` with ``n_action`` nodes per edge (vertices
    included).  Modes with ``I_j > 0`` get ``n_angle`` equispaced angles;
    modes with zero action contribute the single point at the origin.
    """
    if n_action < 1 or n_angle < 1:
        raise ValueError("sample counts must be >= 1")
    if not E > 0:
        raise ValueError("E must be positive")
    w = omega.as_array()
    d = len(w)
    m = max(n_action - 1, 0)
    angles = 2 * np.pi * np.arange(n_angle) / n_angle
    pts, acts = [], []
    combos = [(m,)] if d == 1 else list(_simplex(d, m)) if m > 0 else [tuple([1] + [0] * (d - 1))]
    for comp in combos:
        b = np.array(comp, dtype=float) / (m if m > 0 else 1)
        I = E * b / w
        r = np.sqrt(2 * I)
        grids = [angles if I[j] > 0 else np.zeros(1) for j in range(d)]
        th = np.array(list(itertools.product(*grids)))
        x = r * np.cos(th)
        xi = r * np.sin(th)
        pts.append(np.hstack([x, xi]))
        acts.append(np.repeat(I[None, :], len(th), axis=0))
    return ShellSample(np.vstack(pts), omega, float(E), n_action, n_angle, np.vstack(acts))


def _real_values(a: WickSymbol, pts) -> np.ndarray:
    return np.real(evaluate(a, pts))


def zero_set(sample, avgA: WickSymbol, tol_zero: float = 1e-3, neg_tol: float = 1e-9) -> np.ndarray:
    """Sample points where ``<A> <= tol_zero``.  Raises if ``<A>`` is negative somewhere."""
    pts = sample.points if isinstance(sample, ShellSample) else np.asarray(sample)
    vals = _real_values(avgA, pts)
    if np.min(vals, initial=np.inf) < -neg_tol:
        raise ValueError(f"hypothesis A >= 0 violated: min <A> = {np.min(vals):.3e}")
    return pts[vals <= tol_zero]


# ---------------------------------------------------------------------------
# flow integration
# ---------------------------------------------------------------------------

class _VectorField:
    """``z' = (d_xi V, -d_x V)`` for a real polynomial ``V``."""

    def __init__(self, V: WickSymbol):
        self.d = V.d
        self.dz = [V.diff_zeta(j).numeric() for j in range(V.d)]
        self.dzb = [V.diff_zetabar(j).numeric() for j in range(V.d)]

    def __call__(self, z):
        d = self.d
        out = np.empty_like(z)
        for j in range(d):
            a = evaluate(self.dz[j], z)
            b = evaluate(self.dzb[j], z)
            gx = np.real(a + b) / math.sqrt(2.0)
            gxi = np.real(1j * (a - b)) / math.sqrt(2.0)
            out[:, j] = gxi
            out[:, d + j] = -gx
        return out


@dataclass
class Trajectory:
    t: np.ndarray
    z: np.ndarray  # (n_steps+1, n_points, 2d)
    dt: float
    drift_V: float
    drift_H: float


def integrate_flow(avgV: WickSymbol, z0, T: float, dt: float = 1e-2, H: WickSymbol | None = None,
                   drift_tol: float = 1e-6, max_halvings: int = 3) -> Trajectory:
    """Fixed-step RK4 for the Hamiltonian flow of ``avgV``.

    ``z0`` may hold one point or many.  If the drift of ``avgV`` (and of ``H``
    when given) exceeds ``drift_tol`` the step is halved, at most
    ``max_halvings`` times.
    """
    if not dt > 0:
        raise ValueError("dt must be positive")
    if not avgV.is_real(tol=1e-12):
        raise ValueError("flow generator must be real")
    z0 = np.atleast_2d(np.asarray(z0, dtype=float))
    if z0.shape[-1] != 2 * avgV.d:
        raise ValueError("phase point dimension mismatch")
    f = _VectorField(avgV)
    Vn = avgV.numeric()
    Hn = H.numeric() if H is not None else None
    for _ in range(max_halvings + 1):
        n = max(1, int(math.ceil(T / dt - 1e-12)))
        h = T / n
        zs = np.empty((n + 1,) + z0.shape)
        zs[0] = z = z0.copy()
        for i in range(n):
            k1 = f(z)
            k2 = f(z + 0.5 * h * k1)
            k3 = f(z + 0.5 * h * k2)
            k4 = f(z + h * k3)
            z = z + (h / 6.0) * (k1 + 2 * k2 + 2 * k3 + k4)
            zs[i + 1] = z
        dV = float(np.max(np.abs(np.real(evaluate(Vn, zs[-1]) - evaluate(Vn, zs[0])))))
        dH = 0.0
        if Hn is not None:
            dH = float(np.max(np.abs(np.real(evaluate(Hn, zs[-1]) - evaluate(Hn, zs[0])))))
        if max(dV, dH) <= drift_tol:
            return Trajectory(np.linspace(0.0, T, n + 1), zs, h, dV, dH)
        dt = h / 2
    raise RuntimeError(f"conservation drift {max(dV, dH):.3e} exceeds {drift_tol} after step halving")


# ---------------------------------------------------------------------------
# control checks
# ---------------------------------------------------------------------------

@dataclass
class ControlReport:
    satisfied: bool
    T1: float
    eps0: float
    worst_point: np.ndarray | None
    zero_set_size: int
    invariance_flag: bool
    local_T1: np.ndarray = field(repr=False, default=None)
    integral_values: np.ndarray = field(repr=False, default=None)
    zero_points: np.ndarray = field(repr=False, default=None)
    sensitivity: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.invariance_flag and self.satisfied:
            raise AssertionError("invariant zero set cannot satisfy control")
        if self.satisfied and not self.eps0 > 0:
            raise AssertionError("satisfied control needs eps0 > 0")


def _verdict(A_traj, I_traj, t, tol_zero, margin, exit_level):
    """Per-point first exit time and the control verdict."""
    n_pts = A_traj.shape[1]
    above = A_traj > exit_level
    hit = above.any(axis=0)
    first = np.where(hit, np.argmax(above, axis=0), -1)
    local = np.where(hit, t[np.maximum(first, 0)], np.inf)
    invariant = bool(n_pts > 0 and np.max(A_traj) <= tol_zero)
    if n_pts == 0:
        return True, 0.0, np.inf, None, local, np.zeros(0), False
    if not np.all(hit):
        k = int(np.argmin(I_traj[-1]))
        return False, np.inf, float(np.min(I_traj[-1])), k, local, I_traj[-1], invariant
    # smallest common time after which every running integral is past its first exit
    T1 = float(np.max(local))
    iT = int(np.searchsorted(t, T1))
    vals = I_traj[iT]
    k = int(np.argmin(vals))
    eps0 = float(vals[k])
    return eps0 > margin and not invariant, T1, eps0, k, local, vals, invariant


def check_control(avgA: WickSymbol, avgV: WickSymbol, omega: FrequencyVector, E: float = 1.0,
                  T_max: float = 10.0, dt: float = 1e-2, n_action: int = 11, n_angle: int = 16,
                  tol_zero: float = 1e-3, margin: float = 1e-8, exit_fraction: float = 0.1) -> ControlReport:
    """Check that the ``<V>``-flow moves every zero of ``<A>`` on ``H = E`` into ``<A> > 0``.

    For each zero-set point the running integral ``int_0^t <A> o phi_s ds``
    is accumulated with the composite Simpson rule.  The local exit time is
    the first ``t`` at which ``<A>`` exceeds ``exit_fraction`` times its
    shell maximum (and ``2 tol_zero``); ``T1`` is the largest local exit time
    and ``eps0`` the smallest running integral at ``T1``.
    Verdicts at ``tol_zero/2`` and ``2 tol_zero`` are reported in
    ``sensitivity``.
    """
    H = WickSymbol.harmonic(omega)
    sample = sample_shell(omega, E, n_action, n_angle)
    vals = _real_values(avgA, sample.points)
    if np.min(vals) < -1e-9:
        raise ValueError(f"hypothesis A >= 0 violated: min <A> = {np.min(vals):.3e}")
    exit_level = max(2 * tol_zero, exit_fraction * float(np.max(vals)))
    wide = sample.points[vals <= 2 * tol_zero]
    wide_vals = vals[vals <= 2 * tol_zero]
    if len(wide):
        traj = integrate_flow(avgV, wide, T_max, dt, H=H)
        t = traj.t
        A_traj = np.real(evaluate(avgA.numeric(), traj.z.reshape(-1, wide.shape[1]))).reshape(len(t), len(wide))
        I_traj = cumulative_simpson(A_traj, x=t, axis=0, initial=0.0)
    else:
        t = np.array([0.0])
        A_traj = np.zeros((1, 0))
        I_traj = np.zeros((1, 0))
    out = {}
    for tag, tz in (("half", tol_zero / 2), ("nominal", tol_zero), ("double", 2 * tol_zero)):
        sel = wide_vals <= tz
        res = _verdict(A_traj[:, sel], I_traj[:, sel], t, tz, margin, max(exit_level, 2 * tz))
        out[tag] = (sel, res)
    sel, (sat, T1, eps0, k, local, ivals, inv) = out["nominal"]
    pts = wide[sel]
    sens = {tag: {"zero_set_size": int(np.sum(s)), "satisfied": bool(r[0]), "eps0": float(r[2])}
            for tag, (s, r) in out.items()}
    return ControlReport(
        satisfied=bool(sat), T1=float(T1), eps0=float(eps0),
        worst_point=None if k is None else pts[k], zero_set_size=int(len(pts)),
        invariance_flag=bool(inv), local_T1=local, integral_values=np.asarray(ivals),
        zero_points=pts, sensitivity=sens,
    )


@dataclass
class StrongReport:
    holds: bool
    min_abs: float
    values: np.ndarray = field(repr=False, default=None)


def check_strong(avgA: WickSymbol, avgV: WickSymbol, zero_points, tol: float = 1e-8,
                 control: ControlReport | None = None) -> StrongReport:
    """``{<A>, <V>} != 0`` on the zero set.  Strong holding with control failing is an error."""
    br = poisson(avgA, avgV)
    zero_points = np.asarray(zero_points, dtype=float).reshape(-1, 2 * avgA.d)
    vals = np.real(evaluate(br, zero_points)) if len(zero_points) else np.zeros(0)
    m = float(np.min(np.abs(vals), initial=np.inf))
    holds = m > tol
    if control is not None and holds and not control.satisfied:
        raise AssertionError("strong condition holds but control fails")
    return StrongReport(holds, m, vals)


def shell_extrema(avgA: WickSymbol, sample: ShellSample, refine: bool = True, tol: float = 1e-4,
                  max_rounds: int = 4):
    """``(min, max)`` of ``<A>`` on the shell, refining the grid until stable."""
    vals = _real_values(avgA, sample.points)
    lo, hi = float(vals.min()), float(vals.max())
    if not refine:
        return lo, hi
    na, nt = sample.n_action, sample.n_angle
    for _ in range(max_rounds):
        na, nt = 2 * na - 1, 2 * nt
        s2 = sample_shell(sample.omega, sample.E, na, nt)
        v2 = _real_values(avgA, s2.points)
        lo2, hi2 = min(lo, float(v2.min())), max(hi, float(v2.max()))
        done = abs(lo2 - lo) < tol and abs(hi2 - hi) < tol
        lo, hi = lo2, hi2
        if done:
            break
    return lo, hi
