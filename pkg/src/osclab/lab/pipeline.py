"""Staged experiment pipeline with a content-addressed cache.

Stages run in a fixed order.  Each stage turns the scenario (plus earlier
stage outputs) into a JSON document stored at
``$LAB_CACHE_DIR/<scenario hash>/<stage>.json``; a rerun of the same
scenario reads the stored document instead of recomputing.  Writes are
atomic (temp file then rename).  The first stage error aborts every later
stage and the manifest records how far the run got.
"""

from __future__ import annotations

import hashlib
import json
import math
import os
import tempfile
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .. import __version__
from ..cohomology import build_F12, build_F3
from ..control import check_control, check_strong, sample_shell, shell_extrema
from ..frequencies import detect_resonances_approx, resonance_module
from ..normalform import conjugation_residual, damping_sweep
from ..quantize import FockBasis, build_P, convention_oracle
from ..spectral import (
    SpectrumRecord,
    compute_spectrum,
    delta_from_rule,
    fit_resolvent_eps,
    gap_statistics,
    resolvent_scan,
    strip_check,
)
from ..symbols.wick import WickSymbol, average
from .scenario import Scenario

__all__ = [
    "STAGES",
    "StageError",
    "StageRecord",
    "RunManifest",
    "cache_dir",
    "run_pipeline",
    "load_stage",
    "spectrum_records",
]

STAGES = ("averaging", "control", "symbols", "spectra", "gap", "conjugation", "damping", "resolvent")

_DEPS = {
    "averaging": (),
    "control": ("averaging",),
    "symbols": ("averaging",),
    "spectra": (),
    "gap": ("averaging", "spectra"),
    "conjugation": ("symbols",),
    "damping": ("averaging", "symbols"),
    "resolvent": (),
}


class StageError(RuntimeError):
    """A numeric failure inside a stage."""


def cache_dir() -> Path:
    return Path(os.environ.get("LAB_CACHE_DIR", Path.home() / ".cache" / "osclab"))


def _jsonable(x):
    if isinstance(x, dict):
        return {str(k): _jsonable(v) for k, v in x.items()}
    if isinstance(x, (list, tuple)):
        return [_jsonable(v) for v in x]
    if isinstance(x, np.ndarray):
        return _jsonable(x.tolist())
    if isinstance(x, (np.bool_, bool)):
        return bool(x)
    if isinstance(x, (np.integer, int)):
        return int(x)
    if isinstance(x, (np.floating, float)):
        return float(x)
    if isinstance(x, complex):
        return [x.real, x.imag]
    return x


def _dumps(obj) -> str:
    return json.dumps(_jsonable(obj), sort_keys=True, indent=1) + "\n"


def _digest(path: Path) -> str:
    return hashlib.sha256(Path(path).read_bytes()).hexdigest()


def _atomic_write(path: Path, text: str):
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=path.name, suffix=".tmp")
    try:
        with os.fdopen(fd, "w") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


# ---------------------------------------------------------------------------
# stages
# ---------------------------------------------------------------------------

def _module(s: Scenario):
    om = s.omega
    if om.is_exact:
        return resonance_module(om)
    tol = s["tolerances"]
    return detect_resonances_approx(om, int(tol["resonance_K"]), float(tol["resonance"]))


def _averages(s, out):
    d = s.d
    return (WickSymbol.from_literal(d, out["averaging"]["avgA"]),
            WickSymbol.from_literal(d, out["averaging"]["avgV"]))


def _stage_averaging(s: Scenario, out, threads):
    module = _module(s)
    A, V = s.A, s.V
    avgA, avgV = average(A, module), average(V, module)
    return {
        "module_basis": [list(k) for k in module.basis],
        "approximate": bool(module.approximate),
        "d_omega": s.d - len(module.basis),
        "avgA": avgA.to_literal(),
        "avgV": avgV.to_literal(),
        "A_is_average": avgA == A,
        "V_is_average": avgV == V,
    }


def _stage_control(s: Scenario, out, threads):
    avgA, avgV = _averages(s, out)
    c = s["control"]
    tz = s["tolerances"]["tol_zero"]
    E = s["basis"]["E"]
    rep = check_control(avgA, avgV, s.omega, E=E, T_max=c["T_max"], dt=c["dt"], n_action=c["n_action"],
                        n_angle=c["n_angle"], tol_zero=tz, exit_fraction=c["exit_fraction"])
    strong = check_strong(avgA, avgV, rep.zero_points, tol=s["tolerances"]["strong"], control=rep)
    sample = sample_shell(s.omega, E, c["n_action"], c["n_angle"])
    lo, hi = shell_extrema(avgA, sample)
    return {
        "satisfied": rep.satisfied,
        "T1": rep.T1,
        "eps0": rep.eps0,
        "worst_point": None if rep.worst_point is None else rep.worst_point,
        "zero_set_size": rep.zero_set_size,
        "invariance_flag": rep.invariance_flag,
        "local_T1": rep.local_T1,
        "integral_values": rep.integral_values,
        "sensitivity": rep.sensitivity,
        "strong_holds": strong.holds,
        "strong_min_abs": strong.min_abs,
        "A_minus": lo,
        "A_plus": hi,
    }


def _stage_symbols(s: Scenario, out, threads):
    avgA, avgV = _averages(s, out)
    module = _module(s)
    F1, F2 = build_F12(s.A, s.V, s.omega, module)
    f3 = build_F3(avgA, avgV, s["F3"]["t0"], int(s["F3"]["J"]), module=module)
    return {
        "F1": F1.to_literal(),
        "F2": F2.to_literal(),
        "F3": f3.F3.to_literal(),
        "F3_tail": f3.tail,
        "F3_invariant": f3.invariant,
        "F3_warning": f3.warning,
    }


def _oracle_gate(s: Scenario):
    """Convention oracle, cached per tool version; raises when it fails."""
    path = cache_dir() / f"convention_oracle-{__version__}.json"
    worst = None
    if path.exists():
        try:
            worst = json.loads(path.read_text())["worst"]
        except (ValueError, KeyError):
            worst = None
    if worst is None:
        worst = convention_oracle()
        _atomic_write(path, _dumps({"worst": worst}))
    if not worst <= s["tolerances"]["oracle"]:
        raise StageError(f"convention oracle failed: relative error {worst:.3e}")
    return worst


def _one_spectrum(s: Scenario, hbar: float):
    b = s["basis"]
    delta = delta_from_rule(s["delta_rule"], hbar, s["eps"])
    H = WickSymbol.harmonic(s.omega)
    rec = compute_spectrum(H, s.V, s.A, delta, hbar, s.omega, E=b["E"], W=b["W"],
                           edge_factor=b["edge_factor"], report_tol=s["tolerances"]["report"],
                           scenario_hash=s.hash)
    return {
        "hbar": rec.hbar,
        "delta": rec.delta,
        "re": rec.lam.real,
        "im": rec.lam.imag,
        "edge_flag": rec.edge_flag,
        "basis": rec.basis,
    }


def _stage_spectra(s: Scenario, out, threads):
    worst = _oracle_gate(s)
    with ThreadPoolExecutor(max_workers=max(1, threads)) as ex:
        recs = list(ex.map(lambda h: _one_spectrum(s, h), s.hbar_list))
    return {"convention_oracle": worst, "records": recs}


def spectrum_records(doc: dict, scenario_hash: str = "") -> list[SpectrumRecord]:
    """Rebuild ``SpectrumRecord`` objects (without eigenvectors) from a spectra document."""
    recs = []
    for r in doc["records"]:
        lam = np.asarray(r["re"]) + 1j * np.asarray(r["im"])
        recs.append(SpectrumRecord(r["hbar"], r["delta"], lam, lam.real.copy(), lam.imag / r["hbar"],
                                   np.asarray(r["edge_flag"], dtype=bool), r["basis"], scenario_hash))
    return recs


def _stage_gap(s: Scenario, out, threads):
    recs = spectrum_records(out["spectra"], s.hash)
    w = s["windows"]
    table = gap_statistics(recs, s["delta_rule"], win=w["alpha"], mono_tol=s["tolerances"]["monotone"])
    avgA, _ = _averages(s, out)
    c = s["control"]
    lo, hi = shell_extrema(avgA, sample_shell(s.omega, s["basis"]["E"], c["n_action"], c["n_angle"]))
    strips = []
    for r in recs:
        rep = strip_check(r, lo, hi, win=w["alpha"], C=w["strip_C"])
        strips.append({"hbar": r.hbar, "ok": rep.ok, "n_window": rep.n_window, "tol": rep.tol,
                       "violations": [[lam.real, lam.imag, b] for lam, b in rep.violations]})
    return {
        "rows": [{"hbar": h, "delta": dl, "min_beta": mb, "min_beta_over_delta": r}
                 for h, dl, mb, r in table.rows],
        "verdict": table.verdict,
        "monotone": table.monotone,
        "growth_factor": table.growth_factor,
        "A_minus": lo,
        "A_plus": hi,
        "strip": strips,
        "strip_ok": all(x["ok"] for x in strips),
    }


def _stage_conjugation(s: Scenario, out, threads):
    nf = s["normalform"]
    reports, power = conjugation_residual(s.A, s.V, s.omega, nf["hbar_list"], delta_rule=s["delta_rule"],
                                          eps=s["eps"], E=s["basis"]["E"], W=s["windows"]["normalform_W"],
                                          margin=int(nf["margin"]), module=_module(s))
    return {
        "reports": [{"hbar": r.hbar, "residual_norm": r.residual_norm, "basis_size": r.basis_size}
                    for r in reports],
        "fitted_power": power,
    }


def _stage_damping(s: Scenario, out, threads):
    avgA, avgV = _averages(s, out)
    F3 = WickSymbol.from_literal(s.d, out["symbols"]["F3"])
    dm = s["damping"]
    sample = sample_shell(s.omega, s["basis"]["E"], int(dm["n_action"]), int(dm["n_angle"]))
    res, best = damping_sweep(avgA, avgV, F3, dm["eps_sweep"], sample)
    top = max(res, key=lambda r: r.minimum)
    return {
        "n_samples": len(sample.points),
        "sweep": [{"eps": r.eps, "minimum": r.minimum} for r in res],
        "best_eps": best,
        "certificate": top.certificate,
        "positive": top.minimum > 0,
        "argmin": top.argmin,
    }


def _scan(s: Scenario, W: float):
    r = s["resolvent"]
    hbar = r["hbar"]
    delta = delta_from_rule(s["delta_rule"], hbar, s["eps"])
    basis = FockBasis.window(s.omega, hbar, s["basis"]["E"], W)
    P = build_P(WickSymbol.harmonic(s.omega), s.V, s.A, delta, hbar, basis)
    b = np.linspace(0.0, delta, int(r["n_b"]))
    scan = resolvent_scan(P, hbar, r["alpha0"], b)
    eps = fit_resolvent_eps(scan, delta)
    return {"W": W, "hbar": hbar, "delta": delta, "alpha0": scan.alpha0, "b": scan.b,
            "sigma_min": scan.sigma_min, "sup_bound": scan.sup_bound, "eps": eps, "size": basis.size}


def _stage_resolvent(s: Scenario, out, threads):
    r = s["resolvent"]
    if not r["enabled"]:
        return {"enabled": False, "scans": []}
    W = s["basis"]["W"]
    Ws = [W, r["window_factor"] * W]
    with ThreadPoolExecutor(max_workers=max(1, threads)) as ex:
        scans = list(ex.map(lambda w: _scan(s, w), Ws))
    e1, e2 = scans[0]["eps"], scans[1]["eps"]
    rel = abs(e2 / e1 - 1.0) if e1 > 0 else math.inf
    return {"enabled": True, "scans": scans, "eps": e1, "relative_change": rel, "stable": rel <= 0.2,
            "finite": all(math.isfinite(x["sup_bound"]) for x in scans)}


_RUNNERS = {
    "averaging": _stage_averaging,
    "control": _stage_control,
    "symbols": _stage_symbols,
    "spectra": _stage_spectra,
    "gap": _stage_gap,
    "conjugation": _stage_conjugation,
    "damping": _stage_damping,
    "resolvent": _stage_resolvent,
}


# ---------------------------------------------------------------------------
# orchestration
# ---------------------------------------------------------------------------

@dataclass
class StageRecord:
    name: str
    status: str  # ok | error | skipped
    path: str | None = None
    digest: str | None = None
    cached: bool = False
    seconds: float = 0.0
    error: str | None = None


@dataclass
class RunManifest:
    scenario_hash: str
    scenario_name: str
    tool_version: str
    stages: dict = field(default_factory=dict)
    started: str = ""
    finished: str = ""
    outputs: dict = field(default_factory=dict, repr=False)

    @property
    def complete(self) -> bool:
        return all(r.status == "ok" for r in self.stages.values())

    @property
    def failed(self) -> list[str]:
        return [n for n, r in self.stages.items() if r.status == "error"]

    def verify(self) -> bool:
        """Every referenced output exists and matches its digest."""
        for r in self.stages.values():
            if r.status != "ok":
                continue
            if not (r.path and Path(r.path).exists() and _digest(Path(r.path)) == r.digest):
                return False
        return True

    def to_dict(self) -> dict:
        return {
            "scenario_hash": self.scenario_hash,
            "scenario_name": self.scenario_name,
            "tool_version": self.tool_version,
            "started": self.started,
            "finished": self.finished,
            "stages": {n: vars(r) for n, r in self.stages.items()},
        }


def _closure(names):
    need = set()
    stack = list(names)
    while stack:
        n = stack.pop()
        if n not in STAGES:
            raise ValueError(f"unknown stage {n!r}")
        if n not in need:
            need.add(n)
            stack.extend(_DEPS[n])
    return [n for n in STAGES if n in need]


def load_stage(scenario_hash: str, name: str) -> dict:
    return json.loads((cache_dir() / scenario_hash / f"{name}.json").read_text())


def _now():
    return time.strftime("%Y-%m-%dT%H:%M:%S", time.gmtime())


def run_pipeline(s: Scenario, stages=None, use_cache: bool = True, threads: int = 1) -> RunManifest:
    """Run the requested stages (default: all) and their dependencies in order."""
    order = _closure(stages if stages is not None else STAGES)
    man = RunManifest(s.hash, s.name, __version__, started=_now())
    root = cache_dir() / s.hash
    broken = None
    for name in order:
        if broken is not None:
            man.stages[name] = StageRecord(name, "skipped", error=f"upstream stage {broken} failed")
            continue
        path = root / f"{name}.json"
        t0 = time.perf_counter()
        if use_cache and path.exists():
            text = path.read_text()
            cached = True
        else:
            try:
                doc = _RUNNERS[name](s, man.outputs, threads)
            except Exception as exc:  # recorded, then downstream stages are skipped
                man.stages[name] = StageRecord(name, "error", error=f"{type(exc).__name__}: {exc}",
                                               seconds=time.perf_counter() - t0)
                broken = name
                continue
            text = _dumps(doc)
            _atomic_write(path, text)
            cached = False
        man.outputs[name] = json.loads(text)
        man.stages[name] = StageRecord(name, "ok", str(path), _digest(path), cached,
                                       time.perf_counter() - t0)
    man.finished = _now()
    return man
