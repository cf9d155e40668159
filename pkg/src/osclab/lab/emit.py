"""CSV and JSON emission of pipeline results.

Floats are written with ``%.12e`` and JSON keys are sorted, so identical
inputs give byte-identical files.  Non-finite floats become ``inf``/``nan``
in CSV and ``null`` in JSON.
"""

from __future__ import annotations

import csv
import hashlib
import io
import json
import math
from pathlib import Path

from .pipeline import RunManifest, _atomic_write

__all__ = ["SCHEMAS", "emit", "dumps_json", "fmt"]

SCHEMAS = {
    "spectrum": ["scenario_hash", "hbar", "delta", "re_lambda", "im_lambda", "alpha", "beta", "edge_flag"],
    "resolvent": ["scenario_hash", "hbar", "alpha0", "b", "sigma_min"],
    "normalform": ["scenario_hash", "hbar", "residual_norm", "fitted_power"],
    "control": ["scenario_hash", "point_index", "T1_local", "integral_value", "invariance_flag"],
}


def fmt(x) -> str:
    if x is None:
        return ""
    if isinstance(x, bool):
        return "true" if x else "false"
    if isinstance(x, int):
        return str(x)
    if isinstance(x, float):
        return "%.12e" % x
    return str(x)


def dumps_json(obj, indent: int = 1, _level: int = 0) -> str:
    """JSON text with sorted keys and ``%.12e`` floats."""
    pad = " " * (indent * (_level + 1))
    end = " " * (indent * _level)
    if isinstance(obj, dict):
        if not obj:
            return "{}"
        items = [f'{pad}"{k}": {dumps_json(obj[k], indent, _level + 1)}' for k in sorted(obj)]
        return "{\n" + ",\n".join(items) + "\n" + end + "}"
    if isinstance(obj, (list, tuple)):
        if not obj:
            return "[]"
        items = [pad + dumps_json(v, indent, _level + 1) for v in obj]
        return "[\n" + ",\n".join(items) + "\n" + end + "]"
    if obj is None or isinstance(obj, bool):
        return {None: "null", True: "true", False: "false"}[obj]
    if isinstance(obj, int):
        return str(obj)
    if isinstance(obj, float):
        return "%.12e" % obj if math.isfinite(obj) else "null"
    if isinstance(obj, str):
        return json.dumps(obj)
    raise TypeError(f"cannot serialize {type(obj).__name__}")


def _rows(man: RunManifest) -> dict:
    h = man.scenario_hash
    out = {k: [] for k in SCHEMAS}
    o = man.outputs
    if "spectra" in o:
        for r in o["spectra"]["records"]:
            for re, im, flag in zip(r["re"], r["im"], r["edge_flag"]):
                out["spectrum"].append([h, r["hbar"], r["delta"], re, im, re, im / r["hbar"], bool(flag)])
    if "resolvent" in o:
        for sc in o["resolvent"]["scans"]:
            for b, sig in zip(sc["b"], sc["sigma_min"]):
                out["resolvent"].append([h, sc["hbar"], sc["alpha0"], b, sig])
    if "conjugation" in o:
        p = o["conjugation"]["fitted_power"]
        for r in o["conjugation"]["reports"]:
            out["normalform"].append([h, r["hbar"], r["residual_norm"], p])
    if "control" in o:
        c = o["control"]
        for i, (t1, iv) in enumerate(zip(c["local_T1"], c["integral_values"])):
            out["control"].append([h, i, t1, iv, bool(c["invariance_flag"])])
    return out


def summary(man: RunManifest) -> dict:
    o = man.outputs
    s = {
        "scenario": man.scenario_name,
        "scenario_hash": man.scenario_hash,
        "tool_version": man.tool_version,
        "stages": {n: r.status for n, r in man.stages.items()},
    }
    if "control" in o:
        c = o["control"]
        s["control"] = {k: c[k] for k in ("satisfied", "T1", "eps0", "zero_set_size", "invariance_flag",
                                          "strong_holds", "A_minus", "A_plus")}
    if "gap" in o:
        g = o["gap"]
        s["gap_table"] = g["rows"]
        s["gap_verdict"] = g["verdict"]
        s["strip_verdict"] = "ok" if g["strip_ok"] else "violations"
        s["min_beta_over_delta"] = [r["min_beta_over_delta"] for r in g["rows"]]
    if "damping" in o:
        d = o["damping"]
        s["eps_certificate"] = {"best_eps": d["best_eps"], "certificate": d["certificate"],
                                "positive": d["positive"], "n_samples": d["n_samples"]}
    if "conjugation" in o:
        s["normalform"] = {"fitted_power": o["conjugation"]["fitted_power"]}
    if o.get("resolvent", {}).get("enabled"):
        r = o["resolvent"]
        s["resolvent"] = {"eps": r["eps"], "relative_change": r["relative_change"], "stable": r["stable"]}
    return s


def _csv_text(header, rows) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for row in rows:
        w.writerow([fmt(x) for x in row])
    return buf.getvalue()


def emit(man: RunManifest, out_dir, fmt_: str = "csv") -> dict:
    """Write per-module tables, ``summary.json`` and ``manifest.json``; returns ``{file: sha256}``."""
    if fmt_ not in ("csv", "json"):
        raise ValueError(f"unknown format {fmt_!r}")
    out = Path(out_dir)
    try:
        out.mkdir(parents=True, exist_ok=True)
    except OSError as exc:
        raise OSError(f"cannot create output directory {out}: {exc}") from exc
    files = {}
    for name, rows in _rows(man).items():
        header = SCHEMAS[name]
        if fmt_ == "csv":
            files[f"{name}.csv"] = _csv_text(header, rows)
        else:
            recs = [dict(zip(header, r)) for r in rows]
            files[f"{name}.json"] = dumps_json(recs) + "\n"
    files["summary.json"] = dumps_json(summary(man)) + "\n"
    digests = {}
    for fname, text in files.items():
        p = out / fname
        try:
            _atomic_write(p, text)
        except OSError as exc:
            raise OSError(f"cannot write {p}: {exc}") from exc
        digests[fname] = hashlib.sha256(text.encode()).hexdigest()
    mdoc = man.to_dict()
    mdoc["emitted"] = digests
    _atomic_write(out / "manifest.json", dumps_json(mdoc) + "\n")
    return digests
