"""Scenario files: schema, validation, canonical serialization and built-ins.

A scenario is a YAML or JSON mapping::

    name: AL2
    omega: [1, 1]                 # ints or "p/q" strings are exact, floats are approximate
    A: [{alpha: [1, 0], beta: [1, 0], re: 1, im: 0}]
    V: [{alpha: [1, 0], beta: [0, 1], re: 1}, {alpha: [0, 1], beta: [1, 0], re: 1}]
    delta_rule: hbar              # hbar | hbar_3_2 | eps_hbar2
    eps: 1
    hbar_list: [0.1, 0.05, 0.025] # strictly decreasing
    basis: {E: 1.0, W: 0.25}
    ...

Every other key has a default (see ``DEFAULTS``).
"""

from __future__ import annotations

import copy
import hashlib
import json
import math
from dataclasses import dataclass
from fractions import Fraction
from pathlib import Path

import yaml

from ..frequencies import FrequencyVector
from ..symbols.wick import WickSymbol

__all__ = [
    "ScenarioError",
    "Scenario",
    "DEFAULTS",
    "BUILTINS",
    "load_scenario",
    "builtin_names",
    "scenario_from_dict",
]

DELTA_RULES = ("hbar", "hbar_3_2", "eps_hbar2")

DEFAULTS = {
    "delta_rule": "hbar",
    "eps": 1.0,
    "hbar_list": [0.1, 0.05, 0.025],
    "basis": {"E": 1.0, "W": 0.25, "edge_factor": 1.5},
    "windows": {"alpha": 0.1, "strip_C": 0.5, "normalform_W": 0.1},
    "tolerances": {"tol_zero": 1e-3, "report": 1e-6, "monotone": 1e-6, "strong": 1e-8,
                   "resonance": 1e-8, "resonance_K": 10, "oracle": 1e-10},
    "control": {"T_max": 10.0, "dt": 0.01, "n_action": 11, "n_angle": 16, "exit_fraction": 0.1},
    "F3": {"t0": 0.3, "J": 8},
    "damping": {"eps_sweep": [0.02, 0.05, 0.1, 0.15, 0.2, 0.25, 0.3], "n_action": 12, "n_angle": 32},
    "normalform": {"hbar_list": [0.2, 0.1, 0.05], "margin": 6},
    "resolvent": {"enabled": False, "hbar": 0.05, "alpha0": 1.0, "n_b": 41, "window_factor": 2.0},
    "seed": 0,
}

_NESTED = [k for k, v in DEFAULTS.items() if isinstance(v, dict)]


class ScenarioError(ValueError):
    """Schema violation; ``errors`` lists ``(field, message)`` pairs."""

    def __init__(self, errors):
        self.errors = list(errors)
        super().__init__("; ".join(f"{f}: {m}" for f, m in self.errors))


def _wick(A, B, d):
    terms = []
    for a, b in zip(A, B):
        terms.append({"alpha": list(a) + [0] * (d - len(a)), "beta": list(b) + [0] * (d - len(b)), "re": 1, "im": 0})
    return terms


BUILTINS = {
    "AL2": {
        "name": "AL2",
        "omega": [1, 1],
        "A": _wick([(1, 0)], [(1, 0)], 2),
        "V": _wick([(1, 0), (0, 1)], [(0, 1), (1, 0)], 2),
        "resolvent": {"enabled": True},
    },
    "AL2_V0": {
        "name": "AL2_V0",
        "omega": [1, 1],
        "A": _wick([(1, 0)], [(1, 0)], 2),
        "V": [],
    },
    "NR12": {
        "name": "NR12",
        "omega": [1, 2],
        "A": _wick([(1, 0)], [(1, 0)], 2),
        "V": _wick([(1, 0), (0, 1)], [(0, 1), (1, 0)], 2),
    },
}


def builtin_names() -> list[str]:
    return sorted(BUILTINS)


@dataclass(frozen=True)
class Scenario:
    """Validated scenario; ``data`` is the canonical (defaults-filled) mapping."""

    data: dict

    @property
    def name(self) -> str:
        return self.data["name"]

    @property
    def omega(self) -> FrequencyVector:
        return FrequencyVector.parse(_omega_values(self.data["omega"]))

    @property
    def d(self) -> int:
        return len(self.data["omega"])

    @property
    def A(self) -> WickSymbol:
        return WickSymbol.from_literal(self.d, self.data["A"])

    @property
    def V(self) -> WickSymbol:
        return WickSymbol.from_literal(self.d, self.data["V"])

    @property
    def hbar_list(self) -> list[float]:
        return list(self.data["hbar_list"])

    def __getitem__(self, key):
        return self.data[key]

    def canonical(self) -> str:
        return json.dumps(self.data, sort_keys=True, separators=(",", ":"))

    @property
    def hash(self) -> str:
        return hashlib.sha256(self.canonical().encode()).hexdigest()[:16]

    def to_yaml(self) -> str:
        return yaml.safe_dump(self.data, sort_keys=True)

    def replace(self, **changes) -> "Scenario":
        """Copy with top-level or dotted (``basis.W``) overrides, revalidated."""
        data = copy.deepcopy(self.data)
        for key, val in changes.items():
            parts = key.split(".")
            tgt = data
            for p in parts[:-1]:
                tgt = tgt[p]
            tgt[parts[-1]] = val
        return scenario_from_dict(data)


def _omega_values(lit):
    return [v if isinstance(v, float) else Fraction(str(v)) for v in lit]


def _num(errors, field, v, positive=False, integer=False):
    if isinstance(v, str):
        # YAML 1.1 reads ``1e-3`` as a string
        try:
            v = float(v)
        except ValueError:
            pass
    if isinstance(v, bool) or not isinstance(v, (int, float)):
        errors.append((field, f"expected a number, got {v!r}"))
        return None
    if integer and not float(v).is_integer():
        errors.append((field, f"expected an integer, got {v!r}"))
        return None
    if not math.isfinite(v) or (positive and v <= 0):
        errors.append((field, f"expected a positive finite number, got {v!r}" if positive else f"non-finite {v!r}"))
        return None
    return int(v) if integer else float(v)


def _canon_omega(errors, lit):
    if not isinstance(lit, (list, tuple)) or not lit:
        errors.append(("omega", "expected a nonempty list"))
        return None
    out = []
    for i, v in enumerate(lit):
        if isinstance(v, bool):
            errors.append((f"omega[{i}]", f"bad entry {v!r}"))
        elif isinstance(v, float):
            if not (math.isfinite(v) and v > 0):
                errors.append((f"omega[{i}]", f"must be positive, got {v!r}"))
            out.append(v)
        else:
            try:
                q = Fraction(str(v))
            except (ValueError, ZeroDivisionError):
                errors.append((f"omega[{i}]", f"not a rational literal: {v!r}"))
                continue
            if q <= 0:
                errors.append((f"omega[{i}]", f"must be positive, got {v!r}"))
            out.append(str(q))
    return out


def _canon_symbol(errors, field, lit, d):
    if not isinstance(lit, (list, tuple)):
        errors.append((field, "expected a list of {alpha, beta, re, im} records"))
        return None
    if d is None:
        return None
    try:
        s = WickSymbol.from_literal(d, lit)
    except (KeyError, TypeError, ValueError) as exc:
        errors.append((field, f"malformed term: {exc}"))
        return None
    for t in lit:
        for key in ("alpha", "beta"):
            if len(t[key]) != d or any((not isinstance(x, int)) or x < 0 for x in t[key]):
                errors.append((field, f"{key} must be {d} nonnegative integers, got {t[key]!r}"))
                return None
    if not s.is_real():
        errors.append((field, "symbol is not real-valued"))
        return None
    return s.to_literal()


def scenario_from_dict(raw: dict) -> Scenario:
    """Validate a raw mapping and fill defaults; raises ``ScenarioError``."""
    if not isinstance(raw, dict):
        raise ScenarioError([("<root>", "expected a mapping")])
    errors = []
    known = {"name", "omega", "A", "V"} | set(DEFAULTS)
    for k in raw:
        if k not in known:
            errors.append((k, "unknown field"))
    data = copy.deepcopy(DEFAULTS)
    for k in _NESTED:
        sub = raw.get(k, {})
        if not isinstance(sub, dict):
            errors.append((k, "expected a mapping"))
            continue
        for kk, vv in sub.items():
            if kk not in DEFAULTS[k]:
                errors.append((f"{k}.{kk}", "unknown field"))
            else:
                data[k][kk] = vv
    for k in DEFAULTS:
        if k not in _NESTED and k in raw:
            data[k] = raw[k]
    for req in ("name", "omega", "A", "V"):
        if req not in raw:
            errors.append((req, "required field missing"))
    name = raw.get("name")
    if name is not None and not (isinstance(name, str) and name):
        errors.append(("name", "expected a nonempty string"))
    data["name"] = name
    omega = _canon_omega(errors, raw.get("omega")) if "omega" in raw else None
    data["omega"] = omega
    d = len(omega) if omega else None
    data["A"] = _canon_symbol(errors, "A", raw.get("A", []), d)
    data["V"] = _canon_symbol(errors, "V", raw.get("V", []), d)

    if data["delta_rule"] not in DELTA_RULES:
        errors.append(("delta_rule", f"expected one of {DELTA_RULES}, got {data['delta_rule']!r}"))
    data["eps"] = _num(errors, "eps", data["eps"], positive=True)
    data["seed"] = _num(errors, "seed", data["seed"], integer=True)
    for key in ("hbar_list",):
        hl = data[key]
        if not isinstance(hl, (list, tuple)) or not hl:
            errors.append((key, "expected a nonempty list"))
        else:
            hl = [_num(errors, f"{key}[{i}]", h, positive=True) for i, h in enumerate(hl)]
            if None not in hl and any(b >= a for a, b in zip(hl, hl[1:])):
                errors.append((key, "must be strictly decreasing"))
            data[key] = hl
    for sect in _NESTED:
        for kk, vv in list(data[sect].items()):
            field = f"{sect}.{kk}"
            if isinstance(DEFAULTS[sect][kk], bool):
                if not isinstance(vv, bool):
                    errors.append((field, f"expected true/false, got {vv!r}"))
            elif isinstance(DEFAULTS[sect][kk], list):
                if not isinstance(vv, (list, tuple)) or not vv:
                    errors.append((field, "expected a nonempty list"))
                else:
                    data[sect][kk] = [_num(errors, f"{field}[{i}]", x, positive=True) for i, x in enumerate(vv)]
            else:
                integer = isinstance(DEFAULTS[sect][kk], int)
                data[sect][kk] = _num(errors, field, vv, positive=kk not in ("alpha0",), integer=integer)
    nf = data["normalform"]["hbar_list"]
    if isinstance(nf, list) and None not in nf and any(b >= a for a, b in zip(nf, nf[1:])):
        errors.append(("normalform.hbar_list", "must be strictly decreasing"))
    if errors:
        raise ScenarioError(errors)
    return Scenario(data)


def load_scenario(path_or_name) -> Scenario:
    """Load a scenario file (YAML or JSON) or a built-in by name."""
    key = str(path_or_name)
    if key in BUILTINS and not Path(key).exists():
        return scenario_from_dict(copy.deepcopy(BUILTINS[key]))
    p = Path(key)
    if not p.exists():
        raise ScenarioError([("<path>", f"no scenario file or built-in named {key!r}")])
    try:
        text = p.read_text()
        raw = json.loads(text) if p.suffix == ".json" else yaml.safe_load(text)
    except (OSError, ValueError, yaml.YAMLError) as exc:
        raise ScenarioError([("<file>", f"{p}: {exc}")]) from exc
    return scenario_from_dict(raw)
