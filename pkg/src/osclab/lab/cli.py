"""Command line entry point ``osclab``.

Exit codes: 0 ok, 2 scenario error, 3 numeric failure.
"""

from __future__ import annotations

import argparse
import sys

import numpy as np

from .emit import dumps_json, emit, summary
from .pipeline import run_pipeline
from .scenario import ScenarioError, builtin_names, load_scenario

EXIT_OK, EXIT_SCENARIO, EXIT_NUMERIC = 0, 2, 3

_VERB_STAGES = {
    "run": None,
    "sweep": ["gap"],
    "check-control": ["control"],
    "resolvent-scan": ["resolvent"],
}


def _hbars(text):
    try:
        vals = [float(x) for x in text.split(",") if x.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"not a comma-separated list of numbers: {text!r}")
    if not vals:
        raise argparse.ArgumentTypeError("empty hbar list")
    return vals


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="osclab", description="Damped oscillator spectral experiments.")
    sub = p.add_subparsers(dest="verb", required=True)
    for verb, help_ in (
        ("run", "run every pipeline stage and emit all tables"),
        ("sweep", "hbar sweep: spectra, gap table and strip check"),
        ("check-control", "geometric control check on the energy shell"),
        ("resolvent-scan", "smallest singular value scan and fitted resolvent constant"),
        ("egorov-verify", "matrix-vs-series Egorov check on built-in instances"),
        ("list-scenarios", "list built-in scenarios with their hashes"),
    ):
        sp = sub.add_parser(verb, help=help_)
        if verb == "list-scenarios":
            continue
        sp.add_argument("--scenario", default="AL2", help="built-in name or YAML/JSON file")
        sp.add_argument("--hbar", type=_hbars, help="comma-separated, strictly decreasing")
        sp.add_argument("--delta-rule", choices=["hbar", "hbar_3_2", "eps_hbar2"])
        sp.add_argument("--window", type=float, help="energy window half-width W")
        sp.add_argument("--out", default="osclab_out", help="output directory")
        sp.add_argument("--format", choices=["csv", "json"], default="csv")
        sp.add_argument("--no-cache", action="store_true", help="recompute every stage")
        sp.add_argument("--threads", type=int, default=1)
    return p


def _scenario(args):
    s = load_scenario(args.scenario)
    changes = {}
    if args.hbar is not None:
        if args.verb == "resolvent-scan":
            changes["resolvent.hbar"] = args.hbar[0]
        else:
            changes["hbar_list"] = args.hbar
    if args.delta_rule is not None:
        changes["delta_rule"] = args.delta_rule
    if args.window is not None:
        changes["basis.W"] = args.window
    if args.verb == "resolvent-scan":
        changes["resolvent.enabled"] = True
    return s.replace(**changes) if changes else s


def _egorov(args) -> dict:
    from ..normalform import egorov_check
    from ..quantize import FockBasis
    from ..symbols import PlaneWaveSymbol, WickSymbol

    hbar = args.hbar[0] if args.hbar else 0.1
    out = {"hbar": hbar, "instances": []}
    W = WickSymbol
    G = W.action(1, 0) + W.monomial((2,), (0,), "1/4") + W.monomial((0,), (2,), "1/4")
    a = W.monomial((2,), (1,)) + W.monomial((1,), (2,))
    nmax = int(round(9.0 / hbar))
    basis = FockBasis.degree_cap(1, hbar, nmax)
    half = PlaneWaveSymbol(1, {(1.0, 0.0): 0.5, (-1.0, 0.0): 0.5})
    cos_xi = PlaneWaveSymbol(1, {(0.0, 1.0): 0.5, (0.0, -1.0): 0.5})
    cases = [
        ("wick_squeeze_cubic", G, a, 0.5, {"interior": nmax // 4}),
        ("planewave_cosx_cosxi", half, cos_xi, 0.1, {"s": 1.0, "sigma": 0.9}),
    ]
    for name, g, sym, t, kw in cases:
        reps = [egorov_check(g, sym, t, hbar, basis, J=J, **kw) for J in (6, 12)]
        out["instances"].append({
            "name": name, "t": t,
            "discrepancy": {str(r.J): r.discrepancy for r in reps},
            "decreasing": reps[1].discrepancy <= reps[0].discrepancy,
        })
    return out


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    if args.verb == "list-scenarios":
        for name in builtin_names():
            print(f"{name}\t{load_scenario(name).hash}")
        return EXIT_OK
    if args.verb == "egorov-verify":
        try:
            res = _egorov(args)
        except (ValueError, RuntimeError, np.linalg.LinAlgError) as exc:
            print(f"numeric failure: {exc}", file=sys.stderr)
            return EXIT_NUMERIC
        print(dumps_json(res))
        return EXIT_OK if all(i["decreasing"] for i in res["instances"]) else EXIT_NUMERIC
    try:
        s = _scenario(args)
    except ScenarioError as exc:
        for field, msg in exc.errors:
            print(f"scenario error: {field}: {msg}", file=sys.stderr)
        return EXIT_SCENARIO
    man = run_pipeline(s, _VERB_STAGES[args.verb], use_cache=not args.no_cache, threads=args.threads)
    try:
        emit(man, args.out, args.format)
    except OSError as exc:
        print(str(exc), file=sys.stderr)
        return EXIT_NUMERIC
    print(dumps_json(summary(man)))
    for name in man.failed:
        print(f"stage {name} failed: {man.stages[name].error}", file=sys.stderr)
    return EXIT_OK if man.complete else EXIT_NUMERIC


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
