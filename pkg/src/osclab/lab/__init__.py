"""Scenarios, the staged pipeline, emission and the command line."""

from .emit import SCHEMAS, emit, summary
from .pipeline import STAGES, RunManifest, run_pipeline, spectrum_records
from .scenario import BUILTINS, Scenario, ScenarioError, builtin_names, load_scenario, scenario_from_dict

__all__ = [
    "SCHEMAS", "emit", "summary", "STAGES", "RunManifest", "run_pipeline", "spectrum_records",
    "BUILTINS", "Scenario", "ScenarioError", "builtin_names", "load_scenario", "scenario_from_dict",
]
