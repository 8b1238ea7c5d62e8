"""Tool-level operations served over MCP; every function returns the result envelope."""
import json
import math
from pathlib import Path
from typing import Optional

from Tools.DtNTools.dtn import dtn_direct, dtn_symmetry_defect
from Tools.ExperimentTools.config import validate_config
from Tools.ExperimentTools.experiments import run_experiment
from Tools.ForwardTools.forward import solve_distorted_wave
from Tools.ForwardTools.scenario import Geometry, Scenario, load_scenario, parse_scenario
from Tools.ScatteringTools.scatdata import extract_grating_amplitudes, extract_waveguide_amplitudes
from Utilities.middleware import tool_envelope
from Utilities.settings import RESOURCES_DIR
from Utilities.utilities import complex_to_pair, grid_to_pairs

SCENARIO_DIR = RESOURCES_DIR / 'scenarios'


def resolve_scenario(scenario: str | dict) -> Scenario:
    """Bundled name, path to a JSON file, or an inline scenario object."""
    if isinstance(scenario, dict):
        return parse_scenario(scenario)
    bundled = SCENARIO_DIR / f'{scenario}.json'
    return load_scenario(bundled if bundled.is_file() else Path(scenario))


def bundled_scenarios() -> dict:
    return {path.stem: json.loads(path.read_text(encoding='utf-8')) for path in sorted(SCENARIO_DIR.glob('*.json'))}


@tool_envelope
def validate_experiment(config_path: str, resolution_scale: Optional[float] = None):
    cfg = validate_config(config_path, resolution_scale=resolution_scale)
    return {"message": "Config is valid", "config": cfg.model_dump(mode="json")}


@tool_envelope
def run_experiment_tool(config_path: str, out: Optional[str] = None, threads: Optional[int] = None,
                        resolution_scale: Optional[float] = None):
    cfg = validate_config(config_path, resolution_scale=resolution_scale)
    manifest = run_experiment(cfg, out=out, threads=threads)
    passed = manifest.get("passed", True)
    return {
        "message": "All audits passed" if passed else "Some audits exceeded their tolerance",
        "passed": passed,
        "manifest": manifest,
    }


@tool_envelope
def thresholds(scenario: str | dict, k_max: float):
    s = resolve_scenario(scenario)
    ts = s.thresholds(k_max)
    return {
        "message": f"{len(ts.values)} thresholds up to k={k_max}",
        "thresholds": [{"k": value, "modes": ts.modes_at(value)} for value in ts.values],
    }


@tool_envelope
def scattering_amplitudes(scenario: str | dict, k: float, n: int, M: Optional[int] = None,
                          generalized: bool = False, include_field: bool = False):
    s = resolve_scenario(scenario)
    u = solve_distorted_wave(s, n, k, generalized=generalized)
    sides = ("top", "bottom") if s.open_bottom else ("top",)
    result = {}
    for side in sides:
        if s.geometry == Geometry.WAVEGUIDE:
            amplitudes = extract_waveguide_amplitudes(u, side=side)
        else:
            amplitudes = extract_grating_amplitudes(u, M=M, side=side)
        result[side] = [
            {"m": m, "value": complex_to_pair(a.value), "propagating": a.propagating}
            for m, a in sorted(amplitudes.items())
        ]
    payload = {
        "message": f"Solved incident mode {n} at k={k}",
        "condition": u.condition if math.isfinite(u.condition) else str(u.condition),
        "amplitudes": result,
    }
    if include_field:
        payload["field"] = grid_to_pairs(u.field)
    return payload


@tool_envelope
def dtn_matrix(scenario: str | dict, k: float, M: int):
    s = resolve_scenario(scenario)
    dtn = dtn_direct(s, k, M=M)
    payload = {"message": f"DtN map of size {dtn.size} at k={k}", **dtn.to_dict()}
    if s.geometry == Geometry.WAVEGUIDE or abs(2 * s.alpha - round(2 * s.alpha)) < 1e-12:
        payload["symmetry_defect"] = dtn_symmetry_defect(dtn)
    return payload
