import math

import pytest

from Tools.ExperimentTools import service


def test_bundled_scenarios_are_listed():
    names = service.bundled_scenarios()
    assert {"zero_contrast", "smooth_eps", "mirror_case2", "tm_layer", "waveguide"} <= set(names)
    assert service.resolve_scenario("zero_contrast").resolution.n1 == 64


def test_thresholds_tool():
    result = service.thresholds("zero_contrast", 2.5)["result"]
    assert result["status"] == "success"
    assert [entry["k"] for entry in result["thresholds"]] == pytest.approx([0.0, 1.0, 2.0])
    assert result["thresholds"][1]["modes"] == [-1, 1]


def test_scattering_amplitudes_tool():
    scenario = {"geometry": "grating_case1", "T": 1.0, "resolution": {"n1": 16, "h2": 0.1}}
    result = service.scattering_amplitudes(scenario, 1.5, 0, M=2)["result"]
    assert result["status"] == "success"
    assert set(result["amplitudes"]) == {"top", "bottom"}
    top = {entry["m"]: entry for entry in result["amplitudes"]["top"]}
    assert math.hypot(*top[0]["value"]) < 1e-10


def test_tool_errors_use_the_envelope():
    scenario = {"geometry": "grating_case1", "T": 1.0, "resolution": {"n1": 16, "h2": 0.1}}
    result = service.scattering_amplitudes(scenario, 1.0, 0)["result"]
    assert result["status"] == "error"
    assert result["error"] == "ThresholdError"


def test_dtn_matrix_tool():
    result = service.dtn_matrix("zero_contrast", 1.5, 2)["result"]
    assert result["status"] == "success"
    assert result["indices"] == [-2, -1, 0, 1, 2]
    assert result["symmetry_defect"] < 1e-12
