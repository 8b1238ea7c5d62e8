import json

import pytest

from Tools.ExperimentTools.config import ExperimentKind, KGridSpec, parse_config, validate_config
from Utilities.errors import ParseError, ThresholdCollisionError
from Utilities.settings import RESOURCES_DIR


def test_defaults_are_filled(config_dir):
    cfg = validate_config(config_dir("sweep", kind="forward_sweep", k_grid={"values": [1.5]}))
    assert cfg.kind == ExperimentKind.FORWARD_SWEEP
    assert cfg.resolved_scenario.resolution.n1 == 16
    # propagating |m| <= 1 plus half of the 8 default evanescent modes
    assert cfg.modes.M == 5
    assert cfg.modes.incident is None
    assert cfg.seed == 0


def test_resolution_scale_flag_overrides_config(config_dir):
    path = config_dir("sweep", kind="forward_sweep", k_grid={"values": [1.5]}, resolution_scale=1.0)
    cfg = validate_config(path, resolution_scale=2.0)
    assert cfg.resolution_scale == 2.0
    assert cfg.resolved_scenario.resolution.n1 == 32
    assert cfg.resolved_scenario.resolution.h2 == pytest.approx(0.05)


def test_threshold_collision_names_the_modes(config_dir):
    path = config_dir("hit", kind="forward_sweep", k_grid={"values": [0.5, 1.0, 1.5]})
    with pytest.raises(ThresholdCollisionError) as info:
        validate_config(path)
    collisions = info.value.details["collisions"]
    assert len(collisions) == 1
    assert collisions[0]["k"] == 1.0
    assert collisions[0]["p"] == [-1, 1]
    low, high = collisions[0]["suggested"]
    assert low < 1.0 < high


def test_k_grid_forms():
    assert KGridSpec(start=1.0, stop=2.0, count=3).points() == [1.0, 1.5, 2.0]
    with pytest.raises(ValueError):
        KGridSpec(values=[1.0], start=1.0, stop=2.0, count=3)


@pytest.mark.parametrize("data", [
    {"kind": "forward_sweep", "scenario": "scenario.json"},
    {"kind": "no_such_kind", "scenario": "scenario.json", "k_grid": {"values": [1.5]}},
    {"kind": "continuation_audit", "scenario": "scenario.json", "k_grid": {"values": [1.5]}},
])
def test_invalid_configs(data):
    with pytest.raises(ParseError):
        parse_config(data)


def test_missing_and_broken_files(tmp_path):
    with pytest.raises(ParseError):
        validate_config(tmp_path / "absent.json")
    broken = tmp_path / "broken.json"
    broken.write_text("{", encoding="utf-8")
    with pytest.raises(ParseError):
        validate_config(broken)
    missing_scenario = tmp_path / "cfg.json"
    missing_scenario.write_text(json.dumps({"kind": "forward_sweep", "scenario": "nope.json",
                                            "k_grid": {"values": [1.5]}}), encoding="utf-8")
    with pytest.raises(ParseError):
        validate_config(missing_scenario)


def test_probe_needs_no_scenario():
    cfg = parse_config({"kind": "embedded_eigen_probe"})
    assert cfg.resolved_scenario is None
    assert cfg.probe.m == 1


@pytest.mark.parametrize("name", sorted(p.name for p in (RESOURCES_DIR / "configs").glob("*.json")))
def test_bundled_configs_validate(name):
    cfg = validate_config(RESOURCES_DIR / "configs" / name)
    assert cfg.kind.value in name or cfg.kind == ExperimentKind.FLUX_AUDIT


def test_continuation_target_stays_in_the_sampled_band(config_dir):
    window = {"start": 0.85, "stop": 0.98, "count": 12}
    ok = config_dir("near", kind="continuation_audit", k_grid=window, continuation={"target_k": 0.995})
    assert validate_config(ok).continuation.target_k == 0.995
    across = config_dir("across", kind="continuation_audit", k_grid=window, continuation={"target_k": 1.005})
    with pytest.raises(ThresholdCollisionError) as info:
        validate_config(across)
    assert info.value.details["crossed"] == [1.0]
    far = config_dir("far", kind="continuation_audit", k_grid=window, continuation={"target_k": 0.7})
    with pytest.raises(ParseError, match="trust region"):
        validate_config(far)


def test_bundled_continuation_target_has_no_threshold_in_reach():
    cfg = validate_config(RESOURCES_DIR / "configs" / "continuation_audit.json")
    ks = cfg.k_points()
    pad = 0.25 * (max(ks) - min(ks))
    assert min(ks) - pad <= cfg.continuation.target_k <= max(ks) + pad
    thresholds = cfg.resolved_scenario.thresholds(3.0).values
    assert not [t for t in thresholds if min(ks) - pad <= t <= max(ks) + pad]
