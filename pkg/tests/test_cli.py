import json

from typer.testing import CliRunner

from Storage.writer import read_manifest
from Tools.ExperimentTools.cli import app
from Utilities.errors import AUDIT_FAILURE_EXIT_CODE, ParseError, ThresholdCollisionError

runner = CliRunner()


def test_validate_prints_resolved_config(config_dir):
    result = runner.invoke(app, ["validate", str(config_dir("sweep", kind="forward_sweep", k_grid={"values": [1.5]}))])
    assert result.exit_code == 0
    assert '"kind": "forward_sweep"' in result.stdout


def test_validate_reports_parse_errors(tmp_path):
    result = runner.invoke(app, ["validate", str(tmp_path / "absent.json")])
    assert result.exit_code == ParseError.exit_code


def test_validate_reports_threshold_collisions(config_dir):
    result = runner.invoke(app, ["validate", str(config_dir("hit", kind="forward_sweep", k_grid={"values": [1.0]}))])
    assert result.exit_code == ThresholdCollisionError.exit_code


def test_run_writes_run_directory(config_dir, tmp_path):
    out = tmp_path / "out"
    path = config_dir("sweep", kind="forward_sweep", k_grid={"values": [1.5]})
    result = runner.invoke(app, ["run", str(path), "--out", str(out), "--threads", "2"])
    assert result.exit_code == 0
    manifest = read_manifest(out)
    names = {entry["path"] for entry in manifest["files"]}
    assert {"config.json", "scenario.json", "metrics.json", "amplitudes.json", "amplitudes.csv"} <= names
    assert manifest["passed"] is True
    metrics = json.loads((out / "metrics.json").read_text())
    assert metrics["kind"] == "forward_sweep"
    # a second run into the same directory is refused
    again = runner.invoke(app, ["run", str(path), "--out", str(out)])
    assert again.exit_code == ParseError.exit_code


def test_failed_audit_exit_code(config_dir, tmp_path):
    path = config_dir("flux", kind="flux_audit", k_grid={"values": [1.5]}, tolerances={"flux": -1.0})
    result = runner.invoke(app, ["run", str(path), "--out", str(tmp_path / "flux")])
    assert result.exit_code == AUDIT_FAILURE_EXIT_CODE
    metrics = json.loads((tmp_path / "flux" / "metrics.json").read_text())
    assert metrics["passed"] is False
    assert any(not audit["passed"] for audit in metrics["audits"])
