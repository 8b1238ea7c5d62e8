import hashlib
import json

import pytest

from Storage.writer import ResultWriter, read_manifest
from Utilities.errors import ParseError


def test_commit_writes_manifest_with_hashes(tmp_path):
    out = tmp_path / "run"
    with ResultWriter(out, metadata={"kind": "forward_sweep"}) as writer:
        writer.write_json("b.json", {"z": 1, "a": 2})
        writer.write_text("a.csv", "k,re\n1.0,2.0\n")
        assert not out.exists()
    manifest = read_manifest(out)
    assert [entry["path"] for entry in manifest["files"]] == ["a.csv", "b.json"]
    for entry in manifest["files"]:
        assert entry["sha256"] == hashlib.sha256((out / entry["path"]).read_bytes()).hexdigest()
    assert manifest["kind"] == "forward_sweep"
    assert list(json.loads((out / "b.json").read_text())) == ["a", "z"]


def test_failure_leaves_nothing_behind(tmp_path):
    out = tmp_path / "run"
    with pytest.raises(RuntimeError):
        with ResultWriter(out) as writer:
            writer.write_text("partial.csv", "k\n")
            raise RuntimeError("solver blew up")
    assert not out.exists()
    assert list(tmp_path.iterdir()) == []


def test_existing_run_directory_is_refused(tmp_path):
    out = tmp_path / "run"
    out.mkdir()
    (out / "old.txt").write_text("x")
    with pytest.raises(ParseError):
        ResultWriter(out).open()


def test_artifact_names_are_checked(tmp_path):
    with ResultWriter(tmp_path / "run") as writer:
        writer.write_text("a.txt", "1")
        for name in ("a.txt", "manifest.json", "../escape.txt"):
            with pytest.raises(ValueError):
                writer.write_text(name, "2")


def test_unreadable_manifest(tmp_path):
    with pytest.raises(ParseError):
        read_manifest(tmp_path)
