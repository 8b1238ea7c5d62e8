import json
import math

import pytest

from Tools.ForwardTools.scenario import parse_scenario


@pytest.fixture
def free_grating():
    return parse_scenario({
        "name": "free",
        "geometry": "grating_case1",
        "T": 1.0,
        "resolution": {"n1": 32, "h2": 0.1},
    })


@pytest.fixture
def bump_grating():
    return parse_scenario({
        "name": "bump",
        "geometry": "grating_case1",
        "T": 1.0,
        "resolution": {"n1": 32, "h2": 0.1},
        "medium": {"kind": "bump", "amplitude": 0.5, "radius": 0.8, "center": [math.pi, 0.0]},
    })


@pytest.fixture
def mirror_grating():
    return parse_scenario({
        "name": "mirror",
        "geometry": "grating_case2",
        "T": 1.0,
        "R": 1.0,
        "resolution": {"n1": 32, "h2": 0.1},
    })


@pytest.fixture
def bump_waveguide():
    return parse_scenario({
        "name": "guide",
        "geometry": "waveguide",
        "B": math.pi,
        "T": 1.0,
        "resolution": {"n1": 32, "h2": 0.1},
        "medium": {"kind": "bump", "amplitude": 0.3, "radius": 0.6, "center": [math.pi / 2, 0.0]},
    })


@pytest.fixture
def config_dir(tmp_path):
    """A scenario file next to a writer for experiment configs."""
    scenario = {
        "name": "bump",
        "geometry": "grating_case1",
        "T": 1.0,
        "resolution": {"n1": 16, "h2": 0.1},
        "medium": {"kind": "bump", "amplitude": 0.3, "radius": 0.6, "center": [math.pi, 0.0]},
    }
    (tmp_path / "scenario.json").write_text(json.dumps(scenario), encoding="utf-8")

    def write(name: str, **fields):
        data = {"scenario": "scenario.json", "output_dir": str(tmp_path / "runs" / name), **fields}
        path = tmp_path / f"{name}.json"
        path.write_text(json.dumps(data), encoding="utf-8")
        return path

    return write
