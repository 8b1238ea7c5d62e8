import json

import numpy as np
import pytest

from Tools.ForwardTools.forward import solve_distorted_wave
from Tools.ForwardTools.operator import assemble_operator
from Tools.ScatteringTools.scatdata import (
    ScatteringDataset,
    dataset_from_solutions,
    extract_grating_amplitudes,
    extract_waveguide_amplitudes,
    flux_balance,
    flux_normalized_matrix,
    reciprocity_defect,
)
from Utilities.errors import (
    BasisMismatchError,
    IncompleteDataError,
    NotPropagatingError,
    ParseError,
)

K = 1.5


def _grating_dataset(s, k=K, incidents=(-1, 0, 1)):
    system = assemble_operator(s, k)
    solutions = []
    for n in incidents:
        u = solve_distorted_wave(s, n, k, system=system)
        extract_grating_amplitudes(u, M=4)
        if s.open_bottom:
            extract_grating_amplitudes(u, M=4, side="bottom")
        solutions.append(u)
    return dataset_from_solutions(s, solutions, M=4)


def test_discrete_flux_is_conserved(bump_grating):
    ds = _grating_dataset(bump_grating)
    h2 = bump_grating.resolution.h2
    for n in (-1, 0, 1):
        assert flux_balance(ds, n, K, weights="discrete", h2=h2) < 1e-8
        assert flux_balance(ds, n, K) < 1e-2


def test_mirror_flux_is_conserved(mirror_grating):
    ds = _grating_dataset(mirror_grating, k=1.2)
    assert flux_balance(ds, 0, 1.2, weights="discrete", h2=0.1) < 1e-8


def test_waveguide_flux_is_conserved(bump_waveguide):
    u = solve_distorted_wave(bump_waveguide, 1, 1.2)
    extract_waveguide_amplitudes(u)
    extract_waveguide_amplitudes(u, side="bottom")
    ds = dataset_from_solutions(bump_waveguide, [u])
    assert flux_balance(ds, 1, 1.2, weights="discrete", h2=0.1) < 1e-6


def test_reciprocity_of_symmetric_bump(bump_grating):
    ds = _grating_dataset(bump_grating)
    incidents, S = flux_normalized_matrix(ds, K)
    assert incidents == [-1, 0, 1]
    assert S.shape == (3, 3)
    assert reciprocity_defect(ds, K) < 2e-2


def test_amplitudes_do_not_depend_on_reading_level(bump_grating):
    u = solve_distorted_wave(bump_grating, 0, K)
    at_T = extract_grating_amplitudes(u, M=3)
    higher = extract_grating_amplitudes(u, M=3, x2=2.0)
    for m in at_T:
        assert higher[m].value == pytest.approx(at_T[m].value, abs=1e-10)


def test_missing_propagating_mode_is_incomplete(bump_grating):
    ds = _grating_dataset(bump_grating)
    partial = ScatteringDataset(ds.geometry, ds.alpha)
    partial.add(0, K, {0: ds.amplitudes(0, K)[0]})
    with pytest.raises(IncompleteDataError) as info:
        flux_balance(partial, 0, K)
    assert info.value.details["missing"] == [-1, 1]
    with pytest.raises(IncompleteDataError):
        ds.value(0, 7, K)


def test_evanescent_incident_has_no_flux(free_grating):
    u = solve_distorted_wave(free_grating, 3, K, generalized=True)
    extract_grating_amplitudes(u, M=4)
    extract_grating_amplitudes(u, M=4, side="bottom")
    ds = dataset_from_solutions(free_grating, [u])
    with pytest.raises(NotPropagatingError):
        flux_balance(ds, 3, K)


def test_dataset_json_and_csv(bump_grating):
    ds = _grating_dataset(bump_grating, incidents=(0,))
    restored = ScatteringDataset.from_json(ds.to_json())
    assert restored.entries.keys() == ds.entries.keys()
    assert restored.value(0, 1, K) == ds.value(0, 1, K)
    assert restored.provenance["solver_hash"] == ds.provenance["solver_hash"]
    lines = ds.to_csv().splitlines()
    assert lines[0] == "k,side,n,m,re,im,abs2,propagating"
    assert len(lines) == 1 + len(ds.entries)


def test_malformed_dataset_is_a_parse_error():
    with pytest.raises(ParseError):
        ScatteringDataset.from_json("{not json")
    with pytest.raises(ParseError):
        ScatteringDataset.from_dict(json.loads('{"alpha": 0.0, "entries": [{"n": 0}]}'))


def test_merge_refuses_other_geometry(bump_grating, mirror_grating):
    with pytest.raises(BasisMismatchError):
        _grating_dataset(bump_grating, incidents=(0,)).merge(_grating_dataset(mirror_grating, k=1.2, incidents=(0,)))


def test_extraction_checks_geometry(bump_waveguide, mirror_grating):
    guide = solve_distorted_wave(bump_waveguide, 1, 1.2)
    with pytest.raises(BasisMismatchError):
        extract_grating_amplitudes(guide)
    wall = solve_distorted_wave(mirror_grating, 0, 1.2)
    with pytest.raises(ValueError):
        extract_grating_amplitudes(wall, side="bottom")
    assert np.isfinite(wall.condition)
