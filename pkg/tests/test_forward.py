import math

import numpy as np
import pytest
from numpy.testing import assert_allclose

from Tools.ForwardTools.forward import (
    LineSource,
    born_scattered_field,
    incoming_line_source_solve,
    solve_distorted_wave,
)
from Tools.ForwardTools.operator import assemble_operator
from Tools.ForwardTools.scenario import complement_connected, parse_scenario
from Tools.ScatteringTools.scatdata import extract_grating_amplitudes
from Tools.SpectralTools.spectral_basis import BranchSpec, discrete_exponent
from Utilities.errors import NotPropagatingError, ParseError, ThresholdError
from Utilities.utilities import relative_l2


def test_zero_contrast_grating_is_transparent(free_grating):
    u = solve_distorted_wave(free_grating, 1, 1.5)
    assert np.max(np.abs(u.scattered)) < 1e-10
    assert u.condition < 1e8


def test_zero_contrast_waveguide_is_transparent(bump_waveguide):
    uniform = bump_waveguide.model_copy(update={"medium": bump_waveguide.medium.model_copy(update={"amplitude": 0.0})})
    u = solve_distorted_wave(uniform, 1, 1.2)
    assert np.max(np.abs(u.scattered)) < 1e-10


def test_mirror_reflects_everything(mirror_grating):
    k = 0.5
    u = solve_distorted_wave(mirror_grating, 0, k)
    amplitudes = extract_grating_amplitudes(u, M=2)
    beta = complex(discrete_exponent(k * k, mirror_grating.resolution.h2))
    assert abs(amplitudes[0].value) == pytest.approx(1.0, abs=1e-8)
    assert amplitudes[0].value == pytest.approx(-np.exp(2j * beta * mirror_grating.R), abs=1e-8)
    for m in (-2, -1, 1, 2):
        assert abs(amplitudes[m].value) < 1e-8


def test_born_approximation_for_weak_contrast(bump_grating):
    weak = bump_grating.model_copy(update={"medium": bump_grating.medium.model_copy(update={"amplitude": 1e-3})})
    u = solve_distorted_wave(weak, 0, 1.5)
    born = born_scattered_field(weak, 0, 1.5)
    assert relative_l2(u.scattered, born) < 1e-2


@pytest.mark.slow
def test_scattered_field_converges_under_refinement(bump_grating):
    k = 1.5
    values = []
    for scale in (1.0, 2.0, 4.0):
        u = solve_distorted_wave(bump_grating.with_resolution(scale), 0, k)
        values.append(extract_grating_amplitudes(u, M=1)[0].value)
    assert abs(values[1] - values[0]) / abs(values[2] - values[1]) >= 3.5


def test_mirror_amplitude_converges_at_second_order(mirror_grating):
    k = 0.5
    exact = -np.exp(2j * k * mirror_grating.R)
    errors = []
    for scale in (1.0, 2.0, 4.0):
        u = solve_distorted_wave(mirror_grating.with_resolution(scale), 0, k)
        errors.append(abs(extract_grating_amplitudes(u, M=1)[0].value - exact))
    assert errors[0] / errors[1] >= 3.5
    assert errors[1] / errors[2] >= 3.5


def test_evanescent_incident_needs_generalized_flag(free_grating):
    with pytest.raises(NotPropagatingError):
        solve_distorted_wave(free_grating, 3, 1.5)
    u = solve_distorted_wave(free_grating, 3, 1.5, generalized=True)
    assert u.generalized


def test_threshold_frequency_is_refused(free_grating):
    with pytest.raises(ThresholdError):
        solve_distorted_wave(free_grating, 0, 1.0 + 1e-9)


def test_incoming_line_source_matches_discrete_kernel(free_grating):
    k = 1.5
    system = assemble_operator(free_grating, k, BranchSpec.INCOMING)
    source = LineSource.mode(system.basis, 0)
    w = incoming_line_source_solve(free_grating, source, k, system=system)
    h = free_grating.resolution.h2
    beta = complex(discrete_exponent(k * k, h))
    expected = h / (2j * math.sin(beta.real * h)) * source.f
    assert_allclose(w.trace(), expected, atol=1e-10)
    # the incoming field grows towards the source from above
    assert_allclose(w.trace(2.0), expected * np.exp(-1j * beta * 1.0), atol=1e-10)


def test_incoming_line_source_needs_incoming_system(free_grating):
    system = assemble_operator(free_grating, 1.5)
    with pytest.raises(ValueError):
        incoming_line_source_solve(free_grating, LineSource(f=np.ones(32)), 1.5, system=system)


def test_normal_derivative_of_incident_wave(free_grating):
    u = solve_distorted_wave(free_grating, 0, 1.5)
    beta = complex(discrete_exponent(2.25, free_grating.resolution.h2))
    derivative = u.normal_derivative(part="incident")
    assert_allclose(derivative, -1j * beta * u.trace(part="incident"), rtol=2e-2)


def test_scenario_rejects_misaligned_T():
    with pytest.raises(ParseError):
        parse_scenario({"geometry": "grating_case1", "T": 1.05, "resolution": {"n1": 32, "h2": 0.1}})


def test_complement_connectivity_wraps_in_x1():
    mask = np.zeros((5, 6), dtype=bool)
    mask[1, 1:] = True
    mask[2, 3] = True
    mask[3, :-1] = True
    assert complement_connected(mask, periodic=True)
    assert not complement_connected(mask, periodic=False)
    mask[2] = True
    assert not complement_connected(mask, periodic=True)


def test_case1_conductors_must_not_cut_the_cell():
    base = {"geometry": "grating_case1", "T": 1.0, "resolution": {"n1": 16, "h2": 0.1}}
    with pytest.raises(ParseError, match="separate"):
        parse_scenario({**base, "conductors": [{"kind": "band"}]})
    with pytest.raises(ParseError):
        parse_scenario({**base, "conductors": [{"kind": "rectangle", "x1_range": [0.0, 2 * math.pi]}]})
    s = parse_scenario({**base, "conductors": [{"kind": "disk", "radius": 0.4}]})
    assert s.conductor_mask(s.grid()).any()
    walled = parse_scenario({**base, "geometry": "grating_case2", "R": 1.0, "conductors": [{"kind": "band"}]})
    assert walled.conductor_mask(walled.grid()).any()


def test_line_source_jump_in_normal_derivative(bump_grating):
    k = 1.5
    grid = bump_grating.grid()
    X1 = grid.x1
    source = LineSource(f=np.cos(X1) + 0.5j * np.sin(2.0 * X1) + 0.25)
    w = incoming_line_source_solve(bump_grating, source, k)
    a = bump_grating.weight(grid)[grid.row(bump_grating.T)]
    jump = w.normal_derivative(side="above") - w.normal_derivative(side="below")
    assert relative_l2(jump, -source.f / a) < 3e-2


def test_solution_does_not_depend_on_the_margin(bump_grating):
    k = 1.5
    near = bump_grating.model_copy(update={"margin": 1.0})
    u_far = solve_distorted_wave(bump_grating, 0, k)
    u_near = solve_distorted_wave(near, 0, k)
    for x2 in (-1.5, -0.5, 0.0, 1.0, 1.5):
        assert_allclose(u_near.trace(x2), u_far.trace(x2), atol=1e-6 * np.max(np.abs(u_far.field)))
    far_amplitudes = extract_grating_amplitudes(u_far, M=3)
    near_amplitudes = extract_grating_amplitudes(u_near, M=3)
    for m in range(-3, 4):
        assert near_amplitudes[m].value == pytest.approx(far_amplitudes[m].value, abs=1e-6)


def test_evanescent_part_of_scattered_field_decays_at_the_slowest_rate(bump_grating):
    k = 1.5
    u = solve_distorted_wave(bump_grating, 0, k)
    n1 = u.grid.n1
    m = np.rint(np.fft.fftfreq(n1, d=1.0 / n1)).astype(int)
    evanescent = np.abs(m) >= 2

    def tail(d):
        coeffs = np.fft.fft(u.trace(bump_grating.T + d, part="scattered")) / n1
        return np.linalg.norm(coeffs[evanescent])

    rate = -math.log(tail(1.8) / tail(0.8))
    delta = math.sqrt(4.0 - k * k)
    assert rate == pytest.approx(delta, rel=0.1)
