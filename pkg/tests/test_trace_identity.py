import math

import numpy as np
import pytest

from Tools.ForwardTools.forward import LineSource
from Tools.ForwardTools.operator import assemble_operator
from Tools.ScatteringTools.trace_identity import CutoffSpec, lemma1_residual, trace_identity_sides
from Tools.SpectralTools.spectral_basis import BranchSpec, discrete_exponent
from Utilities.errors import MarginError

K = 1.5


def _mode_source(s, m):
    return LineSource.mode(assemble_operator(s, K, BranchSpec.INCOMING).basis, m)


def test_cutoff_profile():
    psi = CutoffSpec(T=1.0, width=1.0)
    assert psi(np.array([0.0, 1.0, 1.1])) == pytest.approx([0.0, 0.0, 0.0])
    assert psi(np.array([1.55])) == pytest.approx([0.5])
    assert psi(np.array([2.0, 3.0, -3.0])) == pytest.approx([1.0, 1.0, 1.0])
    assert psi(np.array([-3.0]), top_only=True) == pytest.approx([0.0])


def test_free_space_sides_match_closed_form(free_grating):
    left, right = trace_identity_sides(free_grating, _mode_source(free_grating, 0), 0, K)
    beta = complex(discrete_exponent(K * K, free_grating.resolution.h2))
    assert left == pytest.approx(2 * math.pi * np.exp(-1j * beta * free_grating.T), rel=1e-10)
    assert right == pytest.approx(left, rel=1e-8)


@pytest.mark.parametrize("width", [0.5, 1.0, 1.5])
def test_identity_holds_for_every_cutoff_width(bump_grating, width):
    f = _mode_source(bump_grating, 1)
    assert lemma1_residual(bump_grating, f, 0, K, CutoffSpec(T=bump_grating.T, width=width)) < 1e-8


def test_sides_do_not_depend_on_cutoff(bump_grating):
    f = _mode_source(bump_grating, -1)
    narrow = trace_identity_sides(bump_grating, f, 1, K, CutoffSpec(T=1.0, width=0.5))
    wide = trace_identity_sides(bump_grating, f, 1, K, CutoffSpec(T=1.0, width=1.8))
    assert wide[0] == pytest.approx(narrow[0], rel=1e-12)
    assert wide[1] == pytest.approx(narrow[1], rel=1e-8)


def test_identity_with_random_source_and_evanescent_mode(bump_grating):
    rng = np.random.default_rng(7)
    f = LineSource(f=rng.standard_normal(32) + 1j * rng.standard_normal(32))
    assert lemma1_residual(bump_grating, f, 3, K) < 1e-8


def test_identity_above_a_wall(mirror_grating):
    assert lemma1_residual(mirror_grating, _mode_source(mirror_grating, 0), 0, K) < 1e-8


def test_cutoff_must_fit_inside_margin(bump_grating):
    with pytest.raises(MarginError):
        trace_identity_sides(bump_grating, _mode_source(bump_grating, 0), 0, K, CutoffSpec(T=1.0, width=2.0))


def test_identity_in_a_wave_guide(bump_waveguide):
    k = 1.2
    f = LineSource.mode(assemble_operator(bump_waveguide, k, BranchSpec.INCOMING).basis, 2)
    assert lemma1_residual(bump_waveguide, f, 1, k) < 1e-8
