import math

import numpy as np
import pytest
import scipy.sparse as sp

from Tools.DtNTools.dtn import trace_basis
from Tools.DtNTools.synthesis import wavelet_input
from Tools.DtNTools.timedomain import stable_step, timedomain_reference
from Utilities.errors import CFLViolationError
from Utilities.utilities import relative_l2

PEAK, DELAY = 0.15, 12.0


def _input(s, dt=0.1):
    basis = trace_basis(s, 1.0 + 0.5, 0)
    t = np.arange(0.0, 60.0 + 1e-9, dt)
    return basis, wavelet_input(basis, 0, t, PEAK, DELAY, s.grid().x1)


def test_stable_step_of_second_difference():
    h = 0.1
    K = sp.diags([-np.ones(9), 2 * np.ones(10), -np.ones(9)], [-1, 0, 1]) / h ** 2
    assert stable_step(K, np.ones(10)) == pytest.approx(h)
    assert stable_step(K, 4 * np.ones(10)) == pytest.approx(2 * h)


def test_forced_step_must_respect_cfl(free_grating):
    _, g = _input(free_grating)
    with pytest.raises(CFLViolationError) as info:
        timedomain_reference(free_grating, g, dt=0.5)
    assert info.value.details["dt_max"] < 0.5


@pytest.mark.slow
def test_leapfrog_matches_time_derivative(free_grating):
    basis, g = _input(free_grating)
    d = timedomain_reference(free_grating, g)
    assert d.metadata["dt"] <= d.metadata["dt_max"]
    t = g.t
    a = (math.pi * PEAK * (t - DELAY)) ** 2
    expected = (2.0 * a - 3.0) * np.exp(-a) * 2.0 * (math.pi * PEAK) ** 2 * (t - DELAY)
    assert relative_l2(d.modal(basis)[:, 0], expected) < 5e-2
    energy = np.array(d.metadata["energy"])
    assert energy[-1] < 0.05 * energy.max()
