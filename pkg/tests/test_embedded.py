import math

import pytest

from Tools.ForwardTools.embedded import PotentialSpec, embedded_eigen_scenario, verify_bound_state
from Tools.ForwardTools.operator import assemble_operator
from Tools.ForwardTools.scenario import Resolution
from Utilities.errors import NoBoundStateError, PositivityError

E0 = -((math.sqrt(0.75) - 0.5) ** 2)


def test_sech2_closed_form_levels():
    assert PotentialSpec().bound_energies() == pytest.approx([E0])
    deep = PotentialSpec(depth=2.0)
    assert deep.bound_energies() == pytest.approx([-1.0])


def test_bound_state_is_confirmed():
    assert verify_bound_state(PotentialSpec(), E0, T=6.0, half_box=48.0) == pytest.approx(E0, abs=1e-6)


def test_missing_bound_state_is_reported():
    with pytest.raises(NoBoundStateError):
        verify_bound_state(PotentialSpec(), -0.5, T=6.0, half_box=48.0)


def test_positivity_is_required():
    with pytest.raises(PositivityError):
        embedded_eigen_scenario(PotentialSpec(), E0, m=0, alpha=0.0)


@pytest.mark.slow
def test_operator_is_singular_at_embedded_eigenvalue():
    s = embedded_eigen_scenario(PotentialSpec(), E0, m=1, alpha=0.0, resolution=Resolution(n1=16, h2=0.1))
    k_star = math.sqrt(s.metadata["exceptional_k2"])
    near = assemble_operator(s, k_star).condition_estimate()
    far = assemble_operator(s, k_star + 0.05).condition_estimate()
    assert near > 1e6
    assert far < 1e4
