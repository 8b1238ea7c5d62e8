import math

import numpy as np
import pytest
from numpy.testing import assert_allclose

from Tools.ForwardTools.operator import assemble_operator
from Tools.SpectralTools.green import GreenApplication, grating_green_apply, waveguide_green_apply
from Tools.SpectralTools.spectral_basis import BranchSpec, sl_eigensystem
from Utilities.errors import BasisMismatchError, ModeCutoffError


def _source(grid):
    X1, X2 = grid.mesh()
    return np.where(np.abs(X2) < 0.5, np.cos(X1) * (0.25 - X2 ** 2), 0.0) + 0j


@pytest.mark.parametrize("branch", [BranchSpec.OUTGOING, BranchSpec.INCOMING])
def test_grating_green_inverts_interior_operator(free_grating, branch):
    k = 1.5
    system = assemble_operator(free_grating, k, branch)
    f = _source(system.grid)
    u = grating_green_apply(f, GreenApplication(geometry="grating", k=k, branch=branch), system.grid).field
    assert_allclose(system.apply_interior(u)[1:-1], f[1:-1], atol=1e-10)


def test_grating_green_continuous_kernel_is_close(free_grating):
    grid = free_grating.grid()
    f = _source(grid)
    exact = grating_green_apply(f, GreenApplication(geometry="grating", k=1.5), grid).field
    trapezoid = grating_green_apply(f, GreenApplication(geometry="grating", k=1.5, kernel="continuous"), grid).field
    assert np.linalg.norm(exact - trapezoid) / np.linalg.norm(exact) < 0.05


def test_grating_green_mode_cutoff(free_grating):
    grid = free_grating.grid()
    result = grating_green_apply(_source(grid), GreenApplication(geometry="grating", k=1.5, mode_cutoff=5), grid)
    assert result.modes_used == 5
    assert result.decay_rate == pytest.approx(math.sqrt(9 - 2.25))
    assert result.truncation_bound(2.0) == pytest.approx(math.exp(-2 * math.sqrt(6.75)))
    with pytest.raises(ModeCutoffError):
        grating_green_apply(_source(grid), GreenApplication(geometry="grating", k=1.5, mode_cutoff=2), grid)


def test_waveguide_green_inverts_interior_operator(bump_waveguide):
    k = 1.2
    uniform = bump_waveguide.model_copy(update={"medium": bump_waveguide.medium.model_copy(update={"amplitude": 0.0})})
    system = assemble_operator(uniform, k)
    grid = system.grid
    f = _source(grid)
    modes = sl_eigensystem(uniform.c0, k, grid.n1, n1=grid.n1)
    u = waveguide_green_apply(f, GreenApplication(geometry="waveguide", k=k), modes, uniform.c0, grid).field
    assert_allclose(system.apply_interior(u)[1:-1], f[1:-1], atol=1e-8)


def test_waveguide_green_rejects_foreign_basis(bump_waveguide):
    grid = bump_waveguide.grid()
    modes = sl_eigensystem(bump_waveguide.c0, 1.3, grid.n1, n1=grid.n1)
    with pytest.raises(BasisMismatchError):
        waveguide_green_apply(_source(grid), GreenApplication(geometry="waveguide", k=1.2), modes,
                              bump_waveguide.c0, grid)


def _random_field(grid, seed):
    rng = np.random.default_rng(seed)
    X1, X2 = grid.mesh()
    envelope = np.abs(X2) < 0.8
    return envelope * (rng.standard_normal(grid.shape) + 1j * rng.standard_normal(grid.shape))


def test_incoming_green_is_the_conjugate_of_outgoing(free_grating):
    grid = free_grating.grid()
    f = _random_field(grid, 1)
    outgoing = grating_green_apply(np.conj(f), GreenApplication(geometry="grating", k=1.5), grid).field
    incoming = grating_green_apply(f, GreenApplication(geometry="grating", k=1.5, branch=BranchSpec.INCOMING), grid).field
    assert_allclose(incoming, np.conj(outgoing), atol=1e-12)


@pytest.mark.parametrize("kernel", ["discrete", "continuous"])
def test_grating_green_is_reciprocal(free_grating, kernel):
    grid = free_grating.grid()
    f, g = _random_field(grid, 2), _random_field(grid, 3)
    app = GreenApplication(geometry="grating", k=1.5, kernel=kernel)
    Gf = grating_green_apply(f, app, grid).field
    Gg = grating_green_apply(g, app, grid).field
    assert np.sum(g * Gf) == pytest.approx(np.sum(f * Gg), rel=1e-10)
