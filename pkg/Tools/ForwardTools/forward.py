from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from Tools.ForwardTools.operator import DiscreteSystem, assemble_operator
from Tools.ForwardTools.scenario import Geometry, Polarization, Scenario
from Tools.SpectralTools.green import GreenApplication, grating_green_apply, waveguide_green_apply
from Tools.SpectralTools.spectral_basis import (
    BranchSpec,
    ModalBasis,
    grating_basis,
    lambda_branch,
    sl_eigensystem,
    waveguide_basis,
)
from Utilities.errors import BasisMismatchError, NotPropagatingError
from Utilities.logger import get_logger
from Utilities.utilities import Grid, one_sided_derivative

logger = get_logger('forward')


@dataclass
class LineSource:
    """f(x1) * delta(x2 - level) sampled on the x1 nodes."""
    f: np.ndarray
    level: Optional[float] = None

    @classmethod
    def mode(cls, basis: ModalBasis, m: int, amplitude: complex = 1.0) -> "LineSource":
        return cls(f=amplitude * basis.profiles[basis.position(m)].copy())


@dataclass
class FieldSolution:
    field: np.ndarray
    scattered: np.ndarray
    incident: np.ndarray
    k: float
    n: Optional[int]
    geometry: Geometry
    grid: Grid = field(repr=False)
    basis: ModalBasis = field(repr=False)
    T: float = 1.0
    generalized: bool = False
    condition: float = float("nan")
    amplitudes: dict = field(default_factory=dict)

    def row(self, x2: Optional[float] = None) -> int:
        return self.grid.row(self.T if x2 is None else x2)

    def trace(self, x2: Optional[float] = None, part: str = "total") -> np.ndarray:
        data = {"total": self.field, "scattered": self.scattered, "incident": self.incident}[part]
        return data[self.row(x2)].copy()

    def normal_derivative(self, x2: Optional[float] = None, side: str = "below", part: str = "total") -> np.ndarray:
        """One-sided second-order d/dx2 at the row, taken from below or from above."""
        data = {"total": self.field, "scattered": self.scattered, "incident": self.incident}[part]
        j = self.row(x2)
        h = self.grid.h2
        if side == "below":
            return one_sided_derivative(data[j], data[j - 1], data[j - 2], h)
        return -one_sided_derivative(data[j], data[j + 1], data[j + 2], h)


def _incident_profile(system: DiscreteSystem, n: int) -> tuple[np.ndarray, complex, bool]:
    basis = system.basis
    try:
        pos = basis.position(n)
    except BasisMismatchError as exc:
        raise BasisMismatchError(f"incident mode {n} is not resolved by the grid", {"n": n}) from exc
    return basis.profiles[pos], complex(basis.betas[pos]), bool(basis.propagating[pos])


def extraction_basis(s: Scenario, grid: Grid, k: float) -> ModalBasis:
    """Propagating modes plus the default evanescent tail, used to read off amplitudes."""
    if s.geometry == Geometry.WAVEGUIDE:
        return waveguide_basis(s.c0, k, grid)
    return grating_basis(k, grid)


def incident_wave(system: DiscreteSystem, n: int, x2: np.ndarray) -> np.ndarray:
    """exp(-i beta_n x2) times the mode profile: an exact solution of the exterior grid equations."""
    profile, beta, _ = _incident_profile(system, n)
    return np.exp(-1j * beta * x2)[:, None] * profile[None, :]


def solve_distorted_wave(s: Scenario, n: int, k: float, generalized: bool = False,
                         system: Optional[DiscreteSystem] = None) -> FieldSolution:
    """Total field u+ = incident + outgoing scattered part for incident mode n."""
    if system is None:
        system = assemble_operator(s, k, BranchSpec.OUTGOING)
    grid = system.grid
    if s.geometry != Geometry.WAVEGUIDE:
        lambda_branch(k, n, s.alpha)
    _, _, propagating = _incident_profile(system, n)
    if not propagating and not generalized:
        raise NotPropagatingError(
            f"incident mode {n} is evanescent at k={k}; request a generalized distorted wave",
            {"n": n, "k": k},
        )

    u_inc = incident_wave(system, n, grid.x2)
    h2sq = grid.h2 ** 2
    rhs = -system.apply_interior(u_inc)
    # exterior ghost rows carry the incident wave; only the scattered part meets the closure
    rhs[-1] += incident_wave(system, n, np.array([grid.x2[-1] + grid.h2]))[0] / h2sq
    if s.open_bottom:
        rhs[0] += incident_wave(system, n, np.array([grid.x2[0] - grid.h2]))[0] / h2sq

    v = system.solve(rhs, fixed=-u_inc)
    condition = system.condition_estimate()
    logger.debug("distorted wave solved", extra={"k": k, "n": n, "generalized": generalized, "condition": condition})
    return FieldSolution(
        field=u_inc + v,
        scattered=v,
        incident=u_inc,
        k=k,
        n=n,
        geometry=s.geometry,
        grid=grid,
        basis=extraction_basis(s, grid, k),
        T=s.T,
        generalized=not propagating,
        condition=condition,
    )


def incoming_line_source_solve(s: Scenario, f: LineSource, k: float,
                               system: Optional[DiscreteSystem] = None) -> FieldSolution:
    """w with incoming closures at both open ends and the source f(x1) delta(x2 - T)."""
    if system is None:
        system = assemble_operator(s, k, BranchSpec.INCOMING)
    if system.branch != BranchSpec.INCOMING:
        raise ValueError("line-source solves need an incoming system")
    grid = system.grid
    level = s.T if f.level is None else f.level
    j = grid.row(level)
    source = np.asarray(f.f, dtype=complex)
    if source.shape != (grid.n1,):
        raise BasisMismatchError("line source length differs from the x1 grid", {"n1": grid.n1})

    rhs = np.zeros(grid.shape, dtype=complex)
    a = s.weight(grid)[j]
    rhs[j] = source / (grid.h2 * a)
    w = system.solve(rhs, fixed=np.zeros(grid.shape, dtype=complex))
    return FieldSolution(
        field=w,
        scattered=w,
        incident=np.zeros_like(w),
        k=k,
        n=None,
        geometry=s.geometry,
        grid=grid,
        basis=extraction_basis(s, grid, k),
        T=level,
        condition=system.condition_estimate(),
    )


def born_scattered_field(s: Scenario, n: int, k: float) -> np.ndarray:
    """First Born approximation k^2 G+(chi u_inc) of the scattered field."""
    if s.polarization == Polarization.TM:
        raise ValueError("the Born field is implemented for TE and acoustic scenarios")
    if s.conductors:
        raise ValueError("the Born field has no meaning with conductor inclusions")
    if s.geometry == Geometry.GRATING_CASE2:
        raise ValueError("the Born field uses the free-space Green's function (open bottom only)")
    system = assemble_operator(s, k, BranchSpec.OUTGOING)
    grid = system.grid
    u_inc = incident_wave(system, n, grid.x2)
    source = (k ** 2) * s.contrast(grid) * u_inc
    app = GreenApplication(geometry="waveguide" if s.geometry == Geometry.WAVEGUIDE else "grating", k=k)
    if s.geometry == Geometry.WAVEGUIDE:
        modes = sl_eigensystem(s.c0, k, grid.n1, n1=grid.n1)
        return waveguide_green_apply(source, app, modes, s.c0, grid).field
    return grating_green_apply(source, app, grid).field
