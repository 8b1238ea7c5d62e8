"""Grating medium carrying a bound state embedded in the continuum.

A potential well V(x2) with bound state -psi'' + V psi = E psi yields the
separable solution exp(i(m+alpha)x1) psi(x2) of the TE equation when
eps = (K - V)/K at k^2 = K = (m+alpha)^2 + E. The scenario is built on the grid
so that the discrete operator is exactly singular at the grid value of K.
"""
import math
from typing import Callable, Literal, Optional, Union

import numpy as np
from pydantic import BaseModel, ConfigDict, Field
from scipy.linalg import eigh_tridiagonal

from Tools.ForwardTools.scenario import (
    Geometry,
    MediumSpec,
    Polarization,
    Resolution,
    Scenario,
)
from Tools.SpectralTools.spectral_basis import bloch_symbol
from Utilities.errors import NoBoundStateError, PositivityError
from Utilities.logger import get_logger

logger = get_logger('embedded')

# extra room beyond the strip for the 1-D bound-state box
BOX_PADDING = 40.0


class PotentialSpec(BaseModel):
    """V(x2), truncated to |x2| < T."""
    model_config = ConfigDict(frozen=True)

    kind: Literal["sech2", "well", "zero"] = "sech2"
    depth: float = Field(default=0.5, ge=0)
    width: float = Field(default=1.0, gt=0)

    def __call__(self, x2) -> np.ndarray:
        x2 = np.asarray(x2, dtype=float)
        if self.kind == "zero":
            return np.zeros_like(x2)
        if self.kind == "well":
            return np.where(np.abs(x2) < self.width, -self.depth, 0.0)
        return -self.depth / np.cosh(x2 / self.width) ** 2

    def bound_energies(self, count: int = 4) -> list[float]:
        """Closed-form levels of the untruncated sech^2 well."""
        if self.kind != "sech2":
            raise ValueError("closed-form levels exist only for the sech2 well")
        s = self.depth * self.width ** 2
        top = math.sqrt(s + 0.25) - 0.5
        return [-((top - j) / self.width) ** 2 for j in range(count) if top - j > 0]


Potential = Union[PotentialSpec, Callable[[np.ndarray], np.ndarray]]


def schrodinger_levels(V: Potential, T: float, half_box: float, h: float, count: int = 6) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Lowest levels of -d2/dx2 + V on [-half_box, half_box], Dirichlet ends, nodes on multiples of h."""
    n = int(round(2 * half_box / h)) - 1
    x = -half_box + h * np.arange(1, n + 1)
    potential = np.where(np.abs(x) < T, np.asarray(V(x), dtype=float), 0.0)
    diagonal = 2.0 / h ** 2 + potential
    off = np.full(n - 1, -1.0 / h ** 2)
    levels, vectors = eigh_tridiagonal(diagonal, off, select="i", select_range=(0, min(count, n) - 1))
    return x, levels, vectors


def _closest(levels: np.ndarray, E: float) -> int:
    return int(np.argmin(np.abs(levels - E)))


def verify_bound_state(V: Potential, E: float, T: float, half_box: float, tolerance: float = 1e-6) -> float:
    """Richardson-extrapolated level nearest E; raises when none lies within tolerance."""
    _, coarse, _ = schrodinger_levels(V, T, half_box, 0.02)
    _, fine, _ = schrodinger_levels(V, T, half_box, 0.01)
    j = _closest(fine, E)
    extrapolated = (4.0 * fine[j] - coarse[_closest(coarse, fine[j])]) / 3.0
    if extrapolated >= 0 or abs(extrapolated - E) > tolerance:
        raise NoBoundStateError(
            f"no bound state within {tolerance:g} of E={E}; nearest level {extrapolated:.10g}",
            {"E": E, "nearest": float(extrapolated)},
        )
    return float(extrapolated)


def embedded_eigen_scenario(V: Potential, E: float, m: int, alpha: float, T: float = 6.0,
                            resolution: Optional[Resolution] = None, margin: float = 2.0,
                            name: str = "embedded-eigen") -> Scenario:
    resolution = resolution or Resolution()
    h2 = resolution.h2
    h1 = 2.0 * math.pi / resolution.n1
    Tprime = T + margin
    half_box = Tprime + BOX_PADDING

    E_reference = verify_bound_state(V, E, T, half_box)

    # discrete level on the scenario's own x2 spacing
    x, levels, _ = schrodinger_levels(V, T, half_box, h2)
    E_grid = float(levels[_closest(levels, E)])
    K_grid = float(bloch_symbol(m + alpha, h1)) + E_grid
    K_exact = (m + alpha) ** 2 + E

    nodes = Tprime * np.linspace(-1.0, 1.0, int(round(2 * Tprime / h2)) + 1)
    potential = np.where(np.abs(nodes) < T, np.asarray(V(nodes), dtype=float), 0.0)
    for label, K in (("grid", K_grid), ("continuum", K_exact)):
        if K <= 0 or np.any(K - potential <= 0):
            raise PositivityError(
                f"(m+alpha)^2 + E - V must be positive ({label} value K={K:.6g})",
                {"K": K, "V_max": float(np.max(potential))},
            )

    contrast = -potential / K_grid
    scenario = Scenario(
        name=name,
        geometry=Geometry.GRATING_CASE1,
        polarization=Polarization.TE,
        alpha=alpha,
        T=T,
        margin=margin,
        resolution=resolution,
        medium=MediumSpec(kind="profile_x2", nodes=nodes.tolist(), values=contrast.tolist()),
        metadata={
            "exceptional_k2": K_grid,
            "exceptional_k2_continuum": K_exact,
            "bound_energy": E_reference,
            "bound_energy_grid": E_grid,
            "mode": m,
        },
    )
    logger.info("embedded eigenvalue scenario", extra={"K_grid": K_grid, "K": K_exact, "E_grid": E_grid})
    return scenario
