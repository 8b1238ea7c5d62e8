"""Mode-sum fundamental solutions G+(k) / G-(k) applied to grid functions.

G+ solves (-Laplace - k^2) u = f (grating) and (-c0^2 Laplace - k^2) u = f
(wave guide). Each exterior mode is handled by a 1-D convolution in x2 with
the kernel exp(i*lam*|d|)/(-2i*lam); G- uses the complex conjugate kernel.
"""
import math
from dataclasses import dataclass
from typing import Literal, Optional, Sequence

import numpy as np
from scipy.linalg import toeplitz

from Tools.SpectralTools.spectral_basis import (
    BranchSpec,
    C0Profile,
    WaveguideMode,
    check_waveguide_guard,
    bloch_symbol,
    discrete_exponent,
    lambda_branch,
)
from Utilities.errors import BasisMismatchError, ModeCutoffError
from Utilities.settings import GUARD_BAND
from Utilities.utilities import Grid


@dataclass(frozen=True)
class GreenApplication:
    geometry: Literal["grating", "waveguide"]
    k: float
    branch: BranchSpec = BranchSpec.OUTGOING
    # None keeps every grid mode
    mode_cutoff: Optional[int] = None
    # "discrete" inverts the grid operator exactly, "continuous" is the trapezoid rule on the exact kernel
    kernel: Literal["discrete", "continuous"] = "discrete"
    guard_band: float = GUARD_BAND


@dataclass(frozen=True)
class GreenResult:
    field: np.ndarray
    modes_used: int
    # slowest decay rate among the discarded evanescent modes (inf when none were dropped)
    decay_rate: float

    def truncation_bound(self, separation: float) -> float:
        """Relative size exp(-delta*separation) of the discarded modal tail."""
        if not math.isfinite(self.decay_rate):
            return 0.0
        return math.exp(-self.decay_rate * separation)


def _kernel_matrix(app: GreenApplication, z: float, lam: complex, h2: float, n2: int) -> np.ndarray:
    offsets = np.arange(n2)
    if app.kernel == "discrete":
        beta = complex(discrete_exponent(z, h2, sign=app.k))
        column = h2 / (-2j * np.sin(beta * h2)) * np.exp(1j * beta * h2 * offsets)
    else:
        column = h2 * np.exp(1j * lam * h2 * offsets) / (-2j * lam)
    if app.branch == BranchSpec.INCOMING:
        column = np.conj(column)
    return toeplitz(column)


def _modal_apply(app: GreenApplication, coeffs: np.ndarray, zs: np.ndarray,
                 lams: np.ndarray, h2: float) -> np.ndarray:
    n2 = coeffs.shape[0]
    out = np.zeros_like(coeffs, dtype=complex)
    # sorted by mode position so the reduction order is fixed
    for j in range(coeffs.shape[1]):
        if not np.any(coeffs[:, j]):
            continue
        out[:, j] = _kernel_matrix(app, float(zs[j]), complex(lams[j]), h2, n2) @ coeffs[:, j]
    return out


def grating_green_apply(f: np.ndarray, app: GreenApplication, grid: Grid) -> GreenResult:
    """Apply G+/- to a quasi-periodic cell function f of shape (n2, n1)."""
    if not grid.periodic:
        raise BasisMismatchError("grating Green's function needs a periodic grid")
    n1 = grid.n1
    alpha = grid.alpha
    m = np.rint(np.fft.fftfreq(n1, d=1.0 / n1)).astype(int)
    kappa = m + alpha
    propagating = kappa ** 2 < app.k ** 2
    keep = np.ones(n1, dtype=bool)
    decay = math.inf
    if app.mode_cutoff is not None:
        if app.mode_cutoff < int(propagating.sum()):
            raise ModeCutoffError(
                f"mode cutoff {app.mode_cutoff} is below the {int(propagating.sum())} propagating modes",
                {"k": app.k, "mode_cutoff": app.mode_cutoff},
            )
        order = np.lexsort((m, np.abs(kappa)))
        keep[:] = False
        keep[order[: app.mode_cutoff]] = True
        dropped = ~keep
        if np.any(dropped):
            decay = float(np.min(np.sqrt(kappa[dropped] ** 2 - app.k ** 2)))
    lams = np.array([
        lambda_branch(app.k, int(mi), alpha, BranchSpec.OUTGOING, app.guard_band) if kept else 1.0
        for mi, kept in zip(m, keep)
    ])
    zs = app.k ** 2 - bloch_symbol(kappa, grid.h1)
    demodulated = f * np.exp(-1j * alpha * grid.x1)[None, :]
    coeffs = np.fft.fft(demodulated, axis=1) / n1
    coeffs[:, ~keep] = 0.0
    modal = _modal_apply(app, coeffs, zs, lams, grid.h2)
    field = np.fft.ifft(modal * n1, axis=1) * np.exp(1j * alpha * grid.x1)[None, :]
    return GreenResult(field=field, modes_used=int(keep.sum()), decay_rate=decay)


def waveguide_green_apply(f: np.ndarray, app: GreenApplication, basis: Sequence[WaveguideMode],
                          c0: C0Profile, grid: Grid) -> GreenResult:
    """Apply the wave guide mode sum to f of shape (n2, n1); weight f/c0^2 inside."""
    if not basis:
        raise BasisMismatchError("empty wave guide basis")
    for mode in basis:
        if abs(mode.k - app.k) > 1e-12 * max(1.0, abs(app.k)):
            raise BasisMismatchError(
                f"basis built at k={mode.k}, application at k={app.k}",
                {"basis_k": mode.k, "k": app.k},
            )
        if mode.phi.size != grid.n1:
            raise BasisMismatchError("basis and grid differ in the number of x1 nodes")
    if basis[-1].mu > 0 and len(basis) < grid.n1:
        raise ModeCutoffError(
            f"all {len(basis)} basis modes propagate; more propagating modes may be missing",
            {"k": app.k, "mode_cutoff": len(basis)},
        )
    if app.mode_cutoff is not None and app.mode_cutoff < len(basis):
        count = sum(1 for mode in basis if mode.mu > 0)
        if app.mode_cutoff < count:
            raise ModeCutoffError(
                f"mode cutoff {app.mode_cutoff} is below the {count} propagating modes",
                {"k": app.k, "mode_cutoff": app.mode_cutoff},
            )
        basis = list(basis)[: app.mode_cutoff]
    check_waveguide_guard(basis, app.k, app.guard_band)
    phi = np.array([mode.phi for mode in basis])
    mu = np.array([mode.mu for mode in basis])
    lams = np.where(mu > 0, np.sign(app.k) * np.sqrt(np.abs(mu)) + 0j, 1j * np.sqrt(np.abs(mu)))
    weight = grid.line_weights / c0(grid.x1) ** 2
    coeffs = (f * weight[None, :]) @ phi.T
    modal = _modal_apply(app, coeffs, mu, lams, grid.h2)
    field = modal @ phi
    decay = math.inf
    if len(basis) < grid.n1:
        # next mode is at least as evanescent as the last kept one
        decay = math.sqrt(max(-mu[-1], 0.0))
    return GreenResult(field=field, modes_used=len(basis), decay_rate=decay)
