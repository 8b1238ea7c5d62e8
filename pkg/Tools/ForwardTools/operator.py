"""Finite-difference assembly of A = -div(p grad) - k^2 q on the truncated strip.

Unknowns are the grid nodes flattened row-major (x2 row, then x1). The exterior
above x2 = T' (and below x2 = -T' when the bottom is open) is represented
exactly by the modal closure ghost = Tm @ boundary_row, with
Tm = sum_m profile_m * exp(i*beta_m*h2) * <profile_m, .>.
"""
import math
from dataclasses import dataclass, field
from typing import Optional

import numpy as np
import scipy.sparse as sp
from scipy.sparse.linalg import splu

from Tools.ForwardTools.scenario import Geometry, Polarization, Scenario
from Tools.SpectralTools.spectral_basis import (
    BranchSpec,
    ModalBasis,
    grating_basis,
    transfer_factor,
    waveguide_basis,
)
from Utilities.errors import SingularSystemError
from Utilities.logger import get_logger
from Utilities.settings import GUARD_BAND, SINGULAR_THRESHOLD
from Utilities.utilities import Grid

logger = get_logger('operator')


def exterior_basis(s: Scenario, grid: Grid, k: float, branch: BranchSpec = BranchSpec.OUTGOING,
                   guard_band: float = GUARD_BAND) -> ModalBasis:
    """Every grid mode of the homogeneous exterior at k."""
    if s.geometry == Geometry.WAVEGUIDE:
        return waveguide_basis(s.c0, k, grid, M=grid.n1, branch=branch, guard_band=guard_band)
    m = np.rint(np.fft.fftfreq(grid.n1, d=1.0 / grid.n1)).astype(int)
    return grating_basis(k, grid, indices=m, branch=branch)


def transfer_matrix(basis: ModalBasis, branch: BranchSpec) -> np.ndarray:
    r = transfer_factor(basis.betas, basis.h2, branch)
    norm = 2.0 * math.pi if basis.geometry == "grating" else 1.0
    P = basis.profiles
    return (P.T * r[None, :]) @ (np.conj(P) * basis.weights[None, :]) / norm


def _face_coefficients(s: Scenario, grid: Grid) -> tuple[np.ndarray, np.ndarray]:
    """p on x1 faces (n2, n1), face i+1/2, and on x2 faces (n2+1, n1), face j-1/2."""
    n2, n1 = grid.shape
    if s.polarization != Polarization.TM:
        return np.ones((n2, n1)), np.ones((n2 + 1, n1))
    x2_ext = np.concatenate(([grid.x2[0] - grid.h2], grid.x2, [grid.x2[-1] + grid.h2]))
    eps = s.epsilon(grid, x2_ext)
    # harmonic average of 1/eps
    p1 = 2.0 / (eps[1:-1] + np.roll(eps[1:-1], -1, axis=1))
    p2 = 2.0 / (eps[:-1] + eps[1:])
    return p1, p2


def interior_operator(s: Scenario, grid: Grid, k: float) -> sp.csr_matrix:
    """Stencil rows with zero ghost values: the Dirichlet truncation of A."""
    n2, n1 = grid.shape
    idx = np.arange(n2 * n1).reshape(n2, n1)
    p1, p2 = _face_coefficients(s, grid)
    h1sq, h2sq = grid.h1 ** 2, grid.h2 ** 2
    rows, cols, vals = [], [], []

    def add(r, c, v):
        rows.append(np.ravel(r))
        cols.append(np.ravel(c))
        vals.append(np.ravel(np.broadcast_to(v, np.shape(r))))

    i = np.arange(n1)
    if grid.periodic:
        wrap = np.exp(2j * math.pi * grid.alpha)
        p_left = np.roll(p1, 1, axis=1)
        right_phase = np.where(i == n1 - 1, wrap, 1.0)
        left_phase = np.where(i == 0, np.conj(wrap), 1.0)
        add(idx, idx, (p1 + p_left) / h1sq)
        add(idx, idx[:, (i + 1) % n1], -p1 * right_phase[None, :] / h1sq)
        add(idx, idx[:, (i - 1) % n1], -p_left * left_phase[None, :] / h1sq)
    else:
        # Dirichlet at x1 = 0, ghost-point Neumann at x1 = B
        add(idx, idx, np.full((n2, n1), 2.0 / h1sq))
        add(idx[:, :-1], idx[:, 1:], np.full((n2, n1 - 1), -1.0 / h1sq))
        left = np.full((n2, n1 - 1), -1.0 / h1sq)
        left[:, -1] = -2.0 / h1sq
        add(idx[:, 1:], idx[:, :-1], left)

    add(idx, idx, (p2[:-1] + p2[1:]) / h2sq)
    add(idx[:-1], idx[1:], -p2[1:-1] / h2sq)
    add(idx[1:], idx[:-1], -p2[1:-1] / h2sq)
    add(idx, idx, -(k ** 2) * s.coefficient(grid))

    N = n1 * n2
    A = sp.coo_matrix(
        (np.concatenate(vals).astype(complex), (np.concatenate(rows), np.concatenate(cols))),
        shape=(N, N),
    )
    return A.tocsr()


@dataclass
class DiscreteSystem:
    scenario: Scenario
    grid: Grid
    k: float
    branch: BranchSpec
    interior: sp.csr_matrix = field(repr=False)
    unmasked: sp.csc_matrix = field(repr=False)
    matrix: sp.csc_matrix = field(repr=False)
    mask: np.ndarray = field(repr=False)
    basis: ModalBasis = field(repr=False)
    transfer: np.ndarray = field(repr=False)
    singular_threshold: float = SINGULAR_THRESHOLD
    _lu: object = field(default=None, repr=False)
    _condition: Optional[float] = field(default=None, repr=False)

    @property
    def size(self) -> int:
        return self.matrix.shape[0]

    def factor(self):
        if self._lu is None:
            try:
                self._lu = splu(self.matrix)
            except RuntimeError as exc:
                raise SingularSystemError(
                    f"factorization is exactly singular at k={self.k}",
                    {"k": self.k, "condition": math.inf},
                ) from exc
        return self._lu

    def condition_estimate(self, iterations: int = 8) -> float:
        """max(1, k^2) * ||A^-1||_2 from inverse power iteration on A^H A."""
        if self._condition is None:
            try:
                lu = self.factor()
            except SingularSystemError:
                self._condition = math.inf
                return self._condition
            self._condition = inverse_norm_estimate(lu, self.size, iterations) * max(1.0, self.k ** 2)
            logger.debug("condition estimate", extra={"k": self.k, "condition": self._condition, "unknowns": self.size})
        return self._condition

    def check_conditioning(self) -> float:
        condition = self.condition_estimate()
        if not condition < self.singular_threshold:
            raise SingularSystemError(
                f"system near-singular at k={self.k} (condition estimate {condition:.3e}); "
                "k is likely in the exceptional set",
                {"k": self.k, "condition": condition},
            )
        return condition

    def solve(self, rhs: np.ndarray, fixed: Optional[np.ndarray] = None) -> np.ndarray:
        """Solve A x = rhs with x pinned to `fixed` on conductor nodes."""
        self.check_conditioning()
        b = np.asarray(rhs, dtype=complex).reshape(-1).copy()
        flat_mask = self.mask.reshape(-1)
        if np.any(flat_mask):
            pinned = np.zeros(self.size, dtype=complex)
            if fixed is not None:
                pinned[flat_mask] = np.asarray(fixed).reshape(-1)[flat_mask]
            b -= self.unmasked @ pinned
            b[flat_mask] = pinned[flat_mask]
        x = self.factor().solve(b)
        return x.reshape(self.grid.shape)

    def apply_interior(self, u: np.ndarray) -> np.ndarray:
        return (self.interior @ np.asarray(u).reshape(-1)).reshape(self.grid.shape)


def inverse_norm_estimate(lu, n: int, iterations: int = 8, seed: int = 0) -> float:
    rng = np.random.default_rng(seed)
    x = rng.standard_normal(n) + 1j * rng.standard_normal(n)
    x /= np.linalg.norm(x)
    growth = 0.0
    with np.errstate(over="ignore", invalid="ignore"):
        for _ in range(iterations):
            y = lu.solve(lu.solve(x, trans="H"))
            growth = float(np.linalg.norm(y))
            if not np.isfinite(growth) or growth == 0.0:
                return math.inf
            x = y / growth
    return math.sqrt(growth)


def assemble_operator(s: Scenario, k: float, branch: BranchSpec = BranchSpec.OUTGOING,
                      guard_band: float = GUARD_BAND,
                      singular_threshold: float = SINGULAR_THRESHOLD) -> DiscreteSystem:
    grid = s.grid()
    basis = exterior_basis(s, grid, k, branch, guard_band)
    transfer = transfer_matrix(basis, branch)
    interior = interior_operator(s, grid, k)

    n2, n1 = grid.shape
    idx = np.arange(n2 * n1).reshape(n2, n1)
    closure_rows = [idx[-1]]
    if s.open_bottom:
        closure_rows.append(idx[0])
    rows, cols, vals = [], [], []
    for row in closure_rows:
        rows.append(np.repeat(row, n1))
        cols.append(np.tile(row, n1))
        vals.append((-transfer / grid.h2 ** 2).ravel())
    closure = sp.coo_matrix(
        (np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))),
        shape=interior.shape,
    )
    unmasked = (interior + closure).tocsc()

    mask = s.conductor_mask(grid)
    matrix = unmasked
    if np.any(mask):
        keep = sp.diags((~mask).reshape(-1).astype(float))
        matrix = (keep @ unmasked @ keep + sp.diags(mask.reshape(-1).astype(float))).tocsc()

    logger.debug(
        "assembled operator",
        extra={"scenario": s.name, "k": k, "branch": branch.value, "shape": list(grid.shape), "nnz": int(matrix.nnz)},
    )
    return DiscreteSystem(
        scenario=s,
        grid=grid,
        k=k,
        branch=branch,
        interior=interior,
        unmasked=unmasked,
        matrix=matrix,
        mask=mask,
        basis=basis,
        transfer=transfer,
        singular_threshold=singular_threshold,
    )
