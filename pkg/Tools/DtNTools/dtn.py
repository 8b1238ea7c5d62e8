"""Dirichlet-to-Neumann map of the lower domain x2 < T, seen from the line x2 = T.

The map sends a trace on x2 = T to the normal derivative d/dx2 taken from
below, both expanded in a modal basis. It is computed either directly, by
solving the lower-domain Dirichlet problem, or from distorted-wave data.
"""
import json
import math
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np
from scipy.sparse.linalg import splu

from Tools.ForwardTools.operator import DiscreteSystem, assemble_operator, inverse_norm_estimate
from Tools.ForwardTools.scenario import Geometry, Scenario
from Tools.ScatteringTools.scatdata import ScatteringDataset
from Tools.SpectralTools.spectral_basis import BranchSpec, ModalBasis, grating_basis, waveguide_basis
from Utilities.errors import (
    BasisMismatchError,
    IllConditionedSpanError,
    IncompleteDataError,
    ParseError,
    STConditionError,
)
from Utilities.logger import get_logger
from Utilities.settings import SINGULAR_THRESHOLD
from Utilities.utilities import grid_to_pairs, one_sided_derivative, pairs_to_grid

logger = get_logger('dtn')

SPAN_TOLERANCE = 0.05


@dataclass
class DtNMatrix:
    k: float
    indices: np.ndarray
    entries: np.ndarray
    basis: Optional[ModalBasis] = field(default=None, repr=False)
    diagnostics: dict = field(default_factory=dict)

    @property
    def size(self) -> int:
        return self.indices.size

    def apply(self, coeffs: np.ndarray) -> np.ndarray:
        return self.entries @ np.asarray(coeffs)

    def to_dict(self) -> dict:
        return {
            "k": self.k,
            "indices": [int(m) for m in self.indices],
            "entries": grid_to_pairs(self.entries),
            "diagnostics": self.diagnostics,
        }

    @classmethod
    def from_dict(cls, data: dict) -> "DtNMatrix":
        try:
            return cls(k=float(data["k"]), indices=np.asarray(data["indices"], dtype=int),
                       entries=pairs_to_grid(data["entries"]), diagnostics=dict(data.get("diagnostics", {})))
        except (KeyError, TypeError, ValueError) as exc:
            raise ParseError(f"malformed DtN matrix: {exc}") from exc


def family_to_json(family: Sequence[DtNMatrix]) -> str:
    return json.dumps({"family": [d.to_dict() for d in sorted(family, key=lambda d: d.k)]}, indent=2, sort_keys=True)


def family_from_json(text: str) -> list[DtNMatrix]:
    try:
        data = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ParseError(f"DtN family is not valid JSON: {exc}") from exc
    return [DtNMatrix.from_dict(item) for item in data.get("family", [])]


def trace_basis(s: Scenario, k: float, M: int) -> ModalBasis:
    """|m| <= M for gratings, modes 1..M for wave guides."""
    grid = s.grid()
    if s.geometry == Geometry.WAVEGUIDE:
        return waveguide_basis(s.c0, k, grid, M=M)
    return grating_basis(k, grid, indices=range(-M, M + 1))


def _lower_factor(system: DiscreteSystem, nlow: int):
    block = system.matrix[:nlow, :nlow].tocsc()
    try:
        lu = splu(block)
    except RuntimeError as exc:
        raise STConditionError(
            f"lower-domain Dirichlet problem is singular at k={system.k}",
            {"k": system.k, "condition": math.inf},
        ) from exc
    condition = inverse_norm_estimate(lu, nlow) * max(1.0, system.k ** 2)
    if not condition < system.singular_threshold:
        raise STConditionError(
            f"k={system.k} is near a Dirichlet eigenvalue of the lower domain (condition {condition:.3e})",
            {"k": system.k, "condition": condition},
        )
    return lu, condition


def dtn_direct(s: Scenario, k: float, M: Optional[int] = None, basis: Optional[ModalBasis] = None,
               singular_threshold: float = SINGULAR_THRESHOLD) -> DtNMatrix:
    """Solve the lower Dirichlet problem for each basis trace and project the derivative at T."""
    if basis is None:
        if M is None:
            raise ValueError("pass either M or a basis")
        basis = trace_basis(s, k, M)
    system = assemble_operator(s, k, BranchSpec.OUTGOING, singular_threshold=singular_threshold)
    grid = system.grid
    jT = grid.row(s.T)
    if jT < 2:
        raise ParseError("the lower domain needs at least two rows below x2 = T")
    if basis.weights.size != grid.n1:
        raise BasisMismatchError("basis and scenario grids differ")
    n1 = grid.n1
    nlow = jT * n1

    lu, condition = _lower_factor(system, nlow)
    traces = basis.profiles.T
    coupling = system.matrix[:nlow, nlow:nlow + n1]
    U = lu.solve(np.asarray(-(coupling @ traces), dtype=complex))
    U = U.reshape(jT, n1, basis.size)
    derivative = one_sided_derivative(traces, U[-1], U[-2], grid.h2)
    entries = basis.project(derivative.T).T
    logger.debug("direct DtN", extra={"k": k, "size": basis.size, "condition": condition})
    return DtNMatrix(k=k, indices=basis.indices.copy(), entries=entries, basis=basis,
                     diagnostics={"condition": condition})


def _partner_positions(indices: np.ndarray, geometry: str, alpha: float) -> tuple[list[int], list[int]]:
    if geometry == "waveguide":
        keep = list(range(indices.size))
        return keep, keep
    shift = 2.0 * alpha
    if abs(shift - round(shift)) > 1e-12:
        raise ValueError("the symmetry pairing needs 2*alpha to be an integer")
    position = {int(m): i for i, m in enumerate(indices)}
    keep = [i for i, m in enumerate(indices) if -int(m) - int(round(shift)) in position]
    partner = [position[-int(indices[i]) - int(round(shift))] for i in keep]
    return keep, partner


def dtn_symmetry_defect(dtn: DtNMatrix, geometry: Optional[str] = None, alpha: Optional[float] = None) -> float:
    """||L - J L^T J|| / ||L|| on the indices whose mirror partner m -> -m - 2 alpha is present."""
    geometry = geometry or (dtn.basis.geometry if dtn.basis is not None else "grating")
    alpha = alpha if alpha is not None else (dtn.basis.alpha if dtn.basis is not None else 0.0)
    keep, partner = _partner_positions(dtn.indices, geometry, alpha)
    L = dtn.entries[np.ix_(keep, keep)]
    local = {p: i for i, p in enumerate(keep)}
    J = [local[p] for p in partner]
    mirrored = L.T[np.ix_(J, J)]
    norm = np.linalg.norm(L)
    return float(np.linalg.norm(L - mirrored) / norm) if norm > 0 else 0.0


def _stencil_symbol(s: np.ndarray, h: float) -> np.ndarray:
    """One-sided derivative of exp(i s x2) at T, divided by exp(i s T)."""
    return (3.0 - 4.0 * np.exp(-1j * s * h) + np.exp(-2j * s * h)) / (2.0 * h)


def dtn_from_modes(ds: ScatteringDataset, basis: ModalBasis, T: float, k: Optional[float] = None,
                   reg: float = 1e-8, n_span: Optional[int] = None, check_span: bool = True) -> DtNMatrix:
    """DtN map from the span of distorted-wave traces at x2 = T.

    Each incident mode n (propagating or generalized) gives a trace and a
    derivative in the basis; every basis element is expanded in the traces by
    ridge-regularised least squares and the derivatives are combined alike.
    Assumes the medium is homogeneous on the rows T - 2h .. T.
    """
    k = basis.k if k is None else k
    basis.same_k(k)
    h = basis.h2
    incidents = [n for n in ds.incident_indices(k) if n in set(int(m) for m in basis.indices)]
    incidents.sort(key=lambda n: (abs(n + basis.alpha), n))
    if n_span is not None:
        incidents = incidents[:n_span]
    if not incidents:
        raise IncompleteDataError(f"no distorted-wave data in the basis at k={k}", {"k": k})

    size = basis.size
    beta = basis.betas
    up = np.exp(1j * beta * T)
    traces = np.zeros((size, len(incidents)), dtype=complex)
    derivs = np.zeros_like(traces)
    for col, n in enumerate(incidents):
        pos = basis.position(n)
        a = np.array([ds.value(n, int(m), k) for m in basis.indices])
        down = np.exp(-1j * beta[pos] * T)
        traces[:, col] = a * up
        traces[pos, col] += down
        derivs[:, col] = a * up * _stencil_symbol(beta, h)
        derivs[pos, col] += down * _stencil_symbol(-beta[pos], h)

    scale = np.linalg.norm(traces, axis=0)
    scale[scale == 0] = 1.0
    traces /= scale
    derivs /= scale
    stacked = np.vstack([traces, math.sqrt(reg) * np.eye(len(incidents))])
    target = np.vstack([np.eye(size), np.zeros((len(incidents), size))])
    C, *_ = np.linalg.lstsq(stacked, target, rcond=None)
    residuals = np.linalg.norm(traces @ C - np.eye(size), axis=0)
    entries = derivs @ C
    worst = float(np.max(residuals))
    diagnostics = {"n_span": len(incidents), "reg": reg, "span_residuals": residuals.tolist(), "max_span_residual": worst}
    logger.debug("DtN from modes", extra={"k": k, "n_span": len(incidents), "max_span_residual": worst})
    if check_span and worst > SPAN_TOLERANCE:
        raise IllConditionedSpanError(
            f"distorted-wave traces do not span the basis (residual {worst:.3g} > {SPAN_TOLERANCE})",
            {"k": k, "max_span_residual": worst, "n_span": len(incidents)},
        )
    return DtNMatrix(k=k, indices=basis.indices.copy(), entries=entries, basis=basis, diagnostics=diagnostics)


def relative_difference(a: DtNMatrix, b: DtNMatrix) -> float:
    if not np.array_equal(a.indices, b.indices):
        raise BasisMismatchError("DtN matrices use different index sets")
    norm = np.linalg.norm(b.entries)
    return float(np.linalg.norm(a.entries - b.entries) / norm) if norm > 0 else 0.0


def span_residual_sweep(ds: ScatteringDataset, basis: ModalBasis, T: float, n_spans: Sequence[int],
                        k: Optional[float] = None, reg: float = 1e-8) -> list[tuple[int, float]]:
    """RMS expansion residual of the basis in the first N distorted-wave traces, for each requested N.

    The traces are taken in the same |n + alpha| order for every N, so the spans are nested.
    """
    sweep = []
    for n_span in n_spans:
        dtn = dtn_from_modes(ds, basis, T, k=k, reg=reg, n_span=n_span, check_span=False)
        residuals = np.asarray(dtn.diagnostics["span_residuals"])
        sweep.append((dtn.diagnostics["n_span"], float(np.sqrt(np.mean(residuals ** 2)))))
    return sweep


def monotone_ratio(values: Sequence[float], floor: float = 1e-8) -> float:
    """Largest values[i+1] / values[i]; at most 1 for a non-increasing sequence.

    Denominators are clamped to `floor` so that residuals at round-off level count as flat.
    """
    values = [float(v) for v in values]
    if len(values) < 2:
        return 0.0
    return max(b / max(a, floor) for a, b in zip(values, values[1:]))
