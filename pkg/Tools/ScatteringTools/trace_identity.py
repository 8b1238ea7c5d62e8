"""Trace identity between a line source on x2 = T and the distorted wave of mode m.

For the incoming line-source solution w of f(x1) delta(x2 - T) and the
distorted wave u+ of mode m,

    sum h1 w1 conj(f) u+(T) / a(T)  ==  sum area conj(A(psi w)) u_inc

where psi is a smooth cutoff equal to 0 near the strip and 1 near the edges of
the computational domain, so the right side only sees the annulus where psi
varies.
"""
from typing import Optional

import numpy as np
from pydantic import BaseModel, ConfigDict, Field

from Tools.ForwardTools.forward import LineSource, incoming_line_source_solve, solve_distorted_wave
from Tools.ForwardTools.operator import assemble_operator, interior_operator
from Tools.ForwardTools.scenario import Scenario
from Tools.SpectralTools.spectral_basis import BranchSpec
from Utilities.errors import MarginError
from Utilities.logger import get_logger

logger = get_logger('trace_identity')


class CutoffSpec(BaseModel):
    """psi = 0 for |x2| <= T + width/10, 1 for |x2| >= T + width, quintic blend between."""
    model_config = ConfigDict(frozen=True)

    T: float = Field(gt=0)
    width: float = Field(default=1.0, gt=0)

    def __call__(self, x2: np.ndarray, top_only: bool = False) -> np.ndarray:
        x2 = np.asarray(x2, dtype=float)
        start = self.T + 0.1 * self.width
        distance = x2 if top_only else np.abs(x2)
        t = np.clip((distance - start) / (0.9 * self.width), 0.0, 1.0)
        return t ** 3 * (10.0 - 15.0 * t + 6.0 * t ** 2)


def trace_identity_sides(s: Scenario, f: LineSource, m: int, k: float,
                         cutoff: Optional[CutoffSpec] = None) -> tuple[complex, complex]:
    """(left, right) sides of the identity for incident mode m."""
    cutoff = cutoff or CutoffSpec(T=s.T)
    h = s.resolution.h2
    if s.Tprime < cutoff.T + cutoff.width + h - 1e-12:
        raise MarginError(
            f"T'={s.Tprime} leaves no room for the cutoff annulus (needs T + width + h = {cutoff.T + cutoff.width + h})",
            {"Tprime": s.Tprime, "T": cutoff.T, "width": cutoff.width, "h": h},
        )

    u_plus = solve_distorted_wave(s, m, k, generalized=True)
    w = incoming_line_source_solve(s, f, k, system=assemble_operator(s, k, BranchSpec.INCOMING)).field
    grid = u_plus.grid

    level = s.T if f.level is None else f.level
    j = grid.row(level)
    a = s.weight(grid)[j]
    left = complex(np.sum(grid.line_weights * np.conj(f.f) * u_plus.field[j] / a))

    psi = cutoff(grid.x2, top_only=not s.open_bottom)
    A = interior_operator(s, grid, k)
    stencil = (A @ (psi[:, None] * w).reshape(-1)).reshape(grid.shape)
    # closure rows are not plain stencil rows
    stencil[-1] = 0.0
    if s.open_bottom:
        stencil[0] = 0.0
    mask = s.conductor_mask(grid)
    stencil[mask] = 0.0
    right = complex(np.sum(grid.cell_area * np.conj(stencil) * u_plus.incident))
    logger.debug("trace identity", extra={"k": k, "m": m, "left": abs(left), "right": abs(right)})
    return left, right


def lemma1_residual(s: Scenario, f: LineSource, m: int, k: float,
                    cutoff: Optional[CutoffSpec] = None) -> float:
    """|left - right| / (|left| + |right|); zero when both sides vanish."""
    left, right = trace_identity_sides(s, f, m, k, cutoff)
    scale = abs(left) + abs(right)
    return abs(left - right) / scale if scale > 0 else 0.0
