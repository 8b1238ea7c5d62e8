"""Leapfrog reference for the lower-domain wave problem driven by Dirichlet data on x2 = T.

    q v_tt + q sigma v_t = -K v - B g(t)

K is the Dirichlet stencil of -div(p grad) below T, B couples the data row.
An open bottom is extended by a damping sponge; a case-2 wall stays a wall.
"""
import dataclasses
import math
from typing import Optional

import numpy as np
from scipy.interpolate import CubicSpline

from Tools.DtNTools.synthesis import TimeTraceSet
from Tools.ForwardTools.operator import interior_operator
from Tools.ForwardTools.scenario import Scenario
from Utilities.errors import CFLViolationError
from Utilities.logger import get_logger
from Utilities.utilities import one_sided_derivative

logger = get_logger('timedomain')

CFL_SAFETY = 0.9


def stable_step(K, q: np.ndarray) -> float:
    """2 / sqrt(lambda_max(q^-1 K)) with lambda_max bounded by Gershgorin row sums."""
    row_sums = np.asarray(abs(K).sum(axis=1)).ravel()
    return 2.0 / math.sqrt(float(np.max(row_sums / q)))


def timedomain_reference(s: Scenario, g: TimeTraceSet, sponge: float = 12.0, sigma_max: float = 2.0,
                         dt: Optional[float] = None) -> TimeTraceSet:
    grid = s.grid()
    h = grid.h2
    n1 = grid.n1
    rows_sponge = int(round(sponge / h)) if s.open_bottom else 0
    bottom = grid.x2[0] - rows_sponge * h
    x2 = bottom + h * np.arange(int(round((s.T - bottom) / h)) + 1)
    full = dataclasses.replace(grid, x2=x2)
    low = dataclasses.replace(grid, x2=x2[:-1])
    nlow = low.n2 * n1

    A = interior_operator(s, full, 0.0)
    K = A[:nlow, :nlow].tocsr()
    B = A[:nlow, nlow:].tocsr()
    q = np.real(s.coefficient(low)).reshape(-1)
    mask = s.conductor_mask(low).reshape(-1)

    depth = np.clip((grid.x2[0] - low.x2) / sponge, 0.0, None) if rows_sponge else np.zeros(low.n2)
    sigma = np.repeat(sigma_max * depth ** 2, n1)

    dt_cfl = stable_step(K, q)
    if dt is not None:
        if dt > dt_cfl:
            raise CFLViolationError(
                f"time step {dt:.4g} exceeds the stability limit {dt_cfl:.4g}",
                {"dt": dt, "dt_max": dt_cfl},
            )
        substeps = max(1, int(math.ceil(g.dt / dt - 1e-9)))
    else:
        substeps = max(1, int(math.ceil(g.dt / (CFL_SAFETY * dt_cfl))))
    step = g.dt / substeps

    data = CubicSpline(g.t, g.values, axis=0)
    area = low.cell_area.reshape(-1)
    damp_minus = 1.0 - 0.5 * sigma * step
    damp_plus = 1.0 + 0.5 * sigma * step

    v_prev = np.zeros(nlow, dtype=complex)
    v = np.zeros(nlow, dtype=complex)
    out = np.zeros(g.values.shape, dtype=complex)
    energy = []
    steps = (g.size - 1) * substeps
    for n in range(steps):
        t = g.t[0] + n * step
        acceleration = -(K @ v + B @ data(t)) / q
        v_next = (2.0 * v - damp_minus * v_prev + step ** 2 * acceleration) / damp_plus
        v_next[mask] = 0.0
        if (n + 1) % substeps == 0:
            j = (n + 1) // substeps
            top = v_next[-n1:]
            below = v_next[-2 * n1:-n1]
            out[j] = one_sided_derivative(g.values[j], top, below, h)
            kinetic = q * np.abs((v_next - v) / step) ** 2
            potential = np.real(np.conj(v_next) * (K @ v))
            energy.append(0.5 * float(np.sum(area * (kinetic + potential))))
        v_prev, v = v, v_next

    out[0] = one_sided_derivative(g.values[0], np.zeros(n1), np.zeros(n1), h)
    logger.info("leapfrog reference", extra={"steps": steps, "dt": step, "substeps": substeps, "unknowns": nlow})
    return TimeTraceSet(
        t=g.t.copy(),
        x1=g.x1.copy(),
        values=out,
        metadata={"energy": energy, "dt": step, "dt_max": dt_cfl, "substeps": substeps, "sponge": sponge if rows_sponge else 0.0},
    )
