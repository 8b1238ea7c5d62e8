"""Scenario model: geometry, polarization, medium and conductors, parsed from JSON."""
import json
import math
from enum import Enum
from pathlib import Path
from typing import Any, Literal, Optional

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, ValidationError, model_validator
from scipy import ndimage, sparse
from scipy.sparse.csgraph import connected_components

from Tools.SpectralTools.spectral_basis import (
    C0Profile,
    ThresholdSet,
    grating_thresholds,
    waveguide_threshold_set,
)
from Utilities.errors import ParseError
from Utilities.settings import DEFAULT_MARGIN, GUARD_BAND
from Utilities.utilities import Grid, is_multiple, pairs_to_grid


class Geometry(str, Enum):
    GRATING_CASE1 = "grating_case1"
    GRATING_CASE2 = "grating_case2"
    WAVEGUIDE = "waveguide"


class Polarization(str, Enum):
    TE = "TE"
    TM = "TM"
    ACOUSTIC = "acoustic"


class Resolution(BaseModel):
    model_config = ConfigDict(frozen=True)

    n1: int = Field(default=64, ge=8)
    h2: float = Field(default=0.1, gt=0)


class GridMeta(BaseModel):
    nx1: int
    nx2: int
    T: float
    Tprime: float
    h: float


class MediumSpec(BaseModel):
    """Contrast chi(x): eps = 1 + chi (grating), c = c0/sqrt(1 + chi) (wave guide)."""
    model_config = ConfigDict(frozen=True)

    kind: Literal["uniform", "bump", "layer", "sinusoidal", "profile_x2", "samples"] = "uniform"
    amplitude: float = 0.0
    radius: float = Field(default=0.5, gt=0)
    center: tuple[float, float] = (math.pi, 0.0)
    lower: float = -0.5
    upper: float = 0.5
    depth: float = 0.0
    nodes: Optional[list[float]] = None
    values: Optional[list[Any]] = None
    grid: Optional[GridMeta] = None

    @model_validator(mode="after")
    def _complete(self):
        if self.kind == "profile_x2" and (not self.nodes or not self.values or len(self.nodes) != len(self.values)):
            raise ValueError("profile_x2 needs matching nodes and values")
        if self.kind == "samples" and (self.values is None or self.grid is None):
            raise ValueError("samples medium needs values and grid metadata")
        return self

    def contrast(self, grid: Grid, x2: np.ndarray, periodic: bool) -> np.ndarray:
        X1, X2 = np.meshgrid(grid.x1, x2)
        if self.kind == "uniform":
            return np.zeros_like(X1) + 0j
        if self.kind == "bump":
            dx1 = X1 - self.center[0]
            if periodic:
                dx1 = (dx1 + math.pi) % (2.0 * math.pi) - math.pi
            r = np.hypot(dx1, X2 - self.center[1])
            shape = np.where(r < self.radius, np.cos(0.5 * math.pi * r / self.radius) ** 2, 0.0)
            return self.amplitude * shape + 0j
        if self.kind == "layer":
            return np.where((X2 >= self.lower) & (X2 <= self.upper), self.amplitude, 0.0) + 0j
        if self.kind == "sinusoidal":
            surface = self.upper + self.depth * np.cos(X1)
            return np.where((X2 >= self.lower) & (X2 <= surface), self.amplitude, 0.0) + 0j
        if self.kind == "profile_x2":
            values = np.interp(x2, np.asarray(self.nodes), np.asarray(self.values, dtype=float), left=0.0, right=0.0)
            return np.broadcast_to(values[:, None], X1.shape).astype(complex)
        data = pairs_to_grid(self.values) if _is_paired(self.values) else np.asarray(self.values, dtype=float) + 0j
        meta = self.grid
        if data.shape != (meta.nx2, meta.nx1) or meta.nx1 != grid.n1 or abs(meta.h - grid.h2) > 1e-12:
            raise ParseError("sampled medium does not match the computational grid",
                             {"samples": list(data.shape), "grid": [x2.size, grid.n1]})
        out = np.zeros(X1.shape, dtype=complex)
        rows = np.rint((x2 + meta.Tprime) / meta.h).astype(int)
        inside = (rows >= 0) & (rows < meta.nx2)
        out[inside] = data[rows[inside]]
        return out


def _is_paired(values) -> bool:
    try:
        return isinstance(values[0][0], (list, tuple))
    except (TypeError, IndexError):
        return False


class ConductorSpec(BaseModel):
    """Perfect conductor (Dirichlet) inclusion, rasterised onto grid nodes."""
    model_config = ConfigDict(frozen=True)

    kind: Literal["disk", "rectangle", "band"]
    center: tuple[float, float] = (math.pi, 0.0)
    radius: float = 0.3
    x1_range: tuple[float, float] = (0.0, 2.0 * math.pi)
    x2_range: tuple[float, float] = (-0.2, 0.2)

    def rasterize(self, grid: Grid) -> np.ndarray:
        X1, X2 = grid.mesh()
        if self.kind == "disk":
            dx1 = (X1 - self.center[0] + math.pi) % (2.0 * math.pi) - math.pi
            return np.hypot(dx1, X2 - self.center[1]) <= self.radius
        inside_x2 = (X2 >= self.x2_range[0]) & (X2 <= self.x2_range[1])
        if self.kind == "band":
            return inside_x2
        return inside_x2 & (X1 >= self.x1_range[0]) & (X1 <= self.x1_range[1])


def complement_connected(mask: np.ndarray, periodic: bool = True) -> bool:
    """True when the first and last grid rows lie in one component of the conductor-free nodes.

    Components are 4-connected; with `periodic` the columns 0 and n1-1 are neighbours.
    """
    labels, count = ndimage.label(~mask)
    if labels[0, 0] == 0 or labels[-1, 0] == 0:
        return False
    if periodic:
        seam = (labels[:, 0] > 0) & (labels[:, -1] > 0)
        rows, cols = labels[seam, 0], labels[seam, -1]
        graph = sparse.coo_matrix((np.ones(rows.size), (rows, cols)), shape=(count + 1, count + 1))
        _, component = connected_components(graph, directed=False)
        return bool(component[labels[0, 0]] == component[labels[-1, 0]])
    return bool(labels[0, 0] == labels[-1, 0])


class Scenario(BaseModel):
    model_config = ConfigDict(frozen=True)

    name: str = "scenario"
    geometry: Geometry = Geometry.GRATING_CASE1
    polarization: Polarization = Polarization.TE
    alpha: float = Field(default=0.0, ge=0.0, lt=1.0)
    T: float = Field(default=1.0, gt=0)
    margin: float = Field(default=DEFAULT_MARGIN, gt=0)
    R: Optional[float] = None
    B: Optional[float] = None
    resolution: Resolution = Resolution()
    medium: MediumSpec = MediumSpec()
    conductors: list[ConductorSpec] = []
    c0: Optional[C0Profile] = None
    metadata: dict[str, Any] = {}

    @model_validator(mode="before")
    @classmethod
    def _waveguide_defaults(cls, data):
        if not isinstance(data, dict) or data.get("geometry") not in (Geometry.WAVEGUIDE, "waveguide"):
            return data
        data = dict(data)
        data.setdefault("polarization", Polarization.ACOUSTIC)
        c0 = data.get("c0")
        width = data.get("B")
        if c0 is None:
            data["c0"] = {"kind": "constant", "width": width or math.pi}
        elif isinstance(c0, dict) and "width" not in c0 and width is not None:
            data["c0"] = {**c0, "width": width}
        if width is None:
            c0 = data["c0"]
            data["B"] = c0.get("width", math.pi) if isinstance(c0, dict) else c0.width
        return data

    @model_validator(mode="after")
    def _consistent(self):
        if self.geometry == Geometry.WAVEGUIDE:
            if self.polarization != Polarization.ACOUSTIC:
                raise ValueError("wave guides use the acoustic polarization")
            if abs(self.c0.width - self.B) > 1e-12:
                raise ValueError("c0 width must equal the wave guide width B")
            if self.conductors:
                raise ValueError("conductor inclusions are a grating feature")
            if self.alpha != 0.0:
                raise ValueError("wave guides carry no quasimomentum")
        elif self.polarization == Polarization.ACOUSTIC:
            raise ValueError("gratings use TE or TM polarization")
        if self.geometry == Geometry.GRATING_CASE2:
            if self.R is None:
                raise ValueError("grating_case2 needs the wall depth R")
            if -self.R >= self.T:
                raise ValueError("the bottom wall x2=-R must lie below x2=T")
        h = self.resolution.h2
        for label, value in (("T", self.T), ("margin", self.margin), ("R", self.R)):
            if value is not None and not is_multiple(value, h):
                raise ValueError(f"{label}={value} is not a multiple of h2={h}")
        if self.geometry == Geometry.GRATING_CASE1 and self.conductors:
            grid = self.grid()
            mask = np.zeros(grid.shape, dtype=bool)
            for conductor in self.conductors:
                mask |= conductor.rasterize(grid)
            if not complement_connected(mask, periodic=True):
                raise ValueError("in grating_case1 the conductors must not separate x2 = T' from x2 = -T'")
        return self

    @property
    def Tprime(self) -> float:
        return self.T + self.margin

    @property
    def open_bottom(self) -> bool:
        return self.geometry != Geometry.GRATING_CASE2

    def grid(self) -> Grid:
        h2 = self.resolution.h2
        n1 = self.resolution.n1
        if self.geometry == Geometry.WAVEGUIDE:
            return Grid.waveguide(self.B, n1, h2, -self.Tprime, self.Tprime)
        bottom = -self.R + h2 if self.geometry == Geometry.GRATING_CASE2 else -self.Tprime
        return Grid.grating(n1, h2, bottom, self.Tprime, alpha=self.alpha)

    def contrast(self, grid: Grid, x2: Optional[np.ndarray] = None) -> np.ndarray:
        x2 = grid.x2 if x2 is None else x2
        chi = self.medium.contrast(grid, x2, periodic=grid.periodic)
        outside = np.abs(x2) >= self.T - 1e-12
        if np.any(np.abs(chi[outside]) > 1e-14):
            raise ParseError("medium contrast must vanish for |x2| >= T", {"T": self.T})
        return chi

    def epsilon(self, grid: Grid, x2: Optional[np.ndarray] = None) -> np.ndarray:
        return 1.0 + self.contrast(grid, x2)

    def coefficient(self, grid: Grid, x2: Optional[np.ndarray] = None) -> np.ndarray:
        """Mass coefficient q in -div(p grad u) - k^2 q u; equals the weight a(x)."""
        if self.polarization == Polarization.TE:
            return self.epsilon(grid, x2)
        if self.polarization == Polarization.TM:
            x2 = grid.x2 if x2 is None else x2
            return np.ones((x2.size, grid.n1), dtype=complex)
        return self.epsilon(grid, x2) / self.c0(grid.x1)[None, :] ** 2

    weight = coefficient

    def conductor_mask(self, grid: Grid) -> np.ndarray:
        mask = np.zeros(grid.shape, dtype=bool)
        for conductor in self.conductors:
            mask |= conductor.rasterize(grid)
        if np.any(mask[np.abs(grid.x2) >= self.T - 1e-12]):
            raise ParseError("conductors must lie inside |x2| < T", {"T": self.T})
        return mask

    def thresholds(self, k_max: float, guard_band: float = GUARD_BAND) -> ThresholdSet:
        if self.geometry == Geometry.WAVEGUIDE:
            return waveguide_threshold_set(self.c0, k_max, n1=self.resolution.n1, guard_band=guard_band)
        return grating_thresholds(self.alpha, k_max, guard_band=guard_band)

    def with_resolution(self, scale: float) -> "Scenario":
        """Refine (scale > 1) or coarsen the grid; T, margin and R must stay on grid rows."""
        if scale == 1.0:
            return self
        if self.medium.kind == "samples":
            raise ParseError("a sampled medium cannot be rescaled")
        n1 = max(8, int(round(self.resolution.n1 * scale)))
        try:
            return Scenario.model_validate(
                {**self.model_dump(), "resolution": {"n1": n1, "h2": self.resolution.h2 / scale}}
            )
        except ValidationError as exc:
            raise ParseError(f"resolution scale {scale} breaks the grid alignment: {exc}") from exc


def load_scenario(path: str | Path) -> Scenario:
    path = Path(path)
    if not path.is_file():
        raise ParseError(f"scenario file not found: {path}", {"path": str(path)})
    try:
        data = json.loads(path.read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise ParseError(f"scenario file {path} is not valid JSON: {exc}", {"path": str(path)}) from exc
    return parse_scenario(data, source=str(path))


def parse_scenario(data: dict, source: str = "<memory>") -> Scenario:
    try:
        return Scenario.model_validate(data)
    except ValidationError as exc:
        raise ParseError(f"invalid scenario {source}: {exc}", {"path": source}) from exc
