"""Experiment configuration: JSON model, defaults and pre-solve validation."""
import json
import math
from enum import Enum
from pathlib import Path
from typing import Optional

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, ValidationError, field_validator, model_validator

from Tools.DtNTools.synthesis import symmetric_k_grid
from Tools.ForwardTools.embedded import PotentialSpec
from Tools.ForwardTools.scenario import Geometry, Scenario, load_scenario
from Tools.ScatteringTools.continuation import TRUST_EXTENSION
from Tools.SpectralTools.spectral_basis import waveguide_basis
from Utilities.errors import ModeScatterError, ParseError, ThresholdCollisionError
from Utilities.settings import DEFAULT_EVANESCENT_MODES, GUARD_BAND, OUTPUT_DIR


class ExperimentKind(str, Enum):
    FORWARD_SWEEP = "forward_sweep"
    FLUX_AUDIT = "flux_audit"
    LEMMA1_AUDIT = "lemma1_audit"
    DTN_COMPARE = "dtn_compare"
    CONTINUATION_AUDIT = "continuation_audit"
    TIME_SYNTHESIS = "time_synthesis"
    EMBEDDED_EIGEN_PROBE = "embedded_eigen_probe"


class KGridSpec(BaseModel):
    """Explicit values, or count points from start to stop."""
    model_config = ConfigDict(frozen=True)

    values: Optional[list[float]] = None
    start: Optional[float] = None
    stop: Optional[float] = None
    count: Optional[int] = Field(default=None, ge=1)

    @model_validator(mode="after")
    def _one_form(self):
        ranged = self.start is not None and self.stop is not None and self.count is not None
        if (self.values is None) == (not ranged):
            raise ValueError("give either k_grid.values or k_grid.start/stop/count")
        if self.values is not None and not self.values:
            raise ValueError("k_grid.values is empty")
        return self

    def points(self) -> list[float]:
        if self.values is not None:
            return [float(k) for k in self.values]
        return [float(k) for k in np.linspace(self.start, self.stop, self.count)]


class ModeSpec(BaseModel):
    model_config = ConfigDict(frozen=True)

    incident: Optional[list[int]] = None  # None: every propagating mode
    M: Optional[int] = Field(default=None, ge=1)
    evanescent: int = Field(default=DEFAULT_EVANESCENT_MODES, ge=0)
    n_span: int = Field(default=15, ge=1)
    span_sweep: list[int] = [5, 10, 15, 20, 25]

    @field_validator("span_sweep")
    @classmethod
    def _increasing(cls, value: list[int]) -> list[int]:
        if any(n < 1 for n in value) or any(b <= a for a, b in zip(value, value[1:])):
            raise ValueError("modes.span_sweep must be positive and strictly increasing")
        return value


class Lemma1Spec(BaseModel):
    model_config = ConfigDict(frozen=True)

    mode: int = 0
    source_modes: Optional[list[int]] = None
    random_sources: int = Field(default=0, ge=0)
    widths: list[float] = [1.0]


class ContinuationSpec(BaseModel):
    model_config = ConfigDict(frozen=True)

    n: int = 0
    m: int = 0
    target_k: float
    holdout: float = Field(default=0.25, gt=0, lt=1)


class SynthesisSpec(BaseModel):
    model_config = ConfigDict(frozen=True)

    mode: int = 0
    peak: float = Field(default=0.15, gt=0)
    delay: float = Field(default=12.0, ge=0)
    t_end: float = Field(default=60.0, gt=0)
    dt: float = Field(default=0.1, gt=0)
    k_max: float = Field(default=3.0, gt=0)
    dk: float = Field(default=0.05, gt=0)
    sponge: float = Field(default=12.0, gt=0)


class ProbeSpec(BaseModel):
    model_config = ConfigDict(frozen=True)

    potential: PotentialSpec = PotentialSpec()
    E: float = -((math.sqrt(0.75) - 0.5) ** 2)
    m: int = 1
    alpha: float = 0.0
    T: float = 6.0
    near: float = 1e-3
    far: float = 0.05


class ExperimentConfig(BaseModel):
    scenario: Optional[str] = None
    kind: ExperimentKind
    k_grid: Optional[KGridSpec] = None
    modes: ModeSpec = ModeSpec()
    output_dir: str = OUTPUT_DIR
    resolution_scale: float = Field(default=1.0, gt=0)
    seed: int = 0
    threads: Optional[int] = Field(default=None, ge=1)
    tolerances: dict[str, float] = {}
    lemma1: Lemma1Spec = Lemma1Spec()
    continuation: Optional[ContinuationSpec] = None
    synthesis: SynthesisSpec = SynthesisSpec()
    probe: ProbeSpec = ProbeSpec()
    # filled by validate_config
    resolved_scenario: Optional[Scenario] = None

    @model_validator(mode="after")
    def _kind_inputs(self):
        if self.kind == ExperimentKind.EMBEDDED_EIGEN_PROBE:
            return self
        if self.scenario is None and self.resolved_scenario is None:
            raise ValueError(f"{self.kind.value} needs a scenario file")
        if self.kind == ExperimentKind.CONTINUATION_AUDIT and self.continuation is None:
            raise ValueError("continuation_audit needs a continuation block with target_k")
        if self.kind not in (ExperimentKind.TIME_SYNTHESIS,) and self.k_grid is None:
            raise ValueError(f"{self.kind.value} needs a k_grid")
        return self

    def k_points(self) -> list[float]:
        if self.kind == ExperimentKind.TIME_SYNTHESIS:
            return symmetric_k_grid(self.synthesis.k_max, self.synthesis.dk).tolist()
        return self.k_grid.points() if self.k_grid else []


def _suggest(k: float, threshold: float, guard_band: float) -> list[float]:
    step = max(1e-3, 10.0 * guard_band) * max(1.0, threshold)
    sign = 1.0 if k >= 0 else -1.0
    return [round(sign * (threshold - step), 10), round(sign * (threshold + step), 10)]


def check_k_grid(s: Scenario, k_values: list[float], guard_band: float = GUARD_BAND) -> None:
    """Raise ThresholdCollisionError listing every k inside a guard band."""
    if not k_values:
        return
    thresholds = s.thresholds(max(abs(k) for k in k_values) + 1.0, guard_band)
    collisions = []
    for k in k_values:
        if thresholds.collides(k):
            value, _ = thresholds.nearest(k)
            collisions.append({
                "k": k,
                "threshold": value,
                "p": thresholds.modes_at(value),
                "suggested": _suggest(k, value, guard_band),
            })
    if collisions:
        names = ", ".join(f"k={c['k']} (p={c['p']})" for c in collisions)
        raise ThresholdCollisionError(f"k-grid hits threshold guard bands: {names}", {"collisions": collisions})


def check_continuation_target(s: Scenario, k_values: list[float], target_k: float,
                              guard_band: float = GUARD_BAND) -> None:
    """The target must sit in the trust region on the same side of every threshold as the samples."""
    lo, hi = min(k_values), max(k_values)
    pad = TRUST_EXTENSION * (hi - lo)
    if not lo - pad <= target_k <= hi + pad:
        raise ParseError(
            f"continuation target k={target_k} lies outside the trust region [{lo - pad:.6g}, {hi + pad:.6g}]",
            {"target_k": target_k, "trust_region": [lo - pad, hi + pad]},
        )
    a, b = sorted((target_k, min(max(target_k, lo), hi)))
    thresholds = s.thresholds(max(abs(target_k), abs(lo), abs(hi)) + 1.0, guard_band)
    crossed = [t for t in thresholds.values if a - guard_band <= t <= b + guard_band]
    if crossed:
        raise ThresholdCollisionError(
            f"continuation target k={target_k} is separated from the sampled window by thresholds {crossed}",
            {"target_k": target_k, "crossed": crossed},
        )


def default_mode_count(s: Scenario, k: float, evanescent: int) -> int:
    """Propagating modes at k plus `evanescent`; for gratings this is the largest |m| kept."""
    grid = s.grid()
    if s.geometry == Geometry.WAVEGUIDE:
        return waveguide_basis(s.c0, k, grid, evanescent=evanescent).size
    propagating = [m for m in range(-int(abs(k)) - 2, int(abs(k)) + 3) if (m + s.alpha) ** 2 < k * k]
    reach = max((abs(m) for m in propagating), default=0)
    return reach + max(1, evanescent // 2)


def parse_config(data: dict, source: str = "<memory>", base_dir: Optional[Path] = None,
                 guard_band: float = GUARD_BAND) -> ExperimentConfig:
    try:
        cfg = ExperimentConfig.model_validate(data)
    except ValidationError as exc:
        raise ParseError(f"invalid experiment config {source}: {exc}", {"path": source}) from exc

    scenario = cfg.resolved_scenario
    if scenario is None and cfg.scenario is not None:
        path = Path(cfg.scenario)
        if not path.is_absolute() and base_dir is not None:
            path = base_dir / path
        scenario = load_scenario(path).with_resolution(cfg.resolution_scale)

    updates: dict = {"resolved_scenario": scenario}
    if scenario is not None:
        k_values = cfg.k_points()
        check_k_grid(scenario, k_values, guard_band)
        if cfg.continuation is not None and k_values:
            check_continuation_target(scenario, k_values, cfg.continuation.target_k, guard_band)
        if cfg.modes.M is None and k_values:
            try:
                M = default_mode_count(scenario, max(k_values, key=abs), cfg.modes.evanescent)
            except ModeScatterError:
                M = None
            if M is not None:
                updates["modes"] = cfg.modes.model_copy(update={"M": M})
    return cfg.model_copy(update=updates)


def validate_config(path: str | Path, resolution_scale: Optional[float] = None,
                    guard_band: float = GUARD_BAND) -> ExperimentConfig:
    """Load, default and check an experiment config before any solve.

    A resolution_scale given here (the CLI flag) replaces the config value.
    """
    path = Path(path)
    if not path.is_file():
        raise ParseError(f"config file not found: {path}", {"path": str(path)})
    try:
        data = json.loads(path.read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise ParseError(f"config file {path} is not valid JSON: {exc}", {"path": str(path)}) from exc
    if resolution_scale is not None and isinstance(data, dict):
        data["resolution_scale"] = resolution_scale
    return parse_config(data, source=str(path), base_dir=path.parent, guard_band=guard_band)
