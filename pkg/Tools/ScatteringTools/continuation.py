"""Rational (AAA) continuation of sampled scattering data across a k window.

Samples on a real interval inside one threshold band are fitted in barycentric
form; the degree is chosen by an interleaved hold-out. The fitted model can be
evaluated a little outside the sampled window and reports an error estimate
from the difference with the next lower degree.
"""
import json
import math
import warnings
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np
from scipy.interpolate import AAA

from Utilities.errors import (
    ExtrapolationRangeError,
    InsufficientSamplesError,
    ParseError,
    PoleInWindowError,
    ThresholdError,
)
from Utilities.logger import get_logger
from Utilities.utilities import complex_to_pair, pair_to_complex

logger = get_logger('continuation')

MIN_SAMPLES = 12
TRUST_EXTENSION = 0.25


class StoredAAA(AAA):
    """An AAA approximant rebuilt from stored support points, values and weights.

    Evaluation, poles and residues are scipy's; only the weight computation is
    replaced so that a serialized fit comes back unchanged.
    """

    def __init__(self, support_points, support_values, weights):
        self._stored = (
            np.asarray(support_points, dtype=complex),
            np.asarray(support_values, dtype=complex),
            np.asarray(weights, dtype=complex),
        )
        size = self._stored[0].size
        if not size or any(part.shape != (size,) for part in self._stored):
            raise ValueError("support points, values and weights must be non-empty and of equal length")
        super().__init__(self._stored[0], self._stored[1], max_terms=size, clean_up=False)

    def _compute_weights(self, z, f, *args, **kwargs):
        return tuple(part.copy() for part in self._stored)


def rational_to_dict(rational: AAA) -> dict:
    return {
        "support_points": [complex_to_pair(z) for z in np.ravel(rational.support_points)],
        "support_values": [complex_to_pair(f) for f in np.ravel(rational.support_values)],
        "weights": [complex_to_pair(w) for w in np.ravel(rational.weights)],
    }


def rational_from_dict(data: dict) -> StoredAAA:
    return StoredAAA(*(np.array([pair_to_complex(p) for p in data[key]], dtype=complex)
                       for key in ("support_points", "support_values", "weights")))


@dataclass(frozen=True)
class ContinuationModel:
    window: tuple[float, float]
    degree: int
    rational: AAA = field(repr=False)
    lower: AAA = field(repr=False)
    holdout_residual: float
    excluded: tuple = ()
    trust_extension: float = TRUST_EXTENSION

    @property
    def trust_region(self) -> tuple[float, float]:
        lo, hi = self.window
        pad = self.trust_extension * (hi - lo)
        return lo - pad, hi + pad

    def to_dict(self) -> dict:
        return {
            "window": list(self.window),
            "degree": self.degree,
            "holdout_residual": self.holdout_residual,
            "excluded": [list(band) for band in self.excluded],
            "trust_extension": self.trust_extension,
            "rational": rational_to_dict(self.rational),
            "lower": rational_to_dict(self.lower),
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True)

    @classmethod
    def from_json(cls, text: str) -> "ContinuationModel":
        try:
            data = json.loads(text)
            return cls(
                window=tuple(data["window"]),
                degree=int(data["degree"]),
                rational=rational_from_dict(data["rational"]),
                lower=rational_from_dict(data["lower"]),
                holdout_residual=float(data["holdout_residual"]),
                excluded=tuple(tuple(band) for band in data.get("excluded", [])),
                trust_extension=float(data.get("trust_extension", TRUST_EXTENSION)),
            )
        except (json.JSONDecodeError, KeyError, TypeError, ValueError) as exc:
            raise ParseError(f"malformed continuation model: {exc}") from exc


def _aaa(k: np.ndarray, values: np.ndarray, terms: int) -> AAA:
    with warnings.catch_warnings():
        # a fixed number of terms never reaches rtol=0
        warnings.simplefilter("ignore", RuntimeWarning)
        return AAA(k, values, rtol=0.0, max_terms=terms, clean_up=False)


def _in_band(k: float, bands: Sequence[tuple[float, float]]) -> bool:
    return any(lo <= k <= hi for lo, hi in bands)


def fit_rational(samples: Sequence[tuple[float, complex]], holdout: float = 0.25,
                 excluded: Sequence[tuple[float, float]] = (),
                 ill_conditioned: Sequence[float] = (),
                 max_degree: Optional[int] = None) -> ContinuationModel:
    """Fit a barycentric rational function to (k, value) samples on one real window.

    Every round(1/holdout)-th interior sample is held out; the degree with the
    smallest hold-out residual wins (ties go to the lower degree) and the
    final model is refitted on all samples.
    """
    if len(samples) < MIN_SAMPLES:
        raise InsufficientSamplesError(
            f"continuation needs at least {MIN_SAMPLES} samples, got {len(samples)}",
            {"samples": len(samples)},
        )
    order = sorted(samples, key=lambda item: item[0])
    k = np.array([float(item[0]) for item in order])
    values = np.array([complex(item[1]) for item in order])
    bad = [float(x) for x in k if _in_band(x, excluded)]
    if bad:
        raise ThresholdError("samples fall inside excluded threshold bands", {"k": bad})
    if np.any(np.diff(k) <= 0):
        raise InsufficientSamplesError("sample frequencies must be distinct")

    step = max(2, int(round(1.0 / holdout)))
    held = np.zeros(k.size, dtype=bool)
    held[1:-1:step] = True
    train_k, train_v = k[~held], values[~held]
    scale = max(float(np.max(np.abs(values))), 1e-300)

    limit = train_k.size - 1 if max_degree is None else min(max_degree, train_k.size - 1)
    best_degree, best_residual = 0, math.inf
    for degree in range(1, limit + 1):
        candidate = _aaa(train_k, train_v, degree + 1)
        residual = float(np.max(np.abs(candidate(k[held]) - values[held]))) / scale
        if residual < best_residual * (1.0 - 1e-9):
            best_degree, best_residual = degree, residual
        if residual < 1e-13:
            break

    rational = _aaa(k, values, best_degree + 1)
    lower = _aaa(k, values, best_degree)
    window = (float(k[0]), float(k[-1]))
    _check_poles(rational, window, scale, ill_conditioned)
    logger.info("rational fit", extra={"window": list(window), "degree": best_degree, "holdout_residual": best_residual})
    return ContinuationModel(
        window=window,
        degree=best_degree,
        rational=rational,
        lower=lower,
        holdout_residual=best_residual,
        excluded=tuple(tuple(band) for band in excluded),
    )


def _check_poles(rational: AAA, window: tuple[float, float], scale: float,
                 ill_conditioned: Sequence[float]) -> None:
    lo, hi = window
    width = hi - lo
    poles = rational.poles()
    if poles.size == 0:
        return
    residues = rational.residues()
    for pole, residue in zip(poles, residues):
        near_axis = lo <= pole.real <= hi and abs(pole.imag) < 1e-3 * width
        # Froissart doublets carry negligible residues
        if not near_axis or not abs(residue) > 1e-10 * scale * width:
            continue
        if any(abs(pole.real - x) < 1e-3 * width for x in ill_conditioned):
            continue
        raise PoleInWindowError(
            f"fitted pole at k={pole.real:.8g}{pole.imag:+.2e}i lies inside the sampled window",
            {"pole": complex_to_pair(pole), "residue": abs(residue)},
        )


def evaluate_continuation(model: ContinuationModel, k: float) -> tuple[complex, float]:
    """(value, error estimate) at real or complex k within the trust region."""
    lo, hi = model.trust_region
    if not lo <= np.real(k) <= hi:
        raise ExtrapolationRangeError(
            f"k={k} lies outside the trust region [{lo:.6g}, {hi:.6g}]",
            {"k": float(np.real(k)), "trust_region": [lo, hi]},
        )
    if np.isreal(k) and _in_band(float(np.real(k)), model.excluded):
        raise ThresholdError(f"k={k} lies in an excluded threshold band", {"k": float(np.real(k))})
    value = complex(model.rational(k))
    error = abs(value - complex(model.lower(k)))
    return value, float(error)
