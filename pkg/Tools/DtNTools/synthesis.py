"""Time-domain normal derivative at x2 = T obtained by Fourier synthesis over a DtN family.

Time traces use the exp(-i omega t) convention: the spectrum of g is ifft(g)
and the synthesized trace is the fft of the filtered spectrum, with
omega = 2 pi fftfreq(N, dt).
"""
import csv
import io
import json
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np
from scipy.interpolate import CubicSpline

from Tools.DtNTools.dtn import DtNMatrix, dtn_direct, trace_basis
from Tools.ForwardTools.scenario import Scenario
from Tools.SpectralTools.spectral_basis import ModalBasis
from Utilities.errors import BandCoverageError, BasisMismatchError
from Utilities.logger import get_logger
from Utilities.settings import thread_count

logger = get_logger('synthesis')

COVERAGE_TOLERANCE = 0.01


@dataclass
class TimeTraceSet:
    """Samples values[t_j, x1_i] on a uniform time grid."""
    t: np.ndarray
    x1: np.ndarray
    values: np.ndarray
    metadata: dict = field(default_factory=dict)

    @property
    def dt(self) -> float:
        return float(self.t[1] - self.t[0])

    @property
    def size(self) -> int:
        return self.t.size

    def modal(self, basis: ModalBasis) -> np.ndarray:
        return basis.project(self.values)

    def to_csv(self) -> str:
        buffer = io.StringIO()
        writer = csv.writer(buffer, lineterminator="\n")
        writer.writerow(["t", "x1", "re", "im"])
        for j, t in enumerate(self.t):
            for i, x1 in enumerate(self.x1):
                z = self.values[j, i]
                writer.writerow([repr(float(t)), repr(float(x1)), repr(float(z.real)), repr(float(z.imag))])
        return buffer.getvalue()

    def metadata_json(self) -> str:
        return json.dumps(self.metadata, indent=2, sort_keys=True, default=float)


def ricker(t: np.ndarray, peak: float, delay: float) -> np.ndarray:
    """Ricker wavelet with peak frequency `peak` (cycles per unit time) centred at `delay`."""
    arg = (math.pi * peak * (np.asarray(t, dtype=float) - delay)) ** 2
    return (1.0 - 2.0 * arg) * np.exp(-arg)


def wavelet_input(basis: ModalBasis, m: int, t: np.ndarray, peak: float, delay: float, x1: np.ndarray) -> TimeTraceSet:
    values = ricker(t, peak, delay)[:, None] * basis.profiles[basis.position(m)][None, :]
    return TimeTraceSet(t=np.asarray(t, dtype=float), x1=x1, values=values,
                        metadata={"mode": m, "peak": peak, "delay": delay})


def symmetric_k_grid(k_max: float, dk: float) -> np.ndarray:
    """+-(j + 1/2) dk for j = 0 .. ceil(k_max/dk); k = 0 and the integers are never hit for dk = 1/(2q)."""
    count = int(math.ceil(k_max / dk))
    half = dk * (np.arange(count + 1) + 0.5)
    return np.concatenate([-half[::-1], half])


def dtn_family(s: Scenario, k_values: Sequence[float], M: int, basis: Optional[ModalBasis] = None,
               threads: Optional[int] = None) -> list[DtNMatrix]:
    """Direct DtN maps on a k grid, all projected on the same fixed basis."""
    k_values = sorted(float(k) for k in k_values)
    if basis is None:
        reference = max(k_values, key=abs)
        basis = trace_basis(s, reference, M)
    with ThreadPoolExecutor(max_workers=thread_count(threads)) as pool:
        family = list(pool.map(lambda k: dtn_direct(s, k, basis=basis), k_values))
    logger.info("DtN family", extra={"scenario": s.name, "count": len(family), "k_min": k_values[0], "k_max": k_values[-1]})
    return family


def _stack(family: Sequence[DtNMatrix]) -> tuple[np.ndarray, np.ndarray, ModalBasis]:
    ordered = sorted(family, key=lambda d: d.k)
    basis = ordered[0].basis
    for d in ordered:
        if not np.array_equal(d.indices, ordered[0].indices):
            raise BasisMismatchError("DtN family members use different index sets")
    return np.array([d.k for d in ordered]), np.array([d.entries for d in ordered]), basis


def band_leakage(spectrum: np.ndarray, omega: np.ndarray, band: tuple[float, float]) -> float:
    energy = np.sum(np.abs(spectrum) ** 2)
    if energy == 0:
        return 0.0
    outside = (omega < band[0]) | (omega > band[1])
    return float(np.sum(np.abs(spectrum[outside]) ** 2) / energy)


def onset_index(values: np.ndarray, relative: float = 1e-6) -> int:
    """First time index where the trace exceeds `relative` times its peak."""
    amplitude = np.max(np.abs(values).reshape(values.shape[0], -1), axis=1)
    peak = np.max(amplitude)
    if peak == 0:
        return values.shape[0]
    return int(np.argmax(amplitude > relative * peak))


def causality_leakage(output: np.ndarray, source: np.ndarray) -> float:
    """Share of the output energy arriving strictly before the onset of the input."""
    onset = onset_index(source)
    total = np.sum(np.abs(output) ** 2)
    if total == 0:
        return 0.0
    return float(np.sum(np.abs(output[:onset]) ** 2) / total)


def causal_window(values: np.ndarray, onset: int) -> np.ndarray:
    """Zero every sample before `onset`."""
    windowed = values.copy()
    windowed[:onset] = 0.0
    return windowed


def dtn_time_synthesis(family: Sequence[DtNMatrix], g: TimeTraceSet, pad_factor: int = 2,
                       coverage_tolerance: float = COVERAGE_TOLERANCE, causal: bool = True) -> TimeTraceSet:
    """d(t) = sum over omega of L(omega) g^(omega) exp(-i omega t), L interpolated across the family.

    With `causal` the output is cut before the onset of g; the reported
    causality_leakage is measured on the trace before that cut.
    """
    ks, entries, basis = _stack(family)
    if basis is None:
        raise BasisMismatchError("DtN family carries no basis for the time synthesis")
    coefficients = g.modal(basis)
    nt = g.size
    n = pad_factor * nt
    padded = np.zeros((n, basis.size), dtype=complex)
    padded[:nt] = coefficients
    spectrum = np.fft.ifft(padded, axis=0)
    omega = 2.0 * math.pi * np.fft.fftfreq(n, d=g.dt)

    band = (float(ks[0]), float(ks[-1]))
    leak = band_leakage(spectrum, omega, band)
    if leak > coverage_tolerance:
        raise BandCoverageError(
            f"{100 * leak:.2f}% of the input energy lies outside the DtN family range [{band[0]:.4g}, {band[1]:.4g}]",
            {"band": list(band), "leakage": leak},
        )

    inside = (omega >= band[0]) & (omega <= band[1])
    interpolant = CubicSpline(ks, entries, axis=0)
    filtered = np.zeros_like(spectrum)
    filtered[inside] = np.einsum("wij,wj->wi", interpolant(omega[inside]), spectrum[inside])
    derivative = np.fft.fft(filtered, axis=0)[:nt]
    values = basis.synthesize(derivative)
    early = causality_leakage(values, g.values)
    onset = onset_index(g.values)
    if causal:
        values = causal_window(values, onset)
    logger.info("time synthesis", extra={"samples": nt, "band_leakage": leak, "causality_leakage": early})
    return TimeTraceSet(
        t=g.t.copy(),
        x1=g.x1.copy(),
        values=values,
        metadata={"band": list(band), "band_leakage": leak, "causality_leakage": early, "onset": onset,
                  "causal_window": causal, "pad_factor": pad_factor},
    )
