"""Branch functions, thresholds and modal bases for gratings and wave guides.

Sign conventions (outgoing branch, real k):
    z > 0, k > 0  ->  sqrt(z) > 0
    z > 0, k < 0  ->  sqrt(z) < 0
    z < 0         ->  i*sqrt(|z|)

The incoming branch is -sqrt(z) for propagating modes and -i*sqrt(|z|) for
evanescent ones. Kernels and radiation closures never use the incoming
evanescent value directly: they conjugate the outgoing one.
"""
import math
from dataclasses import dataclass, field
from enum import Enum
from typing import Literal, Optional, Sequence

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, model_validator
from scipy.linalg import LinAlgError, eigh_tridiagonal
from scipy.optimize import bisect

from Utilities.errors import (
    BasisMismatchError,
    ConvergenceError,
    ModeCutoffError,
    ThresholdError,
)
from Utilities.logger import get_logger
from Utilities.settings import DEFAULT_EVANESCENT_MODES, GUARD_BAND
from Utilities.utilities import Grid, waveguide_weights

logger = get_logger('spectral')


class BranchSpec(str, Enum):
    OUTGOING = "outgoing"
    INCOMING = "incoming"


# ---- grating branch values ----

def _guard(k: float, threshold: float, p: int, guard_band: float) -> None:
    if abs(abs(k) - threshold) < guard_band * max(1.0, threshold):
        raise ThresholdError(
            f"k={k} lies inside the guard band of the threshold {threshold:.12g} (p={p})",
            {"k": k, "threshold": threshold, "p": p, "guard_band": guard_band},
        )


def lambda_branch(
    k: float,
    m: int,
    alpha: float,
    branch: BranchSpec = BranchSpec.OUTGOING,
    guard_band: float = GUARD_BAND,
) -> complex:
    """lambda_m(k) = k*sqrt(1 - (m+alpha)^2/k^2) on the requested branch."""
    kappa = m + alpha
    _guard(k, abs(kappa), m, guard_band)
    z = k * k - kappa * kappa
    if z > 0:
        value = complex(math.copysign(math.sqrt(z), k))
        return value if branch == BranchSpec.OUTGOING else -value
    root = math.sqrt(-z)
    return complex(0.0, root) if branch == BranchSpec.OUTGOING else complex(0.0, -root)


def lambda_complex(k: complex, m: int, alpha: float) -> complex:
    """Outgoing branch continued off the real axis (principal square root)."""
    k = complex(k)
    kappa = m + alpha
    return k * np.sqrt(1.0 - kappa * kappa / (k * k))


def discrete_exponent(z, h: float, sign: float = 1.0):
    """Exponent beta solving 4 sin^2(beta*h/2)/h^2 = z.

    Real and carrying the sign of k when z > 0, positive imaginary when z < 0,
    so that exp(i*beta*x2) is outgoing/decaying upwards.
    """
    z = np.asarray(z, dtype=float)
    s = 0.5 * h * np.sqrt(np.abs(z))
    if np.any((z > 0) & (s >= 1.0)):
        raise ModeCutoffError(
            "grid step too coarse: a propagating mode exceeds the discrete Nyquist limit",
            {"h": h, "z_max": float(np.max(z))},
        )
    real_part = np.sign(sign) * (2.0 / h) * np.arcsin(np.minimum(s, 1.0))
    imag_part = (2.0 / h) * np.arcsinh(s)
    return np.where(z > 0, real_part + 0j, 1j * imag_part)


def transfer_factor(beta, h: float, branch: BranchSpec = BranchSpec.OUTGOING):
    """One-step ratio u(x2+h)/u(x2) of an exterior mode."""
    r = np.exp(1j * np.asarray(beta) * h)
    return r if branch == BranchSpec.OUTGOING else np.conj(r)


def bloch_symbol(kappa, h1: float):
    """Eigenvalue of the periodic second difference on exp(i*kappa*x1)."""
    return 4.0 * np.sin(0.5 * np.asarray(kappa) * h1) ** 2 / h1 ** 2


@dataclass(frozen=True)
class GratingMode:
    m: int
    alpha: float
    lam: complex
    propagating: bool


@dataclass(frozen=True)
class ThresholdSet:
    # (threshold k, responsible mode index), sorted ascending
    entries: tuple[tuple[float, int], ...]
    guard_band: float = GUARD_BAND

    @property
    def values(self) -> list[float]:
        out: list[float] = []
        for value, _ in self.entries:
            if not out or abs(value - out[-1]) > 1e-12:
                out.append(value)
        return out

    def modes_at(self, value: float) -> list[int]:
        return [p for v, p in self.entries if abs(v - value) <= 1e-12]

    def nearest(self, k: float) -> tuple[float, int]:
        if not self.entries:
            return (math.inf, 0)
        return min(self.entries, key=lambda e: abs(abs(k) - e[0]))

    def collides(self, k: float) -> bool:
        value, _ = self.nearest(k)
        return abs(abs(k) - value) < self.guard_band * max(1.0, value)

    def check(self, k: float) -> None:
        value, p = self.nearest(k)
        if math.isfinite(value):
            _guard(k, value, p, self.guard_band)

    def band(self, k: float) -> tuple[float, float]:
        """Open interval between consecutive thresholds containing |k|."""
        lower, upper = 0.0, math.inf
        for value in self.values:
            if value < abs(k):
                lower = value
            elif value > abs(k):
                upper = value
                break
        return (lower, upper)


def grating_thresholds(alpha: float, k_max: float, guard_band: float = GUARD_BAND) -> ThresholdSet:
    if k_max <= 0:
        raise ValueError("k_max must be positive")
    entries = []
    for p in range(math.floor(-k_max - alpha) - 1, math.ceil(k_max - alpha) + 2):
        value = abs(p + alpha)
        if value <= k_max + 1e-12:
            entries.append((value, p))
    entries.sort()
    return ThresholdSet(entries=tuple(entries), guard_band=guard_band)


def grating_modes(k: float, alpha: float, indices: Sequence[int],
                  branch: BranchSpec = BranchSpec.OUTGOING) -> list[GratingMode]:
    return [
        GratingMode(m=int(m), alpha=alpha, lam=lambda_branch(k, int(m), alpha, branch),
                    propagating=(m + alpha) ** 2 < k * k)
        for m in indices
    ]


def default_grating_indices(k: float, alpha: float, evanescent: int = DEFAULT_EVANESCENT_MODES) -> list[int]:
    """All propagating indices plus the `evanescent` slowest-decaying others, ascending."""
    reach = int(abs(k)) + evanescent + 2
    candidates = sorted(range(-reach, reach + 1), key=lambda m: (abs(m + alpha), m))
    propagating = [m for m in candidates if (m + alpha) ** 2 < k * k]
    others = [m for m in candidates if (m + alpha) ** 2 >= k * k][:evanescent]
    return sorted(propagating + others)


# ---- wave guide Sturm-Liouville system ----

class C0Sample(BaseModel):
    x: float
    value: float = Field(gt=0)


class C0Profile(BaseModel):
    """Background sound speed c0(x1) on [0, B]."""
    model_config = ConfigDict(frozen=True)

    kind: Literal["constant", "sine-perturbed", "samples"] = "constant"
    width: float = Field(default=math.pi, gt=0)
    value: float = Field(default=1.0, gt=0)
    base: float = 1.0
    amplitude: float = 0.0
    samples: Optional[list[C0Sample]] = None

    @model_validator(mode="after")
    def _positive(self):
        if self.kind == "samples" and not self.samples:
            raise ValueError("c0 kind 'samples' needs a non-empty samples list")
        probe = self(np.linspace(0.0, self.width, 257))
        if np.any(probe <= 0):
            raise ValueError("c0 must be strictly positive on [0, B]")
        return self

    def __call__(self, x) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        if self.kind == "constant":
            return np.full_like(x, self.value)
        if self.kind == "sine-perturbed":
            return self.base + self.amplitude * np.sin(math.pi * x / self.width)
        xs = np.array([s.x for s in self.samples])
        vs = np.array([s.value for s in self.samples])
        order = np.argsort(xs)
        return np.interp(x, xs[order], vs[order])


@dataclass(frozen=True)
class WaveguideMode:
    m: int
    k: float
    mu: float
    phi: np.ndarray = field(repr=False)
    dmu_dk: float
    x1: np.ndarray = field(repr=False)


def _sl_solve(c0: C0Profile, k: float, count: int, n1: int):
    h = c0.width / n1
    x = h * np.arange(1, n1 + 1)
    diagonal = -2.0 / h ** 2 + (k / c0(x)) ** 2
    off = np.full(n1 - 1, 1.0 / h ** 2)
    # ghost-point Neumann row, symmetrised by the half weight at x1 = B
    off[-1] = math.sqrt(2.0) / h ** 2
    try:
        mu, y = eigh_tridiagonal(diagonal, off, select="i", select_range=(n1 - count, n1 - 1))
    except LinAlgError as exc:
        raise ConvergenceError(f"tridiagonal eigensolver failed: {exc}", {"k": k, "n1": n1}) from exc
    order = np.argsort(mu)[::-1]
    w = waveguide_weights(n1)
    phi = y[:, order] / np.sqrt(h * w)[:, None]
    # fix the sign: positive slope at x1 = 0
    phi *= np.where(phi[0] < 0, -1.0, 1.0)
    return x, h, w, mu[order], phi


def sl_eigensystem(c0: C0Profile, k: float, M: int, n1: int = 200,
                   richardson: bool = False) -> list[WaveguideMode]:
    """First M eigenpairs of phi'' + k^2/c0^2 phi = mu phi, largest mu first.

    With richardson=True the eigenvalues are extrapolated from grids n1 and 2*n1;
    the eigenfunctions stay those of the n1 grid.
    """
    if M < 1 or M > n1:
        raise ValueError(f"M must lie in [1, {n1}]")
    x, h, w, mu, phi = _sl_solve(c0, k, M, n1)
    if richardson:
        _, _, _, mu_fine, _ = _sl_solve(c0, k, M, 2 * n1)
        mu = (4.0 * mu_fine - mu) / 3.0
    weight = h * w / c0(x) ** 2
    modes = []
    for i in range(M):
        dmu = 2.0 * k * float(np.sum(weight * phi[:, i] ** 2))
        modes.append(WaveguideMode(m=i + 1, k=k, mu=float(mu[i]), phi=phi[:, i].copy(),
                                   dmu_dk=dmu, x1=x))
    logger.debug("sturm-liouville solve", extra={"k": k, "M": M, "n1": n1, "mu_1": float(mu[0])})
    return modes


def waveguide_thresholds(c0: C0Profile, m: int, k_range: tuple[float, float],
                         n1: int = 200) -> list[float]:
    """Roots of mu_m(k) = 0 in k_range; mu_m is increasing in k, so at most one."""
    lo, hi = k_range
    if lo <= 0 or hi <= lo:
        raise ValueError("k_range must be a positive interval")

    def mu_m(k: float) -> float:
        return sl_eigensystem(c0, k, m, n1=n1, richardson=True)[m - 1].mu

    f_lo, f_hi = mu_m(lo), mu_m(hi)
    if f_lo > 0 or f_hi < 0:
        return []
    if f_lo == 0:
        return [lo]
    return [float(bisect(mu_m, lo, hi, xtol=1e-13))]


def waveguide_threshold_set(c0: C0Profile, k_max: float, n1: int = 200,
                            guard_band: float = GUARD_BAND) -> ThresholdSet:
    entries = []
    m = 1
    while True:
        roots = waveguide_thresholds(c0, m, (1e-9, k_max), n1=n1)
        if not roots:
            break
        entries.append((roots[0], m))
        m += 1
    return ThresholdSet(entries=tuple(entries), guard_band=guard_band)


def check_waveguide_guard(modes: Sequence[WaveguideMode], k: float, guard_band: float) -> None:
    # distance to the nearest threshold from a Newton step on mu_m(k)
    for mode in modes:
        distance = abs(mode.mu) / mode.dmu_dk if mode.dmu_dk > 0 else math.inf
        if distance < guard_band * max(1.0, abs(k)):
            raise ThresholdError(
                f"k={k} lies inside the guard band of the threshold of wave guide mode {mode.m}",
                {"k": k, "p": mode.m, "mu": mode.mu},
            )


# ---- modal bases on a trace line ----

@dataclass(frozen=True)
class ModalBasis:
    """Exterior modes at fixed k sampled on the x1 nodes of a grid."""
    geometry: Literal["grating", "waveguide"]
    k: float
    alpha: float
    indices: np.ndarray
    lambdas: np.ndarray
    betas: np.ndarray
    propagating: np.ndarray
    profiles: np.ndarray = field(repr=False)
    weights: np.ndarray = field(repr=False)
    h2: float
    branch: BranchSpec = BranchSpec.OUTGOING
    mu: Optional[np.ndarray] = None

    @property
    def size(self) -> int:
        return self.indices.size

    def position(self, m: int) -> int:
        hits = np.nonzero(self.indices == m)[0]
        if hits.size == 0:
            raise BasisMismatchError(f"mode {m} is not part of the basis", {"indices": self.indices.tolist()})
        return int(hits[0])

    def project(self, trace: np.ndarray) -> np.ndarray:
        """Coefficients c_m with trace = sum_m c_m * profile_m (exact on the grid)."""
        trace = np.asarray(trace)
        if trace.shape[-1] != self.weights.size:
            raise BasisMismatchError("trace length differs from the basis grid")
        inner = (self.weights * trace) @ np.conj(self.profiles).T
        if self.geometry == "grating":
            return inner / (2.0 * math.pi)
        return inner

    def synthesize(self, coeffs: np.ndarray) -> np.ndarray:
        return np.asarray(coeffs) @ self.profiles

    def same_k(self, k: float) -> None:
        if abs(self.k - k) > 1e-12 * max(1.0, abs(k)):
            raise BasisMismatchError(f"basis built at k={self.k}, requested k={k}", {"basis_k": self.k, "k": k})

    def propagating_indices(self) -> list[int]:
        return [int(m) for m, p in zip(self.indices, self.propagating) if p]


def grating_basis(k: float, grid: Grid, indices: Optional[Sequence[int]] = None,
                  evanescent: int = DEFAULT_EVANESCENT_MODES,
                  branch: BranchSpec = BranchSpec.OUTGOING) -> ModalBasis:
    alpha = grid.alpha
    if indices is None:
        indices = default_grating_indices(k, alpha, evanescent)
    idx = np.asarray(sorted(int(m) for m in indices))
    modes = grating_modes(k, alpha, idx, branch)
    kappa = idx + alpha
    z = k * k - bloch_symbol(kappa, grid.h1)
    propagating = np.array([mode.propagating for mode in modes])
    mismatch = propagating != (z > 0)
    if np.any(mismatch):
        m = int(idx[np.argmax(mismatch)])
        raise ThresholdError(
            f"k={k} falls between the continuous and the grid threshold of mode {m}; refine n1",
            {"k": k, "p": m, "n1": grid.n1},
        )
    return ModalBasis(
        geometry="grating",
        k=k,
        alpha=alpha,
        indices=idx,
        lambdas=np.array([mode.lam for mode in modes]),
        betas=discrete_exponent(z, grid.h2, sign=k),
        propagating=propagating,
        profiles=np.exp(1j * np.outer(kappa, grid.x1)),
        weights=grid.line_weights,
        h2=grid.h2,
        branch=branch,
    )


def waveguide_basis(c0: C0Profile, k: float, grid: Grid, M: Optional[int] = None,
                    evanescent: int = DEFAULT_EVANESCENT_MODES,
                    branch: BranchSpec = BranchSpec.OUTGOING,
                    guard_band: float = GUARD_BAND) -> ModalBasis:
    n1 = grid.n1
    if M is None:
        everything = sl_eigensystem(c0, k, n1, n1=n1)
        count = sum(1 for mode in everything if mode.mu > 0)
        M = min(n1, count + evanescent)
    modes = sl_eigensystem(c0, k, M, n1=n1)
    check_waveguide_guard(modes, k, guard_band)
    mu = np.array([mode.mu for mode in modes])
    roots = np.where(mu > 0, np.sign(k) * np.sqrt(np.abs(mu)) + 0j, 1j * np.sqrt(np.abs(mu)))
    if branch == BranchSpec.INCOMING:
        roots = np.where(mu > 0, -roots, np.conj(roots))
    return ModalBasis(
        geometry="waveguide",
        k=k,
        alpha=0.0,
        indices=np.arange(1, M + 1),
        lambdas=roots,
        betas=discrete_exponent(mu, grid.h2, sign=k),
        propagating=mu > 0,
        profiles=np.array([mode.phi for mode in modes]) + 0j,
        weights=grid.line_weights,
        h2=grid.h2,
        branch=branch,
        mu=mu,
    )
