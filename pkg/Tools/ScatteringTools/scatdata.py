"""Propagating-mode scattering data: extraction, datasets, flux and reciprocity."""
import csv
import io
import json
import math
from dataclasses import dataclass, field
from typing import Iterable, Literal, Optional, Sequence, Union

import numpy as np

from Tools.ForwardTools.forward import FieldSolution
from Tools.ForwardTools.scenario import Geometry, Scenario
from Tools.SpectralTools.spectral_basis import (
    ModalBasis,
    WaveguideMode,
    grating_basis,
)
from Utilities.errors import BasisMismatchError, IncompleteDataError, NotPropagatingError, ParseError
from Utilities.utilities import sha256_bytes

Side = Literal["top", "bottom"]
Exponents = Literal["discrete", "continuous"]


@dataclass(frozen=True)
class Amplitude:
    m: int
    value: complex
    propagating: bool
    lam: complex
    beta: complex


def _level(u: FieldSolution, side: Side, x2: Optional[float]) -> float:
    if x2 is not None:
        return x2
    if side == "bottom":
        if u.geometry == Geometry.GRATING_CASE2:
            raise ValueError("case-2 gratings have no transmitted side")
        return -u.T
    return u.T


def _extract(u: FieldSolution, basis: ModalBasis, side: Side, exponents: Exponents,
             x2: Optional[float]) -> dict[int, Amplitude]:
    basis.same_k(u.k)
    level = _level(u, side, x2)
    trace = u.scattered[u.grid.row(level)]
    coeffs = basis.project(trace)
    gamma = basis.betas if exponents == "discrete" else basis.lambdas
    # modes grow as exp(i gamma x2) above and exp(-i gamma x2) below
    phase = np.exp(-1j * gamma * level) if side == "top" else np.exp(1j * gamma * level)
    values = phase * coeffs
    amplitudes = {
        int(m): Amplitude(m=int(m), value=complex(a), propagating=bool(p), lam=complex(lam), beta=complex(b))
        for m, a, p, lam, b in zip(basis.indices, values, basis.propagating, basis.lambdas, basis.betas)
    }
    u.amplitudes[side] = amplitudes
    return amplitudes


def extract_grating_amplitudes(u: FieldSolution, M: Optional[int] = None, side: Side = "top",
                               exponents: Exponents = "discrete",
                               x2: Optional[float] = None) -> dict[int, Amplitude]:
    """a_m = exp(-i gamma_m T)/(2 pi) * int exp(-i(m+alpha)x1) v(x1, T) dx1 for |m| <= M."""
    if u.geometry == Geometry.WAVEGUIDE:
        raise BasisMismatchError("grating extraction on a wave guide solution")
    basis = u.basis if M is None else grating_basis(u.k, u.grid, indices=range(-M, M + 1))
    return _extract(u, basis, side, exponents, x2)


def extract_waveguide_amplitudes(u: FieldSolution,
                                 basis: Optional[Union[ModalBasis, Sequence[WaveguideMode]]] = None,
                                 side: Side = "top", exponents: Exponents = "discrete",
                                 x2: Optional[float] = None) -> dict[int, Amplitude]:
    """b_m = exp(-i sqrt(mu_m) T) * int phi_m(x1) v(x1, T) dx1."""
    if u.geometry != Geometry.WAVEGUIDE:
        raise BasisMismatchError("wave guide extraction on a grating solution")
    if basis is None:
        basis = u.basis
    elif not isinstance(basis, ModalBasis):
        basis = _basis_from_modes(u, list(basis))
    return _extract(u, basis, side, exponents, x2)


def _basis_from_modes(u: FieldSolution, modes: list[WaveguideMode]) -> ModalBasis:
    if not modes:
        raise BasisMismatchError("empty wave guide basis")
    for mode in modes:
        if abs(mode.k - u.k) > 1e-12 * max(1.0, abs(u.k)):
            raise BasisMismatchError(f"basis built at k={mode.k}, solution at k={u.k}",
                                     {"basis_k": mode.k, "k": u.k})
        if mode.phi.size != u.grid.n1:
            raise BasisMismatchError("basis and solution grids differ")
    reference = u.basis
    keep = [reference.position(mode.m) for mode in modes]
    return ModalBasis(
        geometry="waveguide",
        k=u.k,
        alpha=0.0,
        indices=np.array([mode.m for mode in modes]),
        lambdas=reference.lambdas[keep],
        betas=reference.betas[keep],
        propagating=np.array([mode.mu > 0 for mode in modes]),
        profiles=np.array([mode.phi for mode in modes]) + 0j,
        weights=reference.weights,
        h2=reference.h2,
        mu=np.array([mode.mu for mode in modes]),
    )


# ---- datasets ----

def _k_key(k: float) -> float:
    return float(f"{k:.12g}")


@dataclass
class ScatteringDataset:
    geometry: Geometry
    alpha: float
    # (side, n, m, k) -> Amplitude
    entries: dict = field(default_factory=dict)
    provenance: dict = field(default_factory=dict)

    @property
    def open_bottom(self) -> bool:
        return self.geometry != Geometry.GRATING_CASE2

    def add(self, n: int, k: float, amplitudes: dict[int, Amplitude], side: Side = "top") -> None:
        for m, amp in amplitudes.items():
            self.entries[(side, int(n), int(m), _k_key(k))] = amp

    def add_solution(self, u: FieldSolution) -> None:
        for side, amplitudes in u.amplitudes.items():
            self.add(u.n, u.k, amplitudes, side)

    def frequencies(self) -> list[float]:
        return sorted({key[3] for key in self.entries})

    def incident_indices(self, k: float) -> list[int]:
        kk = _k_key(k)
        return sorted({key[1] for key in self.entries if key[3] == kk and key[0] == "top"})

    def amplitudes(self, n: int, k: float, side: Side = "top") -> dict[int, Amplitude]:
        kk = _k_key(k)
        return {key[2]: amp for key, amp in sorted(self.entries.items())
                if key[0] == side and key[1] == n and key[3] == kk}

    def value(self, n: int, m: int, k: float, side: Side = "top") -> complex:
        try:
            return self.entries[(side, n, m, _k_key(k))].value
        except KeyError as exc:
            raise IncompleteDataError(f"no {side} amplitude for n={n}, m={m}, k={k}",
                                      {"n": n, "m": m, "k": k, "side": side}) from exc

    def merge(self, other: "ScatteringDataset") -> "ScatteringDataset":
        if other.geometry != self.geometry or other.alpha != self.alpha:
            raise BasisMismatchError("datasets of different geometry or quasimomentum")
        merged = ScatteringDataset(self.geometry, self.alpha, dict(self.entries), dict(self.provenance))
        merged.entries.update(other.entries)
        return merged

    def to_dict(self) -> dict:
        rows = []
        for (side, n, m, k), amp in sorted(self.entries.items(), key=lambda item: (item[0][3], item[0][0], item[0][1], item[0][2])):
            rows.append({
                "n": n, "m": m, "k": k, "side": side,
                "re": amp.value.real, "im": amp.value.imag,
                "propagating": amp.propagating,
                "lam": [amp.lam.real, amp.lam.imag],
                "beta": [amp.beta.real, amp.beta.imag],
            })
        return {"geometry": self.geometry.value, "alpha": self.alpha, "provenance": self.provenance, "entries": rows}

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True)

    def to_csv(self) -> str:
        buffer = io.StringIO()
        writer = csv.writer(buffer, lineterminator="\n")
        writer.writerow(["k", "side", "n", "m", "re", "im", "abs2", "propagating"])
        for row in self.to_dict()["entries"]:
            writer.writerow([repr(row["k"]), row["side"], row["n"], row["m"], repr(row["re"]), repr(row["im"]),
                             repr(row["re"] ** 2 + row["im"] ** 2), int(row["propagating"])])
        return buffer.getvalue()

    @classmethod
    def from_dict(cls, data: dict) -> "ScatteringDataset":
        try:
            ds = cls(Geometry(data.get("geometry", "grating_case1")), float(data["alpha"]),
                     provenance=dict(data.get("provenance", {})))
            for row in data["entries"]:
                lam = row.get("lam", [math.nan, 0.0])
                beta = row.get("beta", lam)
                amp = Amplitude(m=int(row["m"]), value=complex(row["re"], row["im"]),
                                propagating=bool(row["propagating"]),
                                lam=complex(*lam), beta=complex(*beta))
                ds.entries[(row.get("side", "top"), int(row["n"]), int(row["m"]), _k_key(row["k"]))] = amp
        except (KeyError, TypeError, ValueError) as exc:
            raise ParseError(f"malformed scattering dataset: {exc}") from exc
        return ds

    @classmethod
    def from_json(cls, text: str) -> "ScatteringDataset":
        try:
            return cls.from_dict(json.loads(text))
        except json.JSONDecodeError as exc:
            raise ParseError(f"scattering dataset is not valid JSON: {exc}") from exc


def solver_hash(s: Scenario, **settings) -> str:
    payload = json.dumps({"scenario": s.model_dump(mode="json"), "settings": settings}, sort_keys=True)
    return sha256_bytes(payload.encode("utf-8"))


def dataset_from_solutions(s: Scenario, solutions: Iterable[FieldSolution], **settings) -> ScatteringDataset:
    ds = ScatteringDataset(geometry=s.geometry, alpha=s.alpha,
                           provenance={"solver_hash": solver_hash(s, **settings), "scenario": s.name})
    for u in sorted(solutions, key=lambda sol: (sol.k, sol.n)):
        ds.add_solution(u)
    return ds


# ---- flux and reciprocity ----

def _flux_weight(amp: Amplitude, h2: Optional[float], weights: str) -> float:
    if weights == "discrete":
        if h2 is None:
            raise ValueError("discrete flux weights need the grid step h2")
        return math.sin(amp.beta.real * h2) / h2 * math.copysign(1.0, amp.beta.real)
    return abs(amp.lam.real)


def flux_balance(ds: ScatteringDataset, n: int, k: float, weights: str = "continuous",
                 h2: Optional[float] = None) -> float:
    """|outgoing flux - incident flux| / incident flux for incident mode n.

    Reflected flux counts sum_m lam_m |a_m|^2 over propagating m. With an open
    bottom the transmitted flux sum_m lam_m |delta_mn + t_m|^2 is added.
    """
    top = ds.amplitudes(n, k, "top")
    if not top:
        raise IncompleteDataError(f"no amplitudes for n={n} at k={k}", {"n": n, "k": k})
    if n not in top:
        raise IncompleteDataError(f"incident mode {n} missing from the stored modes", {"n": n, "k": k})
    incident = top[n]
    if not incident.propagating:
        raise NotPropagatingError(f"flux balance needs a propagating incident mode, got n={n}", {"n": n, "k": k})
    _check_propagating_complete(ds, top, k)
    w_n = _flux_weight(incident, h2, weights)
    outgoing = sum(_flux_weight(a, h2, weights) * abs(a.value) ** 2 for a in top.values() if a.propagating)
    if ds.open_bottom:
        bottom = ds.amplitudes(n, k, "bottom")
        if not bottom:
            raise IncompleteDataError(f"transmitted amplitudes missing for n={n} at k={k}", {"n": n, "k": k})
        _check_propagating_complete(ds, bottom, k)
        outgoing += sum(
            _flux_weight(a, h2, weights) * abs(a.value + (1.0 if m == n else 0.0)) ** 2
            for m, a in bottom.items() if a.propagating
        )
    return abs(outgoing - w_n) / w_n


def _check_propagating_complete(ds: ScatteringDataset, amplitudes: dict[int, Amplitude], k: float) -> None:
    if ds.geometry == Geometry.WAVEGUIDE:
        flags = [amplitudes[m].propagating for m in sorted(amplitudes)]
        # modes are stored from m = 1 up; the last stored one must already be evanescent
        if not flags or flags[-1] or sorted(amplitudes) != list(range(1, len(flags) + 1)):
            raise IncompleteDataError(f"propagating wave guide modes incomplete at k={k}", {"k": k})
        return
    needed = [m for m in range(-int(abs(k)) - 2, int(abs(k)) + 3) if (m + ds.alpha) ** 2 < k * k]
    missing = [m for m in needed if m not in amplitudes]
    if missing:
        raise IncompleteDataError(f"propagating modes {missing} missing at k={k}", {"k": k, "missing": missing})


def _partner(ds: ScatteringDataset, m: int) -> int:
    if ds.geometry == Geometry.WAVEGUIDE:
        return m
    shift = 2.0 * ds.alpha
    if abs(shift - round(shift)) > 1e-12:
        raise ValueError("reciprocity pairing needs 2*alpha to be an integer")
    return -m - int(round(shift))


def flux_normalized_matrix(ds: ScatteringDataset, k: float) -> tuple[list[int], np.ndarray]:
    """S[m, n] = sqrt(lam_m/lam_n) a_m(n) over the propagating incident set."""
    incidents = [n for n in ds.incident_indices(k) if ds.amplitudes(n, k)[n].propagating]
    if not incidents:
        raise IncompleteDataError(f"no propagating incident data at k={k}", {"k": k})
    S = np.zeros((len(incidents), len(incidents)), dtype=complex)
    for j, n in enumerate(incidents):
        column = ds.amplitudes(n, k)
        w_n = abs(column[n].lam.real)
        for i, m in enumerate(incidents):
            if m not in column:
                raise IncompleteDataError(f"a_{m}({n}) missing at k={k}", {"n": n, "m": m, "k": k})
            S[i, j] = math.sqrt(abs(column[m].lam.real) / w_n) * column[m].value
    return incidents, S


def reciprocity_defect(ds: ScatteringDataset, k: float) -> float:
    """||S - J S^T J||_F / ||S||_F with J the mirror pairing m -> -m - 2 alpha."""
    incidents, S = flux_normalized_matrix(ds, k)
    position = {m: i for i, m in enumerate(incidents)}
    try:
        J = [position[_partner(ds, m)] for m in incidents]
    except KeyError as exc:
        raise IncompleteDataError(f"mirror partner of mode {exc.args[0]} missing at k={k}") from exc
    mirrored = S.T[np.ix_(J, J)]
    norm = np.linalg.norm(S)
    return float(np.linalg.norm(S - mirrored) / norm) if norm > 0 else 0.0
