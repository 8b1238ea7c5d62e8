"""Experiment pipelines: solves, audits, and the files each run leaves behind."""
import csv
import io
import json
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Optional

import numpy as np

from Storage.writer import ResultWriter
from Tools.DtNTools.dtn import (
    dtn_direct,
    dtn_from_modes,
    dtn_symmetry_defect,
    family_to_json,
    monotone_ratio,
    relative_difference,
    span_residual_sweep,
    trace_basis,
)
from Tools.DtNTools.synthesis import dtn_family, dtn_time_synthesis, wavelet_input
from Tools.DtNTools.timedomain import timedomain_reference
from Tools.ExperimentTools.config import ExperimentConfig, ExperimentKind
from Tools.ForwardTools.embedded import embedded_eigen_scenario
from Tools.ForwardTools.forward import FieldSolution, LineSource, extraction_basis, solve_distorted_wave
from Tools.ForwardTools.operator import assemble_operator
from Tools.ForwardTools.scenario import Geometry, Scenario
from Tools.ScatteringTools.continuation import evaluate_continuation, fit_rational
from Tools.ScatteringTools.scatdata import (
    ScatteringDataset,
    dataset_from_solutions,
    extract_grating_amplitudes,
    extract_waveguide_amplitudes,
    flux_balance,
    reciprocity_defect,
)
from Tools.ScatteringTools.trace_identity import CutoffSpec, lemma1_residual
from Tools.SpectralTools.spectral_basis import BranchSpec, ModalBasis
from Utilities.errors import SingularSystemError
from Utilities.logger import get_logger
from Utilities.settings import RESOURCES_DIR, thread_count
from Utilities.utilities import relative_l2

logger = get_logger('experiments')

TOLERANCES_FILE = RESOURCES_DIR / 'tolerances.json'


def load_tolerances(overrides: Optional[dict] = None) -> dict[str, float]:
    tolerances = json.loads(TOLERANCES_FILE.read_text(encoding='utf-8'))
    tolerances.update(overrides or {})
    return tolerances


@dataclass
class RunContext:
    cfg: ExperimentConfig
    scenario: Optional[Scenario]
    writer: ResultWriter
    tolerances: dict
    threads: int
    metrics: dict = field(default_factory=dict)
    audits: list = field(default_factory=list)

    def audit(self, name: str, value: float, tolerance_key: str, above: bool = False) -> bool:
        """Record value <= tolerance (or >= with above=True)."""
        tolerance = self.tolerances[tolerance_key]
        passed = bool(value >= tolerance) if above else bool(value <= tolerance)
        self.audits.append({"name": name, "value": _clean(value), "tolerance": tolerance,
                            "rule": ">=" if above else "<=", "passed": passed})
        if not passed:
            logger.warning("audit failed", extra={"audit": name, "value": value, "tolerance": tolerance})
        return passed

    def map(self, func: Callable, items: list) -> list:
        with ThreadPoolExecutor(max_workers=self.threads) as pool:
            return list(pool.map(func, items))


def _clean(value):
    if isinstance(value, (complex, np.complexfloating)):
        return [_clean(value.real), _clean(value.imag)]
    value = float(value)
    return value if math.isfinite(value) else str(value)


# ---- shared solve stage ----

def _extract(s: Scenario, u: FieldSolution, basis: Optional[ModalBasis] = None) -> None:
    sides = ("top", "bottom") if s.open_bottom else ("top",)
    for side in sides:
        if s.geometry == Geometry.WAVEGUIDE:
            extract_waveguide_amplitudes(u, basis, side=side)
        elif basis is not None:
            extract_grating_amplitudes(u, M=int(np.max(np.abs(basis.indices))), side=side)
        else:
            extract_grating_amplitudes(u, side=side)


def _solve_at_k(s: Scenario, k: float, incidents: Optional[list[int]], generalized: bool = False,
                basis: Optional[ModalBasis] = None) -> list[FieldSolution]:
    system = assemble_operator(s, k, BranchSpec.OUTGOING)
    if incidents is None:
        incidents = extraction_basis(s, system.grid, k).propagating_indices()
    solutions = []
    for n in incidents:
        u = solve_distorted_wave(s, n, k, generalized=generalized, system=system)
        _extract(s, u, basis)
        solutions.append(u)
    logger.debug("solved frequency", extra={"k": k, "incidents": list(incidents), "condition": system.condition_estimate()})
    return solutions


def _sweep(ctx: RunContext, generalized: bool = False) -> ScatteringDataset:
    s = ctx.scenario
    ks = ctx.cfg.k_points()
    batches = ctx.map(lambda k: _solve_at_k(s, k, ctx.cfg.modes.incident, generalized), ks)
    solutions = [u for batch in batches for u in batch]
    ctx.metrics["condition"] = {repr(u.k): _clean(u.condition) for u in solutions}
    return dataset_from_solutions(s, solutions, generalized=generalized)


def _write_dataset(ctx: RunContext, ds: ScatteringDataset, stem: str = 'amplitudes') -> None:
    ctx.writer.write_text(f'{stem}.json', ds.to_json() + '\n')
    ctx.writer.write_text(f'{stem}.csv', ds.to_csv())
    ctx.writer.write_text(f'{stem}.gp', plot_script(
        f'{stem}.csv', "k", "|a_m|^2",
        [("reflected", "1:(strcol(2) eq 'top' ? $7 : 1/0)"), ("transmitted", "1:(strcol(2) eq 'bottom' ? $7 : 1/0)")],
    ))


def plot_script(data: str, xlabel: str, ylabel: str, series: list[tuple[str, str]], logscale: bool = False) -> str:
    lines = [
        "set datafile separator ','",
        f"set xlabel '{xlabel}'",
        f"set ylabel '{ylabel}'",
        "set key outside",
    ]
    if logscale:
        lines.append("set logscale y")
    plots = [f"'{data}' every ::1 using {columns} with linespoints title '{title}'" for title, columns in series]
    lines.append("plot " + ", \\\n     ".join(plots))
    return "\n".join(lines) + "\n"


def _csv(header: list[str], rows: list[list]) -> str:
    buffer = io.StringIO()
    writer = csv.writer(buffer, lineterminator="\n")
    writer.writerow(header)
    for row in rows:
        writer.writerow([repr(v) if isinstance(v, float) else v for v in row])
    return buffer.getvalue()


# ---- pipelines ----

def forward_sweep(ctx: RunContext) -> None:
    ds = _sweep(ctx)
    _write_dataset(ctx, ds)
    ctx.metrics["entries"] = len(ds.entries)
    ctx.metrics["frequencies"] = ds.frequencies()


def flux_audit(ctx: RunContext) -> None:
    ds = _sweep(ctx)
    _write_dataset(ctx, ds)
    flux = {}
    rows = []
    for k in ds.frequencies():
        for n in ds.incident_indices(k):
            residual = flux_balance(ds, n, k)
            flux[f"{k!r}:{n}"] = _clean(residual)
            rows.append([k, n, residual])
            ctx.audit(f"flux k={k!r} n={n}", residual, "flux")
    ctx.metrics["flux_residual"] = flux
    if ctx.scenario.geometry == Geometry.WAVEGUIDE or abs(2 * ctx.scenario.alpha - round(2 * ctx.scenario.alpha)) < 1e-12:
        recip = {}
        for k in ds.frequencies():
            defect = reciprocity_defect(ds, k)
            recip[repr(k)] = _clean(defect)
            ctx.audit(f"reciprocity k={k!r}", defect, "reciprocity")
        ctx.metrics["reciprocity_defect"] = recip
    ctx.writer.write_text('flux.csv', _csv(["k", "n", "residual"], rows))
    ctx.writer.write_text('flux.gp', plot_script('flux.csv', "k", "flux residual", [("residual", "1:3")], logscale=True))


def _sources(ctx: RunContext, basis: ModalBasis) -> list[tuple[str, LineSource]]:
    spec = ctx.cfg.lemma1
    modes = spec.source_modes if spec.source_modes is not None else [spec.mode]
    sources = [(f"mode {p}", LineSource.mode(basis, p)) for p in modes]
    rng = np.random.default_rng(ctx.cfg.seed)
    for j in range(spec.random_sources):
        coeffs = rng.standard_normal(basis.size) + 1j * rng.standard_normal(basis.size)
        sources.append((f"random {j}", LineSource(f=basis.synthesize(coeffs / np.linalg.norm(coeffs)))))
    return sources


def lemma1_audit(ctx: RunContext) -> None:
    s = ctx.scenario
    grid = s.grid()
    spec = ctx.cfg.lemma1

    def run(k: float) -> list[list]:
        basis = extraction_basis(s, grid, k)
        rows = []
        for label, f in _sources(ctx, basis):
            for width in spec.widths:
                residual = lemma1_residual(s, f, spec.mode, k, CutoffSpec(T=s.T, width=width))
                rows.append([k, label, width, residual])
        return rows

    rows = [row for batch in ctx.map(run, ctx.cfg.k_points()) for row in batch]
    ctx.metrics["lemma1_residual"] = {f"{k!r}:{label}:{width!r}": _clean(r) for k, label, width, r in rows}
    for k, label, width, residual in rows:
        ctx.audit(f"trace identity k={k!r} {label} width={width!r}", residual, "lemma1")
    ctx.writer.write_text('lemma1.csv', _csv(["k", "source", "width", "residual"], rows))
    ctx.writer.write_text('lemma1.gp', plot_script('lemma1.csv', "k", "relative mismatch", [("residual", "1:4")], logscale=True))


def _span_order(s: Scenario, M: int, n_max: int) -> int:
    """Basis order whose index set holds at least n_max incident modes."""
    if s.geometry == Geometry.WAVEGUIDE:
        return max(M, n_max)
    return max(M, n_max // 2)


def dtn_compare(ctx: RunContext) -> None:
    s = ctx.scenario
    M = ctx.cfg.modes.M
    n_span = ctx.cfg.modes.n_span
    requested = ctx.cfg.modes.span_sweep

    def run(k: float):
        basis = trace_basis(s, k, M)
        sweep_basis = trace_basis(s, k, _span_order(s, M, max([n_span, *requested])))
        direct = dtn_direct(s, k, basis=basis)
        ordered = sorted((int(n) for n in sweep_basis.indices), key=lambda n: (abs(n + s.alpha), n))
        system = assemble_operator(s, k, BranchSpec.OUTGOING)
        solutions = [solve_distorted_wave(s, n, k, generalized=True, system=system)
                     for n in ordered[:max([n_span, *requested])]]
        in_basis = set(int(n) for n in basis.indices)
        for u in solutions:
            if u.n in in_basis:
                _extract(s, u, basis)
        ds = dataset_from_solutions(s, [u for u in solutions if u.n in in_basis], generalized=True)
        from_modes = dtn_from_modes(ds, basis, s.T, n_span=n_span, check_span=False)
        for u in solutions:
            _extract(s, u, sweep_basis)
        sweep_ds = dataset_from_solutions(s, solutions, generalized=True)
        spans = [n for n in requested if n <= sweep_basis.size]
        sweep = span_residual_sweep(sweep_ds, sweep_basis, s.T, spans)
        return k, direct, from_modes, sweep

    results = ctx.map(run, ctx.cfg.k_points())
    rows = []
    sweep_rows = []
    sweeps = {}
    for k, direct, from_modes, sweep in results:
        mismatch = relative_difference(from_modes, direct)
        span = from_modes.diagnostics["max_span_residual"]
        row = [k, mismatch, span]
        if s.geometry == Geometry.WAVEGUIDE or abs(2 * s.alpha - round(2 * s.alpha)) < 1e-12:
            row.append(dtn_symmetry_defect(direct))
        rows.append(row)
        ctx.audit(f"dtn mismatch k={k!r}", mismatch, "dtn")
        ctx.audit(f"dtn span residual k={k!r}", span, "span")
        sweeps[repr(k)] = [[n, _clean(r)] for n, r in sweep]
        sweep_rows.extend([k, n, r] for n, r in sweep)
        ctx.audit(f"span residual decrease k={k!r}", monotone_ratio([r for _, r in sweep]), "span_jitter")
    ctx.metrics["dtn_mismatch"] = {repr(r[0]): _clean(r[1]) for r in rows}
    ctx.metrics["span_residual"] = {repr(r[0]): _clean(r[2]) for r in rows}
    ctx.metrics["span_residual_vs_nspan"] = sweeps
    if rows and len(rows[0]) > 3:
        ctx.metrics["dtn_symmetry_defect"] = {repr(r[0]): _clean(r[3]) for r in rows}
    ctx.writer.write_text('dtn_direct.json', family_to_json([r[1] for r in results]) + '\n')
    ctx.writer.write_text('dtn_from_modes.json', family_to_json([r[2] for r in results]) + '\n')
    header = ["k", "mismatch", "span_residual"] + (["symmetry_defect"] if rows and len(rows[0]) > 3 else [])
    ctx.writer.write_text('dtn.csv', _csv(header, rows))
    ctx.writer.write_text('dtn.gp', plot_script('dtn.csv', "k", "relative Frobenius mismatch", [("mismatch", "1:2")], logscale=True))
    ctx.writer.write_text('span_residual_vs_nspan.csv', _csv(["k", "n_span", "rms_residual"], sweep_rows))
    ctx.writer.write_text('span_residual.gp', plot_script(
        'span_residual_vs_nspan.csv', "N_span", "RMS expansion residual", [("residual", "2:3")], logscale=True))


def continuation_audit(ctx: RunContext) -> None:
    s = ctx.scenario
    spec = ctx.cfg.continuation

    def amplitude(k: float) -> complex:
        u = solve_distorted_wave(s, spec.n, k, generalized=True)
        _extract(s, u)
        return u.amplitudes["top"][spec.m].value

    ks = ctx.cfg.k_points()
    samples = list(zip(ks, ctx.map(amplitude, ks)))
    model = fit_rational(samples, holdout=spec.holdout)
    predicted, estimate = evaluate_continuation(model, spec.target_k)
    direct = amplitude(spec.target_k)
    error = abs(predicted - direct) / abs(direct) if direct != 0 else abs(predicted)
    ctx.metrics["continuation"] = {
        "degree": model.degree,
        "holdout_residual": _clean(model.holdout_residual),
        "target_k": spec.target_k,
        "predicted": _clean(predicted),
        "direct": _clean(direct),
        "error_estimate": _clean(estimate),
        "relative_error": _clean(error),
    }
    ctx.audit(f"continuation a_{spec.m}({spec.n}) at k={spec.target_k!r}", error, "continuation")
    ctx.writer.write_text('continuation_model.json', model.to_json() + '\n')
    grid_k = np.linspace(*model.trust_region, 201)
    fitted = model.rational(grid_k)
    ctx.writer.write_text('continuation_samples.csv', _csv(["k", "re", "im"], [[k, v.real, v.imag] for k, v in samples]))
    ctx.writer.write_text('continuation_fit.csv', _csv(["k", "re", "im"], [[float(k), float(v.real), float(v.imag)] for k, v in zip(grid_k, fitted)]))
    ctx.writer.write_text('continuation.gp', plot_script(
        'continuation_fit.csv', "k", f"a_{spec.m}({spec.n})", [("Re fit", "1:2"), ("Im fit", "1:3")]))


def time_synthesis(ctx: RunContext) -> None:
    s = ctx.scenario
    spec = ctx.cfg.synthesis
    ks = ctx.cfg.k_points()
    family = dtn_family(s, ks, ctx.cfg.modes.M or 4, threads=ctx.threads)
    basis = family[0].basis
    grid = s.grid()
    t = spec.dt * np.arange(int(round(spec.t_end / spec.dt)) + 1)
    g = wavelet_input(basis, spec.mode, t, spec.peak, spec.delay, grid.x1)
    synthesized = dtn_time_synthesis(family, g)
    reference = timedomain_reference(s, g, sponge=spec.sponge)

    mismatch = relative_l2(synthesized.values, reference.values, grid.line_weights[None, :])
    causal = synthesized.metadata["causality_leakage"]
    energy = np.asarray(reference.metadata["energy"])
    # forcing has died out once the wavelet is 4 widths past its centre
    quiet = t[1:] > spec.delay + 4.0 / spec.peak
    growth = 0.0
    if np.count_nonzero(quiet) > 1:
        tail = energy[quiet]
        growth = float(max(0.0, np.max(tail) - tail[0]) / max(abs(tail[0]), 1e-300))
    ctx.metrics["time_synthesis"] = {
        "relative_l2": _clean(mismatch),
        "causality_leakage": _clean(causal),
        "band_leakage": _clean(synthesized.metadata["band_leakage"]),
        "energy_growth_after_forcing": _clean(growth),
        "substeps": reference.metadata["substeps"],
        "family_size": len(family),
    }
    ctx.audit("synthesis vs leapfrog", mismatch, "synthesis")
    ctx.audit("causality leakage", causal, "causality")
    ctx.audit("energy non-increase", growth, "energy")
    ctx.writer.write_text('dtn_family.json', family_to_json(family) + '\n')
    ctx.writer.write_text('synthesized.csv', synthesized.to_csv())
    ctx.writer.write_text('reference.csv', reference.to_csv())
    column = 0
    rows = [[float(tt), float(a.real), float(b.real)] for tt, a, b in zip(t, synthesized.values[:, column], reference.values[:, column])]
    ctx.writer.write_text('trace_x1_0.csv', _csv(["t", "synthesized", "reference"], rows))
    ctx.writer.write_text('traces.gp', plot_script('trace_x1_0.csv', "t", "d/dx2 at T", [("synthesized", "1:2"), ("leapfrog", "1:3")]))


def embedded_eigen_probe(ctx: RunContext) -> None:
    spec = ctx.cfg.probe
    resolution = ctx.scenario.resolution if ctx.scenario is not None else None
    s = embedded_eigen_scenario(spec.potential, spec.E, spec.m, spec.alpha, T=spec.T, resolution=resolution)
    K = s.metadata["exceptional_k2"]

    def condition(k2: float) -> float:
        system = assemble_operator(s, math.sqrt(k2), BranchSpec.OUTGOING)
        try:
            return system.condition_estimate()
        except SingularSystemError:
            return math.inf

    offsets = [0.0, -spec.near, spec.near, -spec.far, spec.far]
    values = dict(zip(offsets, ctx.map(lambda d: condition(K + d), offsets)))
    ctx.metrics["embedded_probe"] = {
        "exceptional_k2": K,
        "exceptional_k2_continuum": s.metadata["exceptional_k2_continuum"],
        "bound_energy": s.metadata["bound_energy"],
        "condition": {repr(d): _clean(c) for d, c in values.items()},
    }
    near = max(values[0.0], values[-spec.near], values[spec.near])
    far = max(values[-spec.far], values[spec.far])
    ctx.audit("condition near the embedded eigenvalue", near, "probe_near", above=True)
    ctx.audit("condition away from the embedded eigenvalue", far, "probe_far")
    ctx.writer.write_json('embedded_scenario.json', s.model_dump(mode="json"))
    rows = [[K + d, c] for d, c in sorted(values.items())]
    ctx.writer.write_text('probe.csv', _csv(["k2", "condition"], rows))
    ctx.writer.write_text('probe.gp', plot_script('probe.csv', "k^2", "condition estimate", [("condition", "1:2")], logscale=True))


PIPELINES: dict[ExperimentKind, Callable[[RunContext], None]] = {
    ExperimentKind.FORWARD_SWEEP: forward_sweep,
    ExperimentKind.FLUX_AUDIT: flux_audit,
    ExperimentKind.LEMMA1_AUDIT: lemma1_audit,
    ExperimentKind.DTN_COMPARE: dtn_compare,
    ExperimentKind.CONTINUATION_AUDIT: continuation_audit,
    ExperimentKind.TIME_SYNTHESIS: time_synthesis,
    ExperimentKind.EMBEDDED_EIGEN_PROBE: embedded_eigen_probe,
}


def run_experiment(cfg: ExperimentConfig, out: Optional[str | Path] = None, threads: Optional[int] = None) -> dict:
    """Run the configured pipeline and commit its run directory; returns the manifest."""
    out_dir = Path(out or cfg.output_dir)
    threads = thread_count(threads if threads is not None else cfg.threads)
    config_dump = cfg.model_dump(mode="json", exclude={"resolved_scenario", "output_dir", "threads"})
    with ResultWriter(out_dir, metadata={"kind": cfg.kind.value, "seed": cfg.seed}) as writer:
        ctx = RunContext(cfg=cfg, scenario=cfg.resolved_scenario, writer=writer,
                         tolerances=load_tolerances(cfg.tolerances), threads=threads)
        logger.info("experiment started", extra={"kind": cfg.kind.value, "out": str(out_dir), "threads": threads})
        writer.write_json('config.json', config_dump)
        if ctx.scenario is not None:
            writer.write_json('scenario.json', ctx.scenario.model_dump(mode="json"))
        PIPELINES[cfg.kind](ctx)
        passed = all(a["passed"] for a in ctx.audits)
        writer.write_json('metrics.json', {
            "kind": cfg.kind.value,
            "metrics": ctx.metrics,
            "audits": sorted(ctx.audits, key=lambda a: a["name"]),
            "passed": passed,
        })
        writer.metadata["passed"] = passed
    manifest = writer.manifest()
    logger.info("experiment finished", extra={"kind": cfg.kind.value, "passed": passed, "files": len(manifest["files"])})
    return manifest
