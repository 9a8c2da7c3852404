"""Scenario-level simulation and analysis: histograms in, report out."""
from __future__ import annotations

import json
import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np

from . import analysis, chain, detection, formats, memory, source, spectra
from .analysis import Measurement
from .errors import ParameterError, ScenarioError
from .scenario import Scenario, child_seed, dump

log = logging.getLogger(__name__)

FSR_GHZ = 12.3
INSTRUMENT_FWHM_GHZ = 0.15


@dataclass
class StorageTruth:
    """Injected quantities of one simulated storage run."""

    tau_s: float
    input_flux: float  # photons per trigger at the memory input
    eta_internal: float  # true stored-and-retrieved fraction
    eta_e2e: float  # true retrieved / input including memory-side losses
    t_chain: float  # nominal transmission the analysis divides out
    leak_fraction: float  # leaked photons per input photon reaching the detector
    retrieval_fraction: float  # retrieved photons per input photon reaching the detector


@dataclass
class StorageRun:
    reference: detection.ArrivalHistogram
    storage: detection.ArrivalHistogram
    truth: StorageTruth
    meta: dict = field(default_factory=dict)


def nominal_t_chain(sc: Scenario) -> Measurement:
    """Memory-side transmission: memory unit through the last listed stage."""
    last = sc.chain.stages[-1].name
    return Measurement(
        chain.chain_transmission(sc.chain, "memory unit", last),
        chain.chain_transmission_sigma(sc.chain, "memory unit", last),
    )


def storage_profiles(sc: Scenario, tau_s: float):
    """Leakage and retrieval arrival profiles per trigger, plus the truth record.

    Input photons that are not stored cross the cell (slowed by its
    dispersion) and the etalon with the QD spectrum.  Retrieved photons carry
    the acceptance-window spectrum, so they pass the etalon far better.
    """
    wp = source.build_wavepacket(sc.qd, sc.run.temperature)
    outcome = memory.readin(wp, sc.memory)
    t_mem = sc.chain["memory unit"].transmission
    t_etalon = sc.chain["etalon"].transmission
    leak_spec = spectra.filtered_fraction(wp.spectral, sc.etalon).value
    ret_spec = spectra.filtered_fraction(memory.acceptance_window(sc.memory), sc.etalon).value
    ret = memory.retrieve(outcome, sc.memory, tau_s, window=sc.sync.window)
    leak_frac = outcome.leaked_fraction * t_mem * t_etalon * leak_spec
    ret_frac = ret.fraction * t_mem * t_etalon * ret_spec
    leak_decay = chain.apply_dispersive_cell(wp, sc.cell).temporal_decay
    flux = wp.mean_photon_flux
    leakage = detection.TemporalProfile.exponential(leak_decay, flux * leak_frac)
    retrieval = detection.TemporalProfile.gaussian(ret.center, ret.sigma, flux * ret_frac)
    truth = StorageTruth(
        tau_s=tau_s,
        input_flux=flux,
        eta_internal=ret.fraction,
        eta_e2e=ret_frac,
        t_chain=nominal_t_chain(sc).value,
        leak_fraction=leak_frac,
        retrieval_fraction=ret_frac,
    )
    return leakage, retrieval, truth


def _hist_kwargs(sc: Scenario) -> dict:
    r = sc.run
    return dict(
        det=sc.detector,
        sync=sc.sync,
        n_triggers=r.n_triggers,
        background_per_bin=r.background_per_bin,
        bin_width=r.bin_width,
        t_start=r.hist_start,
        t_stop=r.hist_stop,
    )


def simulate_reference(sc: Scenario) -> detection.ArrivalHistogram:
    """Control-off histogram of the unmodified QD photons at the memory input."""
    wp = source.build_wavepacket(sc.qd, sc.run.temperature)
    profile = detection.TemporalProfile.exponential(wp.temporal_decay, wp.mean_photon_flux)
    hist = detection.synthesize_histogram(
        profile, None, seed=child_seed(sc.run.seed, "reference"), **_hist_kwargs(sc)
    )
    hist.meta.update(kind="reference", irf_fwhm_ps=sc.detector.irf_fwhm)
    return hist


def simulate_storage(sc: Scenario, tau_s: float, reference: detection.ArrivalHistogram | None = None) -> StorageRun:
    problems = sc.problems()
    if problems:
        raise ScenarioError(problems)
    leakage, retrieval, truth = storage_profiles(sc, tau_s)
    hist = detection.synthesize_histogram(
        leakage, retrieval, seed=child_seed(sc.run.seed, f"storage:{tau_s!r}"), **_hist_kwargs(sc)
    )
    tc = nominal_t_chain(sc)
    hist.meta.update(
        kind="storage",
        tau_s_ns=float(tau_s),
        tau_s_sigma_ns=sc.run.tau_s_sigma,
        t_chain=tc.value,
        t_chain_sigma=tc.sigma,
        irf_fwhm_ps=sc.detector.irf_fwhm,
    )
    if reference is None:
        reference = simulate_reference(sc)
    return StorageRun(reference, hist, truth)


def analyze_storage(run: StorageRun, tau_s_sigma: float = 0.3, weighting: str = "ml"):
    """Report for one storage run (reference + storage histogram)."""
    h = run.storage
    tau_s = Measurement(float(h.meta.get("tau_s_ns", run.truth.tau_s)), tau_s_sigma)
    t_chain = Measurement(float(h.meta.get("t_chain", run.truth.t_chain)), float(h.meta.get("t_chain_sigma", 0.0)))
    irf = float(h.meta.get("irf_fwhm_ps", 93.0))
    return analysis.build_report(run.reference, h, tau_s, t_chain, irf_fwhm=irf, weighting=weighting)


def sweep_efficiency(sc: Scenario, taus, max_workers: int | None = None):
    """Simulate and analyze every storage time; returns rows in input order.

    Each row: (tau_s, eta_int measured, sigma, eta_int model).  Points run
    concurrently; each draws from its own named seed stream.
    """
    taus = [float(t) for t in taus]
    reference = simulate_reference(sc)

    def one(tau):
        run = simulate_storage(sc, tau, reference)
        report, _ = analyze_storage(run, sc.run.tau_s_sigma)
        eta = report.eta_int
        return run, (tau, eta.value, eta.sigma, run.truth.eta_internal)

    with ThreadPoolExecutor(max_workers=max_workers) as pool:
        results = list(pool.map(one, taus))
    return results


def parse_sweep(text: str) -> list[float]:
    """``start:stop:step`` with an inclusive stop, e.g. 5:20:1 gives 16 points."""
    try:
        start, stop, step = (float(x) for x in text.split(":"))
    except ValueError:
        raise ParameterError(f"sweep must look like start:stop:step, got {text!r}") from None
    if step <= 0 or stop < start:
        raise ParameterError("sweep needs step > 0 and stop >= start")
    n = int(np.floor((stop - start) / step + 1e-9)) + 1
    return [round(start + i * step, 10) for i in range(n)]


def _tau_tag(tau: float) -> str:
    return f"{tau:.2f}".rstrip("0").rstrip(".")


def simulate_hbt(sc: Scenario, purity: float | None = None, n_pulses: int | None = None):
    """Emission stream and HBT coincidences at the configured probe rate."""
    r = sc.run
    qd = sc.qd if purity is None else replace(sc.qd, purity_g2=purity)
    stream = source.sample_emission_stream(
        qd, n_pulses or r.hbt_pulses, r.hbt_rep_rate, seed=child_seed(r.seed, "emission"),
        photons_per_pulse=r.hbt_photons_per_pulse,
    )
    coinc = detection.simulate_hbt(stream, sc.detector, r.hbt_window, seed=child_seed(r.seed, "hbt"))
    return stream, coinc


def simulate_fpi(sc: Scenario, noise: float = 0.01):
    wp = source.build_wavepacket(sc.qd, sc.run.temperature)
    return detection.synthesize_fpi_trace(
        wp.spectral, FSR_GHZ, INSTRUMENT_FWHM_GHZ, noise=noise, seed=child_seed(sc.run.seed, "fpi")
    )


def run_simulate(sc: Scenario, out_dir, taus=None, sweep=None) -> Path:
    """Write histograms, events, time tags, sweep and rate tables plus a manifest.

    ``taus`` defaults to the scenario's storage times.  With no storage
    times and no sweep only the manifest is written.
    """
    problems = sc.problems()
    if problems:
        raise ScenarioError(problems)
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    taus = list(sc.run.tau_s if taus is None else taus)
    sweep = list(sweep or [])
    for t in taus + sweep:
        if t > sc.sync.window:
            raise ScenarioError([f"run: tau_s {t} ns exceeds the {sc.sync.window:g} ns inter-pulse window"])
    entries: list[dict] = []
    params = {"seed": sc.run.seed, "n_triggers": sc.run.n_triggers, "tau_s_ns": taus, "sweep_ns": sweep}

    def add(name, kind, **extra):
        entries.append({"file": name, "kind": kind, **extra})

    if taus or sweep:
        dump(sc, out / "scenario.ini")
        add("scenario.ini", "scenario")
        reference = simulate_reference(sc)
        formats.write_histogram_csv(reference, out / "reference.csv")
        add("reference.csv", "histogram", role="reference", seed_stream="reference")
        for tau in taus:
            run = simulate_storage(sc, tau, reference)
            name = f"storage_tau{_tau_tag(tau)}ns.csv"
            formats.write_histogram_csv(run.storage, out / name)
            add(name, "histogram", role="storage", tau_s_ns=tau, seed_stream=f"storage:{tau!r}")

        stream, coinc = simulate_hbt(sc)
        formats.write_events_csv(stream, out / "events.csv")
        add("events.csv", "events", seed_stream="emission", n_pulses=stream.n_pulses)
        formats.stream_to_timetags(stream, out / "timetags.bin")
        add("timetags.bin", "timetags", seed_stream="emission")
        formats.write_coincidences_csv(coinc, out / "coincidences.csv")
        add("coincidences.csv", "coincidences", seed_stream="hbt")
        trace = simulate_fpi(sc)
        formats.write_trace_csv(trace, out / "fpi_trace.csv")
        add("fpi_trace.csv", "fpi_trace", fsr_ghz=FSR_GHZ, instrument_fwhm_ghz=INSTRUMENT_FWHM_GHZ)

        rates = chain.predicted_rates(sc.chain)
        rows = [("input", 1.0, rates[0][1])] + [
            (s.name, s.transmission, r) for s, (_, r) in zip(sc.chain.stages, rates[1:])
        ]
        formats.write_table_csv(out / "rates.csv", ("part", "transmission", "count_rate_hz"), rows)
        add("rates.csv", "rates")

    if sweep:
        results = sweep_efficiency(sc, sweep)
        for run, _row in results:
            name = f"sweep_tau{_tau_tag(run.truth.tau_s)}ns.csv"
            formats.write_histogram_csv(run.storage, out / name)
            add(name, "histogram", role="sweep", tau_s_ns=run.truth.tau_s)
        formats.write_table_csv(
            out / "sweep.csv",
            ("tau_ns", "eta_internal", "eta_internal_sigma", "eta_internal_model"),
            [row for _run, row in results],
        )
        add("sweep.csv", "sweep")

    formats.write_manifest(out, entries, params)
    return out


def _manifest_files(in_dir: Path) -> list[dict]:
    path = in_dir / "manifest.json"
    if not path.exists():
        raise FileNotFoundError(f"no manifest.json in {in_dir}")
    return json.loads(path.read_text(encoding="utf-8"))["files"]


def run_analyze(
    in_dir=None,
    out_dir=None,
    reference=None,
    storage=(),
    coincidences=None,
    trace=None,
    fsr: float = FSR_GHZ,
    t_chain: Measurement | None = None,
    tau_s_sigma: float = 0.3,
    figures: bool = True,
) -> list[tuple[Path, analysis.AnalysisReport]]:
    """Analyze a simulate output directory or explicit files.

    One report is written per storage histogram (or a single partial report
    when there is none).  Each report goes out as JSON and as a text table,
    with every fit dumped to CSV and, when ``figures`` is set, plotted.
    """
    in_dir = Path(in_dir) if in_dir is not None else None
    out = Path(out_dir or in_dir or ".")
    out.mkdir(parents=True, exist_ok=True)
    storage = [Path(p) for p in storage]
    if in_dir is not None:
        for e in _manifest_files(in_dir):
            p = in_dir / e["file"]
            if e["kind"] == "histogram" and e.get("role") == "reference" and reference is None:
                reference = p
            elif e["kind"] == "histogram" and e.get("role") == "storage":
                storage.append(p)
            elif e["kind"] == "coincidences" and coincidences is None:
                coincidences = p
            elif e["kind"] == "fpi_trace" and trace is None:
                trace = p
                fsr = float(e.get("fsr_ghz", fsr))
    ref_hist = formats.read_histogram_csv(reference) if reference else None
    coinc = formats.read_coincidences_csv(coincidences) if coincidences else None
    fpi = formats.read_trace_csv(trace) if trace else None

    results = []
    targets = storage or [None]
    for spath in targets:
        hist = formats.read_histogram_csv(spath) if spath else None
        tau_s = tc = None
        if hist is not None and "tau_s_ns" in hist.meta:
            tau_s = Measurement(float(hist.meta["tau_s_ns"]), float(hist.meta.get("tau_s_sigma_ns", tau_s_sigma)))
        if t_chain is not None:
            tc = t_chain
        elif hist is not None and "t_chain" in hist.meta:
            tc = Measurement(float(hist.meta["t_chain"]), float(hist.meta.get("t_chain_sigma", 0.0)))
        irf = float((ref_hist or hist).meta.get("irf_fwhm_ps", 93.0)) if (ref_hist or hist) else 93.0
        report, fits = analysis.build_report(
            ref_hist, hist, tau_s, tc, irf_fwhm=irf, coincidences=coinc, fpi_trace=fpi, fsr=fsr,
        )
        if hist is not None and tc is None:
            report.notes.append("no chain transmission given; eta_int not computed")
        stem = f"report_{Path(spath).stem}" if spath else "report"
        (out / f"{stem}.json").write_text(report.to_json() + "\n", encoding="utf-8")
        (out / f"{stem}.txt").write_text(report.to_table() + "\n", encoding="utf-8")
        for name, fit in fits.items():
            formats.write_fit_dump(out / f"{stem}_fit_{name}.csv", fit)
        if figures:
            from . import plotting

            plotting.report_figures(out, stem, fits, coinc)
        results.append((out / f"{stem}.json", report))
    return results
