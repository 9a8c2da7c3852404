"""One test per acceptance criterion, each at its stated tolerance and runtime budget.

Every test prints a PASS/FAIL line (collected again in the terminal summary).
Oracles are computed here independently of the library code paths where one exists.
"""
import json
import math
import time
from fractions import Fraction

import numpy as np
import pytest
from scipy import special, stats

from qdmemory import analysis, chain, detection, memory, pipeline, reproduce, source, spectra
from qdmemory.analysis import Measurement
from qdmemory.scenario import child_seed, reference_scenario

SC = reference_scenario()
LN2 = math.log(2.0)


def gauss_density(x, fwhm, center=0.0):
    s = fwhm / math.sqrt(8 * LN2)
    return np.exp(-0.5 * ((x - center) / s) ** 2) / (s * math.sqrt(2 * math.pi))


def trapz(y, x):
    return float(np.sum(0.5 * (y[1:] + y[:-1]) * np.diff(x)))


def test_criterion_01_overlap_factor(accept):
    t = time.perf_counter()
    v = spectra.filtered_fraction(spectra.gaussian(560.0), spectra.lorentzian(500.0)).value
    seconds = time.perf_counter() - t
    # oracle A: fixed-grid trapezoid over +-20 GHz at 0.5 MHz
    x = np.arange(-20_000.0, 20_000.0 + 0.25, 0.5)
    grid = trapz(gauss_density(x, 560.0) / (1 + (x / 250.0) ** 2), x)
    # oracle B: a Gaussian against a unit-peak Lorentzian is pi*gamma times the Voigt peak
    s = 560.0 / math.sqrt(8 * LN2)
    closed = math.pi * 250.0 * float(special.voigt_profile(0.0, s, 250.0))
    ok = abs(v - 0.66) <= 0.02 and abs(v - grid) < 1e-4 and abs(v - closed) < 1e-6 and seconds < 1.0
    accept(1, "overlap factor", ok, f"{v:.5f} (grid {grid:.5f}, closed form {closed:.5f})", "0.66 +- 0.02, < 1 s", seconds)
    assert ok


def test_criterion_02_chain_transmission(accept):
    budget = SC.chain
    product = Fraction(1)
    for name in ("memory unit", "etalon", "spectral filtering"):
        product *= Fraction(str(budget[name].transmission))
    arithmetic = Fraction("0.13") * Fraction("0.5") * Fraction("0.66")
    table_in = {"QD source": 0.4, "uPL optics and spectrometer": 0.1, "polarization filtering": 0.5, "fiber coupling": 0.025}
    table_rates = {"QD source": 16e6, "uPL optics and spectrometer": 1.6e6, "polarization filtering": 0.8e6, "fiber coupling": 20e3}
    rates = dict(chain.predicted_rates(chain.reference_loss_budget()))
    transmissions_ok = all(budget[n].transmission == t for n, t in table_in.items())
    rates_ok = all(math.isclose(rates[n], r, rel_tol=1e-12) for n, r in table_rates.items())
    product_ok = product == arithmetic and product == Fraction("0.042")
    ok = product_ok and rates_ok and transmissions_ok
    accept(
        2, "chain transmission", ok,
        f"product {float(product):.4f} (= {product}), rates {'exact' if rates_ok else 'off'}",
        "0.042 exactly; every table rate exact",
    )
    assert rates_ok and transmissions_ok
    assert product == arithmetic
    # 0.13 * 0.5 * 0.66 = 0.0429; the quoted 0.042 is not this product
    assert product == Fraction("0.042")


def test_criterion_03_acceptance_fraction(accept):
    t = time.perf_counter()
    wp = source.build_wavepacket(SC.qd, SC.run.temperature)
    v = spectra.filtered_fraction(wp.spectral, memory.acceptance_window(SC.memory)).value
    seconds = time.perf_counter() - t
    # oracle: scipy Voigt density on a grid times a unit-peak Gaussian window at -500 MHz
    hom = SC.qd.hom_fwhm
    sg = spectra.gaussian_width_for_total(hom, SC.qd.inhom_fwhm) / math.sqrt(8 * LN2)
    c = wp.spectral.center
    x = np.arange(c - 60_000.0, c + 60_000.0, 1.0)
    dens = special.voigt_profile(x - c, sg, hom / 2)
    win = np.exp(-4 * LN2 * ((x + 500.0) / 560.0) ** 2)
    grid = trapz(dens * win, x)
    ok = 0.08 <= v <= 0.13 and abs(v - grid) < 1e-4 and seconds < 1.0
    accept(3, "spectral acceptance fraction", ok, f"{v:.4f} (grid {grid:.4f})", "[0.08, 0.13], < 1 s", seconds)
    assert ok


def test_criterion_04_efficiency_closed_loop(accept, tmp_path):
    t = time.perf_counter()
    sc = SC.with_run(n_triggers=max(SC.run.n_triggers, 10_000_000))
    pipeline.run_simulate(sc, tmp_path / "sim", taus=[13.8])
    ((_path, report),) = pipeline.run_analyze(tmp_path / "sim", tmp_path / "rep", figures=False)
    seconds = time.perf_counter() - t
    e2e, ein = report.eta_e2e.value, report.eta_int.value
    ok = abs(e2e - 2.6e-4) <= 0.8e-4 and abs(ein - 6e-3) <= 2e-3 and seconds < 120.0
    accept(
        4, "efficiency closed loop", ok,
        f"eta_e2e {100 * e2e:.4f}(+-{100 * report.eta_e2e.sigma:.4f}) %, eta_int {100 * ein:.3f}(+-{100 * report.eta_int.sigma:.3f}) %",
        "0.026 +- 0.008 %, 0.6 +- 0.2 %, < 120 s", seconds,
    )
    assert ok
    saved = json.loads((tmp_path / "rep" / "report_storage_tau13.8ns.json").read_text())
    assert saved["eta_int"]["value"] == pytest.approx(ein, rel=1e-12)


def test_criterion_05_non_monotonic_retrieval(accept):
    m = SC.memory
    a = np.array(m.beat_amplitudes)
    nu = np.array(m.beat_frequencies) * 1e-3  # GHz, so nu * tau(ns) is in cycles

    def eta(tau):
        tau = np.asarray(tau, dtype=float)
        beat = np.abs(np.exp(2j * np.pi * np.multiply.outer(tau, nu)) @ a) ** 2
        return m.intrinsic_efficiency * beat * np.exp(-((tau / 32.0) ** 2))

    grid = np.round(np.arange(0.0, 40.0 + 1e-9, 0.1), 10)
    lib = memory.retrieval_efficiency(m, grid)
    envelope = m.intrinsic_efficiency * np.exp(-((grid / 32.0) ** 2))
    e = {tau: float(memory.retrieval_efficiency(m, tau)) for tau in (13.8, 15.8, 19.8)}
    ok = (
        e[15.8] > e[13.8] and e[15.8] > e[19.8]
        and bool(np.all(lib <= envelope * (1 + 1e-12)))
        and np.allclose(lib, eta(grid), rtol=1e-12, atol=0)
    )
    accept(
        5, "non-monotonic retrieval", ok,
        f"eta(13.8, 15.8, 19.8) = {e[13.8]:.5f}, {e[15.8]:.5f}, {e[19.8]:.5f}; envelope respected on 0.1 ns grid",
        "eta(15.8) above both neighbours, below eta0 exp(-(tau/32)^2)",
    )
    assert ok


def test_criterion_06_time_bandwidth(accept):
    b = analysis.time_bandwidth(Measurement(19.8, 0.3), Measurement(1.39, 0.07))
    oracle = 19.8 / 1.39
    sigma = oracle * math.hypot(0.3 / 19.8, 0.07 / 1.39)
    ok = round(b.value, 1) == 14.2 and b.sigma <= 1.0 and math.isclose(b.value, oracle, rel_tol=1e-14)
    ok = ok and math.isclose(b.sigma, sigma, rel_tol=1e-12)
    accept(6, "time-bandwidth product", ok, f"{b.value:.3f} +- {b.sigma:.3f}", "14.2, sigma <= 1")
    assert ok


@pytest.mark.parametrize("purity", [0.15, 0.06])
def test_criterion_07_g2_closed_loop(accept, purity):
    t = time.perf_counter()
    _stream, coinc = pipeline.simulate_hbt(SC, purity=purity, n_pulses=10_000_000)
    g = analysis.g2_area(coinc).g2_zero
    seconds = time.perf_counter() - t
    ok = abs(g.value - purity) <= 0.02 and seconds < 180.0
    accept(7, f"g2 closed loop (purity {purity:g})", ok, f"{g.value:.4f} +- {g.sigma:.4f}", f"{purity:g} +- 0.02, < 180 s", seconds)
    assert ok


def test_criterion_08_decay_closed_loop(accept):
    t = time.perf_counter()
    got = {}
    for tau in (1.39, 1.47, 2.23):
        h = reproduce.synth_decay(tau, SC.detector, child_seed(SC.run.seed, f"decay:{tau!r}"))
        got[tau] = analysis.fit_decay(h, 93.0)["tau"].value
    seconds = time.perf_counter() - t
    ok = all(abs(g - tau) <= 0.05 * tau for tau, g in got.items()) and seconds < 30.0
    accept(8, "decay-fit closed loop", ok, ", ".join(f"{g:.3f}" for g in got.values()), "1.39, 1.47, 2.23 ns within 5 %, < 30 s", seconds)
    assert ok


def test_criterion_09_fpi_closed_loop(accept):
    trace = pipeline.simulate_fpi(SC)
    peaks = analysis.fpi_linewidth(trace, 12.3)
    ok = abs(peaks.fwhm.value - 5.1) <= 0.3
    accept(9, "FPI calibration closed loop", ok, f"{peaks.fwhm.value:.3f} +- {peaks.fwhm.sigma:.3f} GHz", "5.1 +- 0.3 GHz")
    assert ok


def test_criterion_10_property_suites(accept, tmp_path):
    t = time.perf_counter()
    checks = {}
    # unit area of each density kind, checked on a grid rather than through spectra.area
    for s in (spectra.lorentzian(500.0, 30.0), spectra.gaussian(560.0, -500.0), spectra.voigt(400.0, 4883.0)):
        x = np.linspace(s.center - 4000 * s.fwhm, s.center + 4000 * s.fwhm, 2_000_001)
        checks[f"unit area {s.kind}"] = abs(trapz(spectra.evaluate(s, x), x) - 1.0) < 1e-3
    offsets = np.linspace(0.0, 4000.0, 21)
    vals = [spectra.filtered_fraction(spectra.gaussian(560.0), spectra.lorentzian(500.0, o)).value for o in offsets]
    checks["overlap monotonicity"] = bool(np.all(np.diff(vals) < 0))
    # Poisson sampler: 400 synthesized histograms, chi2 p-values uniform
    edges = detection.histogram_edges(-2.0, 23.0, 100.0)
    prof = detection.TemporalProfile.exponential(1.39, 5e-4)
    lam = detection.expected_counts([prof], SC.detector, 1e6, edges, 30.0)
    pvals = []
    for seed in range(400):
        h = detection.synthesize_histogram(prof, None, SC.detector, SC.sync, 1_000_000, 30.0, seed=seed)
        pvals.append(stats.chi2.sf(np.sum((h.counts - lam) ** 2 / lam), lam.size))
    checks["poisson chi2"] = stats.kstest(pvals, "uniform").pvalue > 1e-3
    small = SC.with_run(n_triggers=10_000_000, hbt_pulses=200_000)
    a = pipeline.run_simulate(small, tmp_path / "a", taus=[13.8])
    b = pipeline.run_simulate(small, tmp_path / "b", taus=[13.8])
    names = sorted(p.name for p in a.iterdir())
    checks["seed determinism"] = names == sorted(p.name for p in b.iterdir()) and all(
        (a / n).read_bytes() == (b / n).read_bytes() for n in names
    )
    rng = np.random.default_rng(3)
    identity = True
    for _ in range(200):
        nr, ni, tc = rng.uniform(1, 1e4), rng.uniform(1e5, 1e9), rng.uniform(1e-3, 1)
        e2e, ein = analysis.efficiencies(nr, ni, tc)
        identity &= math.isclose(ein.value * tc, e2e.value, rel_tol=1e-15)
    checks["eta identity"] = identity
    seconds = time.perf_counter() - t
    failed = [k for k, v in checks.items() if not v]
    ok = not failed and seconds < 300.0
    accept(10, "property suites", ok, "all green" if not failed else "failed: " + ", ".join(failed), "all green, < 300 s", seconds)
    assert ok
