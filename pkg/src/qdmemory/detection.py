"""Detector clicks, arrival-time histograms and HBT coincidences."""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from fractions import Fraction

import numpy as np
from scipy import stats

from .errors import ParameterError
from .source import EmissionStream
from .spectra import FWHM_PER_SIGMA


@dataclass(frozen=True)
class DetectorParams:
    irf_fwhm: float = 93.0  # ps
    dark_rate: float = 0.0  # counts/s
    efficiency: float = 0.8

    def __post_init__(self):
        problems = self.problems()
        if problems:
            raise ParameterError("; ".join(problems))

    def problems(self) -> list[str]:
        out = []
        if not self.irf_fwhm > 0:
            out.append("irf_fwhm must be > 0")
        if self.dark_rate < 0:
            out.append("dark_rate must be >= 0")
        if not 0 < self.efficiency <= 1:
            out.append("efficiency must lie in (0, 1]")
        return out

    @property
    def irf_sigma(self) -> float:
        """IRF standard deviation in ns."""
        return self.irf_fwhm * 1e-3 / FWHM_PER_SIGMA


@dataclass(frozen=True)
class SyncChain:
    laser_rate: float = 80.0  # MHz
    pulse_pick_divisor: int = 2
    trigger_limit: float = 10.0  # MHz

    def __post_init__(self):
        problems = self.problems()
        if problems:
            raise ParameterError("; ".join(problems))

    def problems(self) -> list[str]:
        out = []
        if not self.laser_rate > 0:
            out.append("laser_rate must be > 0")
        if int(self.pulse_pick_divisor) != self.pulse_pick_divisor or self.pulse_pick_divisor < 1:
            out.append("pulse_pick_divisor must be an integer >= 1")
        if not self.trigger_limit > 0:
            out.append("trigger_limit must be > 0")
        return out

    @property
    def excitation_rate(self) -> float:
        return self.laser_rate / self.pulse_pick_divisor

    @property
    def window(self) -> float:
        """Inter-pulse window in ns at the picked rate."""
        return 1e3 / self.excitation_rate


@dataclass(frozen=True)
class TriggerFraction:
    of_laser: Fraction  # detected triggers per laser pulse
    of_picked: Fraction  # detected triggers per excitation pulse


def effective_trigger_fraction(sync: SyncChain) -> TriggerFraction:
    """Share of pulses that reach the time tagger through a rate-limited trigger path.

    The trigger is divided by the smallest power of two that brings the laser
    trigger rate within ``trigger_limit``.  The share is reported relative to
    laser pulses and to picked excitation pulses, capped at 1.
    """
    ratio = sync.laser_rate / sync.trigger_limit
    n = max(0, math.ceil(math.log2(ratio) - 1e-12))
    of_laser = Fraction(1, 2**n)
    of_picked = min(Fraction(1), of_laser * int(sync.pulse_pick_divisor))
    return TriggerFraction(of_laser, of_picked)


def effective_trigger_rate(sync: SyncChain) -> float:
    return float(effective_trigger_fraction(sync).of_laser) * sync.laser_rate


@dataclass(frozen=True)
class TemporalProfile:
    """A normalized arrival-time density scaled by ``fraction``.

    ``fraction`` is the expected number of photons per trigger reaching the
    detector (before detector efficiency).
    """

    kind: str  # "exponential" or "gaussian"
    fraction: float
    onset: float = 0.0  # ns, exponential start
    tau: float = 1.0  # ns, exponential decay
    center: float = 0.0  # ns, gaussian mean
    sigma: float = 1.0  # ns, gaussian width

    def __post_init__(self):
        if self.kind not in ("exponential", "gaussian"):
            raise ParameterError(f"unknown profile kind {self.kind!r}")
        if self.fraction < 0:
            raise ParameterError("fraction must be >= 0")
        if self.kind == "exponential" and not self.tau > 0:
            raise ParameterError("tau must be > 0")
        if self.kind == "gaussian" and not self.sigma > 0:
            raise ParameterError("sigma must be > 0")

    @classmethod
    def exponential(cls, tau: float, fraction: float, onset: float = 0.0):
        return cls("exponential", fraction, onset=onset, tau=tau)

    @classmethod
    def gaussian(cls, center: float, sigma: float, fraction: float):
        return cls("gaussian", fraction, center=center, sigma=sigma)

    def cdf(self, t, irf_sigma: float = 0.0):
        """Cumulative distribution of the IRF-convolved profile."""
        t = np.asarray(t, dtype=float)
        if self.kind == "gaussian":
            return stats.norm.cdf(t, self.center, math.hypot(self.sigma, irf_sigma))
        if irf_sigma <= 0:
            return stats.expon.cdf(t, loc=self.onset, scale=self.tau)
        return stats.exponnorm.cdf(t, self.tau / irf_sigma, loc=self.onset, scale=irf_sigma)

    def bin_mass(self, edges, irf_sigma: float = 0.0):
        return np.diff(self.cdf(edges, irf_sigma))


@dataclass
class ArrivalHistogram:
    bin_width: float  # ps
    counts: np.ndarray
    t0: float = 0.0  # ns, left edge of the first bin
    n_triggers: int = 0
    background_per_bin: float = 0.0
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        self.counts = np.asarray(self.counts)
        if not self.bin_width > 0:
            raise ParameterError("bin_width must be > 0")
        if self.counts.ndim != 1 or len(self.counts) == 0:
            raise ParameterError("counts must be a non-empty 1-D array")
        if np.any(self.counts < 0):
            raise ParameterError("counts must be >= 0")

    @property
    def bin_ns(self) -> float:
        return self.bin_width * 1e-3

    @property
    def edges(self) -> np.ndarray:
        return self.t0 + self.bin_ns * np.arange(len(self.counts) + 1)

    @property
    def centers(self) -> np.ndarray:
        return self.t0 + self.bin_ns * (np.arange(len(self.counts)) + 0.5)

    @property
    def total(self) -> float:
        return float(self.counts.sum())


def histogram_edges(t_start: float, t_stop: float, bin_width: float) -> np.ndarray:
    n = int(round((t_stop - t_start) / (bin_width * 1e-3)))
    if n < 1:
        raise ParameterError("histogram span is shorter than one bin")
    return t_start + bin_width * 1e-3 * np.arange(n + 1)


def expected_counts(profiles, det: DetectorParams, n_triggers: float, edges, background_per_bin: float = 0.0):
    """Mean counts per bin: IRF-convolved profiles plus flat background and dark counts."""
    edges = np.asarray(edges, dtype=float)
    lam = np.zeros(len(edges) - 1)
    for p in profiles:
        if p is None or p.fraction == 0:
            continue
        # cdf differences can dip a hair below zero far from the profile
        lam += n_triggers * det.efficiency * p.fraction * np.clip(p.bin_mass(edges, det.irf_sigma), 0.0, None)
    dark = det.dark_rate * np.diff(edges) * 1e-9 * n_triggers
    return lam + background_per_bin + dark


def synthesize_histogram(
    leakage: TemporalProfile | None,
    retrieval: TemporalProfile | None,
    det: DetectorParams,
    sync: SyncChain,
    n_triggers: int,
    background_per_bin: float = 0.0,
    seed: int | np.random.SeedSequence = 0,
    bin_width: float = 100.0,
    t_start: float = -2.0,
    t_stop: float = 23.0,
) -> ArrivalHistogram:
    """Poisson-sampled arrival-time histogram of ``n_triggers`` detected triggers."""
    for p in (leakage, retrieval):
        if p is not None and p.fraction > 1:
            raise ParameterError("profile fractions must lie in [0, 1]")
    edges = histogram_edges(t_start, t_stop, bin_width)
    lam = expected_counts((leakage, retrieval), det, n_triggers, edges, background_per_bin)
    rng = np.random.default_rng(seed)
    counts = rng.poisson(lam).astype(np.int64)
    trig = effective_trigger_fraction(sync)
    trigger_rate_hz = float(trig.of_laser) * sync.laser_rate * 1e6
    return ArrivalHistogram(
        bin_width,
        counts,
        t0=float(edges[0]),
        n_triggers=int(n_triggers),
        background_per_bin=background_per_bin,
        meta={"integration_time_s": n_triggers / trigger_rate_hz, "expected": lam},
    )


@dataclass
class CoincidenceHistogram:
    edges: np.ndarray  # ns delay, B minus A
    counts: np.ndarray
    rep_period: float  # ns

    @property
    def centers(self) -> np.ndarray:
        return 0.5 * (self.edges[1:] + self.edges[:-1])

    @property
    def bin_ns(self) -> float:
        return float(self.edges[1] - self.edges[0])


def simulate_hbt(
    stream: EmissionStream,
    det: DetectorParams,
    window: float = 40.0,
    seed: int | np.random.SeedSequence = 0,
    split: float = 0.5,
    bin_width: float = 50.0,
) -> CoincidenceHistogram:
    """Start-multistop coincidences of a beamsplitter-and-two-detector setup.

    Every photon goes to detector A with probability ``split``, survives
    with the detector efficiency and picks up Gaussian timing jitter whose
    two-channel combination equals the IRF.  All B-minus-A delays within
    ``+-window`` ns are histogrammed.
    """
    if window < 3 * stream.period:
        raise ParameterError("window must cover at least +-3 repetition periods")
    rng = np.random.default_rng(seed)
    t = stream.absolute_times()
    keep = rng.random(t.size) < det.efficiency
    t = t[keep]
    jitter = det.irf_sigma / math.sqrt(2.0)
    t = t + rng.normal(0.0, jitter, t.size)
    to_a = rng.random(t.size) < split
    duration = stream.n_pulses * stream.period
    streams = []
    for sel in (to_a, ~to_a):
        n_dark = rng.poisson(det.dark_rate * duration * 1e-9)
        streams.append(np.sort(np.concatenate([t[sel], rng.uniform(0.0, duration, n_dark)])))
    ta, tb = streams

    n_bins = int(round(2 * window / (bin_width * 1e-3)))
    edges = np.linspace(-window, window, n_bins + 1)
    counts = np.zeros(n_bins, dtype=np.int64)
    lo = np.searchsorted(tb, ta - window, side="left")
    hi = np.searchsorted(tb, ta + window, side="right")
    span = hi - lo
    for j in range(int(span.max(initial=0))):
        sel = span > j
        d = tb[lo[sel] + j] - ta[sel]
        counts += np.histogram(d, edges)[0]
    return CoincidenceHistogram(edges, counts, stream.period)


def synthesize_fpi_trace(
    spectrum,
    fsr: float = 12.3,
    instrument_fwhm: float = 0.15,
    n_orders: float = 2.4,
    samples_per_fsr: int = 2000,
    noise: float = 0.0,
    seed: int | np.random.SeedSequence = 0,
    offset: float = 0.3,
) -> np.ndarray:
    """Scanning Fabry-Perot trace of ``spectrum`` as (scan_sample, intensity) rows.

    ``fsr`` and ``instrument_fwhm`` are in GHz; the spectrum is in MHz.  The
    spectrum is folded into one free spectral range and circularly convolved
    with the Airy response.  ``spectrum=None`` gives a delta-like line, i.e.
    the bare instrument response.  ``offset`` places the line within the first
    order (fraction of the FSR).  Gaussian noise has standard deviation
    ``noise`` times the peak height.
    """
    from . import spectra

    if not fsr > 0 or not 0 < instrument_fwhm < fsr:
        raise ParameterError("need 0 < instrument_fwhm < fsr")
    if n_orders < 1 or samples_per_fsr < 16:
        raise ParameterError("trace must span at least one order with >= 16 samples per order")
    fsr_mhz = fsr * 1e3
    n = 2**14
    g = np.arange(n) * (fsr_mhz / n)
    instr = spectra.airy(instrument_fwhm * 1e3, fsr_mhz, 0.0).transmission(g)
    if spectrum is None:
        response = instr
    else:
        c = spectrum.center
        k_max = int(math.ceil(50 * spectrum.fwhm / fsr_mhz)) + 1
        folded = np.zeros(n)
        for k in range(-k_max, k_max + 1):
            folded += spectra.evaluate(spectrum, c + g + k * fsr_mhz)
        folded *= fsr_mhz / n
        response = np.real(np.fft.ifft(np.fft.fft(folded) * np.fft.fft(instr)))
    x = np.arange(int(round(n_orders * samples_per_fsr)), dtype=float)
    phase = (x / samples_per_fsr - offset) % 1.0 * n
    y = np.interp(phase, np.arange(n + 1), np.append(response, response[0]))
    y = y / y.max()
    if noise > 0:
        y = y + np.random.default_rng(seed).normal(0.0, noise, y.size)
    return np.column_stack([x, y])
