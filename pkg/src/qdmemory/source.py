"""Parametric model of the QD emitter and its pulsed photon stream."""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Iterator

import numpy as np

from . import spectra
from .errors import ExtrapolationError, ParameterError
from .spectra import Lineshape

# Planck constant in eV/MHz, for the fine-structure splitting
H_EV_PER_MHZ = 4.135667696e-9

SIGNAL, RECAPTURE, BACKGROUND = 0, 1, 2
KIND_NAMES = {SIGNAL: "signal", RECAPTURE: "recapture", BACKGROUND: "background"}
KIND_CODES = {v: k for k, v in KIND_NAMES.items()}

# red shift (MHz) of the exciton line relative to 4 K
REFERENCE_TUNING_CURVE = ((4.0, 0.0), (17.0, 15_000.0), (21.0, 45_000.0))

# 20e3 photons/s at the fiber over 40e6 pulses/s
FIBER_PHOTONS_PER_PULSE = 20e3 / 40e6


@dataclass(frozen=True)
class QdParams:
    tau_qd: float = 1.39  # ns
    hom_fwhm: float = 400.0  # MHz
    inhom_fwhm: float = 5100.0  # MHz, total FWHM of the emission line
    center_at_4k: float = 15_000.0  # MHz from the D1 line (blue of it)
    tuning_curve: tuple = REFERENCE_TUNING_CURVE
    fss: float = 9.0  # ueV
    power_exponent_x: float = 0.8
    power_exponent_xx: float = 1.9
    purity_g2: float = 0.15
    recapture_fraction: float | None = None
    recapture_delay: float | None = None  # ns, defaults to tau_qd
    untimed_background_rate: float = 0.0  # counts/s
    photons_per_pulse: float = FIBER_PHOTONS_PER_PULSE

    def __post_init__(self):
        object.__setattr__(self, "tuning_curve", tuple(tuple(map(float, p)) for p in self.tuning_curve))
        problems = self.problems()
        if problems:
            raise ParameterError("; ".join(problems))

    def problems(self) -> list[str]:
        out = []
        if not self.tau_qd > 0:
            out.append("tau_qd must be > 0")
        if not self.hom_fwhm > 0:
            out.append("hom_fwhm must be > 0")
        if not self.inhom_fwhm > 0:
            out.append("inhom_fwhm must be > 0")
        if not 0 <= self.purity_g2 < 0.5:
            out.append("purity_g2 must lie in [0, 0.5)")
        if self.recapture_fraction is not None and not 0 <= self.recapture_fraction < 1:
            out.append("recapture_fraction must lie in [0, 1)")
        temps = [t for t, _ in self.tuning_curve]
        if len(temps) < 2 or any(b <= a for a, b in zip(temps, temps[1:])):
            out.append("tuning_curve temperatures must be strictly increasing (>= 2 anchors)")
        if self.recapture_delay is not None and not self.recapture_delay > 0:
            out.append("recapture_delay must be > 0")
        if self.untimed_background_rate < 0:
            out.append("untimed_background_rate must be >= 0")
        if not 0 < self.photons_per_pulse <= 1:
            out.append("photons_per_pulse must lie in (0, 1]")
        return out

    @property
    def recapture_probability(self) -> float:
        """Probability that a pulse carries an extra recapture photon at the source.

        With one deterministic signal photon and an independent recapture photon
        of probability q, the area-normalized g2(0) is 2q/(1+q)^2; it is unchanged
        by independent photon loss downstream.
        """
        if self.recapture_fraction is not None:
            return self.recapture_fraction
        return recapture_probability_for(self.purity_g2)

    @property
    def fss_mhz(self) -> float:
        return self.fss * 1e-6 / H_EV_PER_MHZ


def recapture_probability_for(g2: float) -> float:
    if not 0 <= g2 < 0.5:
        raise ParameterError("g2 must lie in [0, 0.5)")
    if g2 == 0:
        return 0.0
    return ((1.0 - g2) - math.sqrt(1.0 - 2.0 * g2)) / g2


@dataclass(frozen=True)
class PhotonWavepacket:
    spectral: Lineshape
    temporal_decay: float  # ns
    mean_photon_flux: float = 1.0  # photons per pulse
    polarization: str = "H"

    def __post_init__(self):
        if not self.temporal_decay > 0:
            raise ParameterError("temporal_decay must be > 0")
        if not self.spectral.is_density:
            raise ParameterError("wavepacket spectrum must be a density")
        if self.polarization not in ("H", "V"):
            raise ParameterError("polarization must be H or V")


def emission_detuning(params: QdParams, temperature: float) -> float:
    """Red shift (MHz) of the emission relative to its 4 K frequency."""
    temps = np.array([t for t, _ in params.tuning_curve])
    shifts = np.array([s for _, s in params.tuning_curve])
    if not temps[0] <= temperature <= temps[-1]:
        raise ExtrapolationError(
            f"temperature {temperature} K outside tuning anchors [{temps[0]}, {temps[-1]}] K"
        )
    return float(np.interp(temperature, temps, shifts))


def emission_frequency(params: QdParams, temperature: float) -> float:
    """Emission center as a detuning (MHz) from the D1 line; red shifts lower it."""
    return params.center_at_4k - emission_detuning(params, temperature)


def build_wavepacket(params: QdParams, temperature: float = 17.0, flux: float | None = None) -> PhotonWavepacket:
    center = emission_frequency(params, temperature)
    if params.hom_fwhm < 1e-3 * params.inhom_fwhm:
        spectral = spectra.gaussian(params.inhom_fwhm, center)
    else:
        g = spectra.gaussian_width_for_total(params.hom_fwhm, params.inhom_fwhm)
        spectral = spectra.convolve(spectra.lorentzian(params.hom_fwhm, center), spectra.gaussian(g))
    return PhotonWavepacket(
        spectral,
        params.tau_qd,
        params.photons_per_pulse if flux is None else flux,
        polarization="H",
    )


def intensity_vs_power(exponent: float, power, reference: tuple[float, float] = (1.0, 1.0)):
    """Power-law emission intensity I0*(P/P0)**m."""
    p0, i0 = reference
    power = np.asarray(power, dtype=float)
    if np.any(power <= 0):
        raise ParameterError("power must be > 0")
    out = i0 * (power / p0) ** exponent
    return out if out.ndim else float(out)


@dataclass
class EmissionEvent:
    pulse_index: int
    timestamp: float  # ns after the pulse trigger
    kind: str


@dataclass
class EmissionStream:
    """Columnar container for the photon events of a pulsed run.

    Rows are sorted by absolute arrival time ``pulse_index*period + timestamp``.
    Only the H-polarized fine-structure component is present.
    """

    pulse_index: np.ndarray
    timestamp: np.ndarray
    kind: np.ndarray
    rep_rate: float  # MHz
    n_pulses: int
    polarization: str = "H"
    meta: dict = field(default_factory=dict)

    @property
    def period(self) -> float:
        return 1e3 / self.rep_rate

    def __len__(self):
        return len(self.timestamp)

    def __iter__(self) -> Iterator[EmissionEvent]:
        for i, t, k in zip(self.pulse_index, self.timestamp, self.kind):
            yield EmissionEvent(int(i), float(t), KIND_NAMES[int(k)])

    def absolute_times(self) -> np.ndarray:
        """Arrival times in ns since the first trigger."""
        return self.pulse_index * self.period + self.timestamp

    def photons_per_pulse(self) -> np.ndarray:
        return np.bincount(self.pulse_index, minlength=self.n_pulses)


def sample_emission_stream(
    params: QdParams,
    n_pulses: int,
    rep_rate: float = 80.0,
    seed: int | np.random.SeedSequence = 0,
    photons_per_pulse: float | None = None,
) -> EmissionStream:
    """Draw the photon events of ``n_pulses`` excitation pulses.

    At the source every pulse yields one signal photon and, with the
    recapture probability, a second photon delayed by an extra exponential
    draw.  Each photon then survives independently so that the mean number
    of timed photons per pulse equals ``photons_per_pulse``.
    """
    if n_pulses < 1:
        raise ParameterError("n_pulses must be >= 1")
    if not rep_rate > 0:
        raise ParameterError("rep_rate must be > 0")
    rng = np.random.default_rng(seed)
    p1 = params.photons_per_pulse if photons_per_pulse is None else photons_per_pulse
    q = params.recapture_probability
    survive = p1 / (1.0 + q)
    if survive > 1:
        raise ParameterError("photons_per_pulse exceeds the source output")
    period = 1e3 / rep_rate
    delay = params.recapture_delay or params.tau_qd

    sig_idx = np.flatnonzero(rng.random(n_pulses) < survive)
    sig_t = rng.exponential(params.tau_qd, sig_idx.size)
    rec_idx = np.flatnonzero(rng.random(n_pulses) < q * survive)
    rec_t = rng.exponential(delay, rec_idx.size) + rng.exponential(params.tau_qd, rec_idx.size)
    n_bg = rng.poisson(params.untimed_background_rate * n_pulses * period * 1e-9)
    bg_idx = rng.integers(0, n_pulses, n_bg)
    bg_t = rng.uniform(0.0, period, n_bg)

    idx = np.concatenate([sig_idx, rec_idx, bg_idx]).astype(np.int64)
    t = np.concatenate([sig_t, rec_t, bg_t])
    kind = np.concatenate(
        [
            np.full(sig_idx.size, SIGNAL, np.int8),
            np.full(rec_idx.size, RECAPTURE, np.int8),
            np.full(n_bg, BACKGROUND, np.int8),
        ]
    )
    order = np.argsort(idx * period + t, kind="stable")
    return EmissionStream(
        idx[order],
        t[order],
        kind[order],
        rep_rate,
        n_pulses,
        meta={"purity_g2": params.purity_g2, "photons_per_pulse": p1, "recapture_probability": q},
    )
