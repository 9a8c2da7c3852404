"""Transmission bookkeeping between source and detector."""
from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np

from . import spectra
from .errors import ParameterError
from .source import PhotonWavepacket
from .spectra import Lineshape


@dataclass(frozen=True)
class Stage:
    name: str
    transmission: float
    assumed: bool = False
    sigma: float = 0.0


@dataclass(frozen=True)
class LossBudget:
    """Ordered transmission stages, source to detector."""

    stages: tuple[Stage, ...]
    input_rate: float = 40e6  # counts/s entering the first stage

    def __post_init__(self):
        object.__setattr__(self, "stages", tuple(self.stages))
        problems = self.problems()
        if problems:
            raise ParameterError("; ".join(problems))

    def problems(self) -> list[str]:
        out = []
        names = [s.name for s in self.stages]
        if len(set(names)) != len(names):
            out.append("stage names must be unique")
        for s in self.stages:
            if not 0 < s.transmission <= 1:
                out.append(f"stage {s.name!r}: transmission must lie in (0, 1]")
            if s.sigma < 0:
                out.append(f"stage {s.name!r}: sigma must be >= 0")
        if not self.input_rate > 0:
            out.append("input_rate must be > 0")
        return out

    def index(self, name: str) -> int:
        for i, s in enumerate(self.stages):
            if s.name == name:
                return i
        raise KeyError(f"unknown stage {name!r}; known: {[s.name for s in self.stages]}")

    def __getitem__(self, name: str) -> Stage:
        return self.stages[self.index(name)]


def reference_loss_budget() -> LossBudget:
    """Source-side and memory-side losses of the reference setup.

    Parenthesized source values (extraction efficiency, polarization
    filtering) were assumed rather than measured and carry ``assumed=True``.
    """
    return LossBudget(
        (
            Stage("QD source", 0.40, assumed=True),
            Stage("uPL optics and spectrometer", 0.1),
            Stage("polarization filtering", 0.5, assumed=True),
            Stage("fiber coupling", 0.025),
            Stage("memory unit", 0.13),
            Stage("etalon", 0.5),
            Stage("spectral filtering", 0.66, sigma=0.02),
        ),
        input_rate=40e6,
    )


def chain_transmission(budget: LossBudget, start: str, stop: str) -> float:
    """Product of stage transmissions from ``start`` to ``stop`` inclusive."""
    i, j = budget.index(start), budget.index(stop)
    if j < i:
        raise ParameterError(f"stage {start!r} does not precede {stop!r}")
    out = 1.0
    for s in budget.stages[i : j + 1]:
        out *= s.transmission
    return out


def chain_transmission_sigma(budget: LossBudget, start: str, stop: str) -> float:
    """First-order uncertainty of :func:`chain_transmission` from stage sigmas."""
    i, j = budget.index(start), budget.index(stop)
    total = chain_transmission(budget, start, stop)
    rel2 = sum((s.sigma / s.transmission) ** 2 for s in budget.stages[i : j + 1])
    return total * float(np.sqrt(rel2))


def predicted_rates(budget: LossBudget) -> list[tuple[str, float]]:
    """Count rate after each stage, starting with the input rate."""
    rows = [("input", budget.input_rate)]
    rate = budget.input_rate
    for s in budget.stages:
        rate *= s.transmission
        rows.append((s.name, rate))
    return rows


@dataclass(frozen=True)
class DispersiveCell:
    """Phenomenological dispersive delay: stretches the apparent decay time."""

    temperature: float = 60.0  # degC
    effective_delay_stretch: float = 2.23 / 1.39

    def __post_init__(self):
        if not self.effective_delay_stretch >= 1:
            raise ParameterError("effective_delay_stretch must be >= 1")

    @classmethod
    def calibrated(cls, observed_decay: float, input_decay: float, temperature: float = 60.0):
        return cls(temperature, observed_decay / input_decay)


# observed decay times 1.39 ns (bare), 1.47 ns (etalon), 2.23 ns (etalon + 60 degC cell)
ETALON_STRETCH = 1.47 / 1.39
CELL_STRETCH = 2.23 / 1.39


def apply_dispersive_cell(wavepacket: PhotonWavepacket, cell: DispersiveCell) -> PhotonWavepacket:
    return replace(wavepacket, temporal_decay=wavepacket.temporal_decay * cell.effective_delay_stretch)


def reference_etalon(center: float = 0.0) -> Lineshape:
    """The 500 MHz etalon as a single unit-peak Lorentzian passband."""
    return spectra.lorentzian(500.0, center)


def apply_etalon(wavepacket: PhotonWavepacket, etalon: Lineshape, n_grid: int = 4001):
    """Filter a wavepacket spectrum through a unit-peak etalon.

    Returns the reshaped wavepacket (tabulated spectrum renormalized to unit
    area) and the passed fraction.  Insertion loss is not included; it
    belongs in the loss budget.
    """
    passed = spectra.filtered_fraction(wavepacket.spectral, etalon)
    s, e = wavepacket.spectral, etalon
    narrow = min(s.fwhm, e.fwhm)
    grids = [
        np.linspace(e.center - 20 * e.fwhm, e.center + 20 * e.fwhm, n_grid),
        np.linspace(s.center - 20 * s.fwhm, s.center + 20 * s.fwhm, n_grid),
        np.linspace(s.center - 20 * narrow, s.center + 20 * narrow, n_grid),
    ]
    grid = np.unique(np.concatenate(grids))
    product = spectra.evaluate(s, grid) * e.transmission(grid)
    if passed.value <= 0 or not np.any(product > 0):
        return replace(wavepacket, mean_photon_flux=0.0), passed.value
    out = replace(
        wavepacket,
        spectral=spectra.tabulated(grid, product),
        mean_photon_flux=wavepacket.mean_photon_flux * passed.value,
    )
    return out, passed.value
